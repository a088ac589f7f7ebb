"""Batch command-line front end.

Exit codes: 0 success, 2 bad input (scenario, flags, paths), 3 computation failure.
"""

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from histml.causal import CausalError, CounterfactualQuery, counterfactual, scenario_graph, scenario_graphs, sensitivity_over_dags
from histml.conflict import (
    BattleSpec,
    ConflictError,
    ConflictModel,
    battle_simulate,
    commander_compare,
    scenario_blend,
    support_score,
)
from histml.inference import ForestConfig
from histml.pipeline import ABLATION_ROWS, ablation, allocate, learn_weights
from histml.scenario import ScenarioError, load_scenario
from histml.uncertainty import MCConfig

DEFAULT_SEED = 42
SEED_ENV = "HISTML_SEED"
TIMING_BUDGET_S = 25.0
EXIT_INPUT = 2
EXIT_COMPUTE = 3


class InputError(Exception):
    """Bad user input that is not a scenario validation failure."""


@dataclass
class RunReport:
    command: str
    scenario: str
    config: dict
    tables: dict = field(default_factory=dict)  # name -> list of row dicts
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    duration_s: float = 0.0

    def to_dict(self):
        return {
            "command": self.command,
            "scenario": self.scenario,
            "config": self.config,
            "summary": self.summary,
            "warnings": self.warnings,
            "duration_s": self.duration_s,
        }


def _raw(x):
    return "" if x is None else repr(float(x))


def _one(x):
    return "" if x is None else f"{x:.1f}"


def _fmt(x, digits=4):
    return "" if x is None else f"{x:.{digits}f}"


def to_csv(rows):
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def to_table(rows):
    if not rows:
        return "(no rows)\n"
    cols = list(rows[0])
    cells = [[str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[j]) for row in cells)) for j, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def emit(report, fmt, out_dir=None, stream=None):
    stream = stream or sys.stdout
    if out_dir is not None:
        out = _prepare_dir(out_dir)
        for name, rows in report.tables.items():
            _write(out / f"{name}.csv", to_csv(rows))
        _write(out / "summary.json", json.dumps(report.to_dict(), indent=2) + "\n")
    render = to_csv if fmt == "csv" else to_table
    parts = []
    for name, rows in report.tables.items():
        text = render(rows)
        parts.append(text if len(report.tables) == 1 else f"# {name}\n{text}")
    stream.write("\n".join(parts))
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)


def _prepare_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"{out}: cannot create output directory ({exc.strerror})") from None
    if not os.access(out, os.W_OK):
        raise InputError(f"{out}: output directory is not writable")
    return out


def _write(path, text):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot write ({exc.strerror})") from None


def _mc(args):
    return MCConfig(args.sims, args.seed, args.confidence)


def _config_echo(args):
    skip = {"func", "scenario", "format", "out", "timing"}
    return {k: v for k, v in vars(args).items() if k not in skip}


# --- allocate -----------------------------------------------------------------------


def allocation_rows(run, scenario):
    rows = []
    for r in run.report.rows:
        s = run.summaries[r.name] if run.summaries else None
        rows.append({
            "entity": r.name,
            "power_index": _fmt(run.powers[r.name], 6),
            "projected_share": _one(r.projected),
            "projected_share_raw": _raw(r.projected),
            "historical_share": _one(r.historical),
            "discrepancy_pct": _one(r.discrepancy),
            "discrepancy_pct_raw": _raw(r.discrepancy),
            "mean": _raw(s.mean) if s else "",
            "std": _raw(s.std) if s else "",
            "ci_low": _raw(s.lower) if s else "",
            "ci_high": _raw(s.upper) if s else "",
        })
    return rows


def allocation_summary(run):
    top = run.report.max_positive()
    return {
        "mae": round(run.report.mae, 6),
        "max_discrepancy_entity": top.name,
        "max_discrepancy_pct": round(top.discrepancy, 6),
        "tension": round(run.tension, 6),
        "conflict_probability": round(run.conflict_probability, 6),
        "weights": {k: round(v, 12) for k, v in run.weights.items()},
    }


def shares_long_rows(run):
    rows = []
    for r in run.report.rows:
        s = run.summaries[r.name] if run.summaries else None
        for kind, value in (("point", r.projected), ("historical", r.historical)):
            rows.append({"entity": r.name, "series": kind, "value": _raw(value),
                         "ci_low": _raw(s.lower) if s and kind == "point" else "",
                         "ci_high": _raw(s.upper) if s and kind == "point" else ""})
    return rows


def cmd_allocate(args, scenario):
    run = allocate(scenario, _mc(args), workers=args.workers)
    report = RunReport("allocate", scenario.name, _config_echo(args), warnings=list(run.warnings))
    report.tables["allocate"] = allocation_rows(run, scenario)
    summary = allocation_summary(run)
    report.tables["summary"] = [{"metric": k, "value": v} for k, v in summary.items() if k != "weights"]
    report.summary = summary
    return report


# --- weights ------------------------------------------------------------------------


def cmd_weights(args, scenario):
    importances, calibrated = learn_weights(scenario, ForestConfig(tree_count=args.trees, seed=args.seed))
    shipped = scenario.weight_config or {}
    rows = [
        {"feature": f, "importance": _raw(importances[f]), "calibrated_weight": _raw(calibrated[f]),
         "scenario_weight": _raw(shipped.get(f)) if shipped else ""}
        for f in scenario.feature_names
    ]
    report = RunReport("weights", scenario.name, _config_echo(args))
    report.tables["weights"] = rows
    return report


# --- conflict commands ----------------------------------------------------------------


def _model(scenario):
    return ConflictModel.from_scenario(scenario)


def _battles(args, model):
    if args.attacker or args.defender:
        if not (args.attacker and args.defender):
            raise InputError("--attacker and --defender go together")
        ac = args.attacker_commander or _default_commander(model, args.attacker, "attacker")
        dc = args.defender_commander or _default_commander(model, args.defender, "defender")
        battles = [BattleSpec(args.attacker, args.defender, ac, dc, model.gamma, f"{args.attacker} vs {args.defender}")]
    elif args.battle:
        battles = [model.battle(b) for b in args.battle]
    else:
        battles = list(model.battles)
    if not battles:
        raise InputError("no battles: pass --battle or --attacker/--defender")
    gamma = args.gamma
    if gamma is not None:
        battles = [BattleSpec(b.attacker, b.defender, b.attacker_commander, b.defender_commander, gamma, b.name)
                   for b in battles]
    return battles


def _default_commander(model, faction, side):
    for b in model.battles:
        if b.attacker == faction:
            return b.attacker_commander
        if b.defender == faction:
            return b.defender_commander
    raise InputError(f"no commander known for {faction}; pass --{side}-commander")


def battle_rows(model, battles, config, workers):
    rows = []
    for b in battles:
        s = battle_simulate(b, model, config, workers)
        point = model.point_win_probability(b)
        rows.append({
            "battle": b.name, "attacker": b.attacker, "defender": b.defender,
            "attacker_commander": b.attacker_commander, "defender_commander": b.defender_commander,
            "gamma": _raw(b.gamma),
            "power_attacker": _fmt(model.point_power(b.attacker)),
            "power_defender": _fmt(model.point_power(b.defender)),
            "win_probability": _one(100 * s.mean),
            "win_probability_raw": _raw(s.mean),
            "point_probability_raw": _raw(point),
            "mean": _raw(s.mean), "std": _raw(s.std), "ci_low": _raw(s.lower), "ci_high": _raw(s.upper),
        })
    return rows


def cmd_battle(args, scenario):
    model = _model(scenario)
    report = RunReport("battle", scenario.name, _config_echo(args))
    report.tables["battles"] = battle_rows(model, _battles(args, model), _mc(args), args.workers)
    return report


def cmd_blend(args, scenario):
    model = _model(scenario)
    battles = _battles(args, model)
    if args.resource is not None:
        grid = [(args.resource, 1.0 - args.resource)]
    else:
        steps = args.steps
        grid = [(1.0 - k / steps, k / steps) for k in range(steps + 1)]
    rows = []
    for b in battles:
        for rho, kappa in grid:
            p = scenario_blend(rho, kappa, model, b, _mc(args), args.workers)
            rows.append({"battle": b.name, "resource_weight": f"{rho:.4f}", "commander_weight": f"{kappa:.4f}",
                         "win_probability": _one(100 * p), "win_probability_raw": _raw(p)})
    report = RunReport("blend", scenario.name, _config_echo(args))
    report.tables["blend"] = rows
    return report


def commander_rows(model):
    return [
        {"commander": name, "effectiveness": f"{model.effectiveness(name):.2f}",
         "effectiveness_raw": _raw(model.effectiveness(name)),
         "support": f"{support_score(p, model.support_weights):.2f}"}
        for name, p in model.commanders.items()
    ]


def cmd_commanders(args, scenario):
    model = _model(scenario)
    report = RunReport("commanders", scenario.name, _config_echo(args))
    report.tables["commanders"] = commander_rows(model)
    if args.compare:
        a, b = (model.commander(n) for n in args.compare)
        c = commander_compare(a, b, model.trait_weights, model.support_weights)
        report.tables["comparison"] = [{
            "from": c.a, "to": c.b,
            "effectiveness_delta_pct": _one(c.effectiveness_delta_pct),
            "effectiveness_delta_pct_raw": _raw(c.effectiveness_delta_pct),
            "support_from": f"{c.support_a:.2f}", "support_to": f"{c.support_b:.2f}",
            "support_delta_pct": _one(c.support_delta_pct),
        }]
    return report


# --- counterfactual -----------------------------------------------------------------


def observed_values(scenario, graph, entity):
    """Entity means for feature nodes; other nodes observed at their structural prediction."""
    feats = {f: uv.mean for f, uv in scenario.entity(entity).features.items()}
    observed = {}
    for v in graph.order:
        if v in feats:
            observed[v] = feats[v]
        else:
            eq = graph.equations[v]
            missing = [p for p in eq.coefficients if p not in observed]
            if missing:
                raise CausalError(f"cannot observe {v}: parents {missing} unobserved")
            observed[v] = eq.linear_part(observed)
    return observed


def _parse_do(items):
    out = {}
    for item in items:
        node, sep, value = item.partition("=")
        if not sep or not node:
            raise InputError(f"--do expects node=value, got {item!r}")
        try:
            out[node] = float(value)
        except ValueError:
            raise InputError(f"--do {node}: {value!r} is not a number") from None
    return out


def counterfactual_rows(scenario, entity, do, label=None, all_graphs=False):
    graphs = scenario_graphs(scenario) if all_graphs else [scenario_graph(scenario, label)]
    rows = []
    for g in graphs:
        observed = observed_values(scenario, g, entity)
        answer = counterfactual(g, CounterfactualQuery(observed, do))
        for v in g.order:
            rows.append({"graph": g.label, "entity": entity, "node": v,
                         "factual": _raw(observed[v]), "counterfactual": _raw(answer[v]),
                         "change": _raw(answer[v] - observed[v])})
    return rows


def cmd_counterfactual(args, scenario):
    do = _parse_do(args.do)
    if not do:
        raise InputError("give at least one --do node=value")
    entity = args.entity or scenario.entity_names[0]
    if entity not in scenario.entity_names:
        raise InputError(f"unknown entity {entity!r}")
    report = RunReport("counterfactual", scenario.name, _config_echo(args))
    rows = counterfactual_rows(scenario, entity, do, args.graph, args.all_graphs)
    report.tables["counterfactual"] = rows
    if args.all_graphs:
        graphs = scenario_graphs(scenario)
        obs = observed_values(scenario, graphs[0], entity)
        try:
            res = sensitivity_over_dags(graphs, CounterfactualQuery(obs, do))
            report.summary["spread"] = {v: list(s) for v, s in res.spread.items()}
        except CausalError as exc:
            report.warnings.append(f"sensitivity skipped: {exc}")
    return report


# --- ablate / bundle --------------------------------------------------------------------


def ablation_rows(rows):
    return [
        {"configuration": r.label, "key": r.key, "mae": _one(r.mae), "mae_raw": _raw(r.mae),
         "max_entity": r.top_entity, "max_discrepancy_pct": _one(r.top_discrepancy),
         "max_discrepancy_pct_raw": _raw(r.top_discrepancy),
         "ci_low": _raw(r.ci_low), "ci_high": _raw(r.ci_high), "note": r.note}
        for r in rows
    ]


def cmd_ablate(args, scenario):
    selected = args.rows.split(",") if args.rows is not None else None
    if selected is not None:
        selected = [s.strip() for s in selected if s.strip()]
        if not selected:
            raise InputError("select at least one ablation configuration")
        unknown = [s for s in selected if s not in dict(ABLATION_ROWS)]
        if unknown:
            raise InputError(f"unknown ablation row(s) {unknown}; expected {[k for k, _ in ABLATION_ROWS]}")
    report = RunReport("ablate", scenario.name, _config_echo(args))
    report.tables["ablation"] = ablation_rows(ablation(scenario, selected, _mc(args), args.workers))
    return report


def default_counterfactual(scenario):
    """The scenario's documented example query, if any: ``causal.example``."""
    ex = (scenario.causal or {}).get("example")
    if not ex:
        return None
    return ex["entity"], {k: float(v) for k, v in ex["do"].items()}


def cmd_bundle(args, scenario):
    if args.out is None:
        raise InputError("bundle needs --out DIR")
    config = _mc(args)
    report = RunReport("bundle", scenario.name, _config_echo(args))
    if scenario.historical_shares is not None:
        run = allocate(scenario, config, workers=args.workers)
        report.warnings += run.warnings
        report.tables["allocate"] = allocation_rows(run, scenario)
        report.tables["shares_long"] = shares_long_rows(run)
        report.tables["ablation"] = ablation_rows(ablation(scenario, None, config, args.workers))
        report.summary["allocate"] = allocation_summary(run)
    else:
        report.warnings.append("no historical shares; allocate and ablation skipped")
    ex = default_counterfactual(scenario)
    if ex is not None:
        entity, do = ex
        report.tables["counterfactual"] = counterfactual_rows(scenario, entity, do, all_graphs=True)
        report.summary["counterfactual"] = {"entity": entity, "do": do}
    if scenario.conflict:
        model = _model(scenario)
        report.tables["battles"] = battle_rows(model, list(model.battles), config, args.workers)
        report.tables["commanders"] = commander_rows(model)
        report.summary["battles"] = {r["battle"]: float(r["win_probability_raw"]) for r in report.tables["battles"]}
    report.summary["files"] = sorted(f"{n}.csv" for n in report.tables) + ["summary.json"]
    return report


# --- entry point ------------------------------------------------------------------------


def _env_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _confidence(text):
    value = float(text)
    if not 0 < value < 100:
        raise argparse.ArgumentTypeError("must be in (0, 100)")
    return value


def _unit(text):
    value = float(text)
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError("must be in [0, 1]")
    return value


def build_parser(default_seed=DEFAULT_SEED):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON file or shipped name (colonial_1890, punic_218bce)")
    common.add_argument("--sims", type=_positive_int, default=1000, help="Monte Carlo replicates (default 1000)")
    common.add_argument("--seed", type=int, default=default_seed, help=f"RNG seed (default {default_seed}; env {SEED_ENV})")
    common.add_argument("--confidence", type=_confidence, default=95.0, help="interval level in percent (default 95)")
    common.add_argument("--gamma", type=float, default=None, help="commander coefficient override for battles")
    common.add_argument("--out", default=None, help="also write CSV files and summary.json to this directory")
    common.add_argument("--format", choices=("csv", "table"), default="csv")
    common.add_argument("--workers", type=_positive_int, default=1, help="threads for Monte Carlo replicates")
    common.add_argument("--timing", action="store_true", help="report wall-clock time against the runtime budget")

    parser = argparse.ArgumentParser(prog="histml", description="Resource allocation and conflict analysis for historical scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", parents=[common], help="shares, discrepancies, tension and conflict probability")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("weights", parents=[common], help="forest importances and calibrated feature weights")
    p.add_argument("--trees", type=_positive_int, default=100)
    p.set_defaults(func=cmd_weights)

    def battle_flags(p):
        p.add_argument("--battle", action="append", help="named battle from the scenario (repeatable)")
        p.add_argument("--attacker")
        p.add_argument("--defender")
        p.add_argument("--attacker-commander")
        p.add_argument("--defender-commander")

    p = sub.add_parser("battle", parents=[common], help="Monte Carlo battle win probabilities")
    battle_flags(p)
    p.set_defaults(func=cmd_battle)

    p = sub.add_parser("blend", parents=[common], help="win probability when blending resources and leadership")
    battle_flags(p)
    p.add_argument("--resource", type=_unit, default=None, help="resource weight rho (commander weight is 1 - rho)")
    p.add_argument("--steps", type=_positive_int, default=4, help="grid steps when --resource is not given")
    p.set_defaults(func=cmd_blend)

    p = sub.add_parser("commanders", parents=[common], help="commander effectiveness and support scores")
    p.add_argument("--compare", nargs=2, metavar=("FROM", "TO"))
    p.set_defaults(func=cmd_commanders)

    p = sub.add_parser("counterfactual", parents=[common], help="abduction-intervention-prediction on the causal graph")
    p.add_argument("--entity")
    p.add_argument("--do", action="append", default=[], metavar="NODE=VALUE")
    p.add_argument("--graph", help="causal graph label (default: scenario default)")
    p.add_argument("--all-graphs", action="store_true", help="answer under every candidate graph")
    p.set_defaults(func=cmd_counterfactual)

    p = sub.add_parser("ablate", parents=[common], help="component ablation table")
    p.add_argument("--rows", default=None, help=f"comma-separated subset of {','.join(k for k, _ in ABLATION_ROWS)}")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bundle", parents=[common], help="write every report for a scenario to --out")
    p.set_defaults(func=cmd_bundle)
    return parser


def main(argv=None):
    try:
        seed = _env_seed()
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    args = build_parser(seed).parse_args(argv)
    start = time.perf_counter()
    try:
        scenario = load_scenario(args.scenario)
        report = args.func(args, scenario)
        report.duration_s = round(time.perf_counter() - start, 3)
        emit(report, args.format, args.out)
    except (ScenarioError, ConflictError, CausalError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        print(f"error: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    if args.timing:
        elapsed = time.perf_counter() - start
        status = "within" if elapsed <= TIMING_BUDGET_S else "over"
        print(f"timing: {args.command} took {elapsed:.2f}s ({status} {TIMING_BUDGET_S:.0f}s budget)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
