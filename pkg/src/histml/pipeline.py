"""End-to-end allocation runs and component ablations on a scenario."""

from dataclasses import dataclass, field

import numpy as np

from histml.allocation import (
    CoalitionGame,
    ConflictParams,
    TensionParams,
    build_power_game,
    conflict_probability,
    discrepancy_report,
    power_indices,
    shapley_exact,
    tension_factor,
)
from histml.causal import CausalError, scenario_graph
from histml.inference import (
    AttentionWeights,
    ForestConfig,
    attention_forward,
    bayes_posterior,
    calibrate_weights,
    forest_importance,
)
from histml.scenario import ScenarioError, sample_matrix
from histml.transforms import transform_matrix
from histml.uncertainty import MCConfig, run_replicates, summarize_replicates

ABLATION_ROWS = (
    ("full", "Full model"),
    ("no-attention", "- Attention"),
    ("no-shapley", "- Shapley (use regression)"),
    ("no-monte-carlo", "- Monte Carlo UQ"),
    ("no-causal", "- Causal DAG"),
    ("equal-weights", "Baseline (equal weights)"),
)


def require_shares(scenario):
    if scenario.historical_shares is None:
        raise ScenarioError("historical_shares", "scenario has no historical shares")


def learn_weights(scenario, forest_config=None):
    """Forest importances on transformed means, then simplex calibration.

    Returns ``(importances, calibrated weights)``.
    """
    require_shares(scenario)
    F = transform_matrix(scenario.means(), scenario.feature_names, scenario.transform_config)
    y = np.array([scenario.historical_shares[e] for e in scenario.entity_names])
    importances = forest_importance(F, y, forest_config or ForestConfig(), feature_names=scenario.feature_names)
    return importances, calibrate_weights(importances, scenario)


def resolve_weights(scenario, forest_config=None):
    if scenario.weight_config is not None:
        return dict(scenario.weight_config)
    return learn_weights(scenario, forest_config)[1]


def point_shares(scenario, weights):
    return shapley_exact(build_power_game(scenario, weights)).shares


def causal_adjuster(scenario, graph):
    """Push each draw's parent deviations into child features through the structural equations.

    Child draw = own Gaussian draw + (linear part at drawn parents - linear part at parent means).
    Only nodes that are scenario features (and whose parents are) are touched.
    """
    names = scenario.feature_names
    col = {f: j for j, f in enumerate(names)}
    mu = scenario.means()
    steps = [
        (v, graph.equations[v])
        for v in graph.order
        if v in col and graph.equations[v].coefficients and all(p in col for p in graph.equations[v].coefficients)
    ]

    def adjust(X):
        X = X.copy()
        for i in range(X.shape[0]):
            drawn = {f: X[i, j] for f, j in col.items()}
            base = {f: mu[i, j] for f, j in col.items()}
            for v, eq in steps:
                drawn[v] = drawn[v] + eq.linear_part(drawn) - eq.linear_part(base)
                X[i, col[v]] = drawn[v]
        lo, hi = scenario.bound_arrays()
        return np.clip(X, lo, hi)

    return adjust


def share_replicates(scenario, weights, config, graph=None, workers=1):
    """Monte Carlo shares: sample features, transform, weight, exact Shapley, normalise."""
    adjust = causal_adjuster(scenario, graph) if graph is not None else None
    players = scenario.entity_names
    w = scenario.weight_vector(weights)

    def draw(rng):
        X = sample_matrix(scenario, rng)
        if adjust is not None:
            X = adjust(X)
        F = transform_matrix(X, scenario.feature_names, scenario.transform_config)
        result = shapley_exact(CoalitionGame.additive(players, F @ w))
        return result.shares

    names, data = run_replicates(draw, config, workers)
    return summarize_replicates(names, data, config)


def attention_context(scenario):
    """Head-averaged attention between entities over standardised transformed features."""
    F = transform_matrix(scenario.means(), scenario.feature_names, scenario.transform_config)
    sd = F.std(axis=0)
    Z = (F - F.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    d = Z.shape[1]
    heads = int(scenario.allocation.get("attention_heads", 2))
    seed = int(scenario.allocation.get("attention_seed", 42))
    _, attn = attention_forward(Z, AttentionWeights.orthogonal(d, d, heads, seed))
    return attn.mean(axis=0)


def regression_shares(scenario):
    """Per-entity linear regression of shares on transformed features (no zero-sum coupling).

    Conjugate posterior mean with prior N(0, prior_sigma**2 I).
    """
    require_shares(scenario)
    F = transform_matrix(scenario.means(), scenario.feature_names, scenario.transform_config)
    y = np.array([scenario.historical_shares[e] for e in scenario.entity_names])
    sigma = float(scenario.allocation.get("regression_prior_sigma", 1.0))
    noise = float(scenario.allocation.get("regression_noise_var", 1.0))
    d = F.shape[1]
    post = bayes_posterior(F, y, np.zeros(d), sigma**2 * np.eye(d), noise)
    return dict(zip(scenario.entity_names, (F @ post.mean).tolist()))


@dataclass
class AllocationRun:
    weights: dict
    shares: dict
    powers: dict
    report: object
    tension: float
    conflict_probability: float
    summaries: dict | None = None
    attention: np.ndarray | None = None
    warnings: list = field(default_factory=list)


def allocate(scenario, config=None, *, weights=None, monte_carlo=True, causal=True, attention=True,
             shapley=True, workers=1):
    """Weights -> game -> Shapley -> shares -> discrepancy -> tension -> conflict, with MC intervals."""
    require_shares(scenario)
    config = config or MCConfig()
    weights = dict(weights) if weights is not None else resolve_weights(scenario)
    warnings = []
    if shapley:
        shares = point_shares(scenario, weights)
    else:
        shares = regression_shares(scenario)
    powers = dict(zip(scenario.entity_names, power_indices(scenario, weights).tolist()))

    summaries = None
    intervals = None
    if monte_carlo and shapley:
        graph = None
        if causal and scenario.causal:
            try:
                graph = scenario_graph(scenario)
            except CausalError as exc:
                warnings.append(f"causal adjustment skipped: {exc}")
        summaries = share_replicates(scenario, weights, config, graph, workers)
        intervals = {e: (s.lower, s.upper) for e, s in summaries.items()}

    report = discrepancy_report(shares, scenario.historical_shares, intervals)
    alloc = scenario.allocation
    tension = 0.0
    p_conflict = 0.0
    if "tension_kappa" in alloc:
        tension = tension_factor(report, TensionParams(float(alloc["tension_kappa"])))
        p_conflict = conflict_probability(tension, ConflictParams(float(alloc.get("conflict_tau", 5.0))))
    else:
        warnings.append("no tension_kappa in scenario; tension not computed")
    attn = attention_context(scenario) if attention else None
    return AllocationRun(weights, shares, powers, report, tension, p_conflict, summaries, attn, warnings)


@dataclass(frozen=True)
class AblationRow:
    key: str
    label: str
    mae: float
    top_entity: str
    top_discrepancy: float
    ci_low: float | None
    ci_high: float | None
    note: str = ""


def ablation(scenario, rows=None, config=None, workers=1):
    """Run each selected configuration; rows come back in the canonical table order."""
    require_shares(scenario)
    rows = [k for k, _ in ABLATION_ROWS] if rows is None else list(rows)
    known = dict(ABLATION_ROWS)
    if not rows:
        raise ValueError("select at least one ablation configuration")
    unknown = [r for r in rows if r not in known]
    if unknown:
        raise ValueError(f"unknown ablation row(s): {unknown}; expected {list(known)}")
    config = config or MCConfig()
    base = resolve_weights(scenario)
    equal = {f: 1.0 / len(scenario.feature_names) for f in scenario.feature_names}
    settings = {
        "full": dict(weights=base),
        "no-attention": dict(weights=base, attention=False),
        "no-shapley": dict(weights=base, shapley=False),
        "no-monte-carlo": dict(weights=base, monte_carlo=False),
        "no-causal": dict(weights=base, causal=False),
        "equal-weights": dict(weights=equal),
    }
    notes = {
        "no-attention": "attention is a diagnostic; point shares unchanged",
        "no-shapley": "regression shares are not constrained to sum to 100",
        "no-monte-carlo": "no CI",
        "no-causal": "draws sampled independently; CI only",
    }
    out = []
    for key, label in ABLATION_ROWS:
        if key not in rows:
            continue
        run = allocate(scenario, config, workers=workers, **settings[key])
        top = run.report.max_positive()
        out.append(
            AblationRow(key, label, run.report.mae, top.name, top.discrepancy, top.ci_low, top.ci_high, notes.get(key, ""))
        )
    return out
