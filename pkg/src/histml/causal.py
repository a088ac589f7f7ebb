"""Linear structural causal models: evaluation, do-interventions, counterfactuals.

Every node ``v`` has one equation ``v := offset + sum_p c_p * t_p(p) + U_v``
where ``t_p`` is an optional monotone transform of parent ``p`` (identity by
default). Noise enters additively, so abduction from a full observation is
exact.
"""

from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

from histml.transforms import transform_from_dict


class CausalError(ValueError):
    pass


@dataclass(frozen=True)
class StructuralEquation:
    coefficients: dict = field(default_factory=dict)  # parent -> coefficient
    offset: float = 0.0
    transforms: dict = field(default_factory=dict)  # parent -> TransformKind

    def linear_part(self, values):
        total = self.offset
        for parent, c in self.coefficients.items():
            t = self.transforms.get(parent)
            x = values[parent]
            total += c * (float(t(x)) if t is not None else x)
        return total

    def to_dict(self):
        out = {"coefficients": dict(self.coefficients), "offset": self.offset}
        if self.transforms:
            out["transforms"] = {p: t.to_dict() for p, t in self.transforms.items()}
        return out


class CausalGraph:
    """DAG of structural equations; validated (acyclic, parents known) on construction."""

    def __init__(self, nodes, equations, exogenous=None, label=None):
        self.nodes = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise CausalError("duplicate node names")
        known = set(self.nodes)
        missing = known - set(equations)
        if missing:
            raise CausalError(f"nodes without an equation: {sorted(missing)}")
        extra = set(equations) - known
        if extra:
            raise CausalError(f"equations for unknown nodes: {sorted(extra)}")
        self.equations = {v: equations[v] for v in self.nodes}
        for v, eq in self.equations.items():
            if v in eq.coefficients:
                raise CausalError(f"{v} lists itself as a parent")
            bad = set(eq.coefficients) - known
            if bad:
                raise CausalError(f"{v}: unknown parent(s) {sorted(bad)}")
        self.exogenous = {v: (exogenous or {}).get(v, f"U_{v}") for v in self.nodes}
        if len(set(self.exogenous.values())) != len(self.nodes):
            raise CausalError("each node needs its own noise term")
        self.label = label
        sorter = TopologicalSorter({v: set(eq.coefficients) for v, eq in self.equations.items()})
        try:
            self.order = tuple(sorter.static_order())
        except CycleError as exc:
            raise CausalError(f"graph has a cycle: {' -> '.join(exc.args[1])}") from None

    def parents(self, node):
        return set(self.equations[node].coefficients)

    def descendants(self, nodes):
        out = set(nodes)
        for v in self.order:
            if self.parents(v) & out:
                out.add(v)
        return out - set(nodes)

    def with_coefficient(self, node, parent, value, label=None):
        eq = self.equations[node]
        coeffs = dict(eq.coefficients)
        coeffs[parent] = value
        eqs = dict(self.equations)
        eqs[node] = StructuralEquation(coeffs, eq.offset, eq.transforms)
        return CausalGraph(self.nodes, eqs, self.exogenous, label=label or self.label)

    @classmethod
    def from_dict(cls, data, label=None):
        eqs = {}
        for v, raw in data["equations"].items():
            eqs[v] = StructuralEquation(
                coefficients={p: float(c) for p, c in (raw.get("coefficients") or {}).items()},
                offset=float(raw.get("offset", 0.0)),
                transforms={p: transform_from_dict(t) for p, t in (raw.get("transforms") or {}).items()},
            )
        nodes = data.get("nodes") or list(eqs)
        return cls(nodes, eqs, data.get("exogenous"), label=label)

    def to_dict(self):
        return {
            "nodes": list(self.nodes),
            "equations": {v: eq.to_dict() for v, eq in self.equations.items()},
            "exogenous": dict(self.exogenous),
        }


def _run(graph, noise, fixed):
    values = {}
    for v in graph.order:
        if v in fixed:
            values[v] = float(fixed[v])
        else:
            values[v] = graph.equations[v].linear_part(values) + noise[graph.exogenous[v]]
    return values


def evaluate(graph, exogenous_values):
    """Node values in topological order given every noise value (keyed by noise name)."""
    missing = [u for u in graph.exogenous.values() if u not in exogenous_values]
    if missing:
        raise CausalError(f"missing noise value(s): {missing}")
    return _run(graph, exogenous_values, {})


def intervene(graph, do_assignments, exogenous_values):
    """Evaluate the mutilated model where each ``do`` node is held constant."""
    unknown = [v for v in do_assignments if v not in graph.equations]
    if unknown:
        raise CausalError(f"intervention on unknown node(s): {unknown}")
    needed = [graph.exogenous[v] for v in graph.nodes if v not in do_assignments]
    missing = [u for u in needed if u not in exogenous_values]
    if missing:
        raise CausalError(f"missing noise value(s): {missing}")
    return _run(graph, exogenous_values, do_assignments)


def abduce(graph, observed, skip=()):
    """Recover ``U_v = observed_v - linear_part_v`` for every node whose noise is pinned down.

    Returns ``(noise, underdetermined)``; nodes in ``skip`` are not required.
    """
    noise, under = {}, []
    for v in graph.order:
        if v in skip:
            continue
        eq = graph.equations[v]
        if v in observed and all(p in observed for p in eq.coefficients):
            noise[graph.exogenous[v]] = float(observed[v]) - eq.linear_part(observed)
        else:
            under.append(graph.exogenous[v])
    return noise, under


@dataclass(frozen=True)
class CounterfactualQuery:
    observed: dict
    interventions: dict = field(default_factory=dict)


def counterfactual(graph, query):
    """Abduction, then intervention, then prediction with the inferred noises."""
    unknown = [v for v in query.interventions if v not in graph.equations]
    if unknown:
        raise CausalError(f"intervention on unknown node(s): {unknown}")
    noise, under = abduce(graph, query.observed, skip=query.interventions)
    if under:
        raise CausalError(f"observation leaves noise underdetermined: {under}")
    return _run(graph, noise, query.interventions)


@dataclass(frozen=True)
class SensitivityResult:
    answers: dict  # label -> node -> value
    spread: dict  # node -> (min, max)


def sensitivity_over_dags(graphs, query):
    """Counterfactual answer under each candidate graph, plus per-node min/max."""
    if not graphs:
        raise CausalError("need at least one graph")
    answers = {}
    for i, g in enumerate(graphs):
        label = g.label or f"graph{i}"
        if label in answers:
            label = f"{label}#{i}"
        try:
            answers[label] = counterfactual(g, query)
        except CausalError as exc:
            raise CausalError(f"[{label}] {exc}") from None
    nodes = set.intersection(*(set(a) for a in answers.values()))
    spread = {v: (min(a[v] for a in answers.values()), max(a[v] for a in answers.values())) for v in sorted(nodes)}
    return SensitivityResult(answers, spread)


def scenario_graphs(scenario):
    """Parse the scenario's ``causal.graphs`` block into labelled graphs (file order)."""
    block = scenario.causal or {}
    return [CausalGraph.from_dict(raw, label=label) for label, raw in (block.get("graphs") or {}).items()]


def scenario_graph(scenario, label=None):
    graphs = scenario_graphs(scenario)
    if not graphs:
        raise CausalError("scenario has no causal graphs")
    label = label or (scenario.causal or {}).get("default") or graphs[0].label
    for g in graphs:
        if g.label == label:
            return g
    raise CausalError(f"unknown graph {label!r}; available: {[g.label for g in graphs]}")
