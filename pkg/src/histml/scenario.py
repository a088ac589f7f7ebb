"""Entities, uncertain measurements and scenario files.

A scenario file is a JSON document; ``docs/scenario_schema.md`` describes the
layout. The two shipped case studies live in ``histml/data``.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from histml.transforms import Identity, transform_from_dict

SHARE_SUM_TOLERANCE = 0.5
WEIGHT_SUM_TOLERANCE = 1e-9


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario. ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class UncertainValue:
    """Gaussian measurement ``mean ± std`` (std read as one standard deviation)."""

    mean: float
    std: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError("mean and std must be finite")
        if self.std < 0:
            raise ValueError(f"std must be >= 0, got {self.std}")

    def sample(self, rng, size=None):
        return self.mean + self.std * rng.standard_normal(size)


@dataclass(frozen=True)
class Entity:
    name: str
    features: dict  # feature name -> UncertainValue

    def feature_names(self):
        return sorted(self.features)


@dataclass(frozen=True)
class Scenario:
    name: str
    entities: tuple
    historical_shares: dict | None = None
    historical_share_total: float = 100.0
    transform_config: dict = field(default_factory=dict)
    weight_config: dict | None = None
    bounds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    allocation: dict = field(default_factory=dict)
    causal: dict | None = None
    conflict: dict | None = None

    @property
    def entity_names(self):
        return [e.name for e in self.entities]

    @property
    def feature_names(self):
        """Canonical (lexical) feature order used for every matrix view."""
        return self.entities[0].feature_names() if self.entities else []

    def entity(self, name):
        for e in self.entities:
            if e.name == name:
                return e
        raise KeyError(f"unknown entity {name!r}")

    def means(self):
        """``(entities, features)`` matrix of measurement means."""
        names = self.feature_names
        return np.array([[e.features[f].mean for f in names] for e in self.entities], dtype=float)

    def stds(self):
        names = self.feature_names
        return np.array([[e.features[f].std for f in names] for e in self.entities], dtype=float)

    def bound_arrays(self):
        names = self.feature_names
        lo = np.array([_bound(self.bounds.get(f), 0) for f in names])
        hi = np.array([_bound(self.bounds.get(f), 1) for f in names])
        return lo, hi

    def weight_vector(self, weights=None):
        weights = self.weight_config if weights is None else weights
        if weights is None:
            raise ScenarioError("weights", "scenario has no weight configuration")
        return np.array([weights.get(f, 0.0) for f in self.feature_names], dtype=float)

    def with_updates(self, **changes):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return Scenario(**fields)

    def to_dict(self):
        out = {
            "name": self.name,
            "entities": [
                {
                    "name": e.name,
                    "features": {
                        f: {"mean": uv.mean, "std": uv.std} for f, uv in sorted(e.features.items())
                    },
                }
                for e in self.entities
            ],
            "transforms": {f: t.to_dict() for f, t in sorted(self.transform_config.items())},
            "metadata": dict(self.metadata),
        }
        if self.historical_shares is not None:
            out["historical_shares"] = dict(self.historical_shares)
            if self.historical_share_total != 100.0:
                out["historical_share_total"] = self.historical_share_total
        if self.weight_config is not None:
            out["weights"] = dict(self.weight_config)
        if self.bounds:
            out["bounds"] = {f: list(b) for f, b in self.bounds.items()}
        if self.allocation:
            out["allocation"] = dict(self.allocation)
        if self.causal is not None:
            out["causal"] = self.causal
        if self.conflict is not None:
            out["conflict"] = self.conflict
        return out


def _bound(pair, idx):
    if pair is None or pair[idx] is None:
        return -np.inf if idx == 0 else np.inf
    return float(pair[idx])


def scenario_from_dict(data):
    """Validate a parsed scenario document and build a :class:`Scenario`."""
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "expected an object at top level")
    raw_entities = data.get("entities")
    if not isinstance(raw_entities, list) or not raw_entities:
        raise ScenarioError("entities", "must be a non-empty list")

    entities = []
    seen = set()
    feature_set = None
    for i, raw in enumerate(raw_entities):
        where = f"entities[{i}]"
        name = raw.get("name") if isinstance(raw, dict) else None
        if not isinstance(name, str) or not name:
            raise ScenarioError(f"{where}.name", "missing entity name")
        if name in seen:
            raise ScenarioError(f"{where}.name", f"duplicate entity name {name!r}")
        seen.add(name)
        feats = {}
        for f, cell in (raw.get("features") or {}).items():
            fwhere = f"{where}.features.{f}"
            if isinstance(cell, (int, float)):
                cell = {"mean": cell, "std": 0.0}
            try:
                mean = float(cell["mean"])
                std = float(cell.get("std", 0.0))
            except (KeyError, TypeError, ValueError):
                raise ScenarioError(fwhere, "expected {mean, std}") from None
            if std < 0:
                raise ScenarioError(f"{fwhere}.std", f"negative std {std}")
            try:
                feats[f] = UncertainValue(mean, std)
            except ValueError as exc:
                raise ScenarioError(fwhere, str(exc)) from None
        if not feats:
            raise ScenarioError(f"{where}.features", "entity has no features")
        if feature_set is None:
            feature_set = set(feats)
        elif set(feats) != feature_set:
            diff = sorted(feature_set.symmetric_difference(feats))
            raise ScenarioError(f"{where}.features", f"feature set differs from first entity: {diff}")
        entities.append(Entity(name, feats))

    names = [e.name for e in entities]
    features = sorted(feature_set)

    share_total = float(data.get("historical_share_total", 100.0))
    if not 0 < share_total <= 100:
        raise ScenarioError("historical_share_total", "must be in (0, 100]")
    shares = data.get("historical_shares")
    if shares is not None:
        if set(shares) != set(names):
            raise ScenarioError("historical_shares", "keys must equal the entity names")
        shares = {k: float(v) for k, v in shares.items()}
        total = sum(shares.values())
        if abs(total - share_total) > SHARE_SUM_TOLERANCE:
            raise ScenarioError("historical_shares", f"shares sum to {total:g}, expected {share_total:g}")

    raw_transforms = data.get("transforms")
    if raw_transforms is None:
        transforms = {f: Identity() for f in features}
    else:
        transforms = {}
        for f, spec in raw_transforms.items():
            try:
                transforms[f] = transform_from_dict(spec)
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"transforms.{f}", str(exc)) from None
        missing = [f for f in features if f not in transforms]
        if missing:
            raise ScenarioError("transforms", f"no transform for: {', '.join(missing)}")

    weights = data.get("weights")
    if weights is not None:
        weights = {k: float(v) for k, v in weights.items()}
        unknown = [k for k in weights if k not in feature_set]
        if unknown:
            raise ScenarioError("weights", f"unknown feature(s): {unknown}")
        if any(v < 0 for v in weights.values()):
            raise ScenarioError("weights", "weights must be >= 0")
        if abs(sum(weights.values()) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ScenarioError("weights", f"weights sum to {sum(weights.values())!r}, expected 1")

    bounds = {}
    for f, pair in (data.get("bounds") or {}).items():
        if f not in feature_set:
            raise ScenarioError(f"bounds.{f}", "unknown feature")
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ScenarioError(f"bounds.{f}", "expected [low, high] (null for open)")
        bounds[f] = tuple(None if b is None else float(b) for b in pair)

    metadata = {str(k): str(v) for k, v in (data.get("metadata") or {}).items()}

    return Scenario(
        name=str(data.get("name", "scenario")),
        entities=tuple(entities),
        historical_shares=shares,
        historical_share_total=share_total,
        transform_config=transforms,
        weight_config=weights,
        bounds=bounds,
        metadata=metadata,
        allocation=dict(data.get("allocation") or {}),
        causal=data.get("causal"),
        conflict=data.get("conflict"),
    )


def shipped_scenario_path(name):
    return resources.files("histml") / "data" / f"{name}.json"


def load_scenario(path):
    """Load and validate a scenario file.

    ``path`` may also be the bare name of a shipped scenario
    (``colonial_1890`` or ``punic_218bce``).
    """
    p = Path(path)
    if not p.exists() and p.suffix == "" and shipped_scenario_path(str(path)).is_file():
        text = shipped_scenario_path(str(path)).read_text(encoding="utf-8")
    else:
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioError(str(path), f"cannot read scenario: {exc.strerror}") from None
        except UnicodeDecodeError:
            raise ScenarioError(str(path), "not valid UTF-8") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"<json line {exc.lineno}>", exc.msg) from None
    return scenario_from_dict(data)


def save_scenario(scenario, path):
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")


def sample_matrix(scenario, rng):
    """One Gaussian draw of every feature, clamped to the scenario's bounds.

    Returns an ``(entities, features)`` array in canonical feature order.
    """
    mu = scenario.means()
    sd = scenario.stds()
    draw = mu + sd * rng.standard_normal(mu.shape)
    if scenario.bounds:
        lo, hi = scenario.bound_arrays()
        draw = np.clip(draw, lo, hi)
    return draw


def sample_features(scenario, rng):
    """Same draw as :func:`sample_matrix`, keyed by entity and feature name."""
    draw = sample_matrix(scenario, rng)
    names = scenario.feature_names
    return {
        e.name: {f: float(draw[i, j]) for j, f in enumerate(names)}
        for i, e in enumerate(scenario.entities)
    }
