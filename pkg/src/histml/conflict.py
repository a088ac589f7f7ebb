"""Faction power, commander effectiveness and battle outcome models."""

import math
from dataclasses import dataclass

import numpy as np

from histml.scenario import Entity, Scenario, UncertainValue, sample_matrix
from histml.uncertainty import MCConfig, run_replicates, summarize_replicates

TRAITS = (
    "strategic_brilliance",
    "tactical_genius",
    "logistics",
    "inspiration",
    "adaptability",
    "political_support",
    "resource_management",
)
FACTION_FEATURES = ("population", "economic", "naval", "manpower", "political", "strategic")
DEFAULT_GAMMA = 0.3
DEFAULT_TRAIT_STD = 0.3
DEFAULT_SUPPORT_WEIGHTS = {"political_support": 0.5, "resource_management": 0.5}


class ConflictError(ValueError):
    pass


def _check_simplex(weights, what):
    w = np.array(list(weights.values()), dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ConflictError(f"{what} must be nonnegative and sum to 1")


@dataclass(frozen=True)
class CommanderProfile:
    name: str
    traits: dict  # trait -> score on 0..10

    def __post_init__(self):
        missing = [t for t in TRAITS if t not in self.traits]
        if missing:
            raise ConflictError(f"{self.name}: missing trait(s) {missing}")
        for t in TRAITS:
            if not 0.0 <= self.traits[t] <= 10.0:
                raise ConflictError(f"{self.name}.{t} = {self.traits[t]} outside [0, 10]")

    def vector(self):
        return np.array([self.traits[t] for t in TRAITS], dtype=float)


@dataclass(frozen=True)
class BattleSpec:
    attacker: str
    defender: str
    attacker_commander: str
    defender_commander: str
    gamma: float = DEFAULT_GAMMA
    name: str = ""

    def __post_init__(self):
        if self.attacker == self.defender:
            raise ConflictError("attacker and defender must differ")


def _power_value(x, weights, scales, names):
    total = 0.0
    for j, f in enumerate(names):
        total += weights[f] * (x[j] / scales[f])
    return float(total)


def _effectiveness_value(t, trait_weights):
    total = 0.0
    for j, name in enumerate(TRAITS):
        total += trait_weights[name] * t[j]
    return float(total)


def faction_power(features, weights, scaling, config=None, bounds=None):
    """Weighted index ``sum_f w_f * feature_f / scale_f``.

    ``features`` maps feature -> UncertainValue. The mean is evaluated at the
    measurement means; the std comes from Monte Carlo draws of the features.
    """
    missing = [f for f in features if f not in scaling]
    if missing:
        raise ConflictError(f"no scale constant for: {missing}")
    _check_simplex(weights, "faction weights")
    names = sorted(features)
    w = {f: weights.get(f, 0.0) for f in names}
    mu = np.array([features[f].mean for f in names])
    point = _power_value(mu, w, scaling, names)
    config = config or MCConfig()
    scen = Scenario("faction", (Entity("faction", dict(features)),), bounds=dict(bounds or {}))
    _, data = run_replicates(
        lambda rng: {"power": _power_value(sample_matrix(scen, rng)[0], w, scaling, names)}, config
    )
    std = float(data[:, 0].std(ddof=1)) if len(data) > 1 else 0.0
    return UncertainValue(point, std)


def commander_effectiveness(profile, trait_weights):
    """``sum_j w_j * trait_j``; lies in [0, 10] for simplex weights."""
    _check_simplex(trait_weights, "trait weights")
    w = {t: trait_weights.get(t, 0.0) for t in TRAITS}
    return _effectiveness_value(profile.vector(), w)


def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def win_probability(p_att, p_def, e_att, e_def, gamma=DEFAULT_GAMMA):
    """``sigmoid(log(P_att / P_def) + gamma * E_att / E_def)``.

    Not antisymmetric: swapping sides does not give the complement.
    """
    if min(p_att, p_def, e_att, e_def) <= 0:
        raise ConflictError("powers and effectiveness must be > 0")
    return _sigmoid(math.log(p_att / p_def) + gamma * e_att / e_def)


@dataclass(frozen=True)
class ConflictModel:
    """Resolved conflict block of a scenario."""

    scenario: Scenario
    weights: dict
    scales: dict
    commanders: dict
    trait_weights: dict
    trait_std: float
    support_weights: dict
    gamma: float
    battles: tuple

    @classmethod
    def from_scenario(cls, scenario):
        block = scenario.conflict
        if not block:
            raise ConflictError("scenario has no conflict block")
        if scenario.weight_config is None:
            raise ConflictError("weights: faction weights missing")
        commanders = {
            name: CommanderProfile(name, {t: float(v) for t, v in traits.items()})
            for name, traits in block.get("commanders", {}).items()
        }
        trait_weights = {t: float(block["trait_weights"][t]) for t in TRAITS}
        _check_simplex(trait_weights, "trait_weights")
        gamma = float(block.get("gamma", DEFAULT_GAMMA))
        battles = tuple(
            BattleSpec(
                b["attacker"], b["defender"], b["attacker_commander"], b["defender_commander"],
                float(b.get("gamma", gamma)), b.get("name", ""),
            )
            for b in block.get("battles", [])
        )
        return cls(
            scenario=scenario,
            weights=dict(scenario.weight_config),
            scales={f: float(v) for f, v in block["scales"].items()},
            commanders=commanders,
            trait_weights=trait_weights,
            trait_std=float(block.get("trait_std", DEFAULT_TRAIT_STD)),
            support_weights=dict(block.get("support_weights", DEFAULT_SUPPORT_WEIGHTS)),
            gamma=gamma,
            battles=battles,
        )

    def commander(self, name):
        try:
            return self.commanders[name]
        except KeyError:
            raise ConflictError(f"unknown commander {name!r}") from None

    def faction_index(self, name):
        try:
            return self.scenario.entity_names.index(name)
        except ValueError:
            raise ConflictError(f"unknown faction {name!r}") from None

    def battle(self, name):
        for b in self.battles:
            if b.name == name:
                return b
        raise ConflictError(f"unknown battle {name!r}")

    def check_battle(self, battle):
        """Raise ConflictError early for unknown factions or commanders."""
        self.faction_index(battle.attacker)
        self.faction_index(battle.defender)
        self.commander(battle.attacker_commander)
        self.commander(battle.defender_commander)

    def power(self, faction, config=None):
        ent = self.scenario.entity(faction)
        return faction_power(ent.features, self.weights, self.scales, config, self.scenario.bounds)

    def point_power(self, faction):
        i = self.faction_index(faction)
        return _power_value(self.scenario.means()[i], self._w(), self.scales, self.scenario.feature_names)

    def effectiveness(self, commander):
        return commander_effectiveness(self.commander(commander), self.trait_weights)

    def _w(self):
        return {f: self.weights.get(f, 0.0) for f in self.scenario.feature_names}

    def _sides(self, battle, rng):
        """One joint draw of both sides' power and effectiveness (``rng=None``: point values)."""
        ia, idf = self.faction_index(battle.attacker), self.faction_index(battle.defender)
        ca, cd = self.commander(battle.attacker_commander), self.commander(battle.defender_commander)
        if rng is None:
            X = self.scenario.means()
            ta, td = ca.vector(), cd.vector()
        else:
            X = sample_matrix(self.scenario, rng)
            noise = rng.standard_normal((2, len(TRAITS)))
            ta = np.clip(ca.vector() + self.trait_std * noise[0], 0.0, 10.0)
            td = np.clip(cd.vector() + self.trait_std * noise[1], 0.0, 10.0)
        w, names = self._w(), self.scenario.feature_names
        pa = _power_value(X[ia], w, self.scales, names)
        pd = _power_value(X[idf], w, self.scales, names)
        return pa, pd, _effectiveness_value(ta, self.trait_weights), _effectiveness_value(td, self.trait_weights)

    def point_win_probability(self, battle):
        pa, pd, ea, ed = self._sides(battle, None)
        return win_probability(pa, pd, ea, ed, battle.gamma)

    def with_trait_std(self, std):
        return ConflictModel(**{**self.__dict__, "trait_std": float(std)})


def battle_simulate(battle, model, config, workers=1):
    """Monte Carlo win probability over sampled faction features and trait scores."""
    if not isinstance(model, ConflictModel):
        model = ConflictModel.from_scenario(model)
    model.check_battle(battle)

    def draw(rng):
        pa, pd, ea, ed = model._sides(battle, rng)
        return {"p_win": win_probability(pa, pd, ea, ed, battle.gamma)}

    names, data = run_replicates(draw, config, workers)
    return summarize_replicates(names, data, config)["p_win"]


def blend_probability(pa, pd, ea, ed, resource_weight, commander_weight):
    pmax, emax = max(pa, pd), max(ea, ed)
    ba = resource_weight * pa / pmax + commander_weight * ea / emax
    bd = resource_weight * pd / pmax + commander_weight * ed / emax
    return _sigmoid(math.log(ba / bd))


def scenario_blend(resource_weight, commander_weight, model, battle, config, workers=1):
    """Attacker win probability when side strength blends normalised power and effectiveness.

    Each side scores ``rho * P / P_max + kappa * E / E_max``; the probability
    is ``sigmoid(log(B_att / B_def))`` averaged over Monte Carlo replicates.
    """
    if resource_weight < 0 or commander_weight < 0 or abs(resource_weight + commander_weight - 1) > 1e-9:
        raise ConflictError("blend weights must be nonnegative and sum to 1")
    if not isinstance(model, ConflictModel):
        model = ConflictModel.from_scenario(model)
    model.check_battle(battle)

    def draw(rng):
        pa, pd, ea, ed = model._sides(battle, rng)
        return {"p": blend_probability(pa, pd, ea, ed, resource_weight, commander_weight)}

    _, data = run_replicates(draw, config, workers)
    return float(data[:, 0].mean())


@dataclass(frozen=True)
class CommanderComparison:
    a: str
    b: str
    effectiveness_a: float
    effectiveness_b: float
    effectiveness_delta_pct: float
    support_a: float
    support_b: float
    support_delta_pct: float


def support_score(profile, support_weights=None):
    support_weights = support_weights or DEFAULT_SUPPORT_WEIGHTS
    _check_simplex(support_weights, "support weights")
    return sum(w * profile.traits[t] for t, w in support_weights.items())


def commander_compare(a, b, trait_weights, support_weights=None):
    """Effectiveness and political/resource support of ``b`` relative to ``a``."""
    ea, eb = commander_effectiveness(a, trait_weights), commander_effectiveness(b, trait_weights)
    sa, sb = support_score(a, support_weights), support_score(b, support_weights)
    return CommanderComparison(
        a.name, b.name, ea, eb, (eb - ea) / ea * 100.0, sa, sb, (sb - sa) / sa * 100.0
    )
