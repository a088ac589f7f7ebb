import math

import numpy as np
import pytest

from histml.conflict import (
    TRAITS,
    BattleSpec,
    CommanderProfile,
    ConflictError,
    battle_simulate,
    blend_probability,
    commander_compare,
    commander_effectiveness,
    faction_power,
    scenario_blend,
    support_score,
    win_probability,
)
from histml.scenario import UncertainValue
from histml.uncertainty import MCConfig

SCIPIO = dict(zip(TRAITS, [8.5, 8.8, 8.5, 8.0, 8.0, 8.5, 8.0]))


def uniform_weights():
    return {t: 1 / 7 for t in TRAITS}


def test_faction_points(punic_model):
    assert punic_model.point_power("Carthage") == pytest.approx(5.47, abs=1e-9)
    assert punic_model.point_power("Rome") == pytest.approx(5.15, abs=1e-9)
    ratio = punic_model.point_power("Carthage") / punic_model.point_power("Rome")
    assert ratio == pytest.approx(1.06, abs=0.02)


def test_faction_std_against_reported(punic_model):
    p = punic_model.power("Carthage", MCConfig(2000))
    assert p.mean == pytest.approx(5.47, abs=0.08)
    assert p.std == pytest.approx(0.55, abs=0.10)


def test_zero_features_zero_power():
    feats = {f: UncertainValue(0.0, 0.0) for f in ("a", "b")}
    p = faction_power(feats, {"a": 0.5, "b": 0.5}, {"a": 1.0, "b": 2.0}, MCConfig(10))
    assert (p.mean, p.std) == (0.0, 0.0)


def test_faction_power_needs_scales():
    with pytest.raises(ConflictError, match="scale"):
        faction_power({"a": UncertainValue(1.0)}, {"a": 1.0}, {})


def test_scipio_equal_weights():
    e = commander_effectiveness(CommanderProfile("Scipio", SCIPIO), uniform_weights())
    assert e == pytest.approx(sum(SCIPIO.values()) / 7, abs=1e-12)
    assert round(e, 2) == 8.33


def test_shipped_effectiveness(punic_model):
    for name, target in (("Hannibal", 8.50), ("Scipio", 8.33), ("Napoleon", 9.53)):
        assert punic_model.effectiveness(name) == pytest.approx(target, abs=0.05)


def test_concentrated_weights_pick_trait(punic_model):
    prof = punic_model.commander("Hannibal")
    for t in TRAITS:
        w = {k: float(k == t) for k in TRAITS}
        assert commander_effectiveness(prof, w) == prof.traits[t]


def test_profile_validation():
    with pytest.raises(ConflictError, match="missing"):
        CommanderProfile("x", {"logistics": 5.0})
    bad = dict(SCIPIO, logistics=11.0)
    with pytest.raises(ConflictError):
        CommanderProfile("x", bad)


def test_win_probability_basics():
    assert win_probability(3.0, 3.0, 7.0, 7.0, gamma=0.0) == 0.5
    assert win_probability(2, 1, 8, 8, 0.3) == win_probability(4, 2, 8, 8, 0.3)
    with pytest.raises(ConflictError):
        win_probability(0.0, 1.0, 1.0, 1.0)


def test_cannae_hand_value():
    z = math.log(5.47 / 5.15) + 0.3 * 8.5 / 8.33
    assert z == pytest.approx(0.0603 + 0.3061, abs=1e-3)
    assert win_probability(5.47, 5.15, 8.5, 8.33, 0.3) == pytest.approx(0.5906, abs=1e-4)


def test_zero_uncertainty_battle_is_deterministic(punic_model):
    flat = punic_model.scenario.with_updates(
        entities=tuple(
            type(e)(e.name, {f: UncertainValue(uv.mean, 0.0) for f, uv in e.features.items()})
            for e in punic_model.scenario.entities
        )
    )
    model = type(punic_model).from_scenario(flat).with_trait_std(0.0)
    b = model.battle("Cannae")
    s = battle_simulate(b, model, MCConfig(50))
    assert s.mean == model.point_win_probability(b)
    assert s.std == 0.0


@pytest.mark.parametrize("name, target", [("Cannae", 0.573), ("Zama", 0.578)])
def test_battles_within_window(punic_model, name, target):
    s = battle_simulate(punic_model.battle(name), punic_model, MCConfig(10_000))
    assert abs(s.mean - target) <= 0.03


def test_battle_spec_sides_differ():
    with pytest.raises(ConflictError):
        BattleSpec("Rome", "Rome", "Scipio", "Scipio")


def test_blend_definition():
    # rho = 1 is the pure power-ratio logistic
    assert blend_probability(5.47, 5.15, 8.5, 8.33, 1.0, 0.0) == pytest.approx(
        1 / (1 + 5.15 / 5.47), abs=1e-12
    )
    assert blend_probability(1.0, 1.0, 9.0, 8.0, 0.0, 1.0) > 0.5


def test_blend_weights_validated(punic_model):
    with pytest.raises(ConflictError):
        scenario_blend(0.7, 0.7, punic_model, punic_model.battle("Cannae"), MCConfig(5))


def blend_sweep(model, battle, grid, sims=400):
    return [scenario_blend(1 - k, k, model, battle, MCConfig(sims)) for k in grid]


def test_blend_monotone_when_effectiveness_edge_dominates(punic_model):
    grid = np.linspace(0, 1, 11)
    # Rome attacking at Zama: E ratio 8.33/8.50 is above P ratio 5.15/5.47
    zama = punic_model.battle("Zama")
    p = blend_sweep(punic_model, zama, grid)
    assert all(b >= a for a, b in zip(p, p[1:]))
    # Carthage under Napoleon: E ratio 9.53/8.33 exceeds P ratio 1.062
    nap = BattleSpec("Carthage", "Rome", "Napoleon", "Scipio", name="what-if")
    p = blend_sweep(punic_model, nap, grid)
    assert all(b >= a for a, b in zip(p, p[1:]))
    # continuity: neighbouring grid points stay close
    assert max(abs(b - a) for a, b in zip(p, p[1:])) < 0.02


def test_blend_against_hand_formula(punic_model):
    pa, pd = punic_model.point_power("Rome"), punic_model.point_power("Carthage")
    ea, ed = punic_model.effectiveness("Scipio"), punic_model.effectiveness("Hannibal")
    for k in (0.0, 0.5, 1.0):
        ba = (1 - k) * pa / max(pa, pd) + k * ea / max(ea, ed)
        bd = (1 - k) * pd / max(pa, pd) + k * ed / max(ea, ed)
        assert blend_probability(pa, pd, ea, ed, 1 - k, k) == pytest.approx(ba / (ba + bd), abs=1e-12)


def test_compare_identical_zero_delta():
    p = CommanderProfile("Scipio", SCIPIO)
    c = commander_compare(p, p, uniform_weights())
    assert c.effectiveness_delta_pct == 0.0 and c.support_delta_pct == 0.0


def test_hannibal_to_napoleon(punic_model):
    c = commander_compare(
        punic_model.commander("Hannibal"), punic_model.commander("Napoleon"), punic_model.trait_weights
    )
    assert c.effectiveness_delta_pct == pytest.approx(12.1, abs=0.3)


def test_support_score_default(punic_model):
    assert support_score(punic_model.commander("Hannibal")) == pytest.approx(6.25)
