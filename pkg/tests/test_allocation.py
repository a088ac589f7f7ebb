import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from histml.allocation import (
    AllocationError,
    CoalitionGame,
    ConflictParams,
    TensionParams,
    build_power_game,
    conflict_probability,
    discrepancy_report,
    power_indices,
    shapley_additive,
    shapley_exact,
    shapley_sampled,
    tension_factor,
)
from histml.scenario import scenario_from_dict

REFERENCE_PROJECTED = {"Britain": 40.2, "France": 21.4, "Germany": 18.1, "Belgium": 7.3,
                    "Portugal": 5.3, "Italy": 4.0, "Spain": 3.6}
REFERENCE_HISTORICAL = {"Britain": 32.4, "France": 27.9, "Germany": 8.7, "Belgium": 7.8,
                     "Portugal": 9.5, "Italy": 5.2, "Spain": 3.5}


def enumeration_oracle(table, n):
    """Average marginal contribution over all n! orderings."""
    phi = np.zeros(n)
    count = 0
    for order in itertools.permutations(range(n)):
        mask = 0
        for p in order:
            phi[p] += table[mask | 1 << p] - table[mask]
            mask |= 1 << p
        count += 1
    return phi / count


def glove_game():
    # v({1,2}) = v({1,2,3}) = 1, everything else 0
    t = np.zeros(8)
    t[0b011] = 1.0
    t[0b111] = 1.0
    return CoalitionGame.tabulated(["p1", "p2", "p3"], t)


def test_additive_small():
    r = shapley_exact(CoalitionGame.additive(["a", "b", "c"], [1, 2, 3]))
    assert [r.values[k] for k in "abc"] == pytest.approx([1, 2, 3], abs=1e-12)
    assert [r.shares[k] for k in "abc"] == pytest.approx([100 / 6, 100 / 3, 50], abs=1e-9)


def test_glove_game_against_oracle():
    g = glove_game()
    r = shapley_exact(g)
    assert [r.values[p] for p in g.players] == pytest.approx([0.5, 0.5, 0.0], abs=1e-12)
    np.testing.assert_allclose(r.value_array(g.players), enumeration_oracle(g.value_table(), 3), atol=1e-12)


def test_null_player_zero():
    rng = np.random.default_rng(0)
    n = 5
    base = rng.normal(size=1 << (n - 1))
    base[0] = 0
    # player 4 adds nothing: v(S | bit4) = v(S)
    t = np.concatenate([base, base])
    r = shapley_exact(CoalitionGame.tabulated(list("abcde"), t))
    assert r.values["e"] == pytest.approx(0.0, abs=1e-12)


def test_evaluation_count_is_2n():
    calls = []

    def v(coalition):
        calls.append(coalition)
        return len(coalition) ** 2

    shapley_exact(CoalitionGame.from_function([f"p{i}" for i in range(7)], v))
    # v(empty) is fixed at 0, the other 127 coalitions are evaluated once each
    assert len(calls) == 127 and len(set(calls)) == 127


def test_n_limit():
    with pytest.raises(AllocationError, match="20"):
        shapley_exact(CoalitionGame.additive([str(i) for i in range(21)], np.ones(21)))


def test_zero_sum_shares_undefined():
    t = np.zeros(4)
    with pytest.raises(AllocationError, match="zero"):
        shapley_exact(CoalitionGame.tabulated(["a", "b"], t))


def test_construction_checks():
    with pytest.raises(AllocationError):
        CoalitionGame.tabulated(["a"], [1.0, 2.0])
    with pytest.raises(AllocationError):
        CoalitionGame.tabulated(["a", "b"], [0.0, 1.0])
    with pytest.raises(AllocationError):
        CoalitionGame.additive(["a", "b"], [1.0, -1.0])


def test_sampled_additive_exact():
    g = CoalitionGame.additive(["a", "b", "c"], [1, 2, 3])
    r = shapley_sampled(g, 7, np.random.default_rng(11))
    assert [r.values[k] for k in "abc"] == pytest.approx([1, 2, 3], abs=1e-12)


def test_sampled_glove_converges():
    g = glove_game()
    r = shapley_sampled(g, 100_000, np.random.default_rng(1))
    assert [r.values[p] for p in g.players] == pytest.approx([0.5, 0.5, 0.0], abs=0.01)


def test_sampled_needs_permutations():
    with pytest.raises(AllocationError):
        shapley_sampled(glove_game(), 0, np.random.default_rng(0))


def test_sampled_large_additive_game():
    n = 22
    g = CoalitionGame.additive([str(i) for i in range(n)], np.arange(1.0, n + 1))
    r = shapley_sampled(g, 3, np.random.default_rng(0))
    assert r.value_array(g.players) == pytest.approx(np.arange(1.0, n + 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_axioms_random_games(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 1 << n))
    a[0] = b[0] = 0.0
    a[-1] += 10.0  # keep the grand-coalition sum away from zero
    ga = CoalitionGame.tabulated(range(n), a)
    gb = CoalitionGame.tabulated(range(n), b + 10.0 * (np.arange(1 << n) > 0))
    pa = shapley_exact(ga).value_array(ga.players)
    pb = shapley_exact(gb).value_array(gb.players)
    assert pa.sum() == pytest.approx(a[-1], rel=1e-9, abs=1e-9)
    sum_game = ga + gb
    np.testing.assert_allclose(shapley_exact(sum_game).value_array(ga.players), pa + pb, atol=1e-9)
    np.testing.assert_allclose(pa, enumeration_oracle(a, n), atol=1e-12)


def test_additive_shortcut_on_colonial(colonial):
    g = build_power_game(colonial)
    exact = shapley_exact(g)
    closed = shapley_additive(g)
    P = power_indices(colonial, colonial.weight_config)
    for i, e in enumerate(colonial.entity_names):
        assert exact.shares[e] == pytest.approx(100 * P[i] / P.sum(), abs=1e-9)
        assert closed.shares[e] == pytest.approx(exact.shares[e], abs=1e-9)


def test_single_entity_power_is_mean():
    s = scenario_from_dict({"entities": [{"name": "A", "features": {"x": {"mean": 4.2, "std": 0.3}}}],
                            "weights": {"x": 1.0}})
    assert power_indices(s, s.weight_config).tolist() == [4.2]


def test_identical_entities_equal_shares():
    ent = {"features": {"x": {"mean": 2.0, "std": 0.0}, "y": {"mean": 5.0, "std": 1.0}}}
    s = scenario_from_dict({"entities": [{"name": "A", **ent}, {"name": "B", **ent}],
                            "weights": {"x": 0.3, "y": 0.7}})
    r = shapley_exact(build_power_game(s))
    assert r.shares["A"] == r.shares["B"] == pytest.approx(50.0)


def test_weights_must_be_simplex(colonial):
    with pytest.raises(AllocationError):
        build_power_game(colonial, {"naval": 0.5, "coal": 0.6})
    with pytest.raises(AllocationError):
        build_power_game(colonial, {"moon": 1.0})


def test_reference_discrepancy_arithmetic():
    rep = discrepancy_report(REFERENCE_PROJECTED, REFERENCE_HISTORICAL)
    assert rep.row("Germany").discrepancy == pytest.approx(108.05, abs=0.01)
    assert rep.row("Germany").discrepancy == pytest.approx(107.9, abs=0.5)
    expected_mae = np.mean([abs(REFERENCE_PROJECTED[k] - REFERENCE_HISTORICAL[k]) for k in REFERENCE_PROJECTED])
    assert rep.mae == pytest.approx(expected_mae, abs=1e-12)
    assert rep.mae == pytest.approx(4.24, abs=0.01)
    signs = [math.copysign(1, rep.row(k).discrepancy) for k in REFERENCE_PROJECTED]
    assert signs == [1, -1, 1, -1, -1, -1, 1]
    assert rep.max_positive().name == "Germany"


def test_perfect_projection():
    rep = discrepancy_report(REFERENCE_HISTORICAL, REFERENCE_HISTORICAL)
    assert rep.mae == 0.0
    assert all(r.discrepancy == 0.0 for r in rep.rows)
    assert tension_factor(rep, TensionParams(2.0)) == 0.0


def test_tension_linear_in_shortfall():
    rep = discrepancy_report({"a": 30.0, "b": 70.0}, {"a": 20.0, "b": 80.0})
    doubled = discrepancy_report({"a": 40.0, "b": 60.0}, {"a": 20.0, "b": 80.0})
    t1 = tension_factor(rep, TensionParams(1.5))
    assert tension_factor(rep, TensionParams(3.0)) == pytest.approx(2 * t1)
    assert t1 == pytest.approx(1.5 * 0.5 * 30.0)
    assert tension_factor(doubled, TensionParams(1.5)) == pytest.approx(1.5 * 1.0 * 40.0)


def test_tension_doubles_with_discrepancy():
    # same projected share, discrepancy doubled by halving a tiny historical basis
    base = discrepancy_report({"g": 18.1, "h": 81.9}, {"g": 9.05, "h": 90.95})
    twice = discrepancy_report({"g": 18.1, "h": 81.9}, {"g": 6.0333333333333333, "h": 93.9666666666666667})
    t0 = tension_factor(base, TensionParams(1.863))
    t1 = tension_factor(twice, TensionParams(1.863))
    assert twice.row("g").discrepancy == pytest.approx(2 * base.row("g").discrepancy)
    assert t1 == pytest.approx(2 * t0)


def test_kappa_from_reference_rows():
    rep = discrepancy_report(REFERENCE_PROJECTED, REFERENCE_HISTORICAL)
    kappa = 36.43 / (rep.row("Germany").discrepancy / 100 * 18.1)
    assert kappa == pytest.approx(1.863, abs=1e-3)
    assert tension_factor(rep, TensionParams(kappa)) == pytest.approx(36.43)


def test_conflict_probability():
    assert conflict_probability(0.0, ConflictParams()) == 0.0
    p = conflict_probability(36.43, ConflictParams(5.0))
    assert p == pytest.approx(0.99931, abs=1e-5)
    assert f"{100 * p:.1f}" == "99.9"
    assert conflict_probability(1.0, ConflictParams()) < conflict_probability(2.0, ConflictParams())
    with pytest.raises(AllocationError):
        conflict_probability(-1.0, ConflictParams())
