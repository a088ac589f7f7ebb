"""Cooperative allocation games, Shapley values and share discrepancies."""

import math
from dataclasses import dataclass

import numpy as np

from histml import kernels
from histml.transforms import transform_matrix

SIMPLEX_TOLERANCE = 1e-9


class AllocationError(ValueError):
    pass


class CoalitionGame:
    """Player list plus characteristic function ``v`` over bitmask coalitions.

    Player ``i`` is bit ``1 << i``. Build with :meth:`additive`,
    :meth:`tabulated` or :meth:`from_function`; the full value table is
    computed at most once and cached.
    """

    def __init__(self, players, *, powers=None, table=None, fn=None):
        self.players = tuple(players)
        n = len(self.players)
        if n < 1:
            raise AllocationError("a game needs at least one player")
        if len(set(self.players)) != n:
            raise AllocationError("player names must be unique")
        if sum(x is not None for x in (powers, table, fn)) != 1:
            raise AllocationError("give exactly one of powers, table, fn")
        self.powers = None
        self._table = None
        self._fn = fn
        if powers is not None:
            powers = np.asarray(powers, dtype=float)
            if powers.shape != (n,):
                raise AllocationError(f"expected {n} powers, got shape {powers.shape}")
            if not np.all(np.isfinite(powers)):
                raise AllocationError("powers must be finite")
            if np.any(powers < 0):
                raise AllocationError("negative power index; shares would be undefined")
            self.powers = powers
        if table is not None:
            table = np.asarray(table, dtype=float)
            if table.shape != (1 << n,):
                raise AllocationError(f"tabulated game needs all 2**{n} coalition values")
            if table[0] != 0.0:
                raise AllocationError("v(empty coalition) must be 0")
            self._table = table

    @classmethod
    def additive(cls, players, powers):
        """``v(S) = sum of member powers``."""
        return cls(players, powers=powers)

    @classmethod
    def tabulated(cls, players, table):
        return cls(players, table=table)

    @classmethod
    def from_function(cls, players, fn):
        """Game whose ``v`` is ``fn(frozenset of player names)``; evaluated lazily, once per coalition."""
        return cls(players, fn=fn)

    @property
    def n(self):
        return len(self.players)

    @property
    def is_additive(self):
        return self.powers is not None

    def _mask_members(self, mask):
        return frozenset(p for i, p in enumerate(self.players) if mask >> i & 1)

    def _eval_fn(self, mask):
        if mask == 0:
            return 0.0
        return float(self._fn(self._mask_members(mask)))

    def value_table(self):
        if self._table is None:
            if self.n > kernels.MAX_EXACT_PLAYERS:
                raise AllocationError(
                    f"{self.n} players: a full value table needs 2**{self.n} entries "
                    f"(limit {kernels.MAX_EXACT_PLAYERS})"
                )
            if self.powers is not None:
                self._table = kernels.subset_sums(self.powers)
            else:
                self._table = np.array([self._eval_fn(m) for m in range(1 << self.n)])
        return self._table

    def value(self, coalition):
        """``v`` of a coalition given as an iterable of player names."""
        idx = {p: i for i, p in enumerate(self.players)}
        mask = 0
        for p in coalition:
            mask |= 1 << idx[p]
        if self.powers is not None:
            return float(sum(self.powers[i] for i in range(self.n) if mask >> i & 1))
        if self._table is not None or self.n <= kernels.MAX_EXACT_PLAYERS:
            return float(self.value_table()[mask])
        return self._eval_fn(mask)

    def __add__(self, other):
        if self.players != other.players:
            raise AllocationError("games must share the same player list")
        return CoalitionGame.tabulated(self.players, self.value_table() + other.value_table())


@dataclass(frozen=True)
class ShapleyResult:
    values: dict
    shares: dict

    @classmethod
    def from_values(cls, players, phi):
        phi = np.asarray(phi, dtype=float)
        total = phi.sum()
        if total == 0.0:
            raise AllocationError("Shapley values sum to zero; shares are undefined")
        shares = 100.0 * phi / total
        return cls(
            values=dict(zip(players, phi.tolist())),
            shares=dict(zip(players, shares.tolist())),
        )

    def value_array(self, players):
        return np.array([self.values[p] for p in players])

    def share_array(self, players):
        return np.array([self.shares[p] for p in players])


def shapley_exact(game):
    """Exact Shapley values by subset enumeration with the ``|S|!(n-|S|-1)!/n!`` weights.

    Every coalition value is computed once (``2**n`` evaluations), then each
    player's weighted marginal contributions are summed by the active kernel.
    """
    if game.n > kernels.MAX_EXACT_PLAYERS:
        raise AllocationError(f"exact Shapley limited to {kernels.MAX_EXACT_PLAYERS} players, got {game.n}")
    phi = kernels.shapley_from_table(game.value_table())
    return ShapleyResult.from_values(game.players, phi)


def shapley_additive(game):
    """Closed form for additive games: each player's value is its own power."""
    if not game.is_additive:
        raise AllocationError("closed form only applies to additive games")
    return ShapleyResult.from_values(game.players, game.powers)


def shapley_sampled(game, permutations, rng):
    """Monte Carlo Shapley estimate from uniformly random player orderings."""
    if permutations < 1:
        raise AllocationError("permutations must be >= 1")
    n = game.n
    perms = rng.permuted(np.tile(np.arange(n), (int(permutations), 1)), axis=1)
    if n <= kernels.MAX_EXACT_PLAYERS:
        phi = kernels.permutation_estimate(game.value_table(), perms)
        return ShapleyResult.from_values(game.players, phi)
    # large games: walk each ordering with a coalition cache
    cache = {0: 0.0}
    phi = np.zeros(n)
    for order in perms:
        mask, prev = 0, 0.0
        for p in order:
            mask |= 1 << int(p)
            if mask not in cache:
                cache[mask] = (
                    float(game.powers[[i for i in range(n) if mask >> i & 1]].sum())
                    if game.is_additive
                    else game._eval_fn(mask)
                )
            phi[p] += cache[mask] - prev
            prev = cache[mask]
    return ShapleyResult.from_values(game.players, phi / permutations)


def check_simplex(weights, what="weights"):
    w = np.asarray(list(weights.values()) if isinstance(weights, dict) else weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise AllocationError(f"{what} must be nonnegative and sum to 1 (sum={w.sum()!r})")


def power_indices(scenario, weights, X=None):
    """``P_i = sum_f w_f * transform_f(x_if)`` for every entity.

    ``X`` defaults to the measurement means; Monte Carlo callers pass draws.
    """
    X = scenario.means() if X is None else X
    F = transform_matrix(X, scenario.feature_names, scenario.transform_config)
    return F @ scenario.weight_vector(weights)


def build_power_game(scenario, weights=None):
    """Additive game over the scenario's entities with weighted transformed features."""
    weights = scenario.weight_config if weights is None else weights
    if weights is None:
        raise AllocationError("no weights given and the scenario ships none")
    unknown = [f for f in weights if f not in scenario.feature_names]
    if unknown:
        raise AllocationError(f"weights for unknown feature(s): {unknown}")
    check_simplex(weights)
    return CoalitionGame.additive(scenario.entity_names, power_indices(scenario, weights))


@dataclass(frozen=True)
class EntityDiscrepancy:
    name: str
    projected: float
    historical: float
    discrepancy: float
    ci_low: float | None = None
    ci_high: float | None = None


@dataclass(frozen=True)
class DiscrepancyReport:
    rows: tuple

    @property
    def mae(self):
        """Mean absolute share error in percentage points."""
        return float(np.mean([abs(r.projected - r.historical) for r in self.rows]))

    def row(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def max_positive(self):
        """Row with the largest discrepancy (the "German-style" outlier)."""
        return max(self.rows, key=lambda r: r.discrepancy)


def discrepancy_report(projected, historical, intervals=None):
    """Relative discrepancy ``(projected - historical) / historical * 100`` per entity.

    ``intervals`` optionally maps entity -> (low, high) share bounds.
    """
    if set(projected) != set(historical):
        raise AllocationError("projected and historical shares must cover the same entities")
    rows = []
    for name in projected:
        p, h = float(projected[name]), float(historical[name])
        if h == 0:
            raise AllocationError(f"{name}: historical share is zero")
        lo, hi = (intervals or {}).get(name, (None, None))
        rows.append(EntityDiscrepancy(name, p, h, (p - h) / h * 100.0, lo, hi))
    return DiscrepancyReport(tuple(rows))


@dataclass(frozen=True)
class TensionParams:
    kappa: float


@dataclass(frozen=True)
class ConflictParams:
    tau: float = 5.0


def tension_factor(report, params):
    """``kappa * max_i max(0, discrepancy_i / 100) * projected_i``; zero with no shortfall."""
    return params.kappa * max(max(0.0, r.discrepancy / 100.0) * r.projected for r in report.rows)


def conflict_probability(tension, params):
    """Saturating map ``1 - exp(-T / tau)`` from tension to probability."""
    if tension < 0:
        raise AllocationError("tension must be >= 0")
    return -math.expm1(-tension / params.tau)
