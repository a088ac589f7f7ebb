"""Monte Carlo propagation, bootstrap intervals and convergence bounds.

Replicate ``k`` always draws from its own stream keyed by ``(seed, k)``, and
summaries are computed from the full stored replicate vector, so the result
is identical for any worker count or completion order.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from histml.scenario import sample_features


class ReplicateError(RuntimeError):
    def __init__(self, index, cause):
        self.index = index
        super().__init__(f"replicate {index} failed: {cause!r}")


@dataclass(frozen=True)
class MCConfig:
    simulation_count: int = 1000
    seed: int = 42
    confidence: float = 95.0

    def __post_init__(self):
        if self.simulation_count < 1:
            raise ValueError("simulation_count must be >= 1")
        if not 0 < self.confidence < 100:
            raise ValueError("confidence must be in (0, 100)")

    @property
    def percentiles(self):
        tail = (100.0 - self.confidence) / 2.0
        return tail, 100.0 - tail


@dataclass(frozen=True)
class DistributionSummary:
    mean: float
    std: float
    lower: float
    upper: float
    count: int

    def as_row(self):
        return {"mean": self.mean, "std": self.std, "ci_low": self.lower, "ci_high": self.upper}


def replicate_rng(seed, index):
    """Counter-keyed generator for replicate ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def nearest_rank(sorted_values, p):
    """Smallest element whose rank fraction reaches ``p`` percent (nearest-rank rule)."""
    n = len(sorted_values)
    rank = max(1, math.ceil(p / 100.0 * n))
    return sorted_values[min(rank, n) - 1]


def summarize(values, confidence=95.0):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot summarise an empty sample")
    s = np.sort(v)
    tail = (100.0 - confidence) / 2.0
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return DistributionSummary(
        mean=float(v.mean()),
        std=std,
        lower=float(nearest_rank(s, tail)),
        upper=float(nearest_rank(s, 100.0 - tail)),
        count=int(v.size),
    )


def run_replicates(draw, config, workers=1):
    """Call ``draw(rng) -> {quantity: value}`` once per replicate.

    Returns ``(quantity names, array of shape (simulation_count, quantities))``.
    """

    def one(k):
        try:
            return draw(replicate_rng(config.seed, k))
        except Exception as exc:
            raise ReplicateError(k, exc) from exc

    indices = range(config.simulation_count)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, indices))
    else:
        results = [one(k) for k in indices]
    names = list(results[0])
    data = np.array([[r[q] for q in names] for r in results], dtype=float)
    return names, data


def summarize_replicates(names, data, config):
    return {q: summarize(data[:, j], config.confidence) for j, q in enumerate(names)}


def mc_propagate(scenario, pipeline, config, workers=1):
    """Push feature uncertainty through ``pipeline(sampled_features) -> {quantity: value}``."""
    names, data = run_replicates(lambda rng: pipeline(sample_features(scenario, rng)), config, workers)
    return summarize_replicates(names, data, config)


def chebyshev_bound(std, n, epsilon):
    """``min(1, std**2 / (n * epsilon**2))`` bound on ``P(|mean_n - mu| > epsilon)``."""
    if std < 0 or n < 1 or epsilon <= 0:
        raise ValueError("need std >= 0, n >= 1, epsilon > 0")
    return min(1.0, (std / epsilon) ** 2 / n)


def _statistic(kind):
    if kind == "mean":
        return lambda a: a.mean(axis=-1)
    if kind == "std":
        return lambda a: a.std(axis=-1, ddof=1) if a.shape[-1] > 1 else np.zeros(a.shape[:-1])
    if isinstance(kind, tuple) and kind[0] == "percentile":
        p = float(kind[1])
        return lambda a: np.apply_along_axis(lambda r: nearest_rank(np.sort(r), p), -1, a)
    raise ValueError(f"unknown statistic {kind!r}")


def bootstrap_summary(values, resamples, statistic, rng, confidence=95.0, chunk=256):
    """Percentile bootstrap of ``statistic`` ("mean", "std" or ("percentile", p))."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("bootstrap needs at least one value")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    stat = _statistic(statistic)
    out = []
    for start in range(0, resamples, chunk):
        m = min(chunk, resamples - start)
        idx = rng.integers(0, v.size, size=(m, v.size))
        out.append(stat(v[idx]))
    return summarize(np.concatenate(out), confidence)
