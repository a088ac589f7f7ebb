"""Hot numeric loops.

Each kernel exists twice: a plain-loop version that numba compiles, and a
vectorised numpy version used when numba is disabled (``HISTML_DISABLE_NUMBA``).
The public names at the bottom of the module dispatch to whichever is active;
both variants stay importable so tests and the benchmark can compare them.
"""

import math

import numpy as np

from histml._accel import USE_NUMBA, njit

MAX_EXACT_PLAYERS = 20


def shapley_weights(n):
    """``w[s] = s! (n-s-1)! / n!`` for coalition sizes ``s = 0..n-1``."""
    fact = math.factorial
    return np.array([fact(s) * fact(n - s - 1) / fact(n) for s in range(n)], dtype=np.float64)


def coalition_sizes(n):
    """Popcount of every bitmask in ``0 .. 2**n - 1``."""
    masks = np.arange(1 << n, dtype=np.int64)
    return np.bitwise_count(masks).astype(np.int64)


# --------------------------------------------------------------------------
# loop kernels (numba targets)


def _subset_sums_loop(powers):
    n = powers.shape[0]
    table = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        low = mask & (-mask)
        i = 0
        while (1 << i) != low:
            i += 1
        table[mask] = table[mask ^ low] + powers[i]
    return table


def _shapley_loop(table, n, weights):
    phi = np.zeros(n)
    full = 1 << n
    for i in range(n):
        bit = 1 << i
        acc = 0.0
        for mask in range(full):
            if mask & bit:
                continue
            size = 0
            m = mask
            while m:
                m &= m - 1
                size += 1
            acc += weights[size] * (table[mask | bit] - table[mask])
        phi[i] = acc
    return phi


def _permutation_loop(table, perms):
    n_perm, n = perms.shape
    phi = np.zeros(n)
    for r in range(n_perm):
        mask = 0
        prev = table[0]
        for k in range(n):
            p = perms[r, k]
            mask |= 1 << p
            cur = table[mask]
            phi[p] += cur - prev
            prev = cur
    return phi / n_perm


def _best_split_loop(X, y, features, min_leaf):
    n = y.shape[0]
    total = 0.0
    total_sq = 0.0
    for k in range(n):
        total += y[k]
        total_sq += y[k] * y[k]
    parent_sse = total_sq - total * total / n
    best_gain = 0.0
    best_feature = -1
    best_threshold = 0.0
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        ys = y[order]
        left = 0.0
        left_sq = 0.0
        for k in range(1, n):
            v = ys[k - 1]
            left += v
            left_sq += v * v
            if xs[k - 1] >= xs[k]:
                continue
            if k < min_leaf or n - k < min_leaf:
                continue
            right = total - left
            right_sq = total_sq - left_sq
            sse = (left_sq - left * left / k) + (right_sq - right * right / (n - k))
            gain = parent_sse - sse
            if gain > best_gain:
                best_gain = gain
                best_feature = f
                best_threshold = 0.5 * (xs[k - 1] + xs[k])
    return best_feature, best_threshold, best_gain


# --------------------------------------------------------------------------
# numpy fallbacks


def _subset_sums_numpy(powers):
    n = powers.shape[0]
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    table = np.zeros(1 << n)
    # sequential over players so the summation order matches the loop kernel
    for i in range(n):
        table = table + np.where(bits[:, i] == 1, powers[i], 0.0)
    return table


def _shapley_numpy(table, n, weights):
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = coalition_sizes(n)
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.sum(weights[sizes[without]] * (table[without | bit] - table[without]))
    return phi


def _permutation_numpy(table, perms):
    n_perm, n = perms.shape
    masks = np.cumsum(np.left_shift(1, perms.astype(np.int64)), axis=1)
    values = table[masks]
    prev = np.concatenate([np.full((n_perm, 1), table[0]), values[:, :-1]], axis=1)
    marg = values - prev
    phi = np.zeros(n)
    np.add.at(phi, perms.ravel(), marg.ravel())
    return phi / n_perm


def _best_split_numpy(X, y, features, min_leaf):
    n = y.shape[0]
    total = y.sum()
    total_sq = (y * y).sum()
    parent_sse = total_sq - total * total / n
    best = (-1, 0.0, 0.0)
    k = np.arange(1, n)
    for f in features:
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        ys = y[order]
        left = np.cumsum(ys)[:-1]
        left_sq = np.cumsum(ys * ys)[:-1]
        right = total - left
        right_sq = total_sq - left_sq
        sse = (left_sq - left * left / k) + (right_sq - right * right / (n - k))
        gain = parent_sse - sse
        ok = (xs[:-1] < xs[1:]) & (k >= min_leaf) & (n - k >= min_leaf) & (gain > best[2])
        if not ok.any():
            continue
        cand = np.where(ok, gain, -np.inf)
        j = int(np.argmax(cand))
        best = (int(f), 0.5 * (xs[j] + xs[j + 1]), float(cand[j]))
    return best


# --------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    subset_sums_jit = njit(_subset_sums_loop)
    shapley_jit = njit(_shapley_loop)
    permutation_jit = njit(_permutation_loop)
    best_split_jit = njit(_best_split_loop)
    _subset_sums, _shapley, _permutation, _best_split = (
        subset_sums_jit,
        shapley_jit,
        permutation_jit,
        best_split_jit,
    )
else:
    _subset_sums, _shapley, _permutation, _best_split = (
        _subset_sums_numpy,
        _shapley_numpy,
        _permutation_numpy,
        _best_split_numpy,
    )


def subset_sums(powers):
    """Value table ``v[mask] = sum(powers[i] for i in mask)`` over all bitmasks."""
    return _subset_sums(np.ascontiguousarray(powers, dtype=np.float64))


def shapley_from_table(table):
    """Exact Shapley values from a full ``2**n`` coalition value table."""
    table = np.ascontiguousarray(table, dtype=np.float64)
    n = int(table.shape[0]).bit_length() - 1
    return _shapley(table, n, shapley_weights(n))


def permutation_estimate(table, perms):
    """Average marginal contributions over the given player orderings."""
    return _permutation(
        np.ascontiguousarray(table, dtype=np.float64), np.ascontiguousarray(perms, dtype=np.int64)
    )


def best_split(X, y, features, min_leaf):
    """Variance-reduction split search.

    Returns ``(feature, threshold, gain)``; ``feature == -1`` when no split
    with positive gain satisfies ``min_leaf``. ``gain`` is the decrease in
    summed squared error, i.e. node size times the variance decrease.
    """
    f, t, g = _best_split(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(features, dtype=np.int64),
        int(min_leaf),
    )
    return int(f), float(t), float(g)
