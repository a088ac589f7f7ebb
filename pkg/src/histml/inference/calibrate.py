"""Fit power-index weights to historical shares over the probability simplex."""

import numpy as np

from histml.allocation import AllocationError, check_simplex
from histml.transforms import transform_matrix


def project_simplex(v):
    """Euclidean projection onto ``{w >= 0, sum(w) = 1}`` (sort-and-threshold)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def share_objective(F, target):
    """Squared share error ``sum_i (100 P_i / sum P - target_i)**2`` and its gradient in ``w``."""
    F = np.asarray(F, dtype=float)
    target = np.asarray(target, dtype=float)
    colsum = F.sum(axis=0)

    def f_and_grad(w):
        P = F @ w
        S = P.sum()
        if S <= 0:
            return np.inf, np.zeros_like(w)
        s = 100.0 * P / S
        r = s - target
        # d s_i / d w_k = 100 (F_ik S - P_i colsum_k) / S**2
        grad = 200.0 * (F.T @ r * S - colsum * (P @ r)) / S**2
        return float(r @ r), grad

    return f_and_grad


def projected_gradient(f_and_grad, w0, tol=1e-10, max_iter=10_000, step0=1e-3):
    """Projected gradient descent on the simplex with backtracking.

    Each iteration tries ``step = 2 * previous step`` and halves it until the
    projected point satisfies the quadratic upper-bound (sufficient decrease)
    test ``f(w+) <= f(w) + g.(w+ - w) + |w+ - w|**2 / (2 step)``.
    Stops when one iteration improves the objective by less than ``tol``.
    Returns ``(w, objective trace)``.
    """
    w = project_simplex(w0)
    f, g = f_and_grad(w)
    trace = [f]
    step = step0
    for _ in range(max_iter):
        step *= 2.0
        while True:
            w_new = project_simplex(w - step * g)
            diff = w_new - w
            f_new, g_new = f_and_grad(w_new)
            if f_new <= f + g @ diff + (diff @ diff) / (2.0 * step) or step < 1e-20:
                break
            step *= 0.5
        improvement = f - f_new
        if improvement < 0:
            break
        w, f, g = w_new, f_new, g_new
        trace.append(f)
        if improvement < tol:
            break
    return w, trace


def calibrate_weights(initial, scenario, tol=1e-10, max_iter=10_000):
    """Minimise squared share error against the scenario's historical shares.

    ``initial`` maps feature name -> weight and must lie on the simplex;
    features it omits start at zero.
    """
    if scenario.historical_shares is None:
        raise AllocationError("historical_shares: calibration needs historical shares")
    check_simplex(initial, "initial weights")
    names = scenario.feature_names
    F = transform_matrix(scenario.means(), names, scenario.transform_config)
    target = np.array([scenario.historical_shares[e] for e in scenario.entity_names])
    w0 = np.array([initial.get(f, 0.0) for f in names])
    w, _ = projected_gradient(share_objective(F, target), w0, tol=tol, max_iter=max_iter)
    return dict(zip(names, w.tolist()))
