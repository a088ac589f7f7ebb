"""Conjugate Gaussian posterior for ``y = X w + noise``."""

from dataclasses import dataclass

import numpy as np


class PosteriorError(ValueError):
    pass


@dataclass(frozen=True)
class PosteriorGaussian:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def precision(self):
        return np.linalg.inv(self.covariance)


def _cholesky(matrix, what):
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise PosteriorError(f"{what} is not positive definite") from None


def bayes_posterior(X, y, prior_mean, prior_cov=None, noise_var=1.0, *, prior_precision=None):
    """Posterior over weights under a Gaussian prior and Gaussian noise.

    Precision ``X'X / s2 + inv(S0)``, mean ``cov @ (X'y / s2 + inv(S0) m0)``.
    Pass ``prior_precision`` instead of ``prior_cov`` for a (possibly
    singular) prior precision; the posterior precision must still be PD.
    Works for any ``n >= 0``, including ``n < d``.
    """
    m0 = np.atleast_1d(np.asarray(prior_mean, dtype=float))
    d = m0.shape[0]
    X = np.asarray(X, dtype=float).reshape(-1, d)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise PosteriorError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not noise_var > 0:
        raise PosteriorError("noise_var must be > 0")
    arrays = [X, y, m0]
    if (prior_cov is None) == (prior_precision is None):
        raise PosteriorError("give exactly one of prior_cov, prior_precision")
    if prior_precision is None:
        S0 = np.asarray(prior_cov, dtype=float).reshape(d, d)
        arrays.append(S0)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise PosteriorError("non-finite input")
        if not np.allclose(S0, S0.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S0).max())):
            raise PosteriorError("prior covariance is not symmetric")
        L0 = _cholesky(S0, "prior covariance")
        eye = np.eye(d)
        Linv = np.linalg.solve(L0, eye)
        P0 = Linv.T @ Linv
    else:
        P0 = np.asarray(prior_precision, dtype=float).reshape(d, d)
        arrays.append(P0)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise PosteriorError("non-finite input")

    precision = X.T @ X / noise_var + P0
    precision = 0.5 * (precision + precision.T)
    L = _cholesky(precision, "posterior precision")
    rhs = X.T @ y / noise_var + P0 @ m0
    mean = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    Linv = np.linalg.solve(L, np.eye(d))
    cov = Linv.T @ Linv
    cov = 0.5 * (cov + cov.T)
    return PosteriorGaussian(mean=mean, covariance=cov)
