"""Domain transforms applied to raw features before weighting.

All transforms are strictly increasing on their domain and work on scalars
or numpy arrays alike.
"""

from dataclasses import dataclass

import numpy as np


class TransformDomainError(ValueError):
    """Input outside a transform's domain (e.g. log of zero)."""

    def __init__(self, message, feature=None):
        self.feature = feature
        if feature is not None:
            message = f"{feature}: {message}"
        super().__init__(message)


def _positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class Identity:
    kind = "identity"

    def __call__(self, x):
        return x * 1.0

    def check(self, x):
        pass

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class SqrtScaled:
    """``sqrt(x / divisor)``; population in heads -> sqrt of millions."""

    divisor: float
    kind = "sqrt_scaled"

    def __post_init__(self):
        _positive("divisor", self.divisor)

    def __call__(self, x):
        return np.sqrt(x / self.divisor)

    def check(self, x):
        if np.any(np.asarray(x) < 0):
            raise TransformDomainError("sqrt_scaled needs x >= 0")

    def to_dict(self):
        return {"kind": self.kind, "divisor": self.divisor}


@dataclass(frozen=True)
class LogPlusOne:
    kind = "log1p"

    def __call__(self, x):
        return np.log1p(x)

    def check(self, x):
        if np.any(np.asarray(x) <= -1):
            raise TransformDomainError("log1p needs x > -1")

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class PowerScaled:
    """``(x / divisor) ** exponent`` with ``0 < exponent <= 1``."""

    divisor: float
    exponent: float
    kind = "power_scaled"

    def __post_init__(self):
        _positive("divisor", self.divisor)
        if not 0 < self.exponent <= 1:
            raise ValueError(f"exponent must be in (0, 1], got {self.exponent!r}")

    def __call__(self, x):
        return np.power(x / self.divisor, self.exponent)

    def check(self, x):
        if np.any(np.asarray(x) < 0):
            raise TransformDomainError("power_scaled needs x >= 0")

    def to_dict(self):
        return {"kind": self.kind, "divisor": self.divisor, "exponent": self.exponent}


@dataclass(frozen=True)
class Log:
    kind = "log"

    def __call__(self, x):
        return np.log(x)

    def check(self, x):
        if np.any(np.asarray(x) <= 0):
            raise TransformDomainError("log needs x > 0")

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class SigmoidScaled:
    """Logistic ``1 / (1 + exp(-x / divisor))``."""

    divisor: float
    kind = "sigmoid_scaled"

    def __post_init__(self):
        _positive("divisor", self.divisor)

    def __call__(self, x):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float) / self.divisor))

    def check(self, x):
        pass

    def to_dict(self):
        return {"kind": self.kind, "divisor": self.divisor}


TransformKind = Identity | SqrtScaled | LogPlusOne | PowerScaled | Log | SigmoidScaled

_KINDS = {cls.kind: cls for cls in (Identity, SqrtScaled, LogPlusOne, PowerScaled, Log, SigmoidScaled)}


def transform_from_dict(spec):
    """Build a transform from its scenario-file form, e.g. ``{"kind": "log"}``."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _KINDS:
        raise ValueError(f"unknown transform kind {kind!r}; expected one of {sorted(_KINDS)}")
    return _KINDS[kind](**spec)


def apply_transform(kind, x, feature=None):
    """Apply ``kind`` to ``x`` after checking its domain."""
    try:
        kind.check(x)
    except TransformDomainError as exc:
        raise TransformDomainError(str(exc), feature=feature) from None
    out = kind(x)
    if np.ndim(out) == 0:
        return float(out)
    return out


def transform_features(entity, config):
    """Transform the measurement means of one entity.

    Uncertainty is never pushed through the transform analytically; Monte Carlo
    callers transform each sampled draw instead.
    """
    missing = [f for f in entity.features if f not in config]
    if missing:
        raise KeyError(f"no transform configured for feature(s): {', '.join(missing)}")
    return {f: apply_transform(config[f], uv.mean, feature=f) for f, uv in entity.features.items()}


def transform_matrix(X, feature_names, config):
    """Column-wise transform of an ``(entities, features)`` array."""
    X = np.asarray(X, dtype=float)
    out = np.empty_like(X)
    for j, f in enumerate(feature_names):
        if f not in config:
            raise KeyError(f"no transform configured for feature: {f}")
        out[..., j] = apply_transform(config[f], X[..., j], feature=f)
    return out
