"""Multi-head scaled dot-product attention, forward pass only."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AttentionWeights:
    """Per-head query/key/value projections, each of shape ``(d, d_k)``."""

    query: tuple
    key: tuple
    value: tuple

    def __post_init__(self):
        if not (len(self.query) == len(self.key) == len(self.value) >= 1):
            raise ValueError("need the same number (>= 1) of query, key and value matrices")
        shape = np.shape(self.query[0])
        if len(shape) != 2 or shape[1] < 1:
            raise ValueError("projections must be (d, d_k) with d_k >= 1")
        for mats in (self.query, self.key, self.value):
            for m in mats:
                if np.shape(m) != shape:
                    raise ValueError("all projections must share one shape")
                if not np.all(np.isfinite(m)):
                    raise ValueError("projection matrices must be finite")

    @property
    def head_count(self):
        return len(self.query)

    @property
    def d_k(self):
        return np.shape(self.query[0])[1]

    @classmethod
    def orthogonal(cls, d, d_k, heads, seed):
        """Seeded random orthogonal projections (QR of a Gaussian matrix)."""
        rng = np.random.default_rng(seed)

        def draw():
            a = rng.standard_normal((max(d, d_k), max(d, d_k)))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            return q[:d, :d_k]

        mats = [[draw() for _ in range(heads)] for _ in range(3)]
        return cls(tuple(mats[0]), tuple(mats[1]), tuple(mats[2]))


def softmax(logits, axis=-1):
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def attention_forward(X, weights):
    """Run every head on ``X`` (entities x features).

    Returns ``(output, attention)``: output is the head outputs concatenated
    along the last axis, ``(n, heads * d_k)``; attention is ``(heads, n, n)``
    with rows summing to one.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D (entities, features) matrix")
    d = np.shape(weights.query[0])[0]
    if X.shape[1] != d:
        raise ValueError(f"X has {X.shape[1]} features but projections expect {d}")
    scale = np.sqrt(weights.d_k)
    outs, attn = [], []
    for Wq, Wk, Wv in zip(weights.query, weights.key, weights.value):
        Q, K, V = X @ Wq, X @ Wk, X @ Wv
        A = softmax(Q @ K.T / scale, axis=-1)
        attn.append(A)
        outs.append(A @ V)
    return np.concatenate(outs, axis=1), np.stack(attn)
