import numpy as np
import pytest

from histml import kernels
from histml._accel import njit

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

VARIANTS = ["loop", "numpy"] + (["jit"] if HAVE_NUMBA else [])


def kernel(name, variant):
    loop = getattr(kernels, f"_{name}_loop")
    if variant == "loop":
        return loop
    if variant == "numpy":
        return getattr(kernels, f"_{name}_numpy")
    return njit(loop)


def random_table(rng, n):
    t = rng.normal(size=1 << n)
    t[0] = 0.0
    return t


def test_shapley_weights_sum_per_player():
    for n in range(1, 10):
        w = kernels.shapley_weights(n)
        sizes = np.arange(n)
        # each player sees C(n-1, s) coalitions of size s
        from math import comb

        assert sum(comb(n - 1, s) * w[s] for s in sizes) == pytest.approx(1.0, abs=1e-15)


def test_coalition_sizes():
    assert kernels.coalition_sizes(3).tolist() == [0, 1, 1, 2, 1, 2, 2, 3]


@pytest.mark.parametrize("variant", VARIANTS)
def test_subset_sums(variant):
    p = np.array([1.0, 2.0, 4.0])
    assert kernel("subset_sums", variant)(p).tolist() == [0, 1, 2, 3, 4, 5, 6, 7]


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_shapley_variants_agree(variant, n):
    rng = np.random.default_rng(n)
    t = random_table(rng, n)
    w = kernels.shapley_weights(n)
    ref = kernels._shapley_loop(t, n, w)
    np.testing.assert_allclose(kernel("shapley", variant)(t, n, w), ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_permutation_variants_agree(variant):
    rng = np.random.default_rng(3)
    n = 6
    t = random_table(rng, n)
    perms = rng.permuted(np.tile(np.arange(n), (50, 1)), axis=1)
    ref = kernels._permutation_loop(t, perms)
    np.testing.assert_allclose(kernel("permutation", variant)(t, perms), ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_best_split_variants_agree(variant):
    rng = np.random.default_rng(5)
    for _ in range(20):
        X = rng.normal(size=(30, 4)).round(1)  # ties exercise the threshold rule
        y = X[:, 2] * 3 + rng.normal(scale=0.1, size=30)
        feats = np.array([0, 2, 3])
        ref = kernels._best_split_loop(X, y, feats, 2)
        got = kernel("best_split", variant)(X, y, feats, 2)
        assert int(got[0]) == int(ref[0])
        assert got[1] == pytest.approx(ref[1], abs=1e-12)
        assert got[2] == pytest.approx(ref[2], rel=1e-9)


def test_best_split_finds_step():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    f, t, g = kernels.best_split(X, y, np.array([0]), 1)
    assert (f, t) == (0, 1.5)
    assert g == pytest.approx(1.0)  # SSE 1.0 -> 0


def test_best_split_constant_target():
    X = np.arange(6.0).reshape(-1, 1)
    f, _, _ = kernels.best_split(X, np.ones(6), np.array([0]), 1)
    assert f == -1


def test_env_flag_selects_numpy(tmp_path):
    import subprocess
    import sys

    code = "from histml import kernels, _accel; print(_accel.USE_NUMBA, kernels._shapley.__name__)"
    out = subprocess.run(
        [sys.executable, "-c", code], env={"HISTML_DISABLE_NUMBA": "1", "PATH": ""}, capture_output=True, text=True
    )
    assert out.stdout.split() == ["False", "_shapley_numpy"]
