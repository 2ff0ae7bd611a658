"""Backend parity and correctness of the low-level filtering/resize kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from mrisr import kernels
from mrisr.resample import resize_weights


def _random_image(rng, h=23, w=17):
    return rng.random((h, w), dtype=np.float64)


def test_backend_names():
    assert kernels.get_backend() in ("numba", "numpy")
    kernels.set_backend("numpy")
    assert kernels.get_backend() == "numpy"
    kernels.set_backend("numba")
    assert kernels.get_backend() == "numba"


def test_backend_rejects_unknown_name():
    with pytest.raises(ValueError, match="unknown kernel backend"):
        kernels.set_backend("cuda")


def test_env_flag_disables_numba():
    env = dict(os.environ, MRISR_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from mrisr import kernels; print(kernels.get_backend())"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_correlate_valid_matches_scalar_loop():
    rng = np.random.default_rng(0)
    img = _random_image(rng)
    k = rng.random(5)
    k /= k.sum()
    got = kernels.correlate_valid(img, k)
    h, w = img.shape
    n = len(k)
    expected = np.zeros((h - n + 1, w - n + 1))
    for i in range(h - n + 1):
        for j in range(w - n + 1):
            s = 0.0
            for a in range(n):
                for b in range(n):
                    s += k[a] * k[b] * img[i + a, j + b]
            expected[i, j] = s
    assert got.shape == expected.shape
    assert np.allclose(got, expected, atol=1e-12, rtol=0)


def test_correlate_valid_axis0_shape_and_error():
    img = np.ones((4, 6))
    out = kernels.correlate_valid_axis0(img, np.array([0.25, 0.5, 0.25]))
    assert out.shape == (2, 6)
    assert np.allclose(out, 1.0)
    with pytest.raises(ValueError, match="does not fit"):
        kernels.correlate_valid_axis0(np.ones((2, 3)), np.ones(5))


@pytest.mark.parametrize("op", ["correlate", "resize"])
def test_numba_numpy_bit_parity(op):
    rng = np.random.default_rng(42)
    results = {}
    for backend in ("numba", "numpy"):
        kernels.set_backend(backend)
        picks = []
        for trial in range(5):
            img = rng.random((31 + trial, 19 + trial))
            if op == "correlate":
                k = np.full(7, 1 / 7.0)
                picks.append(kernels.correlate_valid(img, k))
            else:
                starts, weights = resize_weights(img.shape[0], 9, "bicubic")
                cstarts, cweights = resize_weights(img.shape[1], 40, "bilinear")
                picks.append(kernels.resize_separable(img, starts, weights, cstarts, cweights))
        results[backend] = picks
        rng = np.random.default_rng(42)  # same images for both backends
    for a, b in zip(results["numba"], results["numpy"]):
        assert np.array_equal(a, b), "backends must agree bit-for-bit"


def test_resize_axis0_applies_weight_table():
    kernels.set_backend("numpy")
    img = np.arange(12, dtype=np.float64).reshape(6, 2)
    starts = np.array([0, 2])
    weights = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25]])
    out = kernels.resize_axis0(img, starts, weights)
    assert out.shape == (2, 2)
    assert np.allclose(out[0], 0.5 * img[0] + 0.5 * img[1])
    assert np.allclose(out[1], 0.25 * img[2] + 0.5 * img[3] + 0.25 * img[4])
