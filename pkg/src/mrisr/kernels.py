"""Low-level image kernels with a numba fast path and a pure-numpy fallback.

Two operations live here because they dominate metric and resampling
runtime: separable valid-mode correlation (the windowed filter behind
SSIM/VIF local statistics) and separable weighted resampling (the resize
primitive). Both backends accumulate taps in the same order, so results
agree to the last bit and the rest of the package never needs to know
which one is active.

Backend selection: numba is used when importable unless the environment
variable ``MRISR_NO_NUMBA`` is set to 1/true/yes. Tests and benchmarks can
switch at runtime with :func:`set_backend`.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "MRISR_NO_NUMBA"

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False


def _env_disables_numba() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes")


_backend = "numpy" if (_env_disables_numba() or not _HAVE_NUMBA) else "numba"


def get_backend() -> str:
    """Name of the active backend: ``"numba"`` or ``"numpy"``."""
    return _backend


def set_backend(name: str) -> None:
    """Select the kernel backend at runtime (overrides the env flag)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    _backend = name


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------


def _correlate_valid_axis0_np(img: np.ndarray, k1d: np.ndarray) -> np.ndarray:
    h = img.shape[0] - k1d.shape[0] + 1
    out = np.zeros((h, img.shape[1]), dtype=img.dtype)
    for t in range(k1d.shape[0]):
        out += k1d[t] * img[t : t + h, :]
    return out


def _resize_axis0_np(img: np.ndarray, starts: np.ndarray, weights: np.ndarray) -> np.ndarray:
    n_out, taps = weights.shape
    out = np.zeros((n_out, img.shape[1]), dtype=img.dtype)
    for t in range(taps):
        out += weights[:, t : t + 1] * img[starts + t, :]
    return out


# ---------------------------------------------------------------------------
# numba implementations (same tap-accumulation order as the numpy path)
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _correlate_valid_axis0_nb(img, k1d):
        h = img.shape[0] - k1d.shape[0] + 1
        w = img.shape[1]
        out = np.zeros((h, w), dtype=img.dtype)
        for t in range(k1d.shape[0]):
            kt = k1d[t]
            for i in range(h):
                for j in range(w):
                    out[i, j] += kt * img[i + t, j]
        return out

    @numba.njit(cache=True)
    def _resize_axis0_nb(img, starts, weights):
        n_out, taps = weights.shape
        w = img.shape[1]
        out = np.zeros((n_out, w), dtype=img.dtype)
        for t in range(taps):
            for i in range(n_out):
                wt = weights[i, t]
                s = starts[i] + t
                for j in range(w):
                    out[i, j] += wt * img[s, j]
        return out


# ---------------------------------------------------------------------------
# public dispatchers
# ---------------------------------------------------------------------------


def correlate_valid_axis0(img: np.ndarray, k1d: np.ndarray) -> np.ndarray:
    """Valid-mode 1-D correlation of ``img`` with ``k1d`` along axis 0.

    Output has ``img.shape[0] - len(k1d) + 1`` rows.
    """
    if img.shape[0] < k1d.shape[0]:
        raise ValueError(
            f"kernel of length {k1d.shape[0]} does not fit axis of length {img.shape[0]}"
        )
    if _backend == "numba":
        return _correlate_valid_axis0_nb(img, k1d)
    return _correlate_valid_axis0_np(img, k1d)


def correlate_valid(img: np.ndarray, k1d: np.ndarray) -> np.ndarray:
    """Separable valid-mode 2-D correlation with the same 1-D kernel per axis."""
    tmp = correlate_valid_axis0(img, k1d)
    return correlate_valid_axis0(np.ascontiguousarray(tmp.T), k1d).T


def resize_axis0(img: np.ndarray, starts: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Resample axis 0: ``out[i] = sum_t weights[i, t] * img[starts[i] + t]``.

    ``starts``/``weights`` come from :func:`mrisr.resample.resize_weights`;
    rows are zero-padded to a uniform tap count.
    """
    if _backend == "numba":
        return _resize_axis0_nb(img, starts, weights)
    return _resize_axis0_np(img, starts, weights)


def resize_separable(
    img: np.ndarray,
    row_starts: np.ndarray,
    row_weights: np.ndarray,
    col_starts: np.ndarray,
    col_weights: np.ndarray,
) -> np.ndarray:
    """Apply per-axis resize weight tables to a 2-D image (rows, then columns)."""
    tmp = resize_axis0(img, row_starts, row_weights)
    tmp = resize_axis0(np.ascontiguousarray(tmp.T), col_starts, col_weights)
    return np.ascontiguousarray(tmp.T)
