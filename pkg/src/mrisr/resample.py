"""Bilinear and bicubic resampling with explicit, reproducible weight tables.

Conventions (fixed so that an independent oracle can recompute every
weight; see also docs/resampling.md):

* Half-pixel centers: input pixel ``j`` is centered at ``j + 0.5``; output
  pixel ``i`` of an ``n_in -> n_out`` resize maps to the input coordinate
  ``(i + 0.5) * n_in / n_out``.
* Kernels: ``triangle(x) = max(0, 1 - |x|)`` (support 1) for bilinear and
  the Keys cubic with ``a = -0.5`` (support 2) for bicubic.
* Antialiasing on downscale: when ``n_in > n_out`` the kernel is stretched
  by ``scale = n_in / n_out``, i.e. weights are ``k((j + 0.5 - center) / scale)``,
  which turns ``x4`` bilinear decimation into footprint-weighted averaging
  (interior rows use the 8-tap table [1,3,5,7,7,5,3,1]/32). Upscaling uses
  the unstretched kernel.
* Borders: the tap window is intersected with the valid index range and the
  surviving weights are renormalized to sum to 1.

Weights are built per axis and applied separably through
:mod:`mrisr.kernels`, so constants are reproduced exactly and downscaling
never expands the value range.
"""

from __future__ import annotations

import numpy as np

from . import kernels

SCALE = 4

_SUPPORT = {"bilinear": 1.0, "bicubic": 2.0}


def kernel_value(method: str, x: float) -> float:
    """Evaluate the 1-D interpolation kernel at ``x``."""
    ax = abs(x)
    if method == "bilinear":
        return 1.0 - ax if ax < 1.0 else 0.0
    if method == "bicubic":
        # Keys cubic, a = -0.5
        a = -0.5
        if ax < 1.0:
            return (a + 2.0) * ax**3 - (a + 3.0) * ax**2 + 1.0
        if ax < 2.0:
            return a * (ax**3 - 5.0 * ax**2 + 8.0 * ax - 4.0)
        return 0.0
    raise ValueError(f"unsupported resampling method {method!r}")


def resize_weights(n_in: int, n_out: int, method: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-output-pixel tap table for a 1-D resize.

    Returns ``(starts, weights)`` where output pixel ``i`` is
    ``sum_t weights[i, t] * x[starts[i] + t]``. Rows are zero-padded to a
    uniform tap count so the table is rectangular.
    """
    if method not in _SUPPORT:
        raise ValueError(f"unsupported resampling method {method!r}")
    if n_in < 1 or n_out < 1:
        raise ValueError("sizes must be positive")
    scale = n_in / n_out
    filterscale = max(scale, 1.0)
    support = _SUPPORT[method] * filterscale

    spans: list[tuple[int, list[float]]] = []
    max_taps = 0
    for i in range(n_out):
        center = (i + 0.5) * scale
        jmin = max(int(center - support + 0.5), 0)
        jmax = min(int(center + support + 0.5), n_in)
        w = [kernel_value(method, (j + 0.5 - center) / filterscale) for j in range(jmin, jmax)]
        total = sum(w)
        w = [v / total for v in w]
        spans.append((jmin, w))
        max_taps = max(max_taps, len(w))

    starts = np.zeros(n_out, dtype=np.int64)
    weights = np.zeros((n_out, max_taps), dtype=np.float64)
    for i, (jmin, w) in enumerate(spans):
        # keep starts[i] + max_taps within bounds; padding weights stay zero
        shift = max(0, jmin + max_taps - n_in)
        starts[i] = jmin - shift
        weights[i, shift : shift + len(w)] = w
    return starts, weights


def resize(img: np.ndarray, out_shape: tuple[int, int], method: str = "bilinear") -> np.ndarray:
    """Resize a 2-D image to ``out_shape`` with the named kernel."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {img.shape}")
    out_h, out_w = out_shape
    row_starts, row_weights = resize_weights(img.shape[0], out_h, method)
    col_starts, col_weights = resize_weights(img.shape[1], out_w, method)
    work = np.ascontiguousarray(img, dtype=np.float64)
    return kernels.resize_separable(work, row_starts, row_weights, col_starts, col_weights)


def downscale4_bilinear(hr: np.ndarray) -> np.ndarray:
    """Antialiased x4 bilinear downsampling (the HR -> LR degradation).

    Requires a square input with side divisible by 4.
    """
    hr = np.asarray(hr)
    if hr.ndim != 2 or hr.shape[0] != hr.shape[1]:
        raise ValueError(f"expected a square 2-D image, got shape {hr.shape}")
    if hr.shape[0] % SCALE != 0:
        raise ValueError(f"side {hr.shape[0]} is not divisible by {SCALE}")
    return resize(hr, (hr.shape[0] // SCALE, hr.shape[1] // SCALE), "bilinear")


def upscale4(lr: np.ndarray, method: str) -> np.ndarray:
    """x4 upscaling with ``bilinear`` or ``bicubic``, clipped to [0, 1].

    The clip absorbs bicubic overshoot; bilinear weights are nonnegative so
    it only trims floating-point noise there.
    """
    lr = np.asarray(lr)
    if lr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {lr.shape}")
    out = resize(lr, (lr.shape[0] * SCALE, lr.shape[1] * SCALE), method)
    return np.clip(out, 0.0, 1.0)
