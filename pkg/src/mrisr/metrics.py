"""Full-reference image quality metrics: SSIM, NRMSE, MAE, VIF.

All four operate on 2-D arrays in [0, 1] (data range 1.0) and compute in
float64. SSIM follows the original windowed formulation: 11x11 Gaussian
window, sigma 1.5, K1 = 0.01, K2 = 0.03, valid-mode filtering, mean over
the local map. NRMSE divides RMSE by the mean of the ground-truth image
(reference-first, asymmetric). VIF is the pixel-domain multi-scale
variant: 4 scales of Gaussian windows (17, 9, 5, 3 taps, sigma = N/5),
filter-then-decimate pyramids, and GSM noise variance sigma_n^2 = 2 on the
0-255 intensity scale, so [0, 1] inputs are rescaled by 255 internally.
Scales whose valid filtering region is empty (inputs under ~47 px) simply
contribute nothing to the information sums.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import DegenerateReferenceError, ShapeError

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

VIF_SCALES = 4
VIF_SIGMA_NSQ = 2.0
VIF_MIN_SIZE = 32
_VIF_EPS = 1e-10


def _as_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim != 2:
        raise ShapeError(f"expected 2-D images, got shape {x.shape}")
    return x, y


def gaussian_kernel1d(n: int, sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian window of odd length ``n``."""
    r = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    k = np.exp(-(r**2) / (2.0 * sigma**2))
    return k / k.sum()


def mae(x, y) -> float:
    """Mean absolute difference."""
    x, y = _as_pair(x, y)
    return float(np.mean(np.abs(x - y)))


def nrmse(gt, pred) -> float:
    """RMSE normalized by the mean of the ground-truth image (first argument)."""
    gt, pred = _as_pair(gt, pred)
    denom = float(gt.mean())
    if denom <= 0.0:
        raise DegenerateReferenceError("ground-truth mean is zero; NRMSE undefined")
    return float(np.sqrt(np.mean((gt - pred) ** 2))) / denom


def ssim(x, y, *, data_range: float = 1.0) -> float:
    """Structural similarity index, mean over the valid local-window map."""
    x, y = _as_pair(x, y)
    if min(x.shape) < SSIM_WIN:
        raise ShapeError(f"image {x.shape} smaller than the {SSIM_WIN}x{SSIM_WIN} SSIM window")
    k = gaussian_kernel1d(SSIM_WIN, SSIM_SIGMA)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    mu_x = kernels.correlate_valid(x, k)
    mu_y = kernels.correlate_valid(y, k)
    mu_xx = kernels.correlate_valid(x * x, k)
    mu_yy = kernels.correlate_valid(y * y, k)
    mu_xy = kernels.correlate_valid(x * y, k)

    var_x = mu_xx - mu_x**2
    var_y = mu_yy - mu_y**2
    cov = mu_xy - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def _vif_stats(ref: np.ndarray, dist: np.ndarray, k: np.ndarray):
    mu1 = kernels.correlate_valid(ref, k)
    mu2 = kernels.correlate_valid(dist, k)
    sigma1_sq = kernels.correlate_valid(ref * ref, k) - mu1**2
    sigma2_sq = kernels.correlate_valid(dist * dist, k) - mu2**2
    sigma12 = kernels.correlate_valid(ref * dist, k) - mu1 * mu2
    np.maximum(sigma1_sq, 0.0, out=sigma1_sq)
    np.maximum(sigma2_sq, 0.0, out=sigma2_sq)
    return sigma1_sq, sigma2_sq, sigma12


def vif(gt, pred) -> float:
    """Pixel-domain multi-scale Visual Information Fidelity (reference-first)."""
    gt, pred = _as_pair(gt, pred)
    if min(gt.shape) < VIF_MIN_SIZE:
        raise ShapeError(
            f"image {gt.shape} too small for {VIF_SCALES}-scale VIF (need >= {VIF_MIN_SIZE})"
        )
    ref = gt * 255.0
    dist = pred * 255.0

    num = 0.0
    den = 0.0
    for scale in range(1, VIF_SCALES + 1):
        n = 2 ** (VIF_SCALES - scale + 1) + 1
        k = gaussian_kernel1d(n, n / 5.0)
        if scale > 1:
            if min(ref.shape) < n:
                break
            ref = kernels.correlate_valid(ref, k)[::2, ::2]
            dist = kernels.correlate_valid(dist, k)[::2, ::2]
        if min(ref.shape) < n:
            break
        sigma1_sq, sigma2_sq, sigma12 = _vif_stats(ref, dist, k)

        g = sigma12 / (sigma1_sq + _VIF_EPS)
        sv_sq = sigma2_sq - g * sigma12

        small1 = sigma1_sq < _VIF_EPS
        g[small1] = 0.0
        sv_sq[small1] = sigma2_sq[small1]
        sigma1_sq[small1] = 0.0

        small2 = sigma2_sq < _VIF_EPS
        g[small2] = 0.0
        sv_sq[small2] = 0.0

        neg = g < 0.0
        sv_sq[neg] = sigma2_sq[neg]
        g[neg] = 0.0
        np.maximum(sv_sq, _VIF_EPS, out=sv_sq)

        num += float(np.sum(np.log10(1.0 + g**2 * sigma1_sq / (sv_sq + VIF_SIGMA_NSQ))))
        den += float(np.sum(np.log10(1.0 + sigma1_sq / VIF_SIGMA_NSQ)))
    if den == 0.0:
        # reference carries no local variance anywhere; fidelity is vacuous
        return 1.0
    return num / den
