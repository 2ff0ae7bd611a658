"""Independent oracle implementations for the test suite.

Everything here evaluates the mathematical definitions directly with plain
Python scalar loops (or, where a matrix norm is unavoidable, bare numpy
matvecs). Nothing imports from the package, so agreement between these
oracles and the production code is evidence for both.
"""

from __future__ import annotations

import math

import numpy as np

# ---------------------------------------------------------------------------
# metric oracles
# ---------------------------------------------------------------------------


def gaussian_taps_2d(n: int, sigma: float) -> list:
    """Normalized 2-D Gaussian window as a flat list of (dy, dx, weight)."""
    half = (n - 1) / 2.0
    taps = []
    total = 0.0
    for dy in range(n):
        for dx in range(n):
            w = math.exp(-(((dy - half) ** 2 + (dx - half) ** 2) / (2.0 * sigma * sigma)))
            taps.append((dy, dx, w))
            total += w
    return [(dy, dx, w / total) for dy, dx, w in taps]


def mae_oracle(x, y) -> float:
    xl, yl = np.asarray(x, dtype=np.float64).tolist(), np.asarray(y, dtype=np.float64).tolist()
    acc, cnt = 0.0, 0
    for row_x, row_y in zip(xl, yl):
        for a, b in zip(row_x, row_y):
            acc += abs(a - b)
            cnt += 1
    return acc / cnt


def nrmse_oracle(gt, pred) -> float:
    gl, pl = np.asarray(gt, dtype=np.float64).tolist(), np.asarray(pred, dtype=np.float64).tolist()
    sq, mean_gt, cnt = 0.0, 0.0, 0
    for row_g, row_p in zip(gl, pl):
        for a, b in zip(row_g, row_p):
            sq += (a - b) ** 2
            mean_gt += a
            cnt += 1
    mean_gt /= cnt
    return math.sqrt(sq / cnt) / mean_gt


def ssim_oracle(x, y, *, win: int = 11, sigma: float = 1.5,
                k1: float = 0.01, k2: float = 0.03, data_range: float = 1.0) -> float:
    """Sliding-window SSIM evaluated window by window with scalar sums."""
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    taps = gaussian_taps_2d(win, sigma)
    xl = np.asarray(x, dtype=np.float64).tolist()
    yl = np.asarray(y, dtype=np.float64).tolist()
    h, w = len(xl), len(xl[0])
    acc, cnt = 0.0, 0
    for i in range(h - win + 1):
        for j in range(w - win + 1):
            sx = sy = sxx = syy = sxy = 0.0
            for dy, dx, wv in taps:
                a = xl[i + dy][j + dx]
                b = yl[i + dy][j + dx]
                sx += wv * a
                sy += wv * b
                sxx += wv * a * a
                syy += wv * b * b
                sxy += wv * a * b
            var_x = sxx - sx * sx
            var_y = syy - sy * sy
            cov = sxy - sx * sy
            acc += ((2.0 * sx * sy + c1) * (2.0 * cov + c2)) / (
                (sx * sx + sy * sy + c1) * (var_x + var_y + c2)
            )
            cnt += 1
    return acc / cnt


def _filter_valid_scalar(img: list, taps: list, n: int) -> list:
    h, w = len(img), len(img[0])
    out = []
    for i in range(h - n + 1):
        row = []
        for j in range(w - n + 1):
            s = 0.0
            for dy, dx, wv in taps:
                s += wv * img[i + dy][j + dx]
            row.append(s)
        out.append(row)
    return out


def vif_oracle(gt, pred, *, scales: int = 4, sigma_nsq: float = 2.0, eps: float = 1e-10) -> float:
    """Pixel-domain multi-scale VIF evaluated with scalar loops."""
    ref = [[v * 255.0 for v in row] for row in np.asarray(gt, dtype=np.float64).tolist()]
    dist = [[v * 255.0 for v in row] for row in np.asarray(pred, dtype=np.float64).tolist()]
    num = den = 0.0
    for scale in range(1, scales + 1):
        n = 2 ** (scales - scale + 1) + 1
        taps = gaussian_taps_2d(n, n / 5.0)
        if scale > 1:
            if min(len(ref), len(ref[0])) < n:
                break
            ref = [row[::2] for row in _filter_valid_scalar(ref, taps, n)[::2]]
            dist = [row[::2] for row in _filter_valid_scalar(dist, taps, n)[::2]]
        if min(len(ref), len(ref[0])) < n:
            break
        rr = [[a * a for a in row] for row in ref]
        dd = [[a * a for a in row] for row in dist]
        rd = [[a * b for a, b in zip(r1, r2)] for r1, r2 in zip(ref, dist)]
        mu1 = _filter_valid_scalar(ref, taps, n)
        mu2 = _filter_valid_scalar(dist, taps, n)
        e_rr = _filter_valid_scalar(rr, taps, n)
        e_dd = _filter_valid_scalar(dd, taps, n)
        e_rd = _filter_valid_scalar(rd, taps, n)
        for i in range(len(mu1)):
            for j in range(len(mu1[0])):
                m1, m2 = mu1[i][j], mu2[i][j]
                s1 = max(e_rr[i][j] - m1 * m1, 0.0)
                s2 = max(e_dd[i][j] - m2 * m2, 0.0)
                s12 = e_rd[i][j] - m1 * m2
                g = s12 / (s1 + eps)
                sv = s2 - g * s12
                if s1 < eps:
                    g, sv, s1 = 0.0, s2, 0.0
                if s2 < eps:
                    g, sv = 0.0, 0.0
                if g < 0.0:
                    sv, g = s2, 0.0
                if sv <= eps:
                    sv = eps
                num += math.log10(1.0 + g * g * s1 / (sv + sigma_nsq))
                den += math.log10(1.0 + s1 / sigma_nsq)
    if den == 0.0:
        return 1.0
    return num / den


# ---------------------------------------------------------------------------
# resampling oracle
# ---------------------------------------------------------------------------


def _kernel_scalar(method: str, x: float) -> float:
    ax = abs(x)
    if method == "bilinear":
        return 1.0 - ax if ax < 1.0 else 0.0
    if method == "bicubic":
        a = -0.5
        if ax < 1.0:
            return (a + 2.0) * ax**3 - (a + 3.0) * ax**2 + 1.0
        if ax < 2.0:
            return a * (ax**3 - 5.0 * ax**2 + 8.0 * ax - 4.0)
        return 0.0
    raise ValueError(method)


def _axis_taps(n_in: int, n_out: int, method: str) -> list:
    """Per-output-pixel (index, weight) taps by brute-force kernel scan."""
    scale = n_in / n_out
    filterscale = max(scale, 1.0)
    rows = []
    for i in range(n_out):
        center = (i + 0.5) * scale
        taps = []
        for j in range(n_in):
            w = _kernel_scalar(method, (j + 0.5 - center) / filterscale)
            if w != 0.0:
                taps.append((j, w))
        total = sum(w for _, w in taps)
        rows.append([(j, w / total) for j, w in taps])
    return rows


def resize_oracle(img, out_h: int, out_w: int, method: str) -> np.ndarray:
    """Direct per-output-pixel evaluation of the separable resize."""
    arr = np.asarray(img, dtype=np.float64).tolist()
    in_h, in_w = len(arr), len(arr[0])
    row_taps = _axis_taps(in_h, out_h, method)
    col_taps = _axis_taps(in_w, out_w, method)
    tmp = []
    for taps in row_taps:
        row = []
        for j in range(in_w):
            row.append(sum(w * arr[r][j] for r, w in taps))
        tmp.append(row)
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for i in range(out_h):
        for j, taps in enumerate(col_taps):
            out[i, j] = sum(w * tmp[i][c] for c, w in taps)
    return out


# ---------------------------------------------------------------------------
# architecture arithmetic oracles
# ---------------------------------------------------------------------------


def conv_params(c_in: int, c_out: int, k: int) -> int:
    return c_in * c_out * k * k + c_out


def generator_param_count_oracle(
    *,
    in_channels: int = 1,
    out_channels: int = 1,
    base_channels: int = 64,
    growth_channels: int = 32,
    num_rrdb: int = 23,
    dense_blocks_per_rrdb: int = 3,
    convs_per_dense_block: int = 5,
) -> int:
    """Layer-by-layer parameter count of the x4 RRDB generator."""
    nf, gc = base_channels, growth_channels
    dense = 0
    for i in range(convs_per_dense_block - 1):
        dense += conv_params(nf + i * gc, gc, 3)
    dense += conv_params(nf + (convs_per_dense_block - 1) * gc, nf, 3)
    rrdb = dense_blocks_per_rrdb * dense
    total = conv_params(in_channels, nf, 3)
    total += num_rrdb * rrdb
    total += 4 * conv_params(nf, nf, 3)  # trunk conv + up1 + up2 + hr conv
    total += conv_params(nf, out_channels, 3)
    return total


def unet_stage_shapes(h: int, w: int, num_down_stages: int) -> list:
    """Spatial sizes through the encoder and mirrored decoder."""
    shapes = [(h, w)]
    for _ in range(num_down_stages):
        h, w = h // 2, w // 2
        shapes.append((h, w))
    for _ in range(num_down_stages):
        h, w = h * 2, w * 2
        shapes.append((h, w))
    return shapes


def power_iteration_sigma(weight: np.ndarray, iters: int = 50, seed: int = 0) -> float:
    """Top-singular-value estimate of the unrolled (out, in*k*k) kernel."""
    mat = np.asarray(weight, dtype=np.float64).reshape(weight.shape[0], -1)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(mat.shape[0])
    u /= np.linalg.norm(u)
    for _ in range(iters):
        v = mat.T @ u
        v /= np.linalg.norm(v)
        u = mat @ v
        u /= np.linalg.norm(u)
    return float(u @ mat @ v)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def central_difference_grads(f, tensors, eps: float = 1e-4) -> list:
    """Central-difference gradient of scalar ``f()`` w.r.t. each tensor.

    ``f`` must read the current values of ``tensors`` (torch tensors,
    modified in place between evaluations) and return a Python float.
    """
    grads = []
    for t in tensors:
        flat = t.detach().reshape(-1)
        g = np.zeros(flat.shape[0], dtype=np.float64)
        for idx in range(flat.shape[0]):
            orig = float(flat[idx])
            flat[idx] = orig + eps
            f_plus = f()
            flat[idx] = orig - eps
            f_minus = f()
            flat[idx] = orig
            g[idx] = (f_plus - f_minus) / (2.0 * eps)
        grads.append(g.reshape(tuple(t.shape)))
    return grads
