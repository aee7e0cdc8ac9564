"""2D slice primitives: rounding, sampling, resizing, histogram ops,
box-filter morphology.

Everything operates on single slices indexed ``[y, x]``. Filters with a
square window use exact integer box sums over an integral image, so the
results are bit-identical to brute-force evaluation. Rounding is always
half away from zero.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero (like C's round)."""
    x = np.asarray(x, dtype=np.float64)
    return np.trunc(x + np.copysign(0.5, x))


def _sample_coords(n_out: int, n_src: int) -> np.ndarray:
    # half-pixel centers: output pixel d looks at source (d+0.5)*scale-0.5
    return (np.arange(n_out, dtype=np.float64) + 0.5) * (n_src / n_out) - 0.5


def sample_bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                    oob: str = "clamp") -> np.ndarray:
    """Bilinear lookup of ``img`` at float coordinate arrays (broadcast).

    ``oob="clamp"`` extends edge pixels; ``oob="zero"`` treats everything
    outside the grid as 0.
    """
    h, w = img.shape
    src = np.asarray(img, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    if oob == "zero":
        # one zero ring covers the partial-support band (-1, 0); anything
        # farther out has no real pixel in its support and is exactly 0
        inside = (ys > -1.0) & (ys < h) & (xs > -1.0) & (xs < w)
        src = np.pad(src, 1)
        ys = np.clip(ys + 1.0, 0.0, h + 1.0)
        xs = np.clip(xs + 1.0, 0.0, w + 1.0)
        h += 2
        w += 2
    else:
        inside = None
        ys = np.clip(ys, 0.0, h - 1.0)
        xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    ty = ys - y0
    tx = xs - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    top = src[y0, x0] * (1.0 - tx) + src[y0, x1] * tx
    bot = src[y1, x0] * (1.0 - tx) + src[y1, x1] * tx
    out = top * (1.0 - ty) + bot * ty
    if inside is not None:
        out = np.where(inside, out, 0.0)
    return out


def sample_nearest(img: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                   oob: str = "clamp") -> np.ndarray:
    h, w = img.shape
    yi = round_half_away(ys).astype(np.int64)
    xi = round_half_away(xs).astype(np.int64)
    if oob == "zero":
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        out = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)].copy()
        out[~inside] = 0
        return out
    return img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]


def resize(img: np.ndarray, out_h: int, out_w: int, *,
           method: str = "bilinear") -> np.ndarray:
    """Resize one slice with half-pixel-center coordinate mapping.

    ``bilinear`` (edge-clamped, float64 result) for intensities,
    ``nearest`` (same dtype) for label planes.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target dims must be positive, got {(out_h, out_w)}")
    if img.shape == (out_h, out_w):
        return img.astype(np.float64) if method == "bilinear" else img.copy()
    ys = _sample_coords(out_h, img.shape[0])[:, None]
    xs = _sample_coords(out_w, img.shape[1])[None, :]
    if method == "nearest":
        return sample_nearest(img, np.broadcast_to(ys, (out_h, out_w)),
                              np.broadcast_to(xs, (out_h, out_w)))
    return sample_bilinear(img, ys, xs)


def normalize_u8(img: np.ndarray) -> np.ndarray:
    """Min-max scale one slice to uint8 0..255; a constant slice maps to 0."""
    img = np.asarray(img, dtype=np.float64)
    lo = img.min()
    hi = img.max()
    if hi == lo:
        return np.zeros(img.shape, dtype=np.uint8)
    scaled = (img - lo) / (hi - lo) * 255.0
    return round_half_away(scaled).astype(np.uint8)


def hist_equalize(img: np.ndarray) -> np.ndarray:
    """Classic CDF histogram equalization of a uint8 slice."""
    if img.dtype != np.uint8:
        raise ValueError("hist_equalize expects uint8 input")
    counts = np.bincount(img.ravel(), minlength=256)
    cdf = counts.cumsum()
    n = img.size
    cdf_min = cdf[counts.nonzero()[0][0]]
    if n == cdf_min:  # single gray level, nothing to spread
        return img.copy()
    table = round_half_away((cdf - cdf_min) / (n - cdf_min) * 255.0)
    return table.astype(np.uint8)[img]


def otsu_threshold(img: np.ndarray) -> tuple[int, np.ndarray]:
    """Otsu's threshold on a uint8 slice, returning (threshold, mask).

    Exhaustive scan of t in 0..255 maximizing the between-class variance
    of the split (values <= t) / (values > t); ties resolve to the lowest
    t. The mask is ``img > t``, so a flat slice yields an empty mask.
    """
    if img.dtype != np.uint8:
        raise ValueError("otsu_threshold expects uint8 input")
    counts = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    occupied = counts.nonzero()[0]
    if occupied.size == 1:  # flat slice: threshold at the level, mask empty
        t = int(occupied[0])
        return t, (img > t).astype(np.uint8)
    n = counts.sum()
    levels = np.arange(256, dtype=np.float64)
    w0 = counts.cumsum()
    moment0 = (counts * levels).cumsum()
    w1 = n - w0
    total = moment0[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        mu0 = moment0 / w0
        mu1 = (total - moment0) / w1
        sigma_b = w0 * w1 * (mu0 - mu1) ** 2
    sigma_b[~np.isfinite(sigma_b)] = -1.0
    t = int(np.argmax(sigma_b))
    return t, (img > t).astype(np.uint8)


def box_sum(img: np.ndarray, k: int, *, pad: str = "zero") -> np.ndarray:
    """Sum over the k x k window centered on each pixel (k odd).

    Integer inputs stay exact (int64 integral image). ``pad`` is "zero"
    or "replicate" for how the window reads beyond the edge.
    """
    if k % 2 == 0:
        raise ValueError("box window must be odd")
    r = k // 2
    mode = "edge" if pad == "replicate" else "constant"
    padded = np.pad(np.asarray(img, dtype=np.int64), r, mode=mode)
    ii = np.pad(padded.cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    return ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]


def median_filter_binary(mask: np.ndarray, k: int = 9) -> np.ndarray:
    """Median of a binary mask: majority vote over the k x k window,
    replicate-padded."""
    majority = k * k // 2 + 1
    return (box_sum(mask != 0, k, pad="replicate") >= majority).astype(np.uint8)


def mean_filter_binarize(mask: np.ndarray, k: int = 15) -> np.ndarray:
    """Window mean of a binary mask re-binarized at 0.5 (replicate-padded)."""
    # mean >= 0.5 over the k*k window <=> integer sum >= ceil(k*k/2)
    need = (k * k + 1) // 2
    return (box_sum(mask != 0, k, pad="replicate") >= need).astype(np.uint8)


def erode(mask: np.ndarray, k: int) -> np.ndarray:
    """Square erosion; outside the image counts as background."""
    return (box_sum(mask != 0, k) == k * k).astype(np.uint8)


def dilate(mask: np.ndarray, k: int) -> np.ndarray:
    return (box_sum(mask != 0, k) >= 1).astype(np.uint8)


def morph_open(mask: np.ndarray, k: int) -> np.ndarray:
    """Square opening (erosion then dilation), zero-padded erosion."""
    return dilate(erode(mask, k), k)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background pockets not 4-connected to the slice border."""
    return ndimage.binary_fill_holes(mask != 0).astype(np.uint8)
