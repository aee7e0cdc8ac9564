"""Slice-wise CT preparation: body-mask extraction, table removal,
polynomial-smoothed centering/zooming, and the inverse mapping that
carries predictions back to the original grid.

Per slice: resize to 512x512, min-max normalize to 0..255, find the body
(equalize -> Otsu -> median 9x9 -> mean 15x15 -> fill holes -> open
99x99), blank everything outside it, then recenter/zoom on the body
bounding box and downsize to 256x256. The center/zoom track is smoothed
across slices with a degree-4 least-squares polynomial so single noisy
slices cannot jerk the crop around. Labels ride the identical geometric
path with nearest sampling and no intensity ops.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from . import imops
from .volume import CtVolume, LabelVolume

WORK_SIZE = 512
OUT_SIZE = 256
BBOX_MARGIN = 10
ZOOM_MIN = 1.0
ZOOM_MAX = 4.0
POLY_DEGREE = 4


class RawTransform(NamedTuple):
    cx: float
    cy: float
    zoom: float
    valid: bool


@dataclass(frozen=True)
class SliceTransform:
    """Per-slice crop parameters on the 512-grid, raw and smoothed."""

    slice_index: int
    raw_cx: float
    raw_cy: float
    raw_zoom: float
    smooth_cx: float
    smooth_cy: float
    smooth_zoom: float
    valid: bool

    def __post_init__(self):
        if self.raw_zoom < 1.0 or self.smooth_zoom < 1.0:
            raise ValueError("zoom must be >= 1")


def make_transform(slice_index: int, cx: float, cy: float, zoom: float,
                   valid: bool = True) -> SliceTransform:
    """Transform with identical raw and smoothed parameters (tests, tools)."""
    return SliceTransform(slice_index, cx, cy, zoom, cx, cy, zoom, valid)


@dataclass(frozen=True)
class PreprocessedCase:
    ct: CtVolume
    labels: Optional[LabelVolume]
    transforms: tuple[SliceTransform, ...]
    original_dims: tuple[int, int, int]  # (W, H, D)

    def __post_init__(self):
        if len(self.transforms) != self.ct.depth:
            raise ValueError("one transform per slice required")
        if self.labels is not None and self.labels.shape != self.ct.shape:
            raise ValueError("label dims must match ct dims")


def body_mask(norm_slice: np.ndarray) -> np.ndarray:
    """Binary body region of a normalized (0..255 uint8) slice.

    Equalization feeds Otsu only; median + mean filters despeckle, hole
    filling solidifies the interior, and the 99x99 opening drops thin
    structures such as the patient table.
    """
    eq = imops.hist_equalize(norm_slice)
    _, rough = imops.otsu_threshold(eq)
    m = imops.median_filter_binary(rough, 9)
    m = imops.mean_filter_binarize(m, 15)
    m = imops.fill_holes(m)
    return imops.morph_open(m, 99)


def compute_raw_transform(mask: np.ndarray) -> RawTransform:
    """Center/zoom of the tight body bounding box; empty mask -> identity.

    Zoom fills the 512 frame with the box plus a 10 px margin, clamped to
    [1, 4] so a full-frame body stays untouched and a tiny one is not
    magnified without bound.
    """
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return RawTransform(256.0, 256.0, 1.0, False)
    cx = (int(xs.min()) + int(xs.max()) + 1) / 2.0
    cy = (int(ys.min()) + int(ys.max()) + 1) / 2.0
    side = max(int(xs.max()) - int(xs.min()) + 1,
               int(ys.max()) - int(ys.min()) + 1)
    zoom = WORK_SIZE / (side + 2 * BBOX_MARGIN)
    return RawTransform(cx, cy, float(np.clip(zoom, ZOOM_MIN, ZOOM_MAX)), True)


def smooth_transforms(raws: Sequence[RawTransform]) -> list[SliceTransform]:
    """Least-squares polynomial smoothing of cx/cy/zoom over slice index.

    Only valid slices contribute to the fit; every slice (valid or not)
    receives the evaluated polynomial. Degree is 4, reduced to
    (valid_count - 1) when fewer than five slices qualify. Smoothed zoom
    is clamped back to >= 1. With no valid slice at all, every transform
    is the flagged identity.
    """
    n = len(raws)
    if n == 0:
        return []
    valid_idx = np.array([i for i, r in enumerate(raws) if r.valid], dtype=np.float64)
    all_idx = np.arange(n, dtype=np.float64)
    if valid_idx.size == 0:
        return [SliceTransform(i, r.cx, r.cy, r.zoom,
                               256.0, 256.0, 1.0, False)
                for i, r in enumerate(raws)]
    # indices mapped to [-1, 1] for conditioning; same least-squares
    # solution as fitting on raw indices, evaluated identically
    span = max(n - 1, 1)
    tv = 2.0 * valid_idx / span - 1.0
    ta = 2.0 * all_idx / span - 1.0
    degree = min(POLY_DEGREE, valid_idx.size - 1)
    smoothed = {}
    for name in ("cx", "cy", "zoom"):
        values = np.array([getattr(raws[int(i)], name) for i in valid_idx])
        coef = np.polyfit(tv, values, degree)
        smoothed[name] = np.polyval(coef, ta)
    zoom = np.maximum(smoothed["zoom"], ZOOM_MIN)
    return [SliceTransform(i, raws[i].cx, raws[i].cy, raws[i].zoom,
                           float(smoothed["cx"][i]), float(smoothed["cy"][i]),
                           float(zoom[i]), raws[i].valid)
            for i in range(n)]


def _transform_grid(t: SliceTransform) -> tuple[np.ndarray, np.ndarray]:
    c = np.arange(WORK_SIZE, dtype=np.float64)
    xs = (c - WORK_SIZE / 2) / t.smooth_zoom + t.smooth_cx
    ys = (c - WORK_SIZE / 2) / t.smooth_zoom + t.smooth_cy
    shape = (WORK_SIZE, WORK_SIZE)
    return np.broadcast_to(ys[:, None], shape), np.broadcast_to(xs[None, :], shape)


def apply_transform(img: np.ndarray, t: SliceTransform, *,
                    method: str = "bilinear") -> np.ndarray:
    """Recenter/zoom one 512x512 slice: output (u, v) reads the input at
    ((u-256)/zoom + cx, (v-256)/zoom + cy); outside the grid reads 0."""
    if img.shape != (WORK_SIZE, WORK_SIZE):
        raise ValueError(f"expected {WORK_SIZE}x{WORK_SIZE} input, got {img.shape}")
    gy, gx = _transform_grid(t)
    if method == "nearest":
        return imops.sample_nearest(img, gy, gx, oob="zero")
    return imops.sample_bilinear(img, gy, gx, oob="zero")


def preprocess_case(ct: CtVolume, labels: Optional[LabelVolume] = None
                    ) -> PreprocessedCase:
    """Run the full slice chain over a case; labels are optional."""
    if labels is not None and labels.shape != ct.shape:
        raise ValueError("label dims must match ct dims")
    depth, h0, w0 = ct.data.shape
    masked = []
    raws = []
    for z in range(depth):
        s512 = imops.resize(ct.data[z], WORK_SIZE, WORK_SIZE)
        norm = imops.normalize_u8(s512)
        mask = body_mask(norm)
        raws.append(compute_raw_transform(mask))
        masked.append(norm * mask)  # mask multiplies the non-equalized slice
    transforms = smooth_transforms(raws)

    out_ct = np.empty((depth, OUT_SIZE, OUT_SIZE), dtype=np.float32)
    for z in range(depth):
        warped = apply_transform(masked[z], transforms[z])
        out_ct[z] = imops.resize(warped, OUT_SIZE, OUT_SIZE).astype(np.float32)

    out_labels = None
    if labels is not None:
        lab = np.empty((depth, OUT_SIZE, OUT_SIZE), dtype=np.uint8)
        for z in range(depth):
            l512 = imops.resize(labels.data[z], WORK_SIZE, WORK_SIZE,
                                method="nearest")
            warped = apply_transform(l512, transforms[z], method="nearest")
            lab[z] = imops.resize(warped, OUT_SIZE, OUT_SIZE, method="nearest")
        out_labels = LabelVolume(lab)

    return PreprocessedCase(CtVolume(out_ct, ct.spacing), out_labels,
                            tuple(transforms), (w0, h0, depth))


def invert_labels(pred: LabelVolume, transforms: Sequence[SliceTransform],
                  original_dims: tuple[int, int, int]) -> LabelVolume:
    """Map a 256x256xD prediction back onto the original grid.

    Per slice: upscale to 512 (nearest), invert the center/zoom by
    sampling at ((x-cx)*zoom + 256, (y-cy)*zoom + 256), then resize to
    the original in-plane dims (nearest throughout).
    """
    w0, h0, d0 = original_dims
    if pred.depth != d0 or len(transforms) != d0:
        raise ValueError("prediction depth, transforms and original depth must agree")
    out = np.empty((d0, h0, w0), dtype=np.uint8)
    c = np.arange(WORK_SIZE, dtype=np.float64)
    for z in range(d0):
        t = transforms[z]
        up = imops.resize(pred.data[z], WORK_SIZE, WORK_SIZE, method="nearest")
        xs = (c - t.smooth_cx) * t.smooth_zoom + WORK_SIZE / 2
        ys = (c - t.smooth_cy) * t.smooth_zoom + WORK_SIZE / 2
        shape = (WORK_SIZE, WORK_SIZE)
        inv = imops.sample_nearest(up, np.broadcast_to(ys[:, None], shape),
                                   np.broadcast_to(xs[None, :], shape), oob="zero")
        out[z] = imops.resize(inv, h0, w0, method="nearest")
    return LabelVolume(out)


_TSV_COLUMNS = ("slice_index", "raw_cx", "raw_cy", "raw_zoom",
                "smooth_cx", "smooth_cy", "smooth_zoom", "valid")


def write_transforms(path: Union[str, Path],
                     transforms: Sequence[SliceTransform]) -> None:
    """Tab-separated transform log, one line per slice; floats as repr so
    they round-trip exactly."""
    lines = ["\t".join(_TSV_COLUMNS)]
    for t in transforms:
        lines.append("\t".join((
            str(t.slice_index),
            repr(t.raw_cx), repr(t.raw_cy), repr(t.raw_zoom),
            repr(t.smooth_cx), repr(t.smooth_cy), repr(t.smooth_zoom),
            "1" if t.valid else "0",
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_transforms(path: Union[str, Path]) -> list[SliceTransform]:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or tuple(lines[0].split("\t")) != _TSV_COLUMNS:
        raise ValueError(f"{path}: not a transforms table")
    out = []
    for line in lines[1:]:
        cells = line.split("\t")
        if len(cells) != len(_TSV_COLUMNS):
            raise ValueError(f"{path}: malformed row {line!r}")
        out.append(SliceTransform(
            int(cells[0]),
            float(cells[1]), float(cells[2]), float(cells[3]),
            float(cells[4]), float(cells[5]), float(cells[6]),
            cells[7] == "1",
        ))
    return out
