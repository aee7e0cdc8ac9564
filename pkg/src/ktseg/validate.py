"""Rule-based 3D screening of predicted regions.

Connected components (26-connectivity) of each class are measured —
volume, depth position, frame span, ellipsoid-equivalent axes,
sphericity — and tested against anatomical plausibility thresholds.
Failing kidney regions are erased; failing tumor regions become kidney
when their bounding box touches a confirmed kidney's, background
otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .volume import LabelVolume, LABEL_KIDNEY, LABEL_TUMOR

Bbox = tuple[tuple[int, int], tuple[int, int], tuple[int, int]]  # ((x0,x1),(y0,y1),(z0,z1)) inclusive

_26_CONN = np.ones((3, 3, 3), dtype=bool)


@dataclass(frozen=True)
class ValidationRules:
    """Plausibility thresholds; volumes in voxels of the 256x256xD grid,
    depth bands as fractions of (D-1), axes in voxel units."""

    kidney_min_volume: float = 19000.0
    kidney_z_band: tuple[float, float] = (0.20, 0.80)
    kidney_min_frames: int = 2
    tumor_min_volume: float = 350.0
    tumor_z_band: tuple[float, float] = (0.10, 0.90)
    tumor_min_major: float = 10.0
    tumor_min_minor: float = 3.0
    tumor_min_frames: int = 2
    tumor_min_sphericity: float = 0.29

    def __post_init__(self):
        for name in ("kidney_min_volume", "kidney_min_frames", "tumor_min_volume",
                     "tumor_min_major", "tumor_min_minor", "tumor_min_frames",
                     "tumor_min_sphericity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("kidney_z_band", "tumor_z_band"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError(f"{name} must be an ordered sub-band of [0, 1]")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ValidationRules":
        """Load thresholds from a JSON object; absent keys keep defaults."""
        raw = json.loads(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: expected a JSON object of thresholds")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"{path}: unknown rule keys {sorted(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            if key.endswith("_z_band"):
                kwargs[key] = (float(value[0]), float(value[1]))
            elif key.endswith("_frames"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class Region3D:
    """One connected component with its measured properties.

    ``voxels`` is an (N, 3) array of (x, y, z) indices; ``bbox`` is the
    inclusive (min, max) pair per axis in the same order.
    """

    class_label: int
    voxels: np.ndarray
    volume: int
    centroid: tuple[float, float, float]
    z_fraction: float
    bbox: Bbox
    frame_span: int
    major_axis: float
    minor_axis: float
    sphericity: float


def _surface_area(coords: np.ndarray) -> int:
    # exposed-face count: 0/1 transitions along each axis of the padded bitmap
    mins = coords.min(axis=0)
    dims = coords.max(axis=0) - mins + 1
    grid = np.zeros((dims[2], dims[1], dims[0]), dtype=np.int8)  # [z, y, x]
    grid[coords[:, 2] - mins[2], coords[:, 1] - mins[1], coords[:, 0] - mins[0]] = 1
    padded = np.pad(grid, 1)
    return sum(int((np.diff(padded, axis=ax) != 0).sum()) for ax in range(3))


def measure_region(coords: np.ndarray, depth: int, class_label: int) -> Region3D:
    """Properties of a voxel set given as an (N, 3) array of (x, y, z)."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2 or coords.shape[1] != 3 or coords.shape[0] == 0:
        raise ValueError("expected a non-empty (N, 3) coordinate array")
    n = coords.shape[0]
    mean = coords.mean(axis=0)
    z_fraction = 0.5 if depth == 1 else float(mean[2]) / (depth - 1)
    # population covariance of the voxel coordinates
    dev = coords.astype(np.float64) - mean
    cov = dev.T @ dev / n
    eig = np.maximum(np.linalg.eigvalsh(cov), 0.0)  # ascending
    major = 4.0 * math.sqrt(float(eig[-1]))
    minor = 4.0 * math.sqrt(float(eig[0]))
    area = _surface_area(coords)
    sphericity = math.pi ** (1.0 / 3.0) * (6.0 * n) ** (2.0 / 3.0) / area
    mins = coords.min(axis=0)
    maxs = coords.max(axis=0)
    bbox = tuple((int(mins[i]), int(maxs[i])) for i in range(3))
    frame_span = int(np.unique(coords[:, 2]).size)
    frozen = np.ascontiguousarray(coords)
    frozen.setflags(write=False)
    return Region3D(class_label, frozen, n,
                    tuple(float(m) for m in mean), z_fraction, bbox,
                    frame_span, major, minor, sphericity)


def connected_components(labels: LabelVolume, class_label: int) -> list[Region3D]:
    """Maximal 26-connected components of one class, measured."""
    mask = labels.data == class_label
    if not mask.any():
        return []
    comp, count = ndimage.label(mask, structure=_26_CONN)
    regions = []
    for i, slices in enumerate(ndimage.find_objects(comp), start=1):
        zz, yy, xx = np.nonzero(comp[slices] == i)
        coords = np.stack([xx + slices[2].start,
                           yy + slices[1].start,
                           zz + slices[0].start], axis=1)
        regions.append(measure_region(coords, labels.depth, class_label))
    return regions


def _kidney_ok(r: Region3D, rules: ValidationRules) -> bool:
    lo, hi = rules.kidney_z_band
    return (r.volume > rules.kidney_min_volume
            and lo <= r.z_fraction <= hi
            and r.frame_span >= rules.kidney_min_frames)


def _tumor_ok(r: Region3D, rules: ValidationRules) -> bool:
    lo, hi = rules.tumor_z_band
    return (r.volume > rules.tumor_min_volume
            and lo <= r.z_fraction <= hi
            and r.major_axis > rules.tumor_min_major
            and r.minor_axis > rules.tumor_min_minor
            and r.frame_span >= rules.tumor_min_frames
            and r.sphericity > rules.tumor_min_sphericity)


def validate_kidneys(regions: Sequence[Region3D], rules: ValidationRules
                     ) -> tuple[list[Region3D], list[Region3D]]:
    """Split kidney regions into (confirmed, rejected)."""
    confirmed = [r for r in regions if _kidney_ok(r, rules)]
    rejected = [r for r in regions if not _kidney_ok(r, rules)]
    return confirmed, rejected


def _boxes_intersect(a: Bbox, b: Bbox) -> bool:
    # closed intervals: touching boundary planes count as intersecting
    return all(a[i][0] <= b[i][1] and b[i][0] <= a[i][1] for i in range(3))


def validate_tumors(regions: Sequence[Region3D], kidney_bboxes: Sequence[Bbox],
                    rules: ValidationRules) -> list[str]:
    """Verdict per tumor region: keep | relabel_1 | relabel_0."""
    verdicts = []
    for r in regions:
        if _tumor_ok(r, rules):
            verdicts.append("keep")
        elif any(_boxes_intersect(r.bbox, kb) for kb in kidney_bboxes):
            verdicts.append("relabel_1")
        else:
            verdicts.append("relabel_0")
    return verdicts


class RegionRecord(NamedTuple):
    region: Region3D
    verdict: str  # kidneys: confirmed | rejected; tumors: keep | relabel_1 | relabel_0


def validate_case(labels: LabelVolume, rules: Optional[ValidationRules] = None
                  ) -> tuple[LabelVolume, list[RegionRecord]]:
    """Full screening pass: returns the cleaned volume plus one record per
    measured region for diagnostics."""
    rules = rules or ValidationRules()
    out = labels.data.copy()
    records = []

    kidneys = connected_components(labels, LABEL_KIDNEY)
    confirmed, rejected = validate_kidneys(kidneys, rules)
    for r in confirmed:
        records.append(RegionRecord(r, "confirmed"))
    for r in rejected:
        records.append(RegionRecord(r, "rejected"))
        out[r.voxels[:, 2], r.voxels[:, 1], r.voxels[:, 0]] = 0

    tumors = connected_components(labels, LABEL_TUMOR)
    kidney_bboxes = [r.bbox for r in confirmed]
    for r, verdict in zip(tumors, validate_tumors(tumors, kidney_bboxes, rules)):
        records.append(RegionRecord(r, verdict))
        if verdict == "relabel_1":
            out[r.voxels[:, 2], r.voxels[:, 1], r.voxels[:, 0]] = LABEL_KIDNEY
        elif verdict == "relabel_0":
            out[r.voxels[:, 2], r.voxels[:, 1], r.voxels[:, 0]] = 0

    return LabelVolume(out), records


def volumetric_validate(labels: LabelVolume,
                        rules: Optional[ValidationRules] = None) -> LabelVolume:
    return validate_case(labels, rules)[0]


REGION_CSV_COLUMNS = (
    "class_label", "verdict", "volume",
    "centroid_x", "centroid_y", "centroid_z", "z_fraction",
    "x_min", "x_max", "y_min", "y_max", "z_min", "z_max",
    "frame_span", "major_axis", "minor_axis", "sphericity",
)


def write_region_report(path: Union[str, Path],
                        records: Sequence[RegionRecord]) -> None:
    """One CSV row per measured region with all properties and the verdict."""
    lines = [",".join(REGION_CSV_COLUMNS)]
    for rec in records:
        r = rec.region
        (x0, x1), (y0, y1), (z0, z1) = r.bbox
        lines.append(",".join((
            str(r.class_label), rec.verdict, str(r.volume),
            f"{r.centroid[0]:.6f}", f"{r.centroid[1]:.6f}", f"{r.centroid[2]:.6f}",
            f"{r.z_fraction:.6f}",
            str(x0), str(x1), str(y0), str(y1), str(z0), str(z1),
            str(r.frame_span), f"{r.major_axis:.6f}", f"{r.minor_axis:.6f}",
            f"{r.sphericity:.6f}",
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_region_report(path: Union[str, Path]) -> list[RegionRecord]:
    """Parse a region CSV back into records.

    The voxel lists are not stored in the CSV, so the regions come back
    with an empty coordinate array; every measured property survives.
    """
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or tuple(lines[0].split(",")) != REGION_CSV_COLUMNS:
        raise ValueError(f"{path}: not a region report")
    no_voxels = np.empty((0, 3), dtype=np.int64)
    out = []
    for line in lines[1:]:
        c = line.split(",")
        if len(c) != len(REGION_CSV_COLUMNS):
            raise ValueError(f"{path}: malformed row {line!r}")
        region = Region3D(
            int(c[0]), no_voxels, int(c[2]),
            (float(c[3]), float(c[4]), float(c[5])), float(c[6]),
            ((int(c[7]), int(c[8])), (int(c[9]), int(c[10])),
             (int(c[11]), int(c[12]))),
            int(c[13]), float(c[14]), float(c[15]), float(c[16]))
        out.append(RegionRecord(region, c[1]))
    return out
