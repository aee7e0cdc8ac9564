"""Seeded synthetic CT cases standing in for real scan data.

A case is a static bright body ellipse on every slice, a thin bright
table strip near the bottom edge (preprocessing must remove it), two
kidney ellipsoids (label 1) and optionally a tumor ellipsoid embedded in
the left kidney (label 2), plus quantized Gaussian noise. Geometry is
chosen so the true kidney regions always pass the volumetric screening
rules after preprocessing.

stub_masks fabricates the three model outputs from a (preprocessed)
truth volume: the broad mask dilates the kidney+tumor union by one
voxel, the strict mask drops a seeded ~3% sample of the union's one
voxel inner shell, the tumor mask is exact. Corruption then injects
rectangular artifacts that each violate at least one screening rule and
sit clear of the kidneys, so screening must erase every one of them.

All randomness comes from numpy's default_rng (PCG64) seeded from the
case seed; draw order is fixed, so outputs are bit-stable across runs
and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .volume import CtVolume, LabelVolume, MaskVolume, MASK_ROLES

Box = tuple[tuple[int, int], tuple[int, int], tuple[int, int]]  # ((x0,x1),(y0,y1),(z0,z1)) inclusive

AIR_HU = -1000.0
BODY_HU = 40.0
KIDNEY_HU = 140.0
TUMOR_HU = 220.0
TABLE_HU = 340.0

# artifact kind -> (w, h, frames, roles); every kind breaks a screening rule:
#   specks/slivers are far under the volume floors (slivers also single-frame),
#   out-of-band blobs pass size but sit outside the allowed depth band
ARTIFACT_KINDS = {
    "speck_kidney": (3, 3, 3, ("kt_lax", "kt_strict")),
    "speck_tumor": (3, 3, 2, ("kt_lax", "kt_strict", "tumor")),
    "sliver_kidney": (40, 2, 1, ("kt_lax", "kt_strict")),
    "sliver_tumor": (25, 16, 1, ("kt_lax", "kt_strict", "tumor")),
    "oob_kidney": (82, 82, 3, ("kt_lax", "kt_strict")),
    "oob_tumor": (12, 12, 4, ("kt_lax", "kt_strict", "tumor")),
}


@dataclass(frozen=True)
class CorruptionSpec:
    """How many of each artifact kind to inject into the stub masks."""

    speck_kidney: int = 1
    speck_tumor: int = 1
    sliver_kidney: int = 1
    sliver_tumor: int = 1
    oob_kidney: int = 1
    oob_tumor: int = 1

    def __post_init__(self):
        for kind in ARTIFACT_KINDS:
            if getattr(self, kind) < 0:
                raise ValueError(f"{kind} count must be >= 0")

    @classmethod
    def none(cls) -> "CorruptionSpec":
        return cls(0, 0, 0, 0, 0, 0)

    @property
    def total(self) -> int:
        return sum(getattr(self, kind) for kind in ARTIFACT_KINDS)


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry and corruption recipe for one seeded case.

    dims is (W, H, D); D = 0 draws the depth from the seed (44..60).
    Kidney z centers land in the central 40% of the depth so their
    centroids always satisfy the depth-band rule.
    """

    seed: int
    dims: tuple[int, int, int] = (512, 512, 0)
    body_semi: tuple[int, int] = (190, 150)
    kidney_offset: int = 100
    kidney_semi: tuple[int, int, int] = (46, 34, 13)
    kidney_jitter: int = 2
    tumor: bool = True
    tumor_semi: tuple[int, int, int] = (12, 10, 7)
    tumor_offset: tuple[int, int, int] = (10, 0, 0)
    noise_amplitude: float = 15.0
    table_rows: tuple[int, int] = (488, 496)
    table_width: int = 300
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)


class Artifact(NamedTuple):
    kind: str
    roles: tuple[str, ...]
    box: Box  # solid rectangle: the voxel set is exactly the box
    volume: int


class StubMasks(NamedTuple):
    kt_lax: MaskVolume
    kt_strict: MaskVolume
    tumor: MaskVolume
    artifacts: tuple[Artifact, ...]


def _ellipsoid(shape_zyx, center_xyz, semi_xyz) -> np.ndarray:
    d, h, w = shape_zyx
    zz, yy, xx = np.ogrid[:d, :h, :w]
    cx, cy, cz = center_xyz
    ax, ay, az = semi_xyz
    return (((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2
            + ((zz - cz) / az) ** 2) <= 1.0


def generate_case(spec: PhantomSpec) -> tuple[CtVolume, LabelVolume]:
    """Deterministic CT + truth labels for one spec.

    Draw order: depth (only when dims[2] == 0), per-kidney semi-axis
    jitters, per-kidney z centers, then the noise field.
    """
    rng = np.random.default_rng(spec.seed)
    w, h, d = spec.dims
    if d == 0:
        d = int(rng.integers(44, 61))
    if w < 8 or h < 8 or d < 8:
        raise ValueError(f"dims too small: {(w, h, d)}")

    jit = spec.kidney_jitter
    jitters = rng.integers(-jit, jit + 1, size=(2, 3)) if jit else np.zeros((2, 3), int)
    semis = [tuple(int(s + j) for s, j in zip(spec.kidney_semi, jitters[i]))
             for i in range(2)]

    centers = []
    for i, semi in enumerate(semis):
        sz = semi[2]
        z_lo = max(int(np.ceil(0.30 * (d - 1))), sz + 2)
        z_hi = min(int(np.floor(0.70 * (d - 1))), d - 3 - sz)
        if z_lo > z_hi:
            raise ValueError(f"kidney z extent {sz} does not fit depth {d}")
        zc = int(rng.integers(z_lo, z_hi + 1))
        xc = w // 2 + (spec.kidney_offset if i else -spec.kidney_offset)
        centers.append((xc, h // 2, zc))

    # in-plane containment: kidney ellipse inside the body ellipse
    for (xc, yc, _), (ax, ay, _) in zip(centers, semis):
        reach = ((abs(xc - w // 2) + ax) / spec.body_semi[0]) ** 2 \
            + ((abs(yc - h // 2) + ay) / spec.body_semi[1]) ** 2
        if reach > 0.95:
            raise ValueError("kidney does not fit inside the body ellipse")

    labels = np.zeros((d, h, w), dtype=np.uint8)
    for center, semi in zip(centers, semis):
        labels[_ellipsoid((d, h, w), center, semi)] = 1

    tumor_mask = None
    if spec.tumor:
        ox, oy, oz = spec.tumor_offset
        t_center = (centers[0][0] + ox, centers[0][1] + oy, centers[0][2] + oz)
        reach = sum(((abs(o) + t) / k) ** 2 for o, t, k in
                    zip(spec.tumor_offset, spec.tumor_semi, semis[0]))
        if reach > 0.95:
            raise ValueError("tumor does not fit inside the left kidney")
        tumor_mask = _ellipsoid((d, h, w), t_center, spec.tumor_semi)
        labels[tumor_mask] = 2

    yy, xx = np.ogrid[:h, :w]
    body = (((xx - w // 2) / spec.body_semi[0]) ** 2
            + ((yy - h // 2) / spec.body_semi[1]) ** 2) <= 1.0

    ct = np.full((d, h, w), AIR_HU, dtype=np.float32)
    ct[:, body] = BODY_HU
    ct[labels == 1] = KIDNEY_HU
    if tumor_mask is not None:
        ct[tumor_mask] = TUMOR_HU
    y0, y1 = spec.table_rows
    x0 = (w - spec.table_width) // 2
    if 0 <= y0 < y1 <= h:
        ct[:, y0:y1, x0:x0 + spec.table_width] = TABLE_HU

    noise = rng.standard_normal(size=(d, h, w), dtype=np.float32)
    ct = ct + np.rint(noise * spec.noise_amplitude).astype(np.float32)
    return CtVolume(ct), LabelVolume(labels)


def _expand(box: Box, pad: int) -> Box:
    return tuple((lo - pad, hi + pad) for lo, hi in box)


def _xy_disjoint(a: Box, b: Box) -> bool:
    # rectangles may share z freely; separation in x or y keeps both the
    # components and the bounding boxes apart
    return a[0][1] < b[0][0] or b[0][1] < a[0][0] \
        or a[1][1] < b[1][0] or b[1][1] < a[1][0]


def _place_artifacts(truth: np.ndarray, corruption: CorruptionSpec) -> list[Artifact]:
    d, h, w = truth.shape
    if corruption.oob_tumor and d < 17:
        # centroid of the last 4 frames must clear the 0.90 depth fraction
        raise ValueError("volume too shallow for an out-of-band tumor artifact")
    zz, yy, xx = np.nonzero(truth >= 1)
    forbidden: list[Box] = []
    if zz.size:
        forbidden.append(((int(xx.min()), int(xx.max())),
                          (int(yy.min()), int(yy.max())),
                          (0, d - 1)))
    placed: list[Artifact] = []
    for kind, (bw, bh, frames, roles) in ARTIFACT_KINDS.items():
        for _ in range(getattr(corruption, kind)):
            if kind == "oob_kidney":
                z0 = 0
            elif kind == "oob_tumor":
                z0 = d - frames
            else:
                z0 = (d - frames) // 2
            spot = None
            for y0 in range(2, h - bh - 1, 2):
                for x0 in range(2, w - bw - 1, 2):
                    box = ((x0, x0 + bw - 1), (y0, y0 + bh - 1),
                           (z0, z0 + frames - 1))
                    grown = _expand(box, 3)
                    if all(_xy_disjoint(grown, other)
                           for other in forbidden + [a.box for a in placed]):
                        spot = box
                        break
                if spot:
                    break
            if spot is None:
                raise RuntimeError(f"no free space to place {kind}")
            placed.append(Artifact(kind, roles, spot, bw * bh * frames))
    return placed


def stub_masks(truth: LabelVolume, corruption: CorruptionSpec, seed: int,
               band_thin_rate: float = 0.03) -> StubMasks:
    """Fabricate the three model masks from a truth volume.

    Deterministic per (truth, corruption, seed); the thinning draw uses
    its own stream so it never couples to case generation.
    """
    union = truth.data >= 1
    cross = ndimage.generate_binary_structure(3, 1)
    lax = ndimage.binary_dilation(union, structure=cross)

    strict = union.copy()
    band = union & ~ndimage.binary_erosion(union, structure=cross, border_value=0)
    bz, by, bx = np.nonzero(band)
    if bz.size:
        rng = np.random.default_rng((seed, 1))
        drop = rng.random(bz.size) < band_thin_rate
        strict[bz[drop], by[drop], bx[drop]] = False

    tumor = truth.data == 2

    artifacts = tuple(_place_artifacts(truth.data, corruption))
    planes = {"kt_lax": lax, "kt_strict": strict, "tumor": tumor.copy()}
    for a in artifacts:
        (x0, x1), (y0, y1), (z0, z1) = a.box
        for role in a.roles:
            planes[role][z0:z1 + 1, y0:y1 + 1, x0:x1 + 1] = True

    masks = tuple(MaskVolume(planes[role].astype(np.uint8), role)
                  for role in MASK_ROLES)
    return StubMasks(*masks, artifacts)


def artifact_to_json(a: Artifact) -> dict:
    """Manifest entry; the voxel set is the full inclusive box."""
    return {
        "kind": a.kind,
        "roles": list(a.roles),
        "box": {"x": list(a.box[0]), "y": list(a.box[1]), "z": list(a.box[2])},
        "volume": a.volume,
    }


def artifact_from_json(entry: dict) -> Artifact:
    box = tuple((int(entry["box"][ax][0]), int(entry["box"][ax][1]))
                for ax in ("x", "y", "z"))
    return Artifact(entry["kind"], tuple(entry["roles"]), box, int(entry["volume"]))
