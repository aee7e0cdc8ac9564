"""Volume containers shared by every pipeline stage.

All volumes are numpy arrays indexed ``[z, y, x]`` (slice-major), so
``data[k]`` is one axial slice. Instances are frozen after construction:
the backing array is marked read-only, and stages that need to edit
voxels copy first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LABEL_BACKGROUND = 0
LABEL_KIDNEY = 1
LABEL_TUMOR = 2

MASK_ROLES = ("kt_lax", "kt_strict", "tumor")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _check_dims(data: np.ndarray) -> None:
    if data.ndim != 3:
        raise ValueError(f"expected a 3D array, got ndim={data.ndim}")
    if min(data.shape) < 1:
        raise ValueError(f"all dimensions must be >= 1, got shape {data.shape}")


@dataclass(frozen=True, eq=False)
class CtVolume:
    """A scalar intensity volume with per-axis voxel spacing in mm."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        _check_dims(self.data)
        data = _freeze(self.data.astype(np.float32, copy=False))
        if not np.isfinite(data).all():
            raise ValueError("CT intensities must be finite")
        # spacing is persisted as float32 in the container header; quantize
        # here so a save/load round trip is exact
        spacing = tuple(float(np.float32(s)) for s in self.spacing)
        if any(s <= 0 for s in spacing):
            raise ValueError(f"spacing components must be > 0, got {spacing}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def depth(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Voxel labels in {0 background, 1 kidney, 2 tumor}."""

    data: np.ndarray

    def __post_init__(self):
        _check_dims(self.data)
        data = self.data
        if data.dtype != np.uint8:
            if not np.isin(np.unique(data), (0, 1, 2)).all():
                raise ValueError("labels must be in {0, 1, 2}")
            data = data.astype(np.uint8)
        elif data.max(initial=0) > 2:
            raise ValueError("labels must be in {0, 1, 2}")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def depth(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class MaskVolume:
    """A binary volume produced by one segmentation model.

    ``role`` names which model emitted it and fixes the exchange-layout
    file name.
    """

    data: np.ndarray
    role: str = "kt_lax"

    def __post_init__(self):
        _check_dims(self.data)
        if self.role not in MASK_ROLES:
            raise ValueError(f"role must be one of {MASK_ROLES}, got {self.role!r}")
        data = self.data
        if data.dtype == np.bool_:
            data = data.astype(np.uint8)
        elif data.dtype != np.uint8:
            if not np.isin(np.unique(data), (0, 1)).all():
                raise ValueError("mask voxels must be 0 or 1")
            data = data.astype(np.uint8)
        elif data.max(initial=0) > 1:
            raise ValueError("mask voxels must be 0 or 1")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape
