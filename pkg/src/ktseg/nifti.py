"""Minimal NIfTI-1 single-file reader/writer and the mask-exchange layout.

Only what the pipeline needs: ``.nii`` / ``.nii.gz`` single-file volumes
with uint8, int16 or float32 payloads, axial stacks in stored order.
Both byte orders are accepted (resolved via the header-size / dim[0]
sanity check). No extensions, no .hdr/.img pairs, no NIfTI-2.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .volume import CtVolume, LabelVolume, MaskVolume, MASK_ROLES

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

# datatype code -> (numpy dtype, bitpix)
_DTYPES = {
    2: (np.dtype(np.uint8), 8),
    4: (np.dtype(np.int16), 16),
    16: (np.dtype(np.float32), 32),
}
_DTYPE_CODES = {dt: code for code, (dt, _) in _DTYPES.items()}

# field order mirrors the 348-byte header layout
_HEADER_FMT = "i10s18sihbb8h3fhhhh8ffffhbbffffii80s24shh6f12f16s4s"
assert struct.calcsize("<" + _HEADER_FMT) == HEADER_SIZE


class NiftiError(Exception):
    """Base class for container-format failures."""


class NiftiFormatError(NiftiError):
    """Header is malformed or carries the wrong magic."""


class UnsupportedDtypeError(NiftiError):
    """Datatype code outside {uint8, int16, float32}."""


class TruncatedFileError(NiftiError):
    """Payload shorter than the header promises."""


class MissingMaskError(NiftiError):
    """An exchange-layout role file is absent."""

    def __init__(self, role: str, path: Path):
        self.role = role
        self.path = path
        super().__init__(f"missing {role} mask: {path}")


class MaskInconsistencyError(NiftiError):
    """The three role masks of one case disagree on dimensions."""


def _read_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_header(blob: bytes):
    if len(blob) < HEADER_SIZE:
        raise TruncatedFileError(f"file holds {len(blob)} bytes, header needs {HEADER_SIZE}")
    for order in ("<", ">"):
        fields = struct.unpack(order + _HEADER_FMT, blob[:HEADER_SIZE])
        if fields[0] == HEADER_SIZE:
            return order, fields
    raise NiftiFormatError("header size field is not 348 in either byte order")


def read_nifti(path: Union[str, Path]) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Parse a NIfTI-1 file into ``(data[z, y, x], (sx, sy, sz))``.

    Intensity scaling (slope/intercept) is applied when nontrivial; a
    stored slope of 0 is treated as 1 per the common convention.
    """
    path = Path(path)
    blob = _read_bytes(path)
    order, f = _parse_header(blob)
    dim = f[7:15]
    if not 1 <= dim[0] <= 7:
        raise NiftiFormatError(f"dim[0]={dim[0]} outside 1..7")
    magic = f[-1]
    if magic != MAGIC_SINGLE:
        if magic == MAGIC_PAIR:
            raise NiftiFormatError("two-file (.hdr/.img) NIfTI is not supported")
        raise NiftiFormatError(f"bad magic {magic!r}")
    if dim[0] > 3 and any(d > 1 for d in dim[4 : dim[0] + 1]):
        raise UnsupportedDtypeError("only scalar 3D volumes are supported")
    w, h, d = (max(int(dim[i]), 1) for i in (1, 2, 3))
    datatype = f[19]
    if datatype not in _DTYPES:
        raise UnsupportedDtypeError(f"datatype code {datatype}")
    dtype, bitpix = _DTYPES[datatype]
    pixdim = f[22:30]
    vox_offset = int(round(f[30]))
    if vox_offset < HEADER_SIZE:
        raise NiftiFormatError(f"vox_offset {vox_offset} < {HEADER_SIZE}")
    slope, inter = f[31], f[32]

    n = w * h * d
    payload = blob[vox_offset : vox_offset + n * dtype.itemsize]
    if len(payload) < n * dtype.itemsize:
        raise TruncatedFileError(
            f"payload holds {len(payload)} bytes, dims promise {n * dtype.itemsize}"
        )
    data = np.frombuffer(payload, dtype=dtype.newbyteorder(order)).reshape(d, h, w)
    data = data.astype(dtype)  # native byte order
    if slope == 0.0:
        slope = 1.0
    if (slope, inter) != (1.0, 0.0):
        data = data.astype(np.float32) * np.float32(slope) + np.float32(inter)
    spacing = tuple(float(abs(p)) if p != 0 else 1.0 for p in pixdim[1:4])
    return data, spacing


def _build_header(shape_zyx: tuple[int, int, int], dtype: np.dtype,
                  spacing: tuple[float, float, float]) -> bytes:
    d, h, w = shape_zyx
    code = _DTYPE_CODES[dtype]
    _, bitpix = _DTYPES[code]
    dim = (3, w, h, d, 1, 1, 1, 1)
    pixdim = (1.0, spacing[0], spacing[1], spacing[2], 0.0, 0.0, 0.0, 0.0)
    return struct.pack(
        "<" + _HEADER_FMT,
        HEADER_SIZE,            # sizeof_hdr
        b"", b"", 0, 0, 0, 0,   # unused ANALYZE fields + dim_info
        *dim,
        0.0, 0.0, 0.0,          # intent params
        0,                      # intent_code
        code, bitpix,
        0,                      # slice_start
        *pixdim,
        float(VOX_OFFSET),
        1.0, 0.0,               # scl_slope, scl_inter
        0, 0,
        2,                      # xyzt_units: mm
        0.0, 0.0, 0.0, 0.0,
        0, 0,
        b"ktseg", b"",
        0, 0,                   # qform, sform: none (stored order is the grid)
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        *([0.0] * 12),
        b"",
        MAGIC_SINGLE,
    )


Volume = Union[CtVolume, LabelVolume, MaskVolume]


def save_volume(volume: Volume, path: Union[str, Path]) -> None:
    """Write a volume as single-file NIfTI-1; gzip when the name ends ``.gz``.

    CT volumes are stored as float32, labels and masks as uint8. Output
    bytes are deterministic (gzip mtime pinned to 0).
    """
    path = Path(path)
    if isinstance(volume, CtVolume):
        data = volume.data.astype(np.float32, copy=False)
        spacing = volume.spacing
    else:
        data = volume.data.astype(np.uint8, copy=False)
        spacing = (1.0, 1.0, 1.0)
    header = _build_header(data.shape, data.dtype, spacing)
    blob = header + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + data.tobytes()
    if path.suffix == ".gz":
        # empty filename + zero mtime + fixed level keep the bytes
        # deterministic; level 1 because noisy CT barely compresses anyway
        with open(path, "wb") as fh:
            with gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0,
                               compresslevel=1) as gz:
                gz.write(blob)
    else:
        path.write_bytes(blob)


def load_volume(path: Union[str, Path]) -> CtVolume:
    data, spacing = read_nifti(path)
    return CtVolume(data.astype(np.float32), spacing)


def load_labels(path: Union[str, Path]) -> LabelVolume:
    data, _ = read_nifti(path)
    if data.dtype != np.uint8:
        rounded = np.rint(data).astype(np.int64)
        if not np.isin(np.unique(rounded), (0, 1, 2)).all():
            raise NiftiFormatError(f"{path}: label values outside {{0,1,2}}")
        data = rounded.astype(np.uint8)
    return LabelVolume(data)


def load_mask(path: Union[str, Path], role: str) -> MaskVolume:
    data, _ = read_nifti(path)
    return MaskVolume((np.asarray(data) != 0).astype(np.uint8), role)


def mask_path(directory: Union[str, Path], case_id: str, role: str) -> Path:
    return Path(directory) / f"{case_id}_{role}.nii.gz"


def load_case_masks(directory: Union[str, Path], case_id: str
                    ) -> tuple[MaskVolume, MaskVolume, MaskVolume]:
    """Load the three exchange masks of one case, checking consistency."""
    masks = []
    for role in MASK_ROLES:
        p = mask_path(directory, case_id, role)
        if not p.exists():
            raise MissingMaskError(role, p)
        masks.append(load_mask(p, role))
    shapes = {m.shape for m in masks}
    if len(shapes) != 1:
        detail = ", ".join(f"{m.role}={m.shape}" for m in masks)
        raise MaskInconsistencyError(f"case {case_id}: mask shapes differ ({detail})")
    return tuple(masks)


def save_case_masks(directory: Union[str, Path], case_id: str,
                    masks: tuple[MaskVolume, MaskVolume, MaskVolume]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for mask in masks:
        save_volume(mask, mask_path(directory, case_id, mask.role))
