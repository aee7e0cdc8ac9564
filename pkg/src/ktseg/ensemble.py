"""Fuse the three binary model outputs into one label volume.

With A = broad kidney+tumor mask, B = strict kidney+tumor mask and
C = tumor mask, the per-voxel label is (A AND B) + (A AND C): 2 needs
all three to agree, the broad mask gates everything.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .volume import LabelVolume, MaskVolume


class EnsembleStats(NamedTuple):
    """Per-case fusion diagnostics."""

    tumor_without_strict: int  # voxels with (A, B, C) = (1, 0, 1) -> label 1


def combine(kt_lax: MaskVolume, kt_strict: MaskVolume,
            tumor: MaskVolume) -> LabelVolume:
    """Voxelwise label = (lax AND strict) + (lax AND tumor)."""
    if not (kt_lax.shape == kt_strict.shape == tumor.shape):
        raise ValueError(
            f"mask dims disagree: {kt_lax.shape}, {kt_strict.shape}, {tumor.shape}")
    a = kt_lax.data
    out = (a & kt_strict.data) + (a & tumor.data)
    return LabelVolume(out.astype(np.uint8))


def ensemble_stats(kt_lax: MaskVolume, kt_strict: MaskVolume,
                   tumor: MaskVolume) -> EnsembleStats:
    """Count the ambiguous (1, 0, 1) voxels the sum maps to kidney."""
    odd = (kt_lax.data == 1) & (kt_strict.data == 0) & (tumor.data == 1)
    return EnsembleStats(int(odd.sum()))
