"""Kidney/kidney-tumor CT segmentation pipeline.

Batch preprocessing of axial CT cases, fusion of three binary
segmentation masks into kidney/tumor labels, rule-based 3D region
screening, and voxelwise evaluation with CSV reporting. Synthetic
phantom cases stand in for scan data everywhere in the tests.
"""

from .ensemble import EnsembleStats, combine, ensemble_stats
from .metrics import (CaseMetrics, ClassMetrics, Summary, aggregate,
                      confusion_counts, evaluate_case, export_report, prf)
from .nifti import (MaskInconsistencyError, MissingMaskError, NiftiError,
                    NiftiFormatError, TruncatedFileError, UnsupportedDtypeError,
                    load_case_masks, load_labels, load_mask, load_volume,
                    mask_path, read_nifti, save_case_masks, save_volume)
from .phantom import (Artifact, CorruptionSpec, PhantomSpec, StubMasks,
                      generate_case, stub_masks)
from .preprocess import (PreprocessedCase, RawTransform, SliceTransform,
                         apply_transform, body_mask, compute_raw_transform,
                         invert_labels, make_transform, preprocess_case,
                         read_transforms, smooth_transforms, write_transforms)
from .validate import (Region3D, RegionRecord, ValidationRules,
                       connected_components, measure_region, validate_case,
                       validate_kidneys, validate_tumors, volumetric_validate)
from .volume import (CtVolume, LabelVolume, MaskVolume, LABEL_BACKGROUND,
                     LABEL_KIDNEY, LABEL_TUMOR, MASK_ROLES)

__version__ = "0.1.0"
