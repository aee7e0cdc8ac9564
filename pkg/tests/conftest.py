"""Shared fixtures: the 20-case phantom workspace driven through the CLI.

The workspace is built once per session; every stage goes through the
command-line entry points so the directory contract is exercised the
same way a shell user would.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from ktseg import nifti
from ktseg.cli import main
from ktseg.phantom import CorruptionSpec, stub_masks

N_CASES = 20
SEED = 100


@dataclass(frozen=True)
class Workspace:
    root: Path
    raw: Path
    preproc: Path
    masks: Path          # corrupted stub masks + manifest
    pred: Path
    report: Path
    masks_clean: Path    # zero-corruption stub masks
    pred_clean: Path
    report_clean: Path
    case_ids: tuple[str, ...]
    elapsed_seconds: float


@pytest.fixture(scope="session")
def workspace(tmp_path_factory) -> Workspace:
    root = tmp_path_factory.mktemp("pipeline")
    raw = root / "raw"
    preproc = root / "preproc"
    masks = root / "masks"
    pred = root / "pred"
    report = root / "report"
    masks_clean = root / "masks_clean"
    pred_clean = root / "pred_clean"
    report_clean = root / "report_clean"

    t0 = time.monotonic()
    assert main(["phantom", "--output", str(raw), "--masks", str(masks),
                 "--cases", str(N_CASES), "--seed", str(SEED)]) == 0
    assert main(["preprocess", "--input", str(raw), "--output", str(preproc)]) == 0
    assert main(["segment", "--input", str(preproc), "--masks", str(masks),
                 "--output", str(pred)]) == 0
    assert main(["evaluate", "--input", str(preproc), "--pred", str(pred),
                 "--output", str(report)]) == 0

    case_ids = tuple(sorted(p.name for p in raw.iterdir() if p.is_dir()))

    # zero-corruption variant reuses the identical preprocessed truth
    for i, cid in enumerate(case_ids):
        labels = nifti.load_labels(preproc / cid / "segmentation.nii.gz")
        stubs = stub_masks(labels, CorruptionSpec.none(), SEED + i)
        nifti.save_case_masks(masks_clean, cid,
                              (stubs.kt_lax, stubs.kt_strict, stubs.tumor))
    assert main(["segment", "--input", str(preproc), "--masks", str(masks_clean),
                 "--output", str(pred_clean)]) == 0
    assert main(["evaluate", "--input", str(preproc), "--pred", str(pred_clean),
                 "--output", str(report_clean)]) == 0
    elapsed = time.monotonic() - t0

    return Workspace(root, raw, preproc, masks, pred, report,
                     masks_clean, pred_clean, report_clean, case_ids, elapsed)
