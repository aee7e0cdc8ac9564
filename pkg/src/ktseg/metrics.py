"""Voxelwise one-vs-rest precision/recall/F1 per class, per-case and
aggregated, plus the CSV report files.

Degenerate denominators follow an empty-class-perfect-match convention:
a class absent from both volumes scores 1.0, absent from only one side
scores 0.0. F1 is 0 when precision + recall is 0. Aggregation is an
unweighted per-case mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .validate import RegionRecord
from .volume import LabelVolume, LABEL_KIDNEY, LABEL_TUMOR

CLASSES = (0, 1, 2)
PHASE_BEFORE = "before_validation"
PHASE_AFTER = "after_validation"
_PHASE_ORDER = {PHASE_BEFORE: 0, PHASE_AFTER: 1}


@dataclass(frozen=True)
class ClassMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class CaseMetrics:
    case_id: str
    phase: str
    per_class: tuple[ClassMetrics, ClassMetrics, ClassMetrics]  # classes 0, 1, 2


@dataclass(frozen=True)
class Summary:
    phase: str
    n_cases: int
    precision: tuple[float, float, float]
    recall: tuple[float, float, float]
    f1: tuple[float, float, float]
    mean_f1_kidney_tumor: float


def confusion_counts(pred: LabelVolume, truth: LabelVolume,
                     class_label: int) -> tuple[int, int, int]:
    """One-vs-rest (tp, fp, fn) voxel counts for the class."""
    if pred.shape != truth.shape:
        raise ValueError(f"dims disagree: pred {pred.shape}, truth {truth.shape}")
    p = pred.data == class_label
    t = truth.data == class_label
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return tp, fp, fn


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 with the degenerate conventions above."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def evaluate_case(pred: LabelVolume, truth: LabelVolume, case_id: str,
                  phase: str) -> CaseMetrics:
    per_class = []
    for c in CLASSES:
        tp, fp, fn = confusion_counts(pred, truth, c)
        p, r, f1 = prf(tp, fp, fn)
        per_class.append(ClassMetrics(tp, fp, fn, p, r, f1))
    return CaseMetrics(case_id, phase, tuple(per_class))


def aggregate(metrics: Sequence[CaseMetrics]) -> list[Summary]:
    """Unweighted per-case means, grouped by phase (before first)."""
    if not metrics:
        raise ValueError("nothing to aggregate")
    phases = sorted({m.phase for m in metrics},
                    key=lambda p: (_PHASE_ORDER.get(p, 99), p))
    summaries = []
    for phase in phases:
        group = [m for m in metrics if m.phase == phase]
        means = {}
        for attr in ("precision", "recall", "f1"):
            means[attr] = tuple(
                float(np.mean([getattr(m.per_class[c], attr) for m in group]))
                for c in CLASSES)
        mean_f1_kt = (means["f1"][LABEL_KIDNEY] + means["f1"][LABEL_TUMOR]) / 2.0
        summaries.append(Summary(phase, len(group), means["precision"],
                                 means["recall"], means["f1"], mean_f1_kt))
    return summaries


def _sort_key(m: CaseMetrics) -> tuple:
    return (m.case_id, _PHASE_ORDER.get(m.phase, 99), m.phase)


def _write(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def export_report(metrics: Sequence[CaseMetrics],
                  regions: Mapping[str, Sequence[RegionRecord]],
                  out_dir: Union[str, Path]) -> list[Path]:
    """Write the four report CSVs; returns the paths.

    metrics_by_case.csv: every count and score per case/phase/class.
    volumes_by_case.csv: class voxel totals (truth via tp+fn, prediction
    via tp+fp).
    f1_by_volume.csv: (truth volume, F1) pairs for kidney and tumor.
    summary.csv: per-phase means plus the kidney/tumor mean F1.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ordered = sorted(metrics, key=_sort_key)

    lines = ["case_id,phase," + ",".join(
        f"tp_{c},fp_{c},fn_{c},precision_{c},recall_{c},f1_{c}" for c in CLASSES)]
    for m in ordered:
        cells = [m.case_id, m.phase]
        for cm in m.per_class:
            cells += [str(cm.tp), str(cm.fp), str(cm.fn),
                      f"{cm.precision:.6f}", f"{cm.recall:.6f}", f"{cm.f1:.6f}"]
        lines.append(",".join(cells))
    by_case = out_dir / "metrics_by_case.csv"
    _write(by_case, lines)

    lines = ["case_id,phase,truth_kidney,truth_tumor,pred_kidney,pred_tumor,"
             "confirmed_kidney_voxels,kept_tumor_voxels"]
    for m in ordered:
        k, t = m.per_class[LABEL_KIDNEY], m.per_class[LABEL_TUMOR]
        recs = regions.get(m.case_id, ())
        confirmed = sum(r.region.volume for r in recs if r.verdict == "confirmed")
        kept = sum(r.region.volume for r in recs if r.verdict == "keep")
        lines.append(",".join((m.case_id, m.phase,
                               str(k.tp + k.fn), str(t.tp + t.fn),
                               str(k.tp + k.fp), str(t.tp + t.fp),
                               str(confirmed), str(kept))))
    volumes = out_dir / "volumes_by_case.csv"
    _write(volumes, lines)

    lines = ["case_id,phase,class_label,truth_volume,f1"]
    for m in ordered:
        for c in (LABEL_KIDNEY, LABEL_TUMOR):
            cm = m.per_class[c]
            lines.append(",".join((m.case_id, m.phase, str(c),
                                   str(cm.tp + cm.fn), f"{cm.f1:.6f}")))
    f1_by_volume = out_dir / "f1_by_volume.csv"
    _write(f1_by_volume, lines)

    lines = [
        "# empty-class convention: a class absent from both volumes scores 1.0;"
        " absent from one side only scores 0.0; f1 = 0 when p + r = 0",
        "phase,n_cases,"
        + ",".join(f"precision_{c},recall_{c},f1_{c}" for c in CLASSES)
        + ",mean_f1_kidney_tumor",
    ]
    for s in aggregate(ordered):
        cells = [s.phase, str(s.n_cases)]
        for c in CLASSES:
            cells += [f"{s.precision[c]:.6f}", f"{s.recall[c]:.6f}", f"{s.f1[c]:.6f}"]
        cells.append(f"{s.mean_f1_kidney_tumor:.6f}")
        lines.append(",".join(cells))
    summary = out_dir / "summary.csv"
    _write(summary, lines)

    return [by_case, volumes, f1_by_volume, summary]
