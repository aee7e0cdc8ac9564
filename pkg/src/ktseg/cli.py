"""Pipeline driver: phantom generation, preprocessing, segmentation,
evaluation over case_XXXXX directory trees.

Exit codes: 0 full success, 1 at least one case failed, 2 usage or
configuration error. Cases run on a bounded thread pool; outputs are
deterministic regardless of scheduling because cases never share state.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import nifti
from .ensemble import combine, ensemble_stats
from .metrics import CaseMetrics, PHASE_AFTER, PHASE_BEFORE, evaluate_case, export_report
from .phantom import CorruptionSpec, PhantomSpec, artifact_to_json, generate_case, stub_masks
from .preprocess import invert_labels, preprocess_case, read_transforms, write_transforms
from .validate import ValidationRules, read_region_report, validate_case, write_region_report

CASE_PATTERN = re.compile(r"^case_\d{5}$")

IMAGING = "imaging.nii.gz"
SEGMENTATION = "segmentation.nii.gz"
TRANSFORMS = "transforms.tsv"
COMBINED = "combined.nii.gz"
VALIDATED = "validated.nii.gz"
REGIONS = "regions.csv"
MANIFEST = "manifest.json"


@dataclass(frozen=True)
class RunConfig:
    command: str
    input_dir: Optional[Path] = None
    output_dir: Optional[Path] = None
    masks_dir: Optional[Path] = None
    pred_dir: Optional[Path] = None
    raw_dir: Optional[Path] = None
    case_filter: tuple[str, ...] = ()
    case_count: int = 5
    rules_path: Optional[Path] = None
    seed: int = 0
    skip_validation: bool = False
    original_grid: bool = False
    no_corruption: bool = False
    jobs: Optional[int] = None


class UsageError(Exception):
    pass


def _discover_cases(root: Path) -> list[str]:
    return sorted(p.name for p in root.iterdir()
                  if p.is_dir() and CASE_PATTERN.match(p.name))


def _select_cases(root: Path, filter_ids: Sequence[str]) -> list[str]:
    if not root.is_dir():
        raise UsageError(f"input directory not found: {root}")
    for cid in filter_ids:
        if not CASE_PATTERN.match(cid):
            raise UsageError(f"malformed case id: {cid}")
    available = _discover_cases(root)
    if filter_ids:
        missing = sorted(set(filter_ids) - set(available))
        if missing:
            raise UsageError(f"requested cases not found: {', '.join(missing)}")
        selected = sorted(filter_ids)
    else:
        selected = available
    if not selected:
        raise UsageError(f"no cases selected under {root}")
    return selected


def _run_pool(case_ids: Sequence[str], worker: Callable[[str], object],
              jobs: Optional[int]) -> tuple[dict, dict]:
    """Run worker per case; returns ({case: result}, {case: error})."""
    workers = jobs or os.cpu_count() or 1
    results: dict = {}
    errors: dict = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {cid: pool.submit(worker, cid) for cid in case_ids}
    for cid in case_ids:
        try:
            results[cid] = futures[cid].result()
        except Exception as exc:  # per-case isolation: report, keep going
            errors[cid] = exc
    return results, errors


def _report(case_ids: Sequence[str], results: dict, errors: dict) -> int:
    for cid in case_ids:
        if cid in errors:
            print(f"{cid}: FAILED: {errors[cid]}", file=sys.stderr)
        else:
            note = results.get(cid)
            print(f"{cid}: ok" + (f" ({note})" if isinstance(note, str) and note else ""))
    return 1 if errors else 0


def cmd_phantom(config: RunConfig) -> int:
    out = config.output_dir
    if out is None or config.case_count < 1:
        raise UsageError("phantom needs --output and a positive --cases count")
    out.mkdir(parents=True, exist_ok=True)
    corruption = CorruptionSpec.none() if config.no_corruption else CorruptionSpec()
    case_ids = [f"case_{i:05d}" for i in range(config.case_count)]

    def worker(cid: str):
        index = int(cid.split("_")[1])
        spec = PhantomSpec(seed=config.seed + index, corruption=corruption)
        ct, labels = generate_case(spec)
        case_dir = out / cid
        case_dir.mkdir(parents=True, exist_ok=True)
        nifti.save_volume(ct, case_dir / IMAGING)
        nifti.save_volume(labels, case_dir / SEGMENTATION)
        if config.masks_dir is None:
            return ""
        # the stand-in models see the preprocessed grid, so derive it here
        pre = preprocess_case(ct, labels)
        stubs = stub_masks(pre.labels, spec.corruption, spec.seed)
        nifti.save_case_masks(config.masks_dir, cid,
                              (stubs.kt_lax, stubs.kt_strict, stubs.tumor))
        return [artifact_to_json(a) for a in stubs.artifacts]

    results, errors = _run_pool(case_ids, worker, config.jobs)
    if config.masks_dir is not None and results:
        manifest = {
            "seed": config.seed,
            "corruption": "none" if config.no_corruption else "default",
            "voxel_set": "every artifact fills its inclusive box exactly",
            "cases": {cid: results[cid] for cid in sorted(results)},
        }
        (config.masks_dir / MANIFEST).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    status = {cid: "" for cid in results}
    return _report(case_ids, status, errors)


def cmd_preprocess(config: RunConfig) -> int:
    if config.input_dir is None or config.output_dir is None:
        raise UsageError("preprocess needs --input and --output")
    case_ids = _select_cases(config.input_dir, config.case_filter)
    config.output_dir.mkdir(parents=True, exist_ok=True)

    def worker(cid: str):
        src = config.input_dir / cid
        ct = nifti.load_volume(src / IMAGING)
        seg_path = src / SEGMENTATION
        labels = nifti.load_labels(seg_path) if seg_path.exists() else None
        pre = preprocess_case(ct, labels)
        dst = config.output_dir / cid
        dst.mkdir(parents=True, exist_ok=True)
        nifti.save_volume(pre.ct, dst / IMAGING)
        if pre.labels is not None:
            nifti.save_volume(pre.labels, dst / SEGMENTATION)
        write_transforms(dst / TRANSFORMS, pre.transforms)
        return ""

    results, errors = _run_pool(case_ids, worker, config.jobs)
    return _report(case_ids, results, errors)


def cmd_segment(config: RunConfig) -> int:
    if config.input_dir is None or config.masks_dir is None or config.output_dir is None:
        raise UsageError("segment needs --input, --masks and --output")
    if not config.masks_dir.is_dir():
        raise UsageError(f"masks directory not found: {config.masks_dir}")
    case_ids = _select_cases(config.input_dir, config.case_filter)
    rules = (ValidationRules.from_json(config.rules_path)
             if config.rules_path else ValidationRules())
    config.output_dir.mkdir(parents=True, exist_ok=True)

    def worker(cid: str):
        masks = nifti.load_case_masks(config.masks_dir, cid)
        combined = combine(*masks)
        stats = ensemble_stats(*masks)
        dst = config.output_dir / cid
        dst.mkdir(parents=True, exist_ok=True)
        nifti.save_volume(combined, dst / COMBINED)
        if not config.skip_validation:
            validated, records = validate_case(combined, rules)
            nifti.save_volume(validated, dst / VALIDATED)
            write_region_report(dst / REGIONS, records)
        return f"lax-only tumor voxels: {stats.tumor_without_strict}"

    results, errors = _run_pool(case_ids, worker, config.jobs)
    return _report(case_ids, results, errors)


def cmd_evaluate(config: RunConfig) -> int:
    if config.input_dir is None or config.pred_dir is None or config.output_dir is None:
        raise UsageError("evaluate needs --input, --pred and --output")
    if config.original_grid and config.raw_dir is None:
        raise UsageError("--original-grid needs --raw pointing at the unprocessed cases")
    case_ids = _select_cases(config.input_dir, config.case_filter)
    if not config.pred_dir.is_dir():
        raise UsageError(f"prediction directory not found: {config.pred_dir}")

    def worker(cid: str):
        pred_dir = config.pred_dir / cid
        phases = []
        for phase, name in ((PHASE_BEFORE, COMBINED), (PHASE_AFTER, VALIDATED)):
            path = pred_dir / name
            if path.exists():
                phases.append((phase, nifti.load_labels(path)))
        if not phases:
            raise FileNotFoundError(f"no predictions under {pred_dir}")

        if config.original_grid:
            truth = nifti.load_labels(config.raw_dir / cid / SEGMENTATION)
            transforms = read_transforms(config.input_dir / cid / TRANSFORMS)
            dims = (truth.width, truth.height, truth.depth)
            phases = [(phase, invert_labels(pred, transforms, dims))
                      for phase, pred in phases]
        else:
            truth = nifti.load_labels(config.input_dir / cid / SEGMENTATION)

        case_metrics = [evaluate_case(pred, truth, cid, phase)
                        for phase, pred in phases]
        regions_path = pred_dir / REGIONS
        records = read_region_report(regions_path) if regions_path.exists() else []
        return case_metrics, records

    results, errors = _run_pool(case_ids, worker, config.jobs)
    code = _report(case_ids, {cid: "" for cid in results}, errors)
    if not results:
        return code or 1

    metrics: list[CaseMetrics] = []
    regions = {}
    for cid in sorted(results):
        case_metrics, records = results[cid]
        metrics.extend(case_metrics)
        regions[cid] = records
    config.output_dir.mkdir(parents=True, exist_ok=True)
    export_report(metrics, regions, config.output_dir)
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ktseg",
        description="kidney/kidney-tumor CT segmentation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, cases_help: str):
        p.add_argument("--cases", default="", help=cases_help)
        p.add_argument("--jobs", type=int, default=None,
                       help="worker threads (default: cpu count)")

    p = sub.add_parser("phantom", help="generate seeded synthetic cases")
    p.add_argument("--output", type=Path, required=True, help="raw case tree to write")
    p.add_argument("--masks", type=Path, default=None,
                   help="also write stub model masks + manifest here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-corruption", action="store_true",
                   help="skip artifact injection in the stub masks")
    common(p, "number of cases to generate (default 5)")

    p = sub.add_parser("preprocess", help="normalize, crop and downsize cases")
    p.add_argument("--input", type=Path, required=True, help="raw case tree")
    p.add_argument("--output", type=Path, required=True, help="preprocessed tree to write")
    common(p, "comma-separated case ids (default: all)")

    p = sub.add_parser("segment", help="fuse model masks and screen regions")
    p.add_argument("--input", type=Path, required=True, help="preprocessed case tree")
    p.add_argument("--masks", type=Path, required=True, help="mask exchange directory")
    p.add_argument("--output", type=Path, required=True, help="prediction tree to write")
    p.add_argument("--rules", type=Path, default=None,
                   help="JSON file overriding screening thresholds")
    p.add_argument("--skip-validation", action="store_true",
                   help="emit only the fused volume")
    common(p, "comma-separated case ids (default: all)")

    p = sub.add_parser("evaluate", help="score predictions and write report CSVs")
    p.add_argument("--input", type=Path, required=True, help="preprocessed case tree")
    p.add_argument("--pred", type=Path, required=True, help="prediction tree")
    p.add_argument("--output", type=Path, required=True, help="report directory")
    p.add_argument("--raw", type=Path, default=None, help="raw case tree")
    p.add_argument("--original-grid", action="store_true",
                   help="map predictions back and score on the original grid")
    common(p, "comma-separated case ids (default: all)")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    case_filter: tuple[str, ...] = ()
    case_count = 5
    if args.command == "phantom":
        if args.cases:
            try:
                case_count = int(args.cases)
            except ValueError:
                raise UsageError("phantom --cases expects a number")
    elif args.cases:
        case_filter = tuple(s for s in args.cases.split(",") if s)
    return RunConfig(
        command=args.command,
        input_dir=getattr(args, "input", None),
        output_dir=getattr(args, "output", None),
        masks_dir=getattr(args, "masks", None),
        pred_dir=getattr(args, "pred", None),
        raw_dir=getattr(args, "raw", None),
        case_filter=case_filter,
        case_count=case_count,
        rules_path=getattr(args, "rules", None),
        seed=getattr(args, "seed", 0),
        skip_validation=getattr(args, "skip_validation", False),
        original_grid=getattr(args, "original_grid", False),
        no_corruption=getattr(args, "no_corruption", False),
        jobs=args.jobs,
    )


_COMMANDS = {
    "phantom": cmd_phantom,
    "preprocess": cmd_preprocess,
    "segment": cmd_segment,
    "evaluate": cmd_evaluate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        return _COMMANDS[args.command](config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
