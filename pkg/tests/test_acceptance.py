"""Acceptance suite: one test per shipping criterion, each ending in a
single printed PASS line. The heavyweight end-to-end criteria share the
session workspace fixture."""

import csv
import json
import math
import time

import numpy as np
from test_imops import oracle_otsu, oracle_window_sum
from test_nifti import _handcrafted_int16
from test_validate import bfs_components

from ktseg import imops, nifti
from ktseg.cli import main
from ktseg.ensemble import combine
from ktseg.metrics import PHASE_AFTER, CaseMetrics, ClassMetrics, aggregate
from ktseg.phantom import artifact_from_json
from ktseg.preprocess import invert_labels, read_transforms
from ktseg.validate import (
    Region3D,
    ValidationRules,
    connected_components,
    measure_region,
    validate_kidneys,
    validate_tumors,
)
from ktseg.volume import CtVolume, LabelVolume, MaskVolume


def _mask(bits, role):
    return MaskVolume(np.array(bits, dtype=np.uint8).reshape(1, 1, -1), role)


def test_criterion_01_ensemble_truth_table():
    t0 = time.monotonic()
    combos = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
    lax = _mask([a for a, _, _ in combos], "kt_lax")
    strict = _mask([b for _, b, _ in combos], "kt_strict")
    tumor = _mask([c for _, _, c in combos], "tumor")
    got = combine(lax, strict, tumor).data.ravel().tolist()
    want = [(a & b) + (a & c) for a, b, c in combos]
    assert got == want
    assert want[combos.index((1, 1, 1))] == 2
    assert want[combos.index((1, 1, 0))] == 1
    assert want[combos.index((1, 0, 1))] == 1
    assert sum(want) == 4  # every other combo is 0
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0
    print(f"ACCEPTANCE PASS: ensemble truth table ({elapsed * 1000:.1f} ms)")


def test_criterion_02_otsu_oracle_equivalence():
    rng = np.random.default_rng(20)
    for i in range(100):
        # mix flat-random and bimodal slices so thresholds spread out
        if i % 2:
            img = rng.integers(0, 256, size=(64, 64)).astype(np.uint8)
        else:
            img = np.where(rng.random((64, 64)) < 0.5,
                           rng.integers(0, 90, (64, 64)),
                           rng.integers(140, 256, (64, 64))).astype(np.uint8)
        t, _ = imops.otsu_threshold(img)
        assert t == oracle_otsu(img)
    print("ACCEPTANCE PASS: otsu matches exhaustive oracle on 100 slices")


def test_criterion_03_morphology_suite():
    rng = np.random.default_rng(21)
    for _ in range(100):
        mask = (rng.random((32, 32)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
        opened = imops.morph_open(mask, 5)
        assert np.array_equal(imops.morph_open(opened, 5), opened)
        assert not (opened & ~mask).any()
    for _ in range(5):
        mask = (rng.random((32, 32)) < 0.5).astype(np.uint8)
        med = (oracle_window_sum(mask, 9, replicate=True) >= 41).astype(np.uint8)
        assert np.array_equal(imops.median_filter_binary(mask, 9), med)
        mean = (oracle_window_sum(mask, 15, replicate=True) >= 113).astype(np.uint8)
        assert np.array_equal(imops.mean_filter_binarize(mask, 15), mean)
    print("ACCEPTANCE PASS: opening idempotent/anti-extensive x100, "
          "box filters bit-exact vs brute force")


def test_criterion_04_connected_components_vs_bfs():
    rng = np.random.default_rng(22)
    for _ in range(200):
        data = rng.choice([0, 0, 1, 2], size=(8, 8, 8)).astype(np.uint8)
        vol = LabelVolume(data)
        for cls in (1, 2):
            got = {frozenset((z, y, x) for x, y, z in r.voxels.tolist())
                   for r in connected_components(vol, cls)}
            assert got == bfs_components(data, cls)
    print("ACCEPTANCE PASS: component partitions match BFS oracle on 200 volumes")


def test_criterion_05_region_measurements():
    for side in range(3, 21):
        xs, ys, zs = np.meshgrid(*(np.arange(side),) * 3, indexing="ij")
        coords = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
        r = measure_region(coords, depth=side, class_label=1)
        assert abs(r.sphericity - (math.pi / 6) ** (1 / 3)) < 1e-9
    line = np.stack([np.zeros(9, int), np.zeros(9, int), np.arange(9)], axis=1)
    r = measure_region(line, depth=9, class_label=2)
    assert abs(r.major_axis - 4 * math.sqrt(20 / 3)) < 1e-6
    assert abs(r.minor_axis) < 1e-6
    print("ACCEPTANCE PASS: cube sphericity (sides 3..20) and segment axes exact")


def test_criterion_06_rule_fixtures():
    rules = ValidationRules()

    def region(cls, volume=400, zf=0.5, major=12.0, minor=4.0, frames=3,
               sph=0.5, bbox=((0, 5), (0, 5), (0, 5))):
        return Region3D(cls, np.zeros((0, 3), dtype=np.int64), volume,
                        (1.0, 1.0, 1.0), zf, bbox, frames, major, minor, sph)

    confirmed, rejected = validate_kidneys(
        [region(1, volume=19001, zf=0.5, frames=3),
         region(1, volume=25000, zf=0.15),
         region(1, volume=25000, zf=0.5, frames=1)], rules)
    assert len(confirmed) == 1 and confirmed[0].volume == 19001
    assert len(rejected) == 2

    kidney_box = ((0, 30), (0, 30), (0, 9))
    verdicts = validate_tumors(
        [region(2),
         region(2, sph=0.25, bbox=((10, 20), (10, 20), (2, 4))),
         region(2, sph=0.25, bbox=((200, 210), (200, 210), (2, 4)))],
        [kidney_box], rules)
    assert verdicts == ["keep", "relabel_1", "relabel_0"]
    print("ACCEPTANCE PASS: all nine screening fixtures verdict-exact")


def test_criterion_07_headline_arithmetic():
    zero = ClassMetrics(0, 0, 0, 1.0, 1.0, 1.0)
    kidney = ClassMetrics(1, 0, 0, 0.8497, 0.8497, 0.8497)
    tumor = ClassMetrics(1, 0, 0, 0.5019, 0.5019, 0.5019)
    s, = aggregate([CaseMetrics("case_00000", PHASE_AFTER, (zero, kidney, tumor))])
    assert abs(s.mean_f1_kidney_tumor - 0.6758) < 5e-5
    print("ACCEPTANCE PASS: class F1 (0.8497, 0.5019) averages to 0.6758")


def _metric_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _summary_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    return list(csv.DictReader(lines[1:]))


def test_criterion_08_phantom_end_to_end(workspace):
    manifest = json.loads((workspace.masks / "manifest.json").read_text())
    assert set(manifest["cases"]) == set(workspace.case_ids)

    # (a) every injected artifact is present when fused, gone once screened
    for cid in workspace.case_ids:
        combined = nifti.load_labels(workspace.pred / cid / "combined.nii.gz")
        validated = nifti.load_labels(workspace.pred / cid / "validated.nii.gz")
        artifacts = [artifact_from_json(e) for e in manifest["cases"][cid]]
        assert len(artifacts) == 6
        for a in artifacts:
            (x0, x1), (y0, y1), (z0, z1) = a.box
            before = combined.data[z0:z1 + 1, y0:y1 + 1, x0:x1 + 1]
            after = validated.data[z0:z1 + 1, y0:y1 + 1, x0:x1 + 1]
            expect = 2 if "tumor" in a.roles else 1
            assert (before == expect).all(), (cid, a.kind)
            assert not after.any(), (cid, a.kind)

    # (b) screening never hurts the kidney score
    rows = _metric_rows(workspace.report / "metrics_by_case.csv")
    f1 = {(r["case_id"], r["phase"]): float(r["f1_1"]) for r in rows}
    for cid in workspace.case_ids:
        assert f1[(cid, "after_validation")] >= f1[(cid, "before_validation")], cid

    # (c) zero corruption: only the thinned boundary band costs anything
    for row in _summary_rows(workspace.report_clean / "summary.csv"):
        assert float(row["f1_1"]) >= 0.99, row["phase"]
        assert float(row["f1_2"]) >= 0.95, row["phase"]

    # (d) the whole pipeline fits the time budget
    assert workspace.elapsed_seconds < 300.0
    print(f"ACCEPTANCE PASS: 20-case end-to-end (artifacts erased, F1 kept, "
          f"clean F1 over thresholds) in {workspace.elapsed_seconds:.1f}s")


def test_criterion_09_determinism(workspace, tmp_path):
    subset = workspace.case_ids[:2]
    raw2 = tmp_path / "raw2"
    pre2 = tmp_path / "preproc2"
    assert main(["phantom", "--output", str(raw2), "--cases", str(len(subset)),
                 "--seed", "100"]) == 0
    assert main(["preprocess", "--input", str(raw2), "--output", str(pre2),
                 ]) == 0
    for cid in subset:
        for name in ("imaging.nii.gz", "segmentation.nii.gz"):
            assert (raw2 / cid / name).read_bytes() \
                == (workspace.raw / cid / name).read_bytes(), (cid, name)
            assert (pre2 / cid / name).read_bytes() \
                == (workspace.preproc / cid / name).read_bytes(), (cid, name)
        assert (pre2 / cid / "transforms.tsv").read_bytes() \
            == (workspace.preproc / cid / "transforms.tsv").read_bytes()

    report2 = tmp_path / "report2"
    assert main(["evaluate", "--input", str(workspace.preproc),
                 "--pred", str(workspace.pred), "--output", str(report2)]) == 0
    for name in ("metrics_by_case.csv", "volumes_by_case.csv",
                 "f1_by_volume.csv", "summary.csv"):
        assert (report2 / name).read_bytes() \
            == (workspace.report / name).read_bytes(), name
    print("ACCEPTANCE PASS: regenerated volumes, transforms and reports "
          "byte-identical")


def test_criterion_10_round_trip_restoration(workspace):
    worst = 0.0
    for cid in workspace.case_ids[:3]:
        truth = nifti.load_labels(workspace.raw / cid / "segmentation.nii.gz")
        pre_labels = nifti.load_labels(workspace.preproc / cid / "segmentation.nii.gz")
        transforms = read_transforms(workspace.preproc / cid / "transforms.tsv")
        dims = (truth.width, truth.height, truth.depth)
        restored = invert_labels(pre_labels, transforms, dims)
        for cls in (1, 2):
            orig = connected_components(truth, cls)
            back = connected_components(restored, cls)
            assert len(back) == len(orig), (cid, cls)
            for ra, rb in zip(sorted(orig, key=lambda r: r.centroid),
                              sorted(back, key=lambda r: r.centroid)):
                shift = math.dist(ra.centroid, rb.centroid)
                worst = max(worst, shift)
                assert shift <= 2.0, (cid, cls, shift)
    print(f"ACCEPTANCE PASS: inverse mapping preserves component count, "
          f"worst centroid shift {worst:.3f} px")


def test_criterion_11_nifti_round_trip(tmp_path):
    rng = np.random.default_rng(23)
    ct = CtVolume(rng.normal(scale=250, size=(3, 5, 4)).astype(np.float32),
                  (0.78, 0.78, 5.0))
    nifti.save_volume(ct, tmp_path / "a.nii.gz")
    nifti.save_volume(ct, tmp_path / "b.nii.gz")
    assert (tmp_path / "a.nii.gz").read_bytes() == (tmp_path / "b.nii.gz").read_bytes()
    back = nifti.load_volume(tmp_path / "a.nii.gz")
    assert np.array_equal(back.data, ct.data)
    assert back.spacing == ct.spacing

    _handcrafted_int16(tmp_path / "fixture.nii")
    data, spacing = nifti.read_nifti(tmp_path / "fixture.nii")
    want = np.arange(32, dtype=np.float32).reshape(2, 4, 4) * 2.0 + 10.0
    assert np.array_equal(data, want)
    assert spacing == (2.0, 2.0, 5.0)
    print("ACCEPTANCE PASS: byte-stable save/load and handcrafted header fixture")
