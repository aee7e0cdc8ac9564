import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ktseg import imops


# ---------------------------------------------------------------- oracles

def oracle_otsu(img: np.ndarray) -> int:
    """Exhaustive between-class variance scan straight from the histogram."""
    hist = np.bincount(img.ravel(), minlength=256)
    n = hist.sum()
    best_t, best_sigma = 0, -1.0
    occupied = np.nonzero(hist)[0]
    if occupied.size == 1:
        return int(occupied[0])
    for t in range(256):
        n0 = int(hist[: t + 1].sum())
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        mu0 = float((hist[: t + 1] * np.arange(t + 1)).sum()) / n0
        mu1 = float((hist[t + 1:] * np.arange(t + 1, 256)).sum()) / n1
        sigma = (n0 / n) * (n1 / n) * (mu0 - mu1) ** 2
        if sigma > best_sigma:
            best_sigma, best_t = sigma, t
    return best_t


def oracle_window_sum(mask: np.ndarray, k: int, replicate: bool) -> np.ndarray:
    h, w = mask.shape
    r = k // 2
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            total = 0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    yy, xx = y + dy, x + dx
                    if replicate:
                        yy = min(max(yy, 0), h - 1)
                        xx = min(max(xx, 0), w - 1)
                    elif not (0 <= yy < h and 0 <= xx < w):
                        continue
                    total += int(mask[yy, xx])
            out[y, x] = total
    return out


def oracle_erode(mask: np.ndarray, k: int) -> np.ndarray:
    return (oracle_window_sum(mask, k, replicate=False) == k * k).astype(np.uint8)


def oracle_dilate(mask: np.ndarray, k: int) -> np.ndarray:
    return (oracle_window_sum(mask, k, replicate=False) >= 1).astype(np.uint8)


def oracle_fill_holes(mask: np.ndarray) -> np.ndarray:
    """BFS the complement from all border pixels; everything unreached is hole."""
    h, w = mask.shape
    reach = np.zeros((h, w), dtype=bool)
    stack = [(y, x) for y in range(h) for x in (0, w - 1) if not mask[y, x]]
    stack += [(y, x) for y in (0, h - 1) for x in range(w) if not mask[y, x]]
    for y, x in stack:
        reach[y, x] = True
    while stack:
        y, x = stack.pop()
        for yy, xx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= yy < h and 0 <= xx < w and not mask[yy, xx] and not reach[yy, xx]:
                reach[yy, xx] = True
                stack.append((yy, xx))
    return (mask.astype(bool) | ~reach).astype(np.uint8)


# ----------------------------------------------------------- round / sample

def test_round_half_away_pins_ties():
    x = np.array([-2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 0.49, -0.49])
    assert imops.round_half_away(x).tolist() == [-3, -2, -1, 1, 2, 3, 0, 0]


@given(hnp.arrays(np.float64, st.integers(1, 20),
                  elements=st.floats(-1e6, 1e6)))
def test_round_half_away_magnitude_rule(x):
    got = imops.round_half_away(x)
    frac = np.abs(x) - np.floor(np.abs(x))
    expect = np.where(frac >= 0.5, np.ceil(np.abs(x)), np.floor(np.abs(x)))
    assert np.array_equal(got, np.sign(x) * expect)


# ------------------------------------------------------------- normalize

def test_normalize_frozen_midpoint():
    s = np.array([[-1000.0, 0.0], [1000.0, 500.0]])
    out = imops.normalize_u8(s)
    assert out.dtype == np.uint8
    assert out[0, 1] == 128  # 127.5 rounds away from zero
    assert out[0, 0] == 0 and out[1, 0] == 255


def test_normalize_constant_slice_is_zero():
    assert not imops.normalize_u8(np.full((4, 4), 77.0)).any()


def test_normalize_full_range_identity():
    img = np.arange(256, dtype=np.float64).reshape(16, 16)
    assert np.array_equal(imops.normalize_u8(img), img.astype(np.uint8))


# ------------------------------------------------------------ hist_equalize

def test_hist_equalize_frozen_example():
    img = np.array([[52, 52], [154, 200]], dtype=np.uint8)
    assert imops.hist_equalize(img).ravel().tolist() == [0, 0, 128, 255]


def test_hist_equalize_uniform_fixed_point():
    img = np.arange(256, dtype=np.uint8).reshape(16, 16)
    assert np.array_equal(imops.hist_equalize(img), img)


def test_hist_equalize_constant_unchanged():
    img = np.full((5, 5), 93, dtype=np.uint8)
    assert np.array_equal(imops.hist_equalize(img), img)


# ------------------------------------------------------------------- otsu

def test_otsu_frozen_four_values():
    img = np.array([[10, 12], [200, 202]], dtype=np.uint8)
    t, mask = imops.otsu_threshold(img)
    assert 12 <= t <= 199
    assert t == oracle_otsu(img)  # lowest tie
    assert mask.ravel().tolist() == [0, 0, 1, 1]


def test_otsu_bimodal():
    img = np.array([0] * 8 + [255] * 8, dtype=np.uint8).reshape(4, 4)
    _, mask = imops.otsu_threshold(img)
    assert np.array_equal(mask, (img == 255).astype(np.uint8))


def test_otsu_constant_gives_empty_mask():
    t, mask = imops.otsu_threshold(np.full((4, 4), 128, dtype=np.uint8))
    assert t == 128 and not mask.any()


def test_otsu_matches_oracle_on_random_slices():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        img = rng.integers(0, 256, size=(64, 64)).astype(np.uint8)
        t, _ = imops.otsu_threshold(img)
        assert t == oracle_otsu(img)


# ------------------------------------------------------------------ resize

def test_resize_identity():
    img = np.random.default_rng(0).normal(size=(7, 5))
    assert np.array_equal(imops.resize(img, 7, 5), img)


def test_resize_nearest_preserves_value_set():
    img = np.array([[0, 1], [2, 2]], dtype=np.uint8)
    out = imops.resize(img, 4, 4, method="nearest")
    assert out.dtype == np.uint8
    assert set(np.unique(out)) <= {0, 1, 2}


def test_resize_bilinear_ramp_oracle():
    ramp = np.arange(16, dtype=np.float64).reshape(4, 4)
    out = imops.resize(ramp, 2, 2)
    # sample centers (0.5, 2.5): each output is the mean of a 2x2 block
    assert np.allclose(out, [[2.5, 4.5], [10.5, 12.5]])


def test_resize_rejects_zero_target():
    with pytest.raises(ValueError):
        imops.resize(np.zeros((4, 4)), 0, 4)


def test_resize_upscale_is_edge_clamped():
    img = np.array([[1.0, 2.0]])
    out = imops.resize(img, 1, 4)
    assert out[0, 0] == 1.0 and out[0, -1] == 2.0


# ------------------------------------------------------------- box filters

def test_median_filter_trivials():
    ones = np.ones((12, 12), dtype=np.uint8)
    assert np.array_equal(imops.median_filter_binary(ones, 9), ones)
    speck = np.zeros((12, 12), dtype=np.uint8)
    speck[6, 6] = 1
    assert not imops.median_filter_binary(speck, 9).any()


def test_mean_filter_trivials():
    ones = np.ones((20, 20), dtype=np.uint8)
    assert np.array_equal(imops.mean_filter_binarize(ones, 15), ones)
    speck = np.zeros((20, 20), dtype=np.uint8)
    speck[10, 10] = 1
    assert not imops.mean_filter_binarize(speck, 15).any()


def test_median_filter_matches_bruteforce():
    rng = np.random.default_rng(5)
    for _ in range(5):
        mask = (rng.random((32, 32)) < 0.5).astype(np.uint8)
        want = (oracle_window_sum(mask, 9, replicate=True) >= 41).astype(np.uint8)
        assert np.array_equal(imops.median_filter_binary(mask, 9), want)


def test_mean_filter_matches_bruteforce():
    rng = np.random.default_rng(6)
    for _ in range(5):
        mask = (rng.random((32, 32)) < 0.5).astype(np.uint8)
        want = (oracle_window_sum(mask, 15, replicate=True) >= 113).astype(np.uint8)
        assert np.array_equal(imops.mean_filter_binarize(mask, 15), want)


# -------------------------------------------------------------- morphology

def test_open_removes_block_smaller_than_kernel():
    mask = np.zeros((512, 512), dtype=np.uint8)
    mask[100:150, 100:150] = 1
    assert not imops.morph_open(mask, 99).any()


def test_open_keeps_block_larger_than_kernel():
    mask = np.zeros((512, 512), dtype=np.uint8)
    mask[100:300, 150:350] = 1
    assert np.array_equal(imops.morph_open(mask, 99), mask)


def test_open_matches_naive_erode_dilate():
    rng = np.random.default_rng(9)
    for _ in range(5):
        mask = (rng.random((24, 24)) < 0.6).astype(np.uint8)
        want = oracle_dilate(oracle_erode(mask, 5), 5)
        assert np.array_equal(imops.morph_open(mask, 5), want)


def test_open_idempotent_and_anti_extensive():
    rng = np.random.default_rng(10)
    for _ in range(100):
        mask = (rng.random((32, 32)) < rng.uniform(0.2, 0.8)).astype(np.uint8)
        opened = imops.morph_open(mask, 5)
        assert np.array_equal(imops.morph_open(opened, 5), opened)
        assert not (opened & ~mask).any()


# -------------------------------------------------------------- fill_holes

def test_fill_holes_annulus():
    mask = np.zeros((21, 21), dtype=np.uint8)
    yy, xx = np.ogrid[:21, :21]
    r2 = (yy - 10) ** 2 + (xx - 10) ** 2
    mask[(r2 <= 81) & (r2 >= 25)] = 1
    filled = imops.fill_holes(mask)
    assert np.array_equal(filled, (r2 <= 81).astype(np.uint8))


def test_fill_holes_open_cavity_unchanged():
    mask = np.zeros((10, 10), dtype=np.uint8)
    mask[2:9, 2:4] = 1
    mask[2:9, 6:8] = 1
    mask[7:9, 2:8] = 1  # U-shape opening upward to the border
    assert np.array_equal(imops.fill_holes(mask), mask)


def test_fill_holes_matches_bfs_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mask = (rng.random((16, 16)) < 0.55).astype(np.uint8)
        assert np.array_equal(imops.fill_holes(mask), oracle_fill_holes(mask))


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.uint8, st.tuples(st.integers(2, 12), st.integers(2, 12)),
                  elements=st.integers(0, 1)))
def test_fill_holes_extensive_idempotent(mask):
    filled = imops.fill_holes(mask)
    assert not (mask & ~filled).any()
    assert np.array_equal(imops.fill_holes(filled), filled)
