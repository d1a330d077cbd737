import math

import numpy as np
import pytest

from navp.frames import LabelMap
from navp.metrics import (
    CSV_HEADER,
    FrameRecord,
    RunSummary,
    SSIM_C1,
    SSIM_C2,
    bf_score,
    boundary_mask,
    default_bf_tolerance,
    lower_median,
    nearest_rank_p95,
    read_csv,
    render_labels,
    ssim,
    summarize,
    upscale_labels,
    write_csv,
)

# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------


def ssim_direct(ref: np.ndarray, test: np.ndarray, k: int = 8) -> float:
    """Per-window direct evaluation of the structural similarity formula."""
    h, w = ref.shape
    vals = []
    for i in range(h - k + 1):
        for j in range(w - k + 1):
            x = ref[i : i + k, j : j + k].astype(np.float64)
            y = test[i : i + k, j : j + k].astype(np.float64)
            mx, my = x.mean(), y.mean()
            vx = ((x - mx) ** 2).mean()
            vy = ((y - my) ** 2).mean()
            cov = ((x - mx) * (y - my)).mean()
            vals.append(
                ((2 * mx * my + SSIM_C1) * (2 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
            )
    return float(np.mean(vals))


def bf_direct(ref: LabelMap, test: LabelMap, tolerance: float) -> float:
    """Brute-force boundary F1: O(n^2) nearest-distance scans."""

    def class_boundary(labels, c):
        b = boundary_mask(labels)
        return [tuple(p) for p in np.argwhere(b & (labels == c))]

    def frac_within(points, targets):
        hits = 0
        for p in points:
            best = min(math.dist(p, t) for t in targets)
            hits += best <= tolerance
        return hits / len(points)

    classes = sorted(set(np.unique(ref.labels)) | set(np.unique(test.labels)))
    scores = []
    for c in classes:
        rp = class_boundary(ref.labels, c)
        tp = class_boundary(test.labels, c)
        if not rp and not tp:
            scores.append(1.0)
        elif not rp or not tp:
            scores.append(0.0)
        else:
            precision = frac_within(tp, rp)
            recall = frac_within(rp, tp)
            scores.append(
                0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
            )
    return float(np.mean(scores))


def labels(arr, num_classes) -> LabelMap:
    a = np.asarray(arr, dtype=np.uint8)
    return LabelMap(width=a.shape[1], height=a.shape[0], labels=a, num_classes=num_classes)


# ---------------------------------------------------------------------------
# SSIM
# ---------------------------------------------------------------------------


class TestSsim:
    def test_identical_images(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        assert ssim(img, img) == 1.0

    def test_inverted_two_class_image_is_dissimilar(self):
        rng = np.random.default_rng(1)
        ref = (rng.integers(0, 2, size=(16, 16), dtype=np.uint8)) * 255
        inv = 255 - ref
        got = ssim(ref, inv)
        assert got < 0.1
        assert got == pytest.approx(ssim_direct(ref, inv), abs=1e-9)

    def test_constant_images_closed_form(self):
        a = np.full((16, 16), 100, dtype=np.uint8)
        b = np.full((16, 16), 120, dtype=np.uint8)
        expected = ((2 * 100 * 120 + SSIM_C1) * SSIM_C2) / (
            (100**2 + 120**2 + SSIM_C1) * SSIM_C2
        )
        assert ssim(a, b) == pytest.approx(expected, abs=1e-12)

    def test_matches_direct_oracle_on_random_images(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            a = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
            b = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
            assert abs(ssim(a, b) - ssim_direct(a, b)) <= 1e-9

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 256, size=(20, 24), dtype=np.uint8)
        b = rng.integers(0, 256, size=(20, 24), dtype=np.uint8)
        assert ssim(a, b) == ssim(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            ssim(np.zeros((16, 16), np.uint8), np.zeros((16, 17), np.uint8))

    def test_too_small(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((4, 4), np.uint8), np.zeros((4, 4), np.uint8))


class TestRenderLabels:
    def test_two_class_renders_black_white(self):
        lm = labels([[0, 1]], 2)
        assert render_labels(lm).tolist() == [[0, 255]]

    def test_rounding_half_up(self):
        lm = labels([[0, 1, 2]], 3)
        assert render_labels(lm).tolist() == [[0, 128, 255]]  # 127.5 rounds up

    def test_single_class_renders_zero(self):
        lm = labels([[0, 0]], 1)
        assert render_labels(lm).tolist() == [[0, 0]]


# ---------------------------------------------------------------------------
# boundary F1
# ---------------------------------------------------------------------------


def square_map(size, lo, hi, cls=1, num_classes=2):
    a = np.zeros((size, size), dtype=np.uint8)
    a[lo:hi, lo:hi] = cls
    return labels(a, num_classes)


class TestBfScore:
    def test_identical_maps(self):
        m = square_map(64, 10, 21)
        assert bf_score(m, m) == 1.0

    def test_one_pixel_shift_within_tolerance(self):
        ref = square_map(64, 10, 21)
        a = np.zeros((64, 64), dtype=np.uint8)
        a[11:22, 11:22] = 1
        test = labels(a, 2)
        assert bf_score(ref, test, tolerance=2) == 1.0
        assert bf_direct(ref, test, 2) == 1.0

    def test_disjoint_squares_beyond_tolerance(self):
        a = np.zeros((80, 80), dtype=np.uint8)
        a[2:6, 2:6] = 1
        b = np.zeros((80, 80), dtype=np.uint8)
        b[60:64, 60:64] = 1
        # class 0 boundaries hug the class-1 squares, so they miss too
        assert bf_score(labels(a, 2), labels(b, 2), tolerance=2) == 0.0

    def test_matches_brute_force_on_random_maps(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            a = rng.integers(0, 3, size=(12, 12), dtype=np.uint8)
            b = rng.integers(0, 3, size=(12, 12), dtype=np.uint8)
            ma, mb = labels(a, 3), labels(b, 3)
            assert bf_score(ma, mb, tolerance=2) == pytest.approx(bf_direct(ma, mb, 2), abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(10)
        a = labels(rng.integers(0, 3, size=(16, 16), dtype=np.uint8), 3)
        b = labels(rng.integers(0, 3, size=(16, 16), dtype=np.uint8), 3)
        assert bf_score(a, b) == bf_score(b, a)

    def test_empty_vs_empty_class_scores_one(self):
        # constant maps: no boundary pixels anywhere, single shared class
        a = labels(np.zeros((16, 16), dtype=np.uint8), 3)
        assert bf_score(a, a) == 1.0

    def test_class_missing_from_test_scores_zero(self):
        ref = square_map(32, 8, 16)
        test = labels(np.zeros((32, 32), dtype=np.uint8), 2)
        # class 1 boundary exists only in ref -> 0; class 0 boundary exists
        # only in ref too (test is constant) -> 0
        assert bf_score(ref, test, tolerance=3) == 0.0

    def test_default_tolerance_formula(self):
        assert default_bf_tolerance(1920, 1080) == 17
        assert default_bf_tolerance(16, 16) == 1  # minimum clamps

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            bf_score(square_map(16, 2, 5), square_map(17, 2, 5))


class TestUpscale:
    def test_2x2_to_4x4_blocks(self):
        lm = labels([[0, 1], [2, 3]], 4)
        up = upscale_labels(lm, 4, 4)
        assert up.labels.tolist() == [
            [0, 0, 1, 1],
            [0, 0, 1, 1],
            [2, 2, 3, 3],
            [2, 2, 3, 3],
        ]

    def test_identity_when_same_size(self):
        lm = labels([[0, 1], [2, 3]], 4)
        assert upscale_labels(lm, 2, 2) is lm

    def test_3x3_to_9x9_blocks(self):
        base = np.arange(9, dtype=np.uint8).reshape(3, 3)
        up = upscale_labels(labels(base, 9), 9, 9)
        assert np.array_equal(up.labels, np.kron(base, np.ones((3, 3), dtype=np.uint8)))

    def test_class_set_never_grows(self):
        rng = np.random.default_rng(2)
        base = rng.integers(0, 5, size=(5, 7), dtype=np.uint8)
        up = upscale_labels(labels(base, 5), 13, 11)
        assert set(np.unique(up.labels)) <= set(np.unique(base))

    def test_smaller_target_rejected(self):
        with pytest.raises(ValueError):
            upscale_labels(labels([[0, 1]], 2), 1, 1)


# ---------------------------------------------------------------------------
# summaries and CSV
# ---------------------------------------------------------------------------


def record(fid, rtt_us, infer_us=0, tier=0, ssim_v=1.0, bf_v=1.0):
    return FrameRecord(
        frame_id=fid, tier_index=tier, sent_us=fid * 1000, rtt_us=rtt_us,
        inference_us=infer_us, payload_bytes=10, ssim=ssim_v, bf=bf_v,
    )


class TestSummaries:
    def test_median_of_three(self):
        s = summarize([record(i, r) for i, r in enumerate([10, 20, 30])], "x", "static", 1)
        assert s.rtt_median_us == 20

    def test_single_record(self):
        s = summarize([record(0, 42)], "x", "static", 1)
        assert s.rtt_mean_us == s.rtt_median_us == s.rtt_p95_us == 42

    def test_lower_median_convention(self):
        assert lower_median([10, 20, 30, 40]) == 20

    def test_p95_nearest_rank(self):
        values = list(range(1, 101))
        assert nearest_rank_p95(values) == 95
        s = summarize([record(i, v * 1000) for i, v in enumerate(values)], "x", "static", 1)
        assert s.rtt_p95_us == 95_000

    def test_empty_run_rejected(self):
        with pytest.raises(ValueError):
            summarize([], "x", "static", 1)

    def test_record_invariant(self):
        with pytest.raises(ValueError):
            FrameRecord(frame_id=0, tier_index=0, sent_us=0, rtt_us=5,
                        inference_us=10, payload_bytes=1, ssim=1.0, bf=1.0)

    def test_summary_json_round_trip(self):
        s = summarize([record(0, 42)], "ultra-5g", "adaptive", 7, csv_path="a.csv")
        assert RunSummary.from_json(s.to_json()) == s


class TestCsv:
    def test_round_trip(self, tmp_path):
        records = [record(i, 1000 + i, infer_us=i, tier=i % 5, ssim_v=0.5, bf_v=0.25)
                   for i in range(10)]
        path = tmp_path / "r.csv"
        write_csv(records, path)
        text = path.read_text(encoding="utf-8")
        assert text.splitlines()[0] == CSV_HEADER
        assert read_csv(path) == records

    def test_header_validated(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope,nope\n1,2\n", encoding="utf-8")
        with pytest.raises(ValueError, match="header"):
            read_csv(path)
