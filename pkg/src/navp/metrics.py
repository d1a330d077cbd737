"""Outcome measures: RTT statistics, SSIM, and boundary-F1 over label maps.

SSIM runs over 8x8 sliding windows with stride 1 and uniform weighting,
constants C1 = (0.01*255)^2 and C2 = (0.03*255)^2, on grayscale renderings
of label maps (class i maps to round(255*i/(num_classes-1))). Window sums
are computed on exact integer summed-area tables, so the result matches a
direct per-window evaluation to floating-point noise.

The boundary-F1 score extracts boundary pixels (any 4-neighbor differs),
splits them per class, and scores precision/recall under a Euclidean
pixel-distance tolerance (default 0.75% of the image diagonal, minimum 1),
averaging the harmonic means over the classes present in either map.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .frames import LabelMap

SSIM_WINDOW = 8
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2

CSV_HEADER = "frame_id,tier,sent_us,rtt_us,infer_us,bytes,ssim,bf"


def render_labels(label_map: LabelMap) -> np.ndarray:
    """Grayscale rendering: class i -> round(255*i/(num_classes-1)), half up."""
    nc = label_map.num_classes
    if nc < 2:
        return np.zeros((label_map.height, label_map.width), dtype=np.uint8)
    lab = label_map.labels.astype(np.int64)
    return ((lab * 510 + (nc - 1)) // (2 * (nc - 1))).astype(np.uint8)


def _integral(arr: np.ndarray) -> np.ndarray:
    out = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.int64)
    np.cumsum(arr, axis=0, out=out[1:, 1:])
    np.cumsum(out[1:, 1:], axis=1, out=out[1:, 1:])
    return out


def _window_sums(arr: np.ndarray, k: int) -> np.ndarray:
    s = _integral(arr)
    return s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]


def ssim(reference: np.ndarray, test: np.ndarray) -> float:
    """Mean local SSIM between two equal-sized 2-D uint8 images."""
    ref = np.asarray(reference)
    tst = np.asarray(test)
    if ref.shape != tst.shape:
        raise ValueError(f"dimension mismatch: {ref.shape} vs {tst.shape}")
    if ref.ndim != 2:
        raise ValueError("ssim expects 2-D grayscale images")
    h, w = ref.shape
    k = SSIM_WINDOW
    if h < k or w < k:
        raise ValueError(f"images must be at least {k}x{k}")

    x = ref.astype(np.int64)
    y = tst.astype(np.int64)
    n = k * k
    sum_x = _window_sums(x, k)
    sum_y = _window_sums(y, k)
    sum_xx = _window_sums(x * x, k)
    sum_yy = _window_sums(y * y, k)
    sum_xy = _window_sums(x * y, k)

    mu_x = sum_x / n
    mu_y = sum_y / n
    var_x = sum_xx / n - mu_x * mu_x
    var_y = sum_yy / n - mu_y * mu_y
    cov = sum_xy / n - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    return float(np.mean(num / den))


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Pixels with at least one 4-neighbor of a different label."""
    b = np.zeros(labels.shape, dtype=bool)
    diff_h = labels[:, 1:] != labels[:, :-1]
    b[:, 1:] |= diff_h
    b[:, :-1] |= diff_h
    diff_v = labels[1:, :] != labels[:-1, :]
    b[1:, :] |= diff_v
    b[:-1, :] |= diff_v
    return b


def default_bf_tolerance(width: int, height: int) -> int:
    diag = math.sqrt(width * width + height * height)
    return max(1, int(0.0075 * diag + 0.5))


def _match_fraction(points: np.ndarray, targets: np.ndarray, tolerance: float) -> float:
    """Fraction of `points` within `tolerance` of some point in `targets`."""
    tree = cKDTree(targets)
    dists, _ = tree.query(points, k=1, distance_upper_bound=tolerance + 1e-9)
    return float(np.mean(dists <= tolerance))


def bf_score(reference: LabelMap, test: LabelMap, tolerance: int | None = None) -> float:
    """Boundary F1 averaged over the classes present in either map."""
    if (reference.width, reference.height) != (test.width, test.height):
        raise ValueError(
            f"dimension mismatch: {reference.width}x{reference.height} vs {test.width}x{test.height}"
        )
    if tolerance is None:
        tolerance = default_bf_tolerance(reference.width, reference.height)

    ref_labels = reference.labels
    test_labels = test.labels
    ref_b = boundary_mask(ref_labels)
    test_b = boundary_mask(test_labels)
    classes = np.union1d(np.unique(ref_labels), np.unique(test_labels))

    scores = []
    for c in classes:
        ref_pts = np.argwhere(ref_b & (ref_labels == c))
        test_pts = np.argwhere(test_b & (test_labels == c))
        if len(ref_pts) == 0 and len(test_pts) == 0:
            scores.append(1.0)
            continue
        if len(ref_pts) == 0 or len(test_pts) == 0:
            scores.append(0.0)
            continue
        precision = _match_fraction(test_pts, ref_pts, tolerance)
        recall = _match_fraction(ref_pts, test_pts, tolerance)
        if precision + recall == 0:
            scores.append(0.0)
        else:
            scores.append(2.0 * precision * recall / (precision + recall))
    return float(np.mean(scores))


def upscale_labels(label_map: LabelMap, target_w: int, target_h: int) -> LabelMap:
    """Nearest-neighbor replication to a target at least as large."""
    if target_w < label_map.width or target_h < label_map.height:
        raise ValueError("upscale target must be at least the source size")
    if (target_w, target_h) == (label_map.width, label_map.height):
        return label_map
    src_y = (np.arange(target_h, dtype=np.int64) * label_map.height) // target_h
    src_x = (np.arange(target_w, dtype=np.int64) * label_map.width) // target_w
    out = label_map.labels[src_y[:, None], src_x[None, :]]
    return LabelMap(
        width=target_w, height=target_h, labels=out, num_classes=label_map.num_classes
    )


@dataclass(frozen=True)
class FrameRecord:
    frame_id: int
    tier_index: int
    sent_us: int
    rtt_us: int
    inference_us: int
    payload_bytes: int
    ssim: float
    bf: float

    def __post_init__(self) -> None:
        if not (self.rtt_us >= self.inference_us >= 0):
            raise ValueError("record must satisfy rtt >= inference_time >= 0")


@dataclass(frozen=True)
class RunSummary:
    scenario: str
    mode: str
    frames: int
    rtt_mean_us: float
    rtt_median_us: float
    rtt_p95_us: float
    inference_mean_us: float
    ssim_mean: float
    bf_mean: float
    seed: int
    csv_path: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunSummary":
        return cls(**json.loads(text))


def lower_median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def nearest_rank_p95(values: Sequence[float]) -> float:
    ordered = sorted(values)
    rank = math.ceil(0.95 * len(ordered))
    return ordered[max(0, rank - 1)]


def summarize(
    records: Sequence[FrameRecord], scenario: str, mode: str, seed: int, csv_path: str = ""
) -> RunSummary:
    if not records:
        raise ValueError("cannot summarize an empty run")
    rtts = [r.rtt_us for r in records]
    return RunSummary(
        scenario=scenario,
        mode=mode,
        frames=len(records),
        rtt_mean_us=sum(rtts) / len(rtts),
        rtt_median_us=lower_median(rtts),
        rtt_p95_us=nearest_rank_p95(rtts),
        inference_mean_us=sum(r.inference_us for r in records) / len(records),
        ssim_mean=sum(r.ssim for r in records) / len(records),
        bf_mean=sum(r.bf for r in records) / len(records),
        seed=seed,
        csv_path=csv_path,
    )


def write_csv(records: Iterable[FrameRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.frame_id},{r.tier_index},{r.sent_us},{r.rtt_us},"
                f"{r.inference_us},{r.payload_bytes},{r.ssim:.6f},{r.bf:.6f}\n"
            )


def read_csv(path) -> list[FrameRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ValueError(f"unexpected CSV header in {path}: {reader.fieldnames}")
        for row in reader:
            records.append(
                FrameRecord(
                    frame_id=int(row["frame_id"]),
                    tier_index=int(row["tier"]),
                    sent_us=int(row["sent_us"]),
                    rtt_us=int(row["rtt_us"]),
                    inference_us=int(row["infer_us"]),
                    payload_bytes=int(row["bytes"]),
                    ssim=float(row["ssim"]),
                    bf=float(row["bf"]),
                )
            )
    return records
