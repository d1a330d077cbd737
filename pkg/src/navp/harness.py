"""Experiment runner: wires scenes, codec, controller, channel, transport,
segmentation, and metrics into one deterministic virtual-time run.

The synthetic capture loops over a bounded set of procedural scenes
(a looping clip, in effect), which keeps memory bounded and lets the
runner memoize per-(scene, tier) encoding and fidelity work without
changing any measured value. Fidelity is scored against the full-
resolution pipeline output: reference = palette segmentation of the
pristine frame, test = the server's label map upscaled back to capture
resolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import metrics
from .channel import SCENARIO_PRESETS, NetworkScenario
from .codec import CODEC_NAMES, CodecId, EncodedFrame, encode, resize_max
from .control import Controller, EncodingParams, TierRow, TierTable
from .frames import DEFAULT_PALETTE, Frame, ScenePalette, generate_scene
from .metrics import FrameRecord, RunSummary, bf_score, render_labels, ssim, summarize, upscale_labels
from .rng import derive_seed
from .segmentation import CostModel, PaletteBackend, palette_segment
from .transport import SendInfo, run_virtual_session

MODES = ("static", "adaptive")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "ultra-5g"
    mode: str = "adaptive"
    frames: int = 200
    seed: int = 1
    width: int = 1920
    height: int = 1080
    codec: str = "jpeg"
    probe_interval_ms: float = 250.0
    pipeline_cap: int = 4
    scene_cycle: int = 12
    num_shapes: int = 12
    palette: ScenePalette = DEFAULT_PALETTE
    tiers: tuple[TierRow, ...] = field(default_factory=lambda: TierTable().rows)
    hysteresis_ms: float = 0.0
    feed_frame_rtt: bool = False
    jitter_frac: float = 0.10
    rto_ms: float = 200.0
    window_capacity: int = 5
    cost_fixed_us: float = 5000.0
    cost_per_pixel_us: float = 113_000.0 / (1920.0 * 1080.0)
    compute_fidelity: bool = True  # off: ssim/bf columns are nan; timing unchanged

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.codec not in CODEC_NAMES:
            raise ValueError(f"codec must be one of {sorted(CODEC_NAMES)}")
        if self.scene_cycle < 1:
            raise ValueError("scene_cycle must be >= 1")

    @property
    def codec_id(self) -> CodecId:
        return CODEC_NAMES[self.codec]

    def tier_table(self) -> TierTable:
        return TierTable(self.tiers)


_CONFIG_KEYS = {
    "scenario", "mode", "frames", "seed", "width", "height", "codec",
    "probe_interval_ms", "pipeline_cap", "scene_cycle", "num_shapes",
    "hysteresis_ms", "feed_frame_rtt", "jitter_frac", "rto_ms",
    "window_capacity", "cost_fixed_us", "cost_per_pixel_us", "compute_fidelity",
}


def apply_config_file(config: RunConfig, path) -> RunConfig:
    """Overlay a JSON config file onto a RunConfig (schema in the README)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    unknown = set(raw) - _CONFIG_KEYS - {"tiers", "palette", "resolution"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    updates = {k: v for k, v in raw.items() if k in _CONFIG_KEYS}
    if "resolution" in raw:
        updates["width"], updates["height"] = int(raw["resolution"][0]), int(raw["resolution"][1])
    if "palette" in raw:
        updates["palette"] = ScenePalette(tuple(tuple(c) for c in raw["palette"]))
    if "tiers" in raw:
        rows = tuple(
            TierRow(
                rtt_threshold_ms=row.get("rtt_threshold_ms"),
                quality=row["quality"],
                max_resolution=row["max_resolution"],
                send_interval_ms=row["send_interval_ms"],
            )
            for row in raw["tiers"]
        )
        TierTable(rows)  # validate eagerly
        updates["tiers"] = rows
    return replace(config, **updates)


def resolve_scenario(name_or_path: str) -> NetworkScenario:
    preset = SCENARIO_PRESETS.get(name_or_path)
    if preset is not None:
        return preset
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        return NetworkScenario.from_json_file(path)
    raise KeyError(
        f"unknown scenario {name_or_path!r}: expected one of "
        f"{sorted(SCENARIO_PRESETS)} or a path to a scenario JSON file"
    )


class SceneBank:
    """Deterministic looping capture source with per-(scene, tier) memos."""

    def __init__(self, config: RunConfig) -> None:
        self.config = config
        self._frames: dict[int, Frame] = {}
        self._refs: dict[int, metrics.LabelMap] = {}
        self._encoded: dict[tuple[int, int, int, int], EncodedFrame] = {}
        self._fidelity: dict[tuple[int, int, int, int], tuple[float, float]] = {}

    def scene_id(self, capture_index: int) -> int:
        return capture_index % self.config.scene_cycle

    def frame(self, capture_index: int) -> Frame:
        sid = self.scene_id(capture_index)
        if sid not in self._frames:
            seed = derive_seed(self.config.seed, "scene", sid)
            self._frames[sid] = generate_scene(
                seed,
                self.config.width,
                self.config.height,
                self.config.palette,
                self.config.num_shapes,
            )
        return self._frames[sid]

    def reference_labels(self, capture_index: int) -> metrics.LabelMap:
        sid = self.scene_id(capture_index)
        if sid not in self._refs:
            self._refs[sid] = palette_segment(self.frame(sid), self.config.palette)
        return self._refs[sid]

    def encoded(self, capture_index: int, params: EncodingParams) -> EncodedFrame:
        sid = self.scene_id(capture_index)
        key = (sid, params.max_resolution, params.quality, int(self.config.codec_id))
        enc = self._encoded.get(key)
        if enc is None:
            frame = resize_max(self.frame(sid), params.max_resolution)
            enc = encode(frame, params.quality, self.config.codec_id)
            self._encoded[key] = enc
        return EncodedFrame(
            frame_index=capture_index,
            width=enc.width,
            height=enc.height,
            codec_id=enc.codec_id,
            payload=enc.payload,
        )

    def fidelity(self, info: SendInfo, response: metrics.LabelMap) -> tuple[float, float]:
        sid = self.scene_id(info.capture_index)
        key = (sid, info.params.max_resolution, info.params.quality, int(self.config.codec_id))
        hit = self._fidelity.get(key)
        if hit is None:
            ref = self.reference_labels(sid)
            test = upscale_labels(response, self.config.width, self.config.height)
            ssim_v = ssim(render_labels(ref), render_labels(test))
            bf_v = bf_score(ref, test)
            hit = (ssim_v, bf_v)
            self._fidelity[key] = hit
        return hit


@dataclass
class RunResult:
    summary: RunSummary
    records: list[FrameRecord]
    complete: bool
    tier_changes: list[tuple[int, int, int]]
    protocol_errors: int


def run_experiment(config: RunConfig, out_csv=None, out_summary=None) -> RunResult:
    """Run one scenario/mode experiment in virtual time; optionally persist."""
    scenario = resolve_scenario(config.scenario)
    bank = SceneBank(config)
    backend = PaletteBackend(
        config.palette,
        cost_model=CostModel(config.cost_fixed_us, config.cost_per_pixel_us),
    )
    controller = Controller(
        table=config.tier_table(),
        capacity=config.window_capacity,
        static=config.mode == "static",
        hysteresis_ms=config.hysteresis_ms,
    )
    result, _channel = run_virtual_session(
        scenario=scenario,
        backend=backend,
        controller=controller,
        frame_source=bank.frame,
        frames=config.frames,
        channel_seed=derive_seed(config.seed, "channel"),
        probe_interval_ms=config.probe_interval_ms,
        pipeline_cap=config.pipeline_cap,
        codec_id=config.codec_id,
        fidelity=bank.fidelity if config.compute_fidelity else None,
        feed_frame_rtt=config.feed_frame_rtt,
        jitter_frac=config.jitter_frac,
        rto_ms=config.rto_ms,
        encode_fn=bank.encoded,
    )
    records = result.sorted_records()
    csv_path = str(out_csv) if out_csv else ""
    summary = summarize(records, scenario.name, config.mode, config.seed, csv_path=csv_path)
    if out_csv:
        metrics.write_csv(records, out_csv)
    if out_summary:
        Path(out_summary).write_text(summary.to_json(), encoding="utf-8")
    return RunResult(
        summary=summary,
        records=records,
        complete=result.complete,
        tier_changes=result.tier_changes,
        protocol_errors=result.protocol_errors,
    )


def compare_summaries(baseline: RunSummary, candidate: RunSummary) -> dict:
    """Deltas of a candidate run against a baseline run (same scenario+seed)."""
    if baseline.scenario != candidate.scenario:
        raise ValueError(
            f"mismatched scenarios: {baseline.scenario!r} vs {candidate.scenario!r}"
        )
    if baseline.seed != candidate.seed:
        raise ValueError(f"mismatched seeds: {baseline.seed} vs {candidate.seed}")

    def _reduction(a: float, b: float) -> float:
        return 100.0 * (a - b) / a if a else 0.0

    def _rel(a: float, b: float) -> float:
        return 100.0 * (b - a) / a if a else 0.0

    return {
        "scenario": baseline.scenario,
        "seed": baseline.seed,
        "baseline_mode": baseline.mode,
        "candidate_mode": candidate.mode,
        "rtt_median_reduction_pct": _reduction(baseline.rtt_median_us, candidate.rtt_median_us),
        "rtt_mean_reduction_pct": _reduction(baseline.rtt_mean_us, candidate.rtt_mean_us),
        "inference_mean_reduction_pct": _reduction(
            baseline.inference_mean_us, candidate.inference_mean_us
        ),
        "ssim_delta_abs": candidate.ssim_mean - baseline.ssim_mean,
        "ssim_delta_rel_pct": _rel(baseline.ssim_mean, candidate.ssim_mean),
        "bf_delta_abs": candidate.bf_mean - baseline.bf_mean,
        "bf_delta_rel_pct": _rel(baseline.bf_mean, candidate.bf_mean),
    }


def write_comparison_frames_csv(
    records_a: list[FrameRecord], records_b: list[FrameRecord], path
) -> None:
    """Plot-ready per-frame table: one column set per mode, joined on frame_id."""
    by_id_b = {r.frame_id: r for r in records_b}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            "frame_id,tier_a,rtt_us_a,infer_us_a,bytes_a,ssim_a,bf_a,"
            "tier_b,rtt_us_b,infer_us_b,bytes_b,ssim_b,bf_b\n"
        )
        for ra in records_a:
            rb = by_id_b.get(ra.frame_id)
            if rb is None:
                continue
            fh.write(
                f"{ra.frame_id},{ra.tier_index},{ra.rtt_us},{ra.inference_us},"
                f"{ra.payload_bytes},{ra.ssim:.6f},{ra.bf:.6f},"
                f"{rb.tier_index},{rb.rtt_us},{rb.inference_us},"
                f"{rb.payload_bytes},{rb.ssim:.6f},{rb.bf:.6f}\n"
            )
