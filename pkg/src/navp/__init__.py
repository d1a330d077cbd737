"""navp: a desk-scale testbed for network-adaptive remote segmentation.

A client captures synthetic scenes, encodes them under a tier policy
driven by smoothed round-trip-time probes, and ships them over an
emulated impaired link to a segmentation server; per-frame latency and
fidelity land in CSV/JSON artifacts for analysis.
"""

from .channel import SCENARIO_PRESETS, NetworkScenario
from .codec import CodecId, EncodedFrame, decode, encode, resize_max
from .control import Controller, EncodingParams, RttWindow, TierRow, TierTable
from .frames import DEFAULT_PALETTE, Frame, LabelMap, ScenePalette, generate_scene, load_ppm, save_ppm
from .harness import RunConfig, compare_summaries, run_experiment
from .metrics import FrameRecord, RunSummary, bf_score, ssim, summarize, upscale_labels
from .segmentation import CostModel, PaletteBackend, palette_segment

__version__ = "0.1.0"

__all__ = [
    "SCENARIO_PRESETS",
    "NetworkScenario",
    "CodecId",
    "EncodedFrame",
    "decode",
    "encode",
    "resize_max",
    "Controller",
    "EncodingParams",
    "RttWindow",
    "TierRow",
    "TierTable",
    "DEFAULT_PALETTE",
    "Frame",
    "LabelMap",
    "ScenePalette",
    "generate_scene",
    "load_ppm",
    "save_ppm",
    "RunConfig",
    "compare_summaries",
    "run_experiment",
    "FrameRecord",
    "RunSummary",
    "bf_score",
    "ssim",
    "summarize",
    "upscale_labels",
    "CostModel",
    "PaletteBackend",
    "palette_segment",
    "__version__",
]
