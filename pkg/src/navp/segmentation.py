"""Server-side preprocessing backends.

The default backend assigns each pixel to its nearest palette color in
squared RGB distance, which on pristine procedural scenes reproduces the
generator's ground truth exactly; compression and downscaling perturb
boundary pixels first, so boundary fidelity degrades before global
structure -- the effect the metrics are built to expose. Virtual runs
price inference with an affine cost model instead of wall time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .frames import Frame, LabelMap, ScenePalette

# Affine per-frame cost: fixed overhead plus per-pixel work. The per-pixel
# coefficient is calibrated so a 1920x1080 frame costs 118 ms and scales
# down with the tier resolutions (480x270 lands near 12 ms).
DEFAULT_FIXED_COST_US = 5000.0
DEFAULT_PER_PIXEL_US = 113_000.0 / (1920.0 * 1080.0)


@dataclass(frozen=True)
class CostModel:
    fixed_cost_us: float = DEFAULT_FIXED_COST_US
    per_pixel_us: float = DEFAULT_PER_PIXEL_US

    def __post_init__(self) -> None:
        if self.fixed_cost_us < 0 or self.per_pixel_us < 0:
            raise ValueError("cost model coefficients must be non-negative")

    def inference_us(self, width: int, height: int) -> int:
        if width < 1 or height < 1:
            raise ValueError("dimensions must be >= 1")
        return int(self.fixed_cost_us + self.per_pixel_us * width * height + 0.5)


def virtual_inference_time(model: CostModel, width: int, height: int) -> int:
    return model.inference_us(width, height)


def palette_segment(frame: Frame, palette: ScenePalette) -> LabelMap:
    """Label each pixel with the nearest palette color (squared RGB distance).

    Ties resolve to the lowest palette index. The |p|^2 term is common to
    every candidate, so ranking -2*p.c + |c|^2 via a matmul gives the same
    argmin; every intermediate is an integer below 2^24, exact in float32.
    """
    colors = palette.as_array().astype(np.float32)
    flat = frame.pixels.reshape(-1, 3).astype(np.float32)
    scores = flat @ (-2.0 * colors.T)
    scores += (colors * colors).sum(axis=1)[None, :]
    labels = (
        np.argmin(scores, axis=1)  # argmin takes the first (lowest-index) minimum
        .astype(np.uint8)
        .reshape(frame.height, frame.width)
    )
    return LabelMap(
        width=frame.width,
        height=frame.height,
        labels=labels,
        num_classes=len(palette),
    )


@runtime_checkable
class SegmentationBackend(Protocol):
    backend_id: str
    num_classes: int

    def segment(self, frame: Frame) -> tuple[LabelMap, int]:
        """Return the label map and the inference time in microseconds."""
        ...


class RemoteBackend:
    """Proxies segment() to a NAVP server over TCP (one frame per request).

    Lets the remote service (e.g. the standalone Python backend) stand in
    wherever a local backend is expected; inference time is whatever the
    server reports.
    """

    backend_id = "remote-python"

    def __init__(self, host: str, port: int, num_classes: int = 6, timeout_s: float = 10.0):
        import socket

        self.num_classes = num_classes
        self._sock = socket.create_connection((host, port), timeout=timeout_s)
        self._next_id = 0

    def close(self) -> None:
        self._sock.close()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def segment(self, frame: Frame) -> tuple[LabelMap, int]:
        import numpy as _np

        from .errors import ProtocolError
        from .protocol import FrameRequest, FrameResponse, encode_message, read_message

        self._next_id += 1
        req = FrameRequest(
            frame_id=self._next_id,
            timestamp_us=0,
            width=frame.width,
            height=frame.height,
            quality=100,
            codec_id=0,  # RAW
            payload=frame.tobytes(),
        )
        self._sock.sendall(encode_message(req))
        resp = read_message(self._sock)
        if not isinstance(resp, FrameResponse) or resp.frame_id != req.frame_id:
            raise ProtocolError(f"remote backend answered {type(resp).__name__}")
        labels = _np.frombuffer(resp.payload, dtype=_np.uint8).reshape(resp.height, resp.width)
        return (
            LabelMap(width=resp.width, height=resp.height, labels=labels,
                     num_classes=resp.num_classes),
            resp.inference_time_us,
        )


class PaletteBackend:
    """Nearest-palette-color segmenter with modeled or measured latency."""

    backend_id = "palette"

    def __init__(
        self,
        palette: ScenePalette,
        cost_model: CostModel | None = None,
        measure_wall_time: bool = False,
    ) -> None:
        self.palette = palette
        self.cost_model = cost_model if cost_model is not None else CostModel()
        self.measure_wall_time = measure_wall_time

    @property
    def num_classes(self) -> int:
        return len(self.palette)

    def segment(self, frame: Frame) -> tuple[LabelMap, int]:
        if self.measure_wall_time:
            t0 = time.perf_counter_ns()
            labels = palette_segment(frame, self.palette)
            elapsed_us = max(1, (time.perf_counter_ns() - t0) // 1000)
            return labels, int(elapsed_us)
        labels = palette_segment(frame, self.palette)
        return labels, self.cost_model.inference_us(frame.width, frame.height)


