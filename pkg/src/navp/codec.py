"""Encoding stage: aspect-preserving downscale plus lossy compression.

Three codecs share one id space (the ids travel on the wire):

* RAW   -- the raster itself; exact round trip.
* JPEG  -- baseline JPEG via Pillow; quality-parameterized, not bit-pinned.
* QUANT -- deterministic uniform quantizer, fully specified here so every
  implementation reproduces it exactly: channel value v maps to
  round(v/s)*s clamped to [0,255] with step s = 1 + floor((100-q)/10),
  rounding half away from zero. The payload stores the step byte followed
  by the DEFLATE-compressed index raster (one index byte per sample);
  decoding restores the quantized values exactly. The encoder zero-pads
  the payload up to the longest payload it would emit at any coarser
  step, which makes payload length non-decreasing in quality for every
  input, not just in expectation.
"""

from __future__ import annotations

import io
import zlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from PIL import Image

from .errors import CodecError
from .frames import Frame


class CodecId(IntEnum):
    RAW = 0
    JPEG = 1
    QUANT = 2


CODEC_NAMES = {"raw": CodecId.RAW, "jpeg": CodecId.JPEG, "quant": CodecId.QUANT}


@dataclass(frozen=True, eq=False)
class EncodedFrame:
    frame_index: int
    width: int
    height: int
    codec_id: CodecId
    payload: bytes

    def __post_init__(self) -> None:
        if not self.payload:
            raise ValueError("payload must be non-empty")
        if self.codec_id == CodecId.RAW and len(self.payload) != self.width * self.height * 3:
            raise ValueError("RAW payload length must equal width * height * 3")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EncodedFrame):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.width == other.width
            and self.height == other.height
            and self.codec_id == other.codec_id
            and self.payload == other.payload
        )


def _round_half_up_div(num: np.ndarray | int, den: int):
    """floor(num/den + 1/2) for non-negative integers, computed exactly."""
    return (2 * num + den) // (2 * den)


def resize_max(frame: Frame, max_dim: int) -> Frame:
    """Downscale so the larger dimension equals max_dim; never upscale.

    Box-filter averaging: output pixel (i, j) is the rounded mean of the
    source block [floor(i*h/h'), floor((i+1)*h/h')) x [floor(j*w/w'),
    floor((j+1)*w/w')). The smaller output dimension is round(dim * scale),
    half up, minimum 1.
    """
    if max_dim < 16:
        raise ValueError("max_dim must be >= 16")
    w, h = frame.width, frame.height
    if max(w, h) <= max_dim:
        return frame
    if w >= h:
        new_w = max_dim
        new_h = max(1, _round_half_up_div(h * max_dim, w))
    else:
        new_h = max_dim
        new_w = max(1, _round_half_up_div(w * max_dim, h))

    src = frame.pixels.astype(np.int64)
    y_bounds = (np.arange(new_h + 1, dtype=np.int64) * h) // new_h
    x_bounds = (np.arange(new_w + 1, dtype=np.int64) * w) // new_w
    row_sums = np.add.reduceat(src, y_bounds[:-1], axis=0)
    box_sums = np.add.reduceat(row_sums, x_bounds[:-1], axis=1)
    counts = np.diff(y_bounds)[:, None] * np.diff(x_bounds)[None, :]
    out = (2 * box_sums + counts[..., None]) // (2 * counts[..., None])
    return Frame(
        width=new_w,
        height=new_h,
        pixels=out.astype(np.uint8),
        frame_index=frame.frame_index,
    )


def quant_step(quality: int) -> int:
    return 1 + (100 - quality) // 10


_QUANT_MAX_STEP = quant_step(1)
_QUANT_ZLIB_LEVEL = 3


def _quant_indices(pixels: np.ndarray, step: int) -> bytes:
    idx = _round_half_up_div(pixels, step).astype(np.uint8)
    return idx.tobytes()


def _quant_payload(frame: Frame, quality: int) -> bytes:
    """Step byte + DEFLATE of the index raster, padded to the monotone envelope.

    DEFLATE output length is not itself monotone under coarser quantization
    (symbol tables shift by a few bytes), so the payload is padded up to the
    longest payload any coarser step would produce. That makes
    len(payload(q1)) <= len(payload(q2)) for q1 <= q2 a property of the
    format rather than of the content.
    """
    s = quant_step(quality)
    pixels = frame.pixels.astype(np.uint16)
    body = bytes([s]) + zlib.compress(_quant_indices(pixels, s), _QUANT_ZLIB_LEVEL)
    envelope = 0
    for coarser in range(_QUANT_MAX_STEP, s, -1):
        z = zlib.compress(_quant_indices(pixels, coarser), _QUANT_ZLIB_LEVEL)
        envelope = max(envelope, 1 + len(z))
    if len(body) < envelope:
        body += b"\x00" * (envelope - len(body))
    return body


def encode(frame: Frame, quality: int, codec_id: CodecId) -> EncodedFrame:
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in [1, 100]")
    codec_id = CodecId(codec_id)
    if codec_id == CodecId.RAW:
        payload = frame.tobytes()
    elif codec_id == CodecId.QUANT:
        payload = _quant_payload(frame, quality)
    elif codec_id == CodecId.JPEG:
        buf = io.BytesIO()
        Image.fromarray(frame.pixels).save(buf, format="JPEG", quality=quality)
        payload = buf.getvalue()
    else:  # pragma: no cover - IntEnum conversion rejects unknown values first
        raise CodecError(f"unknown codec id {codec_id}")
    return EncodedFrame(
        frame_index=frame.frame_index,
        width=frame.width,
        height=frame.height,
        codec_id=codec_id,
        payload=payload,
    )


def decode(enc: EncodedFrame) -> Frame:
    try:
        codec_id = CodecId(enc.codec_id)
    except ValueError as exc:
        raise CodecError(f"unknown codec id {enc.codec_id}") from exc
    n = enc.width * enc.height * 3
    if codec_id == CodecId.RAW:
        if len(enc.payload) != n:
            raise CodecError("corrupt RAW payload: wrong length")
        pixels = np.frombuffer(enc.payload, dtype=np.uint8).reshape(enc.height, enc.width, 3)
    elif codec_id == CodecId.QUANT:
        s = enc.payload[0]
        if s < 1:
            raise CodecError("corrupt QUANT payload: invalid step")
        try:
            inflater = zlib.decompressobj()
            raw = inflater.decompress(enc.payload[1:])  # trailing padding is ignored
        except zlib.error as exc:
            raise CodecError(f"corrupt QUANT payload: {exc}") from exc
        if not inflater.eof:
            raise CodecError("corrupt QUANT payload: truncated stream")
        if len(raw) != n:
            raise CodecError("corrupt QUANT payload: wrong sample count")
        idx = np.frombuffer(raw, dtype=np.uint8).astype(np.uint16)
        pixels = np.minimum(idx * s, 255).astype(np.uint8).reshape(enc.height, enc.width, 3)
    elif codec_id == CodecId.JPEG:
        try:
            img = Image.open(io.BytesIO(enc.payload))
            img.load()
        except Exception as exc:
            raise CodecError(f"corrupt JPEG payload: {exc}") from exc
        if img.size != (enc.width, enc.height):
            raise CodecError("corrupt JPEG payload: dimension mismatch")
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    else:  # pragma: no cover
        raise CodecError(f"unknown codec id {codec_id}")
    return Frame(
        width=enc.width,
        height=enc.height,
        pixels=pixels,
        frame_index=enc.frame_index,
    )
