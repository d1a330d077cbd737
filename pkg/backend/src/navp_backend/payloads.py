"""Frame payload decoders for the three NAVP codec ids (see ../PROTOCOL.md)."""

from __future__ import annotations

import io
import zlib

import numpy as np
from PIL import Image

CODEC_RAW = 0
CODEC_JPEG = 1
CODEC_QUANT = 2


class PayloadError(Exception):
    pass


def decode_frame(codec_id: int, width: int, height: int, payload: bytes) -> np.ndarray:
    """Decode a FRAME_REQ payload into an (h, w, 3) uint8 array."""
    if width < 1 or height < 1:
        raise PayloadError("non-positive frame dimensions")
    n = width * height * 3
    if codec_id == CODEC_RAW:
        if len(payload) != n:
            raise PayloadError(f"RAW payload is {len(payload)} bytes, expected {n}")
        return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    if codec_id == CODEC_QUANT:
        if not payload:
            raise PayloadError("empty QUANT payload")
        step = payload[0]
        if step < 1:
            raise PayloadError("QUANT step must be >= 1")
        inflater = zlib.decompressobj()
        try:
            raw = inflater.decompress(payload[1:])  # trailing pad bytes are ignored
        except zlib.error as exc:
            raise PayloadError(f"bad QUANT stream: {exc}") from exc
        if not inflater.eof:
            raise PayloadError("truncated QUANT stream")
        if len(raw) != n:
            raise PayloadError(f"QUANT stream holds {len(raw)} samples, expected {n}")
        idx = np.frombuffer(raw, dtype=np.uint8).astype(np.uint16)
        return np.minimum(idx * step, 255).astype(np.uint8).reshape(height, width, 3)
    if codec_id == CODEC_JPEG:
        try:
            img = Image.open(io.BytesIO(payload))
            img.load()
        except Exception as exc:
            raise PayloadError(f"bad JPEG payload: {exc}") from exc
        if img.size != (width, height):
            raise PayloadError(
                f"JPEG dimensions {img.size} disagree with header {(width, height)}"
            )
        return np.asarray(img.convert("RGB"), dtype=np.uint8)
    raise PayloadError(f"unknown codec id {codec_id}")
