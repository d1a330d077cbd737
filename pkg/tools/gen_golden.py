#!/usr/bin/env python3
"""Regenerate the frozen wire-format conformance dumps under golden/.

These bytes are a compatibility contract: once committed they must not
change. Run only when adding a new message type, and bump the protocol
version if an existing layout changes.
"""

from pathlib import Path

from navp.protocol import (
    ErrorMessage,
    FrameRequest,
    FrameResponse,
    ProbeRequest,
    ProbeResponse,
    encode_message,
)

GOLDEN = {
    "probe_req.bin": ProbeRequest(frame_id=1, timestamp_us=0),
    "probe_resp.bin": ProbeResponse(frame_id=2, timestamp_us=777000),
    "frame_req.bin": FrameRequest(
        frame_id=7,
        timestamp_us=1_000_000,
        width=4,
        height=2,
        quality=90,
        codec_id=0,
        payload=bytes(range(24)),
    ),
    "frame_resp.bin": FrameResponse(
        frame_id=7,
        timestamp_us=1_005_000,
        width=4,
        height=2,
        num_classes=4,
        encoding=0,
        inference_time_us=5000,
        payload=bytes([0, 1, 2, 3, 3, 2, 1, 0]),
    ),
    "error.bin": ErrorMessage(
        frame_id=9,
        timestamp_us=2_000_000,
        code=1,
        detail="undecodable payload",
    ),
}


def main() -> None:
    out_dir = Path(__file__).resolve().parents[1] / "golden"
    out_dir.mkdir(exist_ok=True)
    for name, msg in GOLDEN.items():
        data = encode_message(msg)
        (out_dir / name).write_bytes(data)
        print(f"{name}: {len(data)} bytes")


if __name__ == "__main__":
    main()
