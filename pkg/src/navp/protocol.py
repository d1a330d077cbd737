"""NAVP wire protocol: bit-exact binary framing for probe and frame exchange.

Every message starts with a 22-byte header, all integers big-endian:

    offset  size  field
    0       4     magic "NAVP"
    4       1     version (1)
    5       1     message type
    6       8     frame_id (u64)
    14      8     timestamp_us (u64)

Message types and bodies:

    0 PROBE_REQ   empty body
    1 PROBE_RESP  empty body; echoes the request's frame_id and timestamp_us
    2 FRAME_REQ   width u32, height u32, quality u8, codec_id u8,
                  payload_len u32, payload
    3 FRAME_RESP  width u32, height u32, num_classes u8, encoding u8
                  (0 = raw labels, one byte per pixel), inference_time_us u64,
                  payload_len u32, payload
    4 ERROR       code u8, detail_len u16, detail (UTF-8)

The checked-in dumps under golden/ freeze one message of each type; any
implementation of this protocol must decode and re-encode them
byte-identically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from .errors import ProtocolError

MAGIC = b"NAVP"
VERSION = 1
HEADER_LEN = 22
_HEADER = struct.Struct(">4sBBQQ")


class MsgType(IntEnum):
    PROBE_REQ = 0
    PROBE_RESP = 1
    FRAME_REQ = 2
    FRAME_RESP = 3
    ERROR = 4


class ErrorCode(IntEnum):
    DECODE_FAILED = 1
    BACKEND_FAILED = 2
    PROTOCOL = 3


@dataclass(frozen=True)
class ProbeRequest:
    frame_id: int
    timestamp_us: int
    msg_type = MsgType.PROBE_REQ


@dataclass(frozen=True)
class ProbeResponse:
    frame_id: int
    timestamp_us: int
    msg_type = MsgType.PROBE_RESP


@dataclass(frozen=True)
class FrameRequest:
    frame_id: int
    timestamp_us: int
    width: int
    height: int
    quality: int
    codec_id: int
    payload: bytes
    msg_type = MsgType.FRAME_REQ


@dataclass(frozen=True)
class FrameResponse:
    frame_id: int
    timestamp_us: int
    width: int
    height: int
    num_classes: int
    encoding: int
    inference_time_us: int
    payload: bytes
    msg_type = MsgType.FRAME_RESP


@dataclass(frozen=True)
class ErrorMessage:
    frame_id: int
    timestamp_us: int
    code: int
    detail: str
    msg_type = MsgType.ERROR


WireMessage = ProbeRequest | ProbeResponse | FrameRequest | FrameResponse | ErrorMessage

LABEL_ENCODING_RAW = 0


def wire_length(msg: WireMessage) -> int:
    """Encoded length in bytes, without materializing the buffer."""
    if isinstance(msg, (ProbeRequest, ProbeResponse)):
        return HEADER_LEN
    if isinstance(msg, FrameRequest):
        return HEADER_LEN + 14 + len(msg.payload)
    if isinstance(msg, FrameResponse):
        return HEADER_LEN + 22 + len(msg.payload)
    if isinstance(msg, ErrorMessage):
        return HEADER_LEN + 3 + len(msg.detail.encode("utf-8"))
    raise ProtocolError(f"unknown message object {type(msg).__name__}")


def encode_message(msg: WireMessage) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, int(msg.msg_type), msg.frame_id, msg.timestamp_us)
    if isinstance(msg, (ProbeRequest, ProbeResponse)):
        return header
    if isinstance(msg, FrameRequest):
        body = struct.pack(
            ">IIBBI", msg.width, msg.height, msg.quality, msg.codec_id, len(msg.payload)
        )
        return header + body + msg.payload
    if isinstance(msg, FrameResponse):
        body = struct.pack(
            ">IIBBQI",
            msg.width,
            msg.height,
            msg.num_classes,
            msg.encoding,
            msg.inference_time_us,
            len(msg.payload),
        )
        return header + body + msg.payload
    if isinstance(msg, ErrorMessage):
        detail = msg.detail.encode("utf-8")
        return header + struct.pack(">BH", msg.code, len(detail)) + detail
    raise ProtocolError(f"unknown message object {type(msg).__name__}")


def decode_message(buf: bytes) -> WireMessage:
    """Decode one complete message; the buffer must contain exactly one."""
    if len(buf) < HEADER_LEN:
        raise ProtocolError(f"truncated header: {len(buf)} < {HEADER_LEN} bytes")
    magic, version, raw_type, frame_id, timestamp_us = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"bad version {version}")
    try:
        msg_type = MsgType(raw_type)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {raw_type}") from exc
    body = buf[HEADER_LEN:]

    if msg_type in (MsgType.PROBE_REQ, MsgType.PROBE_RESP):
        if body:
            raise ProtocolError(f"length mismatch: probe body must be empty, got {len(body)} bytes")
        cls = ProbeRequest if msg_type == MsgType.PROBE_REQ else ProbeResponse
        return cls(frame_id=frame_id, timestamp_us=timestamp_us)

    if msg_type == MsgType.FRAME_REQ:
        if len(body) < 14:
            raise ProtocolError("truncated FRAME_REQ body")
        width, height, quality, codec_id, payload_len = struct.unpack_from(">IIBBI", body)
        payload = body[14:]
        if len(payload) != payload_len:
            raise ProtocolError(
                f"length mismatch: FRAME_REQ payload_len={payload_len}, got {len(payload)}"
            )
        return FrameRequest(frame_id, timestamp_us, width, height, quality, codec_id, payload)

    if msg_type == MsgType.FRAME_RESP:
        if len(body) < 22:
            raise ProtocolError("truncated FRAME_RESP body")
        width, height, num_classes, encoding, inference_us, payload_len = struct.unpack_from(
            ">IIBBQI", body
        )
        payload = body[22:]
        if len(payload) != payload_len:
            raise ProtocolError(
                f"length mismatch: FRAME_RESP payload_len={payload_len}, got {len(payload)}"
            )
        return FrameResponse(
            frame_id, timestamp_us, width, height, num_classes, encoding, inference_us, payload
        )

    if len(body) < 3:
        raise ProtocolError("truncated ERROR body")
    code, detail_len = struct.unpack_from(">BH", body)
    detail = body[3:]
    if len(detail) != detail_len:
        raise ProtocolError(f"length mismatch: ERROR detail_len={detail_len}, got {len(detail)}")
    return ErrorMessage(frame_id, timestamp_us, code, detail.decode("utf-8"))


def recv_exactly(sock, n: int) -> bytes | None:
    """Read exactly n bytes from a socket; None on clean EOF at offset 0."""
    chunks = bytearray()
    while len(chunks) < n:
        chunk = sock.recv(n - len(chunks))
        if not chunk:
            if not chunks:
                return None
            raise ProtocolError(f"connection closed mid-message ({len(chunks)}/{n} bytes)")
        chunks.extend(chunk)
    return bytes(chunks)


def read_message(sock) -> WireMessage | None:
    """Read one framed message from a socket; None on clean EOF."""
    header = recv_exactly(sock, HEADER_LEN)
    if header is None:
        return None
    magic, version, raw_type, _, _ = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"bad version {version}")
    try:
        msg_type = MsgType(raw_type)
    except ValueError as exc:
        raise ProtocolError(f"unknown message type {raw_type}") from exc

    if msg_type in (MsgType.PROBE_REQ, MsgType.PROBE_RESP):
        return decode_message(header)
    if msg_type == MsgType.FRAME_REQ:
        fixed = recv_exactly(sock, 14)
        if fixed is None:
            raise ProtocolError("connection closed mid-message")
        (payload_len,) = struct.unpack_from(">I", fixed, 10)
        payload = recv_exactly(sock, payload_len) if payload_len else b""
        if payload is None:
            raise ProtocolError("connection closed mid-message")
        return decode_message(header + fixed + payload)
    if msg_type == MsgType.FRAME_RESP:
        fixed = recv_exactly(sock, 22)
        if fixed is None:
            raise ProtocolError("connection closed mid-message")
        (payload_len,) = struct.unpack_from(">I", fixed, 18)
        payload = recv_exactly(sock, payload_len) if payload_len else b""
        if payload is None:
            raise ProtocolError("connection closed mid-message")
        return decode_message(header + fixed + payload)
    fixed = recv_exactly(sock, 3)
    if fixed is None:
        raise ProtocolError("connection closed mid-message")
    (detail_len,) = struct.unpack_from(">H", fixed, 1)
    detail = recv_exactly(sock, detail_len) if detail_len else b""
    if detail is None:
        raise ProtocolError("connection closed mid-message")
    return decode_message(header + fixed + detail)
