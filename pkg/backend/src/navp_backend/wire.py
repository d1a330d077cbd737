"""Independent implementation of the NAVP wire format (see ../PROTOCOL.md).

This package deliberately does not share code with other NAVP
implementations: conformance is proven against the checked-in golden
dumps, byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

MAGIC = b"NAVP"
VERSION = 1
HEADER_LEN = 22

PROBE_REQ = 0
PROBE_RESP = 1
FRAME_REQ = 2
FRAME_RESP = 3
ERROR = 4

ERR_DECODE = 1
ERR_BACKEND = 2
ERR_PROTOCOL = 3

LABELS_RAW = 0


class WireError(Exception):
    pass


@dataclass(frozen=True)
class Message:
    kind: int
    frame_id: int
    timestamp_us: int
    # FRAME_REQ
    width: int = 0
    height: int = 0
    quality: int = 0
    codec_id: int = 0
    # FRAME_RESP
    num_classes: int = 0
    encoding: int = 0
    inference_time_us: int = 0
    # FRAME_* payload / ERROR detail
    payload: bytes = b""
    code: int = 0
    detail: str = ""


def _u(data: bytes, offset: int, size: int) -> int:
    return int.from_bytes(data[offset : offset + size], "big")


def _header(kind: int, frame_id: int, timestamp_us: int) -> bytes:
    return (
        MAGIC
        + bytes([VERSION, kind])
        + frame_id.to_bytes(8, "big")
        + timestamp_us.to_bytes(8, "big")
    )


def encode(msg: Message) -> bytes:
    head = _header(msg.kind, msg.frame_id, msg.timestamp_us)
    if msg.kind in (PROBE_REQ, PROBE_RESP):
        return head
    if msg.kind == FRAME_REQ:
        return (
            head
            + msg.width.to_bytes(4, "big")
            + msg.height.to_bytes(4, "big")
            + bytes([msg.quality, msg.codec_id])
            + len(msg.payload).to_bytes(4, "big")
            + msg.payload
        )
    if msg.kind == FRAME_RESP:
        return (
            head
            + msg.width.to_bytes(4, "big")
            + msg.height.to_bytes(4, "big")
            + bytes([msg.num_classes, msg.encoding])
            + msg.inference_time_us.to_bytes(8, "big")
            + len(msg.payload).to_bytes(4, "big")
            + msg.payload
        )
    if msg.kind == ERROR:
        detail = msg.detail.encode("utf-8")
        return head + bytes([msg.code]) + len(detail).to_bytes(2, "big") + detail
    raise WireError(f"cannot encode message kind {msg.kind}")


def decode(data: bytes) -> Message:
    if len(data) < HEADER_LEN:
        raise WireError("short header")
    if data[:4] != MAGIC:
        raise WireError(f"bad magic {data[:4]!r}")
    if data[4] != VERSION:
        raise WireError(f"unsupported version {data[4]}")
    kind = data[5]
    frame_id = _u(data, 6, 8)
    timestamp_us = _u(data, 14, 8)
    body = data[HEADER_LEN:]

    if kind in (PROBE_REQ, PROBE_RESP):
        if body:
            raise WireError("probe messages carry no body")
        return Message(kind, frame_id, timestamp_us)
    if kind == FRAME_REQ:
        if len(body) < 14:
            raise WireError("short FRAME_REQ body")
        payload_len = _u(body, 10, 4)
        payload = body[14:]
        if len(payload) != payload_len:
            raise WireError("FRAME_REQ payload length mismatch")
        return Message(
            kind, frame_id, timestamp_us,
            width=_u(body, 0, 4), height=_u(body, 4, 4),
            quality=body[8], codec_id=body[9], payload=payload,
        )
    if kind == FRAME_RESP:
        if len(body) < 22:
            raise WireError("short FRAME_RESP body")
        payload_len = _u(body, 18, 4)
        payload = body[22:]
        if len(payload) != payload_len:
            raise WireError("FRAME_RESP payload length mismatch")
        return Message(
            kind, frame_id, timestamp_us,
            width=_u(body, 0, 4), height=_u(body, 4, 4),
            num_classes=body[8], encoding=body[9],
            inference_time_us=_u(body, 10, 8), payload=payload,
        )
    if kind == ERROR:
        if len(body) < 3:
            raise WireError("short ERROR body")
        detail_len = _u(body, 1, 2)
        detail = body[3:]
        if len(detail) != detail_len:
            raise WireError("ERROR detail length mismatch")
        return Message(kind, frame_id, timestamp_us, code=body[0],
                       detail=detail.decode("utf-8"))
    raise WireError(f"unknown message kind {kind}")


def read_exact(sock, n: int) -> bytes | None:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            if not buf:
                return None
            raise WireError("connection closed mid-message")
        buf.extend(chunk)
    return bytes(buf)


def read_from_socket(sock) -> Message | None:
    head = read_exact(sock, HEADER_LEN)
    if head is None:
        return None
    if head[:4] != MAGIC or head[4] != VERSION:
        raise WireError("bad frame header on stream")
    kind = head[5]
    if kind in (PROBE_REQ, PROBE_RESP):
        return decode(head)
    if kind == FRAME_REQ:
        fixed = read_exact(sock, 14)
        if fixed is None:
            raise WireError("connection closed mid-message")
        payload = read_exact(sock, _u(fixed, 10, 4)) if _u(fixed, 10, 4) else b""
        if payload is None:
            raise WireError("connection closed mid-message")
        return decode(head + fixed + payload)
    if kind == FRAME_RESP:
        fixed = read_exact(sock, 22)
        if fixed is None:
            raise WireError("connection closed mid-message")
        payload = read_exact(sock, _u(fixed, 18, 4)) if _u(fixed, 18, 4) else b""
        if payload is None:
            raise WireError("connection closed mid-message")
        return decode(head + fixed + payload)
    if kind == ERROR:
        fixed = read_exact(sock, 3)
        if fixed is None:
            raise WireError("connection closed mid-message")
        detail = read_exact(sock, _u(fixed, 1, 2)) if _u(fixed, 1, 2) else b""
        if detail is None:
            raise WireError("connection closed mid-message")
        return decode(head + fixed + detail)
    raise WireError(f"unknown message kind {kind}")
