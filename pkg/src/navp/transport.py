"""Client and server session loops over the NAVP protocol.

Virtual mode drives everything from a single discrete-event clock: the
client runs a probe loop (feeding the controller), a capture/send loop
paced by the current tier's send interval, and a response handler that
records end-to-end RTT and hands label payloads to a fidelity callback.
The server answers probes immediately and prices frame inference with its
backend, processing one frame at a time.

Real-time mode runs the same three client activities as threads over a TCP
socket, with optional scenario shaping implemented as sleeps on both
paths.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import codec as codec_mod
from .channel import Direction, NetworkScenario, VirtualChannel, VirtualClock, one_way_delay
from .codec import CodecId, EncodedFrame, resize_max
from .control import Controller, EncodingParams
from .errors import ChannelClosedError, CodecError, ProtocolError
from .frames import Frame, LabelMap
from .metrics import FrameRecord
from .protocol import (
    LABEL_ENCODING_RAW,
    ErrorCode,
    ErrorMessage,
    FrameRequest,
    FrameResponse,
    MsgType,
    ProbeRequest,
    ProbeResponse,
    WireMessage,
    encode_message,
    read_message,
    wire_length,
)
from .rng import Xoshiro256StarStar
from .segmentation import SegmentationBackend

DEFAULT_PROBE_INTERVAL_MS = 250.0
DEFAULT_PIPELINE_CAP = 4
DEFAULT_TCP_PORT = 47474

FrameSource = Callable[[int], Frame]
# (send info, response label map) -> (ssim, bf)
FidelityFn = Callable[["SendInfo", LabelMap], tuple[float, float]]


@dataclass(frozen=True)
class SendInfo:
    frame_id: int
    capture_index: int
    sent_us: int
    params: EncodingParams
    enc_width: int
    enc_height: int
    payload_bytes: int


@dataclass
class ClientResult:
    records: list[FrameRecord] = field(default_factory=list)
    protocol_errors: int = 0
    complete: bool = True
    tier_changes: list[tuple[int, int, int]] = field(default_factory=list)  # (time_us, old, new)

    def sorted_records(self) -> list[FrameRecord]:
        return sorted(self.records, key=lambda r: r.frame_id)


class VirtualServer:
    """Answers probes instantly; frames pay decode + modeled inference.

    Frame processing is serialized (one at a time), so responses queue when
    requests arrive faster than the backend drains them. Identical payloads
    are memoized: backends are deterministic, so this only skips repeated
    work on cycling capture loops.
    """

    def __init__(self, clock: VirtualClock, channel: VirtualChannel, backend: SegmentationBackend):
        self.clock = clock
        self.channel = channel
        self.backend = backend
        self.busy_until_us = 0
        self._memo: dict[tuple[int, int, int, bytes], tuple[LabelMap, int]] = {}
        channel.on_deliver(Direction.UP, self._handle)

    def _segment_payload(self, req: FrameRequest) -> tuple[LabelMap, int]:
        key = (req.codec_id, req.width, req.height, req.payload)
        hit = self._memo.get(key)
        if hit is None:
            frame = codec_mod.decode(
                EncodedFrame(
                    frame_index=req.frame_id,
                    width=req.width,
                    height=req.height,
                    codec_id=CodecId(req.codec_id),
                    payload=req.payload,
                )
            )
            hit = self.backend.segment(frame)
            self._memo[key] = hit
        return hit

    def _handle(self, msg: WireMessage, now_us: int) -> None:
        if isinstance(msg, ProbeRequest):
            resp = ProbeResponse(frame_id=msg.frame_id, timestamp_us=msg.timestamp_us)
            self._reply(resp)
            return
        if not isinstance(msg, FrameRequest):
            return  # clients do not send other types
        try:
            labels, inference_us = self._segment_payload(msg)
        except (CodecError, ValueError) as exc:
            err = ErrorMessage(
                frame_id=msg.frame_id,
                timestamp_us=now_us,
                code=ErrorCode.DECODE_FAILED,
                detail=str(exc)[:200],
            )
            self._reply(err)
            return
        start = max(now_us, self.busy_until_us)
        done = start + inference_us
        self.busy_until_us = done
        resp = FrameResponse(
            frame_id=msg.frame_id,
            timestamp_us=done,
            width=labels.width,
            height=labels.height,
            num_classes=labels.num_classes,
            encoding=LABEL_ENCODING_RAW,
            inference_time_us=inference_us,
            payload=labels.labels.tobytes(),
        )
        self.clock.schedule(done, lambda: self._reply(resp))

    def _reply(self, msg: WireMessage) -> None:
        try:
            self.channel.send(Direction.DOWN, wire_length(msg), msg)
        except ChannelClosedError:
            pass  # client went away; nothing left to deliver


class VirtualClient:
    """Drives probes, paced frame sends, and response accounting."""

    def __init__(
        self,
        clock: VirtualClock,
        channel: VirtualChannel,
        controller: Controller,
        frame_source: FrameSource,
        frames: int,
        probe_interval_ms: float = DEFAULT_PROBE_INTERVAL_MS,
        pipeline_cap: int = DEFAULT_PIPELINE_CAP,
        codec_id: CodecId = CodecId.QUANT,
        fidelity: Optional[FidelityFn] = None,
        feed_frame_rtt: bool = False,
        encode_fn: Optional[Callable[[int, EncodingParams], EncodedFrame]] = None,
    ) -> None:
        if frames < 1:
            raise ValueError("frames must be >= 1")
        if pipeline_cap < 1:
            raise ValueError("pipeline cap must be >= 1")
        self.clock = clock
        self.channel = channel
        self.controller = controller
        self.frame_source = frame_source
        self.frames = frames
        self.probe_interval_us = round(probe_interval_ms * 1000)
        self.pipeline_cap = pipeline_cap
        self.codec_id = codec_id
        self.fidelity = fidelity
        self.feed_frame_rtt = feed_frame_rtt
        self.encode_fn = encode_fn

        self.result = ClientResult()
        self._sent = 0
        self._responded = 0
        self._probe_seq = 0
        self._outstanding: dict[int, SendInfo] = {}
        self._blocked = False
        self._done = False
        channel.on_deliver(Direction.DOWN, self._handle)

    def start(self) -> None:
        self.clock.schedule(self.clock.now_us, self._probe_tick)
        self.clock.schedule(self.clock.now_us, self._frame_tick)

    # -- probe activity ----------------------------------------------------

    def _probe_tick(self) -> None:
        if self._done:
            return
        self._probe_seq += 1
        probe = ProbeRequest(frame_id=self._probe_seq, timestamp_us=self.clock.now_us)
        try:
            self.channel.send(Direction.UP, wire_length(probe), probe)
        except ChannelClosedError:
            self._abort()
            return
        self.clock.schedule_in(self.probe_interval_us, self._probe_tick)

    # -- capture/send activity ----------------------------------------------

    def _encode_current(self, capture_index: int, params: EncodingParams) -> EncodedFrame:
        if self.encode_fn is not None:
            return self.encode_fn(capture_index, params)
        frame = self.frame_source(capture_index).with_index(capture_index)
        frame = resize_max(frame, params.max_resolution)
        return codec_mod.encode(frame, params.quality, self.codec_id)

    def _frame_tick(self) -> None:
        if self._done or self._sent >= self.frames:
            return
        if len(self._outstanding) >= self.pipeline_cap:
            self._blocked = True  # resumed by the next response
            return
        self._send_frame()
        if self._sent < self.frames:
            interval = round(self.controller.params.send_interval_ms * 1000)
            self.clock.schedule_in(interval, self._frame_tick)

    def _send_frame(self) -> None:
        now = self.clock.now_us
        capture_index = self._sent
        params = self.controller.params
        enc = self._encode_current(capture_index, params)
        req = FrameRequest(
            frame_id=capture_index + 1,
            timestamp_us=now,
            width=enc.width,
            height=enc.height,
            quality=params.quality,
            codec_id=int(self.codec_id),
            payload=enc.payload,
        )
        info = SendInfo(
            frame_id=req.frame_id,
            capture_index=capture_index,
            sent_us=now,
            params=params,
            enc_width=enc.width,
            enc_height=enc.height,
            payload_bytes=len(enc.payload),
        )
        try:
            self.channel.send(Direction.UP, wire_length(req), req)
        except ChannelClosedError:
            self._abort()
            return
        self._outstanding[req.frame_id] = info
        self._sent += 1

    # -- response handling ---------------------------------------------------

    def _feed_controller(self, rtt_ms: float) -> None:
        before = self.controller.params.tier_index
        self.controller.step(rtt_ms)
        after = self.controller.params.tier_index
        if after != before:
            self.result.tier_changes.append((self.clock.now_us, before, after))

    def _handle(self, msg: WireMessage, now_us: int) -> None:
        if isinstance(msg, ProbeResponse):
            self._feed_controller((now_us - msg.timestamp_us) / 1000.0)
            return
        if isinstance(msg, FrameResponse):
            info = self._outstanding.pop(msg.frame_id, None)
            if info is None:
                raise ProtocolError(f"response for unknown frame_id {msg.frame_id}")
            rtt_us = now_us - info.sent_us
            if self.feed_frame_rtt:
                self._feed_controller(rtt_us / 1000.0)
            ssim_v, bf_v = float("nan"), float("nan")
            if self.fidelity is not None:
                labels = LabelMap(
                    width=msg.width,
                    height=msg.height,
                    labels=np.frombuffer(msg.payload, dtype=np.uint8).reshape(
                        msg.height, msg.width
                    ),
                    num_classes=msg.num_classes,
                )
                ssim_v, bf_v = self.fidelity(info, labels)
            self.result.records.append(
                FrameRecord(
                    frame_id=info.frame_id,
                    tier_index=info.params.tier_index,
                    sent_us=info.sent_us,
                    rtt_us=rtt_us,
                    inference_us=msg.inference_time_us,
                    payload_bytes=info.payload_bytes,
                    ssim=ssim_v,
                    bf=bf_v,
                )
            )
            self._after_response()
            return
        if isinstance(msg, ErrorMessage):
            info = self._outstanding.pop(msg.frame_id, None)
            if info is None:
                raise ProtocolError(f"error for unknown frame_id {msg.frame_id}")
            self.result.protocol_errors += 1
            self._after_response()
            return
        raise ProtocolError(f"unexpected message type {msg.msg_type} at client")

    def _after_response(self) -> None:
        self._responded += 1
        if self._responded >= self.frames:
            self._done = True
            return
        if self._blocked and self._sent < self.frames:
            self._blocked = False
            self._send_frame()
            if self._sent < self.frames:
                interval = round(self.controller.params.send_interval_ms * 1000)
                self.clock.schedule_in(interval, self._frame_tick)

    def _abort(self) -> None:
        self._done = True
        self.result.complete = False


def run_virtual_session(
    scenario: NetworkScenario,
    backend: SegmentationBackend,
    controller: Controller,
    frame_source: FrameSource,
    frames: int,
    channel_seed: int,
    probe_interval_ms: float = DEFAULT_PROBE_INTERVAL_MS,
    pipeline_cap: int = DEFAULT_PIPELINE_CAP,
    codec_id: CodecId = CodecId.QUANT,
    fidelity: Optional[FidelityFn] = None,
    feed_frame_rtt: bool = False,
    jitter_frac: float = 0.10,
    rto_ms: float = 200.0,
    encode_fn: Optional[Callable[[int, EncodingParams], EncodedFrame]] = None,
) -> tuple[ClientResult, VirtualChannel]:
    """Wire a client and server across one virtual channel and run to completion."""
    clock = VirtualClock()
    channel = VirtualChannel(
        scenario, clock, Xoshiro256StarStar(channel_seed), jitter_frac=jitter_frac, rto_ms=rto_ms
    )
    VirtualServer(clock, channel, backend)
    client = VirtualClient(
        clock,
        channel,
        controller,
        frame_source,
        frames=frames,
        probe_interval_ms=probe_interval_ms,
        pipeline_cap=pipeline_cap,
        codec_id=codec_id,
        fidelity=fidelity,
        feed_frame_rtt=feed_frame_rtt,
        encode_fn=encode_fn,
    )
    client.start()
    clock.run()
    return client.result, channel


# --------------------------------------------------------------------------
# Real-time (TCP) mode
# --------------------------------------------------------------------------


def serve_tcp(
    backend: SegmentationBackend,
    host: str = "127.0.0.1",
    port: int = DEFAULT_TCP_PORT,
    stop: Optional[threading.Event] = None,
    ready: Optional[threading.Event] = None,
) -> None:
    """Serve the NAVP protocol over TCP, one worker thread per connection."""
    stop = stop or threading.Event()
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(8)
        srv.settimeout(0.2)
        if ready is not None:
            ready.set()
        workers: list[threading.Thread] = []
        while not stop.is_set():
            try:
                conn, _ = srv.accept()
            except socket.timeout:
                continue
            t = threading.Thread(
                target=_serve_connection, args=(conn, backend), daemon=True
            )
            t.start()
            workers.append(t)
        for t in workers:
            t.join(timeout=2.0)


def _serve_connection(conn: socket.socket, backend: SegmentationBackend) -> None:
    with conn:
        lock = threading.Lock()

        def reply(msg: WireMessage) -> None:
            data = encode_message(msg)
            with lock:
                conn.sendall(data)

        while True:
            try:
                msg = read_message(conn)
            except (ProtocolError, OSError):
                return
            if msg is None:
                return
            if isinstance(msg, ProbeRequest):
                reply(ProbeResponse(frame_id=msg.frame_id, timestamp_us=msg.timestamp_us))
                continue
            if not isinstance(msg, FrameRequest):
                reply(
                    ErrorMessage(
                        frame_id=getattr(msg, "frame_id", 0),
                        timestamp_us=_now_us(),
                        code=ErrorCode.PROTOCOL,
                        detail=f"unexpected message type {int(msg.msg_type)}",
                    )
                )
                continue
            try:
                t0 = time.perf_counter_ns()
                frame = codec_mod.decode(
                    EncodedFrame(
                        frame_index=msg.frame_id,
                        width=msg.width,
                        height=msg.height,
                        codec_id=CodecId(msg.codec_id),
                        payload=msg.payload,
                    )
                )
                labels, inference_us = backend.segment(frame)
                if inference_us <= 0:
                    inference_us = max(1, (time.perf_counter_ns() - t0) // 1000)
            except (CodecError, ValueError) as exc:
                reply(
                    ErrorMessage(
                        frame_id=msg.frame_id,
                        timestamp_us=_now_us(),
                        code=ErrorCode.DECODE_FAILED,
                        detail=str(exc)[:200],
                    )
                )
                continue
            except Exception as exc:  # backend failure keeps the session alive
                reply(
                    ErrorMessage(
                        frame_id=msg.frame_id,
                        timestamp_us=_now_us(),
                        code=ErrorCode.BACKEND_FAILED,
                        detail=str(exc)[:200],
                    )
                )
                continue
            reply(
                FrameResponse(
                    frame_id=msg.frame_id,
                    timestamp_us=_now_us(),
                    width=labels.width,
                    height=labels.height,
                    num_classes=labels.num_classes,
                    encoding=LABEL_ENCODING_RAW,
                    inference_time_us=int(inference_us),
                    payload=labels.labels.tobytes(),
                )
            )


def _now_us() -> int:
    return time.perf_counter_ns() // 1000


class _Shaper:
    """Sleep-based approximation of the scenario's one-way delays."""

    def __init__(self, scenario: Optional[NetworkScenario], seed: int,
                 jitter_frac: float = 0.10, rto_ms: float = 200.0) -> None:
        self.scenario = scenario
        self.rng = Xoshiro256StarStar(seed)
        self.jitter_frac = jitter_frac
        self.rto_ms = rto_ms
        self._lock = threading.Lock()

    def delay(self, direction: Direction, payload_bytes: int) -> None:
        if self.scenario is None:
            return
        with self._lock:
            us = one_way_delay(
                self.scenario, direction, payload_bytes, self.rng,
                jitter_frac=self.jitter_frac, rto_ms=self.rto_ms,
            )
        time.sleep(us / 1e6)


def run_tcp_client(
    host: str,
    port: int,
    controller: Controller,
    frame_source: FrameSource,
    frames: int,
    probe_interval_ms: float = DEFAULT_PROBE_INTERVAL_MS,
    pipeline_cap: int = DEFAULT_PIPELINE_CAP,
    codec_id: CodecId = CodecId.QUANT,
    fidelity: Optional[FidelityFn] = None,
    feed_frame_rtt: bool = False,
    scenario: Optional[NetworkScenario] = None,
    shaping_seed: int = 0,
    timeout_s: float = 30.0,
) -> ClientResult:
    """Run the client session loops against a real NAVP server over TCP."""
    result = ClientResult()
    shaper = _Shaper(scenario, shaping_seed)
    outstanding: dict[int, SendInfo] = {}
    cond = threading.Condition()
    responded = [0]
    stop = threading.Event()

    sock = socket.create_connection((host, port), timeout=timeout_s)
    sock_lock = threading.Lock()

    def send_msg(msg: WireMessage) -> None:
        data = encode_message(msg)
        with sock_lock:
            shaper.delay(Direction.UP, len(data))
            sock.sendall(data)

    def feed(rtt_ms: float) -> None:
        before = controller.params.tier_index
        controller.step(rtt_ms)
        after = controller.params.tier_index
        if after != before:
            result.tier_changes.append((_now_us(), before, after))

    def reader() -> None:
        while not stop.is_set():
            try:
                msg = read_message(sock)
            except (ProtocolError, OSError):
                with cond:
                    result.complete = False
                    stop.set()
                    cond.notify_all()
                return
            if msg is None:
                with cond:
                    if responded[0] < frames:
                        result.complete = False
                    stop.set()
                    cond.notify_all()
                return
            shaper.delay(Direction.DOWN, wire_length(msg))
            now = _now_us()
            if isinstance(msg, ProbeResponse):
                feed((now - msg.timestamp_us) / 1000.0)
                continue
            if isinstance(msg, (FrameResponse, ErrorMessage)):
                with cond:
                    info = outstanding.pop(msg.frame_id, None)
                if info is None:
                    result.protocol_errors += 1
                    continue
                if isinstance(msg, ErrorMessage):
                    result.protocol_errors += 1
                else:
                    rtt_us = max(now - info.sent_us, msg.inference_time_us)
                    if feed_frame_rtt:
                        feed(rtt_us / 1000.0)
                    ssim_v, bf_v = float("nan"), float("nan")
                    if fidelity is not None:
                        labels = LabelMap(
                            width=msg.width,
                            height=msg.height,
                            labels=np.frombuffer(msg.payload, dtype=np.uint8).reshape(
                                msg.height, msg.width
                            ),
                            num_classes=msg.num_classes,
                        )
                        ssim_v, bf_v = fidelity(info, labels)
                    result.records.append(
                        FrameRecord(
                            frame_id=info.frame_id,
                            tier_index=info.params.tier_index,
                            sent_us=info.sent_us,
                            rtt_us=rtt_us,
                            inference_us=msg.inference_time_us,
                            payload_bytes=info.payload_bytes,
                            ssim=ssim_v,
                            bf=bf_v,
                        )
                    )
                with cond:
                    responded[0] += 1
                    if responded[0] >= frames:
                        stop.set()
                    cond.notify_all()

    def prober() -> None:
        seq = 0
        while not stop.is_set():
            seq += 1
            try:
                send_msg(ProbeRequest(frame_id=seq, timestamp_us=_now_us()))
            except OSError:
                return
            stop.wait(probe_interval_ms / 1000.0)

    reader_t = threading.Thread(target=reader, daemon=True)
    prober_t = threading.Thread(target=prober, daemon=True)
    reader_t.start()
    prober_t.start()

    deadline = time.monotonic() + timeout_s
    try:
        for capture_index in range(frames):
            with cond:
                while len(outstanding) >= pipeline_cap and not stop.is_set():
                    if not cond.wait(timeout=0.5) and time.monotonic() > deadline:
                        result.complete = False
                        stop.set()
                if stop.is_set():
                    break
            params = controller.params
            frame = frame_source(capture_index).with_index(capture_index)
            frame = resize_max(frame, params.max_resolution)
            enc = codec_mod.encode(frame, params.quality, codec_id)
            now = _now_us()
            info = SendInfo(
                frame_id=capture_index + 1,
                capture_index=capture_index,
                sent_us=now,
                params=params,
                enc_width=enc.width,
                enc_height=enc.height,
                payload_bytes=len(enc.payload),
            )
            with cond:
                outstanding[info.frame_id] = info
            try:
                send_msg(
                    FrameRequest(
                        frame_id=info.frame_id,
                        timestamp_us=now,
                        width=enc.width,
                        height=enc.height,
                        quality=params.quality,
                        codec_id=int(codec_id),
                        payload=enc.payload,
                    )
                )
            except OSError:
                result.complete = False
                break
            if capture_index < frames - 1:
                time.sleep(controller.params.send_interval_ms / 1000.0)
        with cond:
            while responded[0] < frames and not stop.is_set():
                if not cond.wait(timeout=0.5) and time.monotonic() > deadline:
                    result.complete = False
                    break
    finally:
        stop.set()
        try:
            sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        sock.close()
        reader_t.join(timeout=2.0)
        prober_t.join(timeout=2.0)
    if responded[0] < frames:
        result.complete = False
    return result
