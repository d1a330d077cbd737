"""TCP service speaking the NAVP protocol: probes echo immediately, frames
are decoded, segmented, and answered with measured wall-clock inference
time. One worker thread per connection; errors answer with an ERROR frame
and keep the connection open.
"""

from __future__ import annotations

import argparse
import socket
import sys
import threading
import time
from dataclasses import dataclass

from . import wire
from .payloads import PayloadError, decode_frame
from .segmenter import build_segmenter, clamp_classes

DEFAULT_PORT = 47474


@dataclass(frozen=True)
class BackendServerConfig:
    port: int = DEFAULT_PORT
    host: str = "127.0.0.1"
    model: str = "kmeans"
    num_classes: int = 6
    device: str = "cpu"  # hint only; the classical fallback ignores it

    def __post_init__(self) -> None:
        if not 1024 <= self.port <= 65535:
            raise ValueError("port must be in 1024..65535")
        if not 2 <= self.num_classes <= 255:
            raise ValueError("num_classes must be in 2..255")


def _now_us() -> int:
    return time.perf_counter_ns() // 1000


class BackendServer:
    def __init__(self, config: BackendServerConfig) -> None:
        self.config = config
        self.segmenter = build_segmenter(config.model, config.num_classes)
        self.stop_event = threading.Event()
        self.ready_event = threading.Event()

    def serve_forever(self) -> None:
        cfg = self.config
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
            srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            srv.bind((cfg.host, cfg.port))
            srv.listen(16)
            srv.settimeout(0.2)
            self.ready_event.set()
            workers = []
            while not self.stop_event.is_set():
                try:
                    conn, _ = srv.accept()
                except socket.timeout:
                    continue
                t = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
                t.start()
                workers.append(t)
            for t in workers:
                t.join(timeout=2.0)

    def shutdown(self) -> None:
        self.stop_event.set()

    # -- per-connection loop --------------------------------------------------

    def _serve_connection(self, conn: socket.socket) -> None:
        send_lock = threading.Lock()

        def reply(msg: wire.Message) -> None:
            data = wire.encode(msg)
            with send_lock:
                conn.sendall(data)

        with conn:
            while not self.stop_event.is_set():
                try:
                    msg = wire.read_from_socket(conn)
                except (wire.WireError, OSError):
                    return
                if msg is None:
                    return
                if msg.kind == wire.PROBE_REQ:
                    reply(wire.Message(wire.PROBE_RESP, msg.frame_id, msg.timestamp_us))
                    continue
                if msg.kind != wire.FRAME_REQ:
                    reply(wire.Message(
                        wire.ERROR, msg.frame_id, _now_us(),
                        code=wire.ERR_PROTOCOL,
                        detail=f"unexpected message kind {msg.kind}",
                    ))
                    continue
                self._handle_frame(msg, reply)

    def _handle_frame(self, msg: wire.Message, reply) -> None:
        try:
            pixels = decode_frame(msg.codec_id, msg.width, msg.height, msg.payload)
        except PayloadError as exc:
            reply(wire.Message(
                wire.ERROR, msg.frame_id, _now_us(),
                code=wire.ERR_DECODE, detail=str(exc)[:200],
            ))
            return
        try:
            t0 = time.perf_counter_ns()
            labels = clamp_classes(self.segmenter(pixels), self.config.num_classes)
            inference_us = max(1, (time.perf_counter_ns() - t0) // 1000)
        except Exception as exc:  # model failure keeps the connection open
            reply(wire.Message(
                wire.ERROR, msg.frame_id, _now_us(),
                code=wire.ERR_BACKEND, detail=str(exc)[:200],
            ))
            return
        reply(wire.Message(
            wire.FRAME_RESP, msg.frame_id, _now_us(),
            width=msg.width, height=msg.height,
            num_classes=self.config.num_classes, encoding=wire.LABELS_RAW,
            inference_time_us=int(inference_us),
            payload=labels.tobytes(),
        ))


def serve(config: BackendServerConfig) -> None:
    BackendServer(config).serve_forever()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="navp-backend",
        description="Remote segmentation service speaking the NAVP protocol over TCP",
    )
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--model", default="kmeans")
    parser.add_argument("--num-classes", type=int, default=6)
    parser.add_argument("--device", default="cpu")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        config = BackendServerConfig(
            port=args.port, host=args.host, model=args.model,
            num_classes=args.num_classes, device=args.device,
        )
    except ValueError as exc:
        print(f"navp-backend: {exc}", file=sys.stderr)
        return 2
    print(
        f"serving {config.model} (k={config.num_classes}) on "
        f"{config.host}:{config.port}",
        file=sys.stderr,
    )
    try:
        serve(config)
    except OSError as exc:
        print(f"navp-backend: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
