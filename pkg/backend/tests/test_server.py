import socket
import threading
import zlib

import numpy as np
import pytest

from navp_backend import wire
from navp_backend.server import BackendServer, BackendServerConfig


@pytest.fixture
def server():
    srv = BackendServer(BackendServerConfig(port=47821, num_classes=4))
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    assert srv.ready_event.wait(5.0)
    yield srv
    srv.shutdown()
    t.join(timeout=5.0)


def connect(port=47821):
    return socket.create_connection(("127.0.0.1", port), timeout=10.0)


def test_probe_echoes_id_and_timestamp(server):
    with connect() as sock:
        sock.sendall(wire.encode(wire.Message(wire.PROBE_REQ, 42, 123456)))
        resp = wire.read_from_socket(sock)
    assert resp.kind == wire.PROBE_RESP
    assert (resp.frame_id, resp.timestamp_us) == (42, 123456)


def test_raw_frame_returns_dimension_matched_labels(server):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    req = wire.Message(wire.FRAME_REQ, 7, 0, width=64, height=64,
                       quality=90, codec_id=0, payload=pixels.tobytes())
    with connect() as sock:
        sock.sendall(wire.encode(req))
        resp = wire.read_from_socket(sock)
    assert resp.kind == wire.FRAME_RESP
    assert resp.frame_id == 7
    assert (resp.width, resp.height) == (64, 64)
    assert resp.num_classes == 4
    assert resp.inference_time_us > 0
    labels = np.frombuffer(resp.payload, dtype=np.uint8)
    assert labels.shape == (64 * 64,)
    assert labels.max() < 4


def test_quant_frame_decodes(server):
    samples = np.zeros(16 * 16 * 3, dtype=np.uint8)
    payload = bytes([5]) + zlib.compress(samples.tobytes(), 6)
    req = wire.Message(wire.FRAME_REQ, 9, 0, width=16, height=16,
                       quality=60, codec_id=2, payload=payload)
    with connect() as sock:
        sock.sendall(wire.encode(req))
        resp = wire.read_from_socket(sock)
    assert resp.kind == wire.FRAME_RESP
    assert len(resp.payload) == 16 * 16


def test_corrupt_payload_errors_and_connection_survives(server):
    bad = wire.Message(wire.FRAME_REQ, 11, 0, width=8, height=8,
                       quality=50, codec_id=2, payload=b"\x05junk")
    good_px = np.zeros((8, 8, 3), dtype=np.uint8)
    good = wire.Message(wire.FRAME_REQ, 12, 0, width=8, height=8,
                        quality=50, codec_id=0, payload=good_px.tobytes())
    with connect() as sock:
        sock.sendall(wire.encode(bad))
        resp1 = wire.read_from_socket(sock)
        sock.sendall(wire.encode(good))
        resp2 = wire.read_from_socket(sock)
    assert resp1.kind == wire.ERROR
    assert resp1.frame_id == 11
    assert resp1.code == wire.ERR_DECODE
    assert resp2.kind == wire.FRAME_RESP
    assert resp2.frame_id == 12


def test_config_validation():
    with pytest.raises(ValueError):
        BackendServerConfig(port=80)
    with pytest.raises(ValueError):
        BackendServerConfig(num_classes=1)
