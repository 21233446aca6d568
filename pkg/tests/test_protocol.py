import socket
import struct
import threading

import numpy as np
import pytest

from conftest import policy_double, predictor_double
from mapex import protocol
from mapex.protocol import (ExternalPolicyClient, ExternalPredictorClient,
                            ProtocolError, SubprocessEndpoint, TcpEndpoint,
                            decode_policy_request, decode_policy_response,
                            decode_predict_request, decode_predict_response,
                            encode_policy_request, encode_policy_response,
                            encode_predict_request, encode_predict_response,
                            make_endpoint, recv_frame)


def _trinary(shape=(237, 237), seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(-1, 2, size=shape).astype(np.int8)


def _four_state(shape=(237, 237), seed=0):
    rng = np.random.default_rng(seed)
    return rng.choice([-1, 0, 1, 2], size=shape).astype(np.int8)


def test_predict_frames_reencode_bit_exactly():
    cells = _trinary()
    buf = encode_predict_request(cells)
    assert encode_predict_request(decode_predict_request(buf)) == buf
    probs = np.random.default_rng(1).random((237, 237)).astype(np.float32)
    buf = encode_predict_response(probs)
    assert encode_predict_response(decode_predict_response(buf)) == buf


def test_policy_frames_reencode_bit_exactly():
    high = _four_state(seed=2)
    pred = _four_state(seed=3)
    buf = encode_policy_request(high, pred, 4)
    h, p, a = decode_policy_request(buf)
    assert np.array_equal(h, high) and np.array_equal(p, pred) and a == 4
    assert encode_policy_request(h, p, a) == buf
    buf = encode_policy_response(5)
    assert encode_policy_response(decode_policy_response(buf)) == buf


@pytest.mark.parametrize("mutate,match", [
    (lambda b: b"XXXX" + b[4:], "bad magic"),
    (lambda b: b[:4] + struct.pack("<H", 9) + b[6:], "version"),
    (lambda b: b[:-10], "payload size"),
    (lambda b: b[:6], "truncated header"),
])
def test_malformed_predict_frames(mutate, match):
    buf = encode_predict_request(_trinary((5, 5)))
    with pytest.raises(ProtocolError, match=match):
        decode_predict_request(mutate(buf))


def test_out_of_range_values_rejected():
    with pytest.raises(ProtocolError):
        encode_predict_request(np.full((3, 3), 7, dtype=np.int8))
    with pytest.raises(ProtocolError):
        encode_policy_response(9)
    bad = protocol.HEADER.pack(protocol.MAGIC_POLICY_RESPONSE, 1, 1, 1) + bytes([9])
    with pytest.raises(ProtocolError, match="out of range"):
        decode_policy_response(bad)


def test_probabilities_out_of_range_rejected():
    probs = np.full((2, 2), 1.5, dtype=np.float32)
    buf = protocol.HEADER.pack(protocol.MAGIC_PREDICT_RESPONSE, 1, 2, 2) + probs.tobytes()
    with pytest.raises(ProtocolError, match="outside"):
        decode_predict_response(buf)


def test_response_shape_must_match_request():
    probs = np.zeros((3, 3), dtype=np.float32)
    buf = encode_predict_response(probs)
    with pytest.raises(ProtocolError, match="shape"):
        decode_predict_response(buf, expect_shape=(4, 4))


# -- subprocess transport -------------------------------------------------------


def test_subprocess_identity_predictor_round_trip():
    cells = _trinary(seed=5)
    client = ExternalPredictorClient(SubprocessEndpoint(predictor_double("identity")),
                                     timeout_s=10.0)
    try:
        probs = client.predict_cells(cells)
        expected = np.full(cells.shape, 0.5, dtype=np.float32)
        expected[cells == -1] = 0.0
        expected[cells == 1] = 1.0
        assert np.array_equal(probs, expected)
        # a second exchange over the same stream
        assert np.array_equal(client.predict_cells(cells), expected)
    finally:
        client.close()


@pytest.mark.parametrize("mode,match", [
    ("bad-magic", "magic"),
    ("bad-range", "outside"),
    ("short", "closed"),
])
def test_subprocess_predictor_violations(mode, match):
    client = ExternalPredictorClient(SubprocessEndpoint(predictor_double(mode)),
                                     timeout_s=10.0)
    try:
        with pytest.raises(ProtocolError, match=match):
            client.predict_cells(_trinary((50, 50)))
    finally:
        client.close()


def test_subprocess_predictor_timeout():
    client = ExternalPredictorClient(SubprocessEndpoint(predictor_double("sleep")),
                                     timeout_s=0.3)
    try:
        with pytest.raises(ProtocolError, match="timeout"):
            client.predict_cells(_trinary((10, 10)))
    finally:
        client.close()


def test_subprocess_policy_hover_and_bad_action():
    high = _four_state(seed=7)
    pred = _four_state(seed=8)
    client = ExternalPolicyClient(SubprocessEndpoint(policy_double("hover")),
                                  timeout_s=10.0)
    try:
        assert client.request_action(high, pred, 3) == 0
    finally:
        client.close()
    client = ExternalPolicyClient(SubprocessEndpoint(policy_double("bad-action")),
                                  timeout_s=10.0)
    try:
        with pytest.raises(ProtocolError, match="out of range"):
            client.request_action(high, pred, 3)
    finally:
        client.close()


# -- tcp transport ----------------------------------------------------------------


def _tcp_identity_server(ready, stop):
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind(("127.0.0.1", 0))
    srv.listen(1)
    ready["port"] = srv.getsockname()[1]
    ready["event"].set()
    conn, _ = srv.accept()
    try:
        while not stop.is_set():
            header = b""
            while len(header) < protocol.HEADER.size:
                chunk = conn.recv(protocol.HEADER.size - len(header))
                if not chunk:
                    return
                header += chunk
            total = protocol.frame_size_for(header)
            payload = b""
            while len(payload) < total - protocol.HEADER.size:
                payload += conn.recv(total - protocol.HEADER.size - len(payload))
            cells = decode_predict_request(header + payload)
            probs = np.full(cells.shape, 0.5, dtype=np.float32)
            probs[cells == -1] = 0.0
            probs[cells == 1] = 1.0
            conn.sendall(encode_predict_response(probs))
    finally:
        conn.close()
        srv.close()


def test_tcp_endpoint_round_trip():
    ready = {"event": threading.Event()}
    stop = threading.Event()
    thread = threading.Thread(target=_tcp_identity_server, args=(ready, stop),
                              daemon=True)
    thread.start()
    assert ready["event"].wait(5.0)
    client = ExternalPredictorClient(TcpEndpoint("127.0.0.1", ready["port"]),
                                     timeout_s=10.0)
    try:
        cells = _trinary((64, 64), seed=11)
        probs = client.predict_cells(cells)
        assert probs.shape == (64, 64)
        assert np.array_equal(probs == 0.0, cells == -1)
    finally:
        stop.set()
        client.close()
    thread.join(timeout=5.0)


def test_make_endpoint_specs():
    with pytest.raises(ValueError):
        make_endpoint("carrier-pigeon:coop")
    with pytest.raises(ValueError):
        make_endpoint("external:")
