"""Binary framing for external map predictors and exploration policies.

All frames share one little-endian header followed by a payload whose size
is implied by the header:

    magic   4 bytes   MPRQ / MPRS (prediction), PLRQ / PLRS (policy)
    version u16       currently 1
    width   u16
    height  u16

Payloads:

    MPRQ  width*height signed bytes, row-major, values in {-1, 0, 1}
          (free / unknown / occupied)
    MPRS  width*height little-endian float32 occupancy probabilities in [0, 1]
    PLRQ  two width*height signed-byte grids (fine observed map, then the
          thresholded prediction; values in {-1, 0, 1, 2}, 2 = non-flight),
          then one unsigned byte: the previous action
    PLRS  width = height = 1; one unsigned byte: the chosen action (0..5)

One response per request, in order. Transports: stdio of a spawned
subprocess, or a TCP connection.
"""

from __future__ import annotations

import os
import select
import socket
import struct
import subprocess

import numpy as np

PROTOCOL_VERSION = 1
MAGIC_PREDICT_REQUEST = b"MPRQ"
MAGIC_PREDICT_RESPONSE = b"MPRS"
MAGIC_POLICY_REQUEST = b"PLRQ"
MAGIC_POLICY_RESPONSE = b"PLRS"

HEADER = struct.Struct("<4sHHH")
DEFAULT_TIMEOUT_S = 2.0


class ProtocolError(RuntimeError):
    """Malformed frame, protocol violation, timeout or closed stream."""


def _check_grid(cells: np.ndarray, allowed: tuple[int, ...]) -> np.ndarray:
    cells = np.asarray(cells)
    if cells.ndim != 2:
        raise ProtocolError("grid payload must be 2-D")
    if cells.shape[0] > 0xFFFF or cells.shape[1] > 0xFFFF:
        raise ProtocolError("grid too large for u16 dimensions")
    if not np.isin(cells, allowed).all():
        raise ProtocolError(f"grid contains values outside {allowed}")
    return cells.astype(np.int8)


def _parse_header(buf: bytes, expect_magic: bytes) -> tuple[int, int]:
    if len(buf) < HEADER.size:
        raise ProtocolError(f"truncated header: {len(buf)} bytes")
    magic, version, width, height = HEADER.unpack_from(buf)
    if magic != expect_magic:
        raise ProtocolError(f"bad magic {magic!r}, expected {expect_magic!r}")
    if version != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if width == 0 or height == 0:
        raise ProtocolError("zero frame dimensions")
    return width, height


def _parse_payload(buf: bytes, size: int) -> bytes:
    payload = buf[HEADER.size:]
    if len(payload) != size:
        raise ProtocolError(f"payload size {len(payload)}, expected {size}")
    return payload


# -- prediction frames -------------------------------------------------------

def encode_predict_request(cells: np.ndarray) -> bytes:
    cells = _check_grid(cells, (-1, 0, 1))
    h, w = cells.shape
    return HEADER.pack(MAGIC_PREDICT_REQUEST, PROTOCOL_VERSION, w, h) + cells.tobytes()


def decode_predict_request(buf: bytes) -> np.ndarray:
    w, h = _parse_header(buf, MAGIC_PREDICT_REQUEST)
    payload = _parse_payload(buf, w * h)
    cells = np.frombuffer(payload, dtype=np.int8).reshape(h, w)
    return _check_grid(cells, (-1, 0, 1))


def encode_predict_response(probs: np.ndarray) -> bytes:
    probs = np.asarray(probs, dtype=np.float32)
    if probs.ndim != 2:
        raise ProtocolError("probability payload must be 2-D")
    h, w = probs.shape
    return HEADER.pack(MAGIC_PREDICT_RESPONSE, PROTOCOL_VERSION, w, h) + probs.tobytes()


def decode_predict_response(buf: bytes, expect_shape: tuple[int, int] | None = None) -> np.ndarray:
    w, h = _parse_header(buf, MAGIC_PREDICT_RESPONSE)
    payload = _parse_payload(buf, 4 * w * h)
    probs = np.frombuffer(payload, dtype="<f4").reshape(h, w)
    if expect_shape is not None and probs.shape != expect_shape:
        raise ProtocolError(f"response shape {probs.shape}, expected {expect_shape}")
    if not np.isfinite(probs).all() or probs.min() < 0.0 or probs.max() > 1.0:
        raise ProtocolError("probabilities outside [0, 1]")
    return probs


# -- policy frames ------------------------------------------------------------

def encode_policy_request(high: np.ndarray, pred: np.ndarray, last_action: int) -> bytes:
    high = _check_grid(high, (-1, 0, 1, 2))
    pred = _check_grid(pred, (-1, 0, 1, 2))
    if high.shape != pred.shape:
        raise ProtocolError("policy request grids must share a shape")
    if not 0 <= last_action <= 5:
        raise ProtocolError(f"action {last_action} out of range 0..5")
    h, w = high.shape
    return (HEADER.pack(MAGIC_POLICY_REQUEST, PROTOCOL_VERSION, w, h)
            + high.tobytes() + pred.tobytes() + bytes([last_action]))


def decode_policy_request(buf: bytes) -> tuple[np.ndarray, np.ndarray, int]:
    w, h = _parse_header(buf, MAGIC_POLICY_REQUEST)
    payload = _parse_payload(buf, 2 * w * h + 1)
    high = np.frombuffer(payload[:w * h], dtype=np.int8).reshape(h, w)
    pred = np.frombuffer(payload[w * h:2 * w * h], dtype=np.int8).reshape(h, w)
    last_action = payload[-1]
    if last_action > 5:
        raise ProtocolError(f"action {last_action} out of range 0..5")
    return (_check_grid(high, (-1, 0, 1, 2)),
            _check_grid(pred, (-1, 0, 1, 2)), int(last_action))


def encode_policy_response(action: int) -> bytes:
    if not 0 <= action <= 5:
        raise ProtocolError(f"action {action} out of range 0..5")
    return HEADER.pack(MAGIC_POLICY_RESPONSE, PROTOCOL_VERSION, 1, 1) + bytes([action])


def decode_policy_response(buf: bytes) -> int:
    w, h = _parse_header(buf, MAGIC_POLICY_RESPONSE)
    payload = _parse_payload(buf, w * h)
    if (w, h) != (1, 1):
        raise ProtocolError(f"policy response must be 1x1, got {w}x{h}")
    action = payload[0]
    if action > 5:
        raise ProtocolError(f"action {action} out of range 0..5")
    return int(action)


def frame_size_for(buf10: bytes) -> int:
    """Total frame size implied by a 10-byte header."""
    magic, _, w, h = HEADER.unpack_from(buf10)
    if magic == MAGIC_PREDICT_REQUEST:
        return HEADER.size + w * h
    if magic == MAGIC_PREDICT_RESPONSE:
        return HEADER.size + 4 * w * h
    if magic == MAGIC_POLICY_REQUEST:
        return HEADER.size + 2 * w * h + 1
    if magic == MAGIC_POLICY_RESPONSE:
        return HEADER.size + w * h
    raise ProtocolError(f"unknown magic {magic!r}")


# -- transports ---------------------------------------------------------------

class SubprocessEndpoint:
    """Spawns a peer process and exchanges frames over its stdio."""

    def __init__(self, cmd: list[str]):
        self.cmd = list(cmd)
        self.proc = subprocess.Popen(self.cmd, stdin=subprocess.PIPE,
                                     stdout=subprocess.PIPE)

    def send(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, ValueError) as exc:
            raise ProtocolError(f"peer closed stdin: {exc}") from exc

    def recv_exact(self, n: int, timeout_s: float) -> bytes:
        fd = self.proc.stdout.fileno()
        chunks = []
        got = 0
        while got < n:
            ready, _, _ = select.select([fd], [], [], timeout_s)
            if not ready:
                raise ProtocolError(f"timeout after {timeout_s}s waiting for peer")
            chunk = os.read(fd, n - got)
            if not chunk:
                raise ProtocolError("peer closed the stream mid-frame")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class TcpEndpoint:
    """Frame exchange over an established TCP connection."""

    def __init__(self, host: str, port: int, connect_timeout_s: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=connect_timeout_s)

    def send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise ProtocolError(f"send failed: {exc}") from exc

    def recv_exact(self, n: int, timeout_s: float) -> bytes:
        self.sock.settimeout(timeout_s)
        chunks = []
        got = 0
        while got < n:
            try:
                chunk = self.sock.recv(n - got)
            except socket.timeout as exc:
                raise ProtocolError(f"timeout after {timeout_s}s waiting for peer") from exc
            if not chunk:
                raise ProtocolError("peer closed the connection mid-frame")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def recv_frame(endpoint, timeout_s: float) -> bytes:
    header = endpoint.recv_exact(HEADER.size, timeout_s)
    total = frame_size_for(header)
    return header + endpoint.recv_exact(total - HEADER.size, timeout_s)


class ExternalPredictorClient:
    """Sequential request/response prediction over an endpoint."""

    def __init__(self, endpoint, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def predict_cells(self, cells: np.ndarray) -> np.ndarray:
        self.endpoint.send(encode_predict_request(cells))
        frame = recv_frame(self.endpoint, self.timeout_s)
        return decode_predict_response(frame, expect_shape=cells.shape)

    def close(self) -> None:
        self.endpoint.close()


class ExternalPolicyClient:
    """Sequential request/response action selection over an endpoint."""

    def __init__(self, endpoint, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint
        self.timeout_s = timeout_s

    def request_action(self, high: np.ndarray, pred: np.ndarray,
                       last_action: int) -> int:
        self.endpoint.send(encode_policy_request(high, pred, last_action))
        frame = recv_frame(self.endpoint, self.timeout_s)
        return decode_policy_response(frame)

    def close(self) -> None:
        self.endpoint.close()


def make_endpoint(spec: str):
    """Build an endpoint from a CLI-style spec: ``external:<command>`` spawns
    a subprocess, ``tcp:<host>:<port>`` connects a socket."""
    import shlex
    if spec.startswith("external:"):
        cmd = shlex.split(spec[len("external:"):])
        if not cmd:
            raise ValueError("empty external command")
        return SubprocessEndpoint(cmd)
    if spec.startswith("tcp:"):
        _, host, port = spec.split(":", 2)
        return TcpEndpoint(host, int(port))
    raise ValueError(f"unknown endpoint spec: {spec!r}")
