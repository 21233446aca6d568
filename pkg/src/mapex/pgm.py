"""Binary PGM (P5) I/O plus a key=value sidecar format.

Plan and map files share one byte encoding:

    0   occupied
    255 free
    128 unknown (exterior, for ground-truth plans)
    64  non-flight

The sidecar is a plain text file of sorted ``key=value`` lines next to the
image, carrying resolution, dimensions, seed and cell counts.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid import FREE, NON_FLIGHT, OCCUPIED, UNKNOWN

STATE_TO_BYTE = {OCCUPIED: 0, FREE: 255, UNKNOWN: 128, NON_FLIGHT: 64}
BYTE_TO_STATE = {v: k for k, v in STATE_TO_BYTE.items()}


def write_pgm(path, data: np.ndarray) -> None:
    data = np.ascontiguousarray(data, dtype=np.uint8)
    if data.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    h, w = data.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    # P5 header: magic, width, height, maxval; '#' starts a comment.
    while len(tokens) < 4:
        if pos >= len(raw):
            raise ValueError(f"malformed PGM file: {path}")
        c = raw[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = raw.find(b"\n", pos)
            pos = len(raw) if nl < 0 else nl + 1
        else:
            end = pos
            while end < len(raw) and not raw[end:end + 1].isspace():
                end += 1
            tokens.append(raw[pos:end])
            pos = end
    pos += 1  # single whitespace byte before the payload
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (P5) file: {path}")
    w, h, maxval = (int(t) for t in tokens[1:4])
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}: {path}")
    payload = raw[pos:pos + w * h]
    if len(payload) != w * h:
        raise ValueError(f"truncated PGM payload: {path}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w)


def encode_cells(cells: np.ndarray) -> np.ndarray:
    out = np.empty(cells.shape, dtype=np.uint8)
    seen = np.zeros(cells.shape, dtype=bool)
    for state, byte in STATE_TO_BYTE.items():
        mask = cells == state
        out[mask] = byte
        seen |= mask
    if not seen.all():
        bad = int(np.asarray(cells)[~seen].flat[0])
        raise ValueError(f"unknown cell state: {bad}")
    return out


def decode_cells(raw: np.ndarray) -> np.ndarray:
    out = np.empty(raw.shape, dtype=np.int8)
    seen = np.zeros(raw.shape, dtype=bool)
    for byte, state in BYTE_TO_STATE.items():
        mask = raw == byte
        out[mask] = state
        seen |= mask
    if not seen.all():
        bad = int(np.asarray(raw)[~seen].flat[0])
        raise ValueError(f"unknown cell encoding: {bad}")
    return out


def write_sidecar(path, mapping: dict) -> None:
    lines = [f"{k}={mapping[k]}" for k in sorted(mapping)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sidecar(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed sidecar line: {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
