#!/usr/bin/env python3
"""External map-predictor test double speaking the stdio frame protocol.

Modes (argv[1], default "identity"):
    identity    free -> 0.0, unknown -> 0.5, occupied -> 1.0
    bad-magic   replies with a corrupted magic
    bad-range   replies with probabilities outside [0, 1]
    short       replies with a truncated frame
    sleep       waits 5 s before answering (for timeout tests)
"""

import struct
import sys
import time

import numpy as np

from mapex import protocol


def main() -> int:
    mode = sys.argv[1] if len(sys.argv) > 1 else "identity"
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    while True:
        header = stdin.read(protocol.HEADER.size)
        if not header:
            return 0
        total = protocol.frame_size_for(header)
        payload = stdin.read(total - protocol.HEADER.size)
        cells = protocol.decode_predict_request(header + payload)

        if mode == "sleep":
            time.sleep(5.0)
        probs = np.full(cells.shape, 0.5, dtype=np.float32)
        probs[cells == -1] = 0.0
        probs[cells == 1] = 1.0
        frame = protocol.encode_predict_response(probs)
        if mode == "bad-magic":
            frame = b"XXXX" + frame[4:]
        elif mode == "bad-range":
            bad = probs.copy()
            bad[0, 0] = 2.0
            h, w = bad.shape
            frame = protocol.HEADER.pack(protocol.MAGIC_PREDICT_RESPONSE,
                                         protocol.PROTOCOL_VERSION, w, h) + bad.tobytes()
        elif mode == "short":
            frame = frame[:len(frame) // 2]
            stdout.write(frame)
            stdout.flush()
            return 0
        stdout.write(frame)
        stdout.flush()


if __name__ == "__main__":
    sys.exit(main())
