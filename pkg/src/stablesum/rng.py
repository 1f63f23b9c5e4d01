"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, stream_id)``; the counter
starts at zero.  Work is sharded by stream id, so the set of numbers drawn for
a given computation never depends on how many workers process it.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def make_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Return the generator for stream ``stream`` of ``seed``."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_stream(*parts: int | str) -> int:
    """Mix labels into a 64-bit stream id.

    Used to give sweeps and sub-tasks disjoint, reproducible stream ids, e.g.
    ``derive_stream("sweep", N, k)``.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, str):
            h.update(b"s" + part.encode())
        else:
            h.update(b"i" + struct.pack("<Q", int(part) & _MASK64))
    return int.from_bytes(h.digest(), "little")
