"""Counter-based derivation of independent random streams.

Every stream is addressed by the master seed plus a tuple of non-negative
integer keys, e.g. ``(STREAM_SESSION, mu_index, block)``. The key becomes the
``spawn_key`` of a :class:`numpy.random.SeedSequence`, so the stream for a
given address never depends on how many other streams were created or on
which worker consumes it.
"""

from __future__ import annotations

import numpy as np

STREAM_SESSION = 1
STREAM_SCAN = 2
STREAM_BARS = 3
STREAM_CHANNEL = 4
STREAM_FARADAY = 5


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seed and stream keys must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
