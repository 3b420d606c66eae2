"""Named deterministic random substreams.

Every random draw in the simulator comes from a substream addressed by a
master seed plus a tuple of name parts, e.g. ``substream(42, "values",
"loc-007", "temperature")``. Substreams are independent Philox streams, so
the order in which components consume randomness cannot perturb one
another, and any single stream can be regenerated in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _spawn_key(parts: tuple) -> tuple[int, ...]:
    # 128-bit hash of the joined name parts, split into four uint32 words.
    joined = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(joined.encode("utf-8"), digest_size=16).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def substream(seed: int, *parts) -> np.random.Generator:
    """Return the generator for the substream named by ``parts``."""
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    seq = np.random.SeedSequence(seed, spawn_key=_spawn_key(parts))
    return np.random.Generator(np.random.Philox(seq))
