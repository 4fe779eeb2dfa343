"""Deterministic random-number substreams.

Every stochastic draw in the pipeline comes from a substream keyed by the
scenario seed plus stable string/int keys (stage name, agent id, ...).  Agent
substreams are keyed by agent identity only, never by scenario or iteration,
so paired scenario runs share common random numbers.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf8"))


def substream(seed: int, *keys) -> np.random.Generator:
    """Return a Generator for (seed, *keys); same inputs give the same stream."""
    entropy = [int(seed) & 0xFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
