"""Seeded PCG64 random streams, one per subsystem.

Every consumer derives its generator from (seed, stream key) through numpy's
SeedSequence spawn-key mechanism, so subsystems are independently reproducible:
re-running with the same seed replays each stream bit-identically no matter how
often the other streams were consumed.
"""

from __future__ import annotations

import numpy as np

STREAM_MOTION = 0  # simulator odometry corruption
STREAM_SENSOR = 1  # lidar range noise
STREAM_RESAMPLE = 2  # particle filter resampling comb
STREAM_INIT = 3  # localization cloud initialization
STREAM_PARTICLE = 16  # per-particle motion sampling: (STREAM_PARTICLE, slot)


def substream(seed: int, *key: int) -> np.random.Generator:
    """A PCG64 generator for the named (seed, key) stream."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))
