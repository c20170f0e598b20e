"""Deterministic, addressable random streams.

Every stochastic quantity in a run is drawn from a stream keyed by
``(seed, entity, index, slot)``.  Two runs that share a seed therefore see
the same phase-1 realization, the same phase-2 connectivity and the same RTS
jitter no matter which scheduler consumes them (common random numbers).

The simulator draws in blocks of ``BLOCK`` slots; the ``slot`` component of
the key is then the first slot of the block.
"""
from __future__ import annotations

import enum

import numpy as np

BLOCK = 1024


class Entity(enum.IntEnum):
    ED = 0  # activation and channel choice, one stream per ED
    RELAY = 1  # phase-1 erasures seen by one relay
    AP = 2  # network-level draws (heterogeneous erasure rates)
    CHANNEL = 3  # phase-2 connectivity column of one relay
    TIMER = 4  # RTS jitter of one relay


def rng_stream(seed: int, entity: Entity | str, index: int, slot: int) -> np.random.Generator:
    """Return a fresh generator for the given stream key.

    Identical keys give identical sequences; distinct keys give independent
    streams (``SeedSequence`` spawn-key hashing).
    """
    if isinstance(entity, str):
        entity = Entity[entity.upper()]
    if index < 0 or slot < 0:
        raise ValueError("stream index and slot must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFF_FFFF_FFFF_FFFF,
                                spawn_key=(int(entity), int(index), int(slot)))
    return np.random.Generator(np.random.PCG64(ss))


def block_start(slot: int) -> int:
    return slot - slot % BLOCK


def replication_seed(seed: int, replication: int) -> int:
    """64-bit seed for replication ``replication`` of a base seed."""
    if replication == 0:
        return int(seed)
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(1_000_003, replication))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
