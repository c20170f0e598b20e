"""Phase-1: ED activation, slotted-ALOHA channel choice, on-off erasures and
per-relay collision resolution."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CaptureReport, NetworkConfig, Packet
from .rng import BLOCK, Entity, block_start, rng_stream


@dataclass
class Phase1Realization:
    slot: int
    active_eds: np.ndarray  # sorted ED indices
    channel_choice: np.ndarray  # one channel per active ED
    erasure_mask: np.ndarray  # (active ED, relay) -> erased


@dataclass
class Phase1Block:
    """Raw phase-1 draws for slots ``start .. start + size - 1``."""

    start: int
    active: np.ndarray  # (S, N) bool
    channel: np.ndarray  # (S, N) int
    erased: np.ndarray  # (S, N, K) bool

    @property
    def size(self) -> int:
        return self.active.shape[0]


def draw_block(config: NetworkConfig, start: int, size: int = BLOCK, eps1: np.ndarray | None = None) -> Phase1Block:
    if start % BLOCK:
        raise ValueError("block draws must start on a block boundary")
    N, K, F = config.n_eds, config.n_relays, config.n_channels
    if eps1 is None:
        eps1 = config.eps1_vector()
    # full-length draws keep realizations independent of the horizon
    act = np.empty((BLOCK, N), dtype=bool)
    ch = np.empty((BLOCK, N), dtype=np.int64)
    for i in range(N):
        g = rng_stream(config.seed, Entity.ED, i, start)
        act[:, i] = g.random(BLOCK) < config.activation_prob
        ch[:, i] = g.integers(0, F, BLOCK)
    er = np.empty((BLOCK, N, K), dtype=bool)
    for k in range(K):
        g = rng_stream(config.seed, Entity.RELAY, k, start)
        er[:, :, k] = g.random((BLOCK, N)) < eps1
    return Phase1Block(start, act[:size], ch[:size], er[:size])


def activate(config: NetworkConfig, slot: int, rng: np.random.Generator | None = None,
             eps1: np.ndarray | None = None) -> Phase1Realization:
    """Phase-1 draws for one slot.

    Without ``rng`` the canonical seeded streams are used, so the result is
    the realization the simulator sees for ``(config.seed, slot)``.
    """
    if eps1 is None:
        eps1 = config.eps1_vector()
    if rng is None:
        start = block_start(slot)
        blk = draw_block(config, start, eps1=eps1)
        s = slot - start
        act, ch, er = blk.active[s], blk.channel[s], blk.erased[s]
    else:
        N, K = config.n_eds, config.n_relays
        act = rng.random(N) < config.activation_prob
        ch = rng.integers(0, config.n_channels, N)
        er = rng.random((N, K)) < eps1[:, None]
    idx = np.flatnonzero(act)
    return Phase1Realization(slot, idx, ch[idx], er[idx])


def resolve_captures(real: Phase1Realization, config: NetworkConfig) -> CaptureReport:
    """A relay captures on a channel iff exactly one non-erased arrival hits it."""
    entries = []
    for k in range(config.n_relays):
        for f in range(config.n_channels):
            hits = [int(i) for i, c, e in zip(real.active_eds, real.channel_choice, real.erasure_mask[:, k])
                    if c == f and not e]
            if len(hits) == 1:
                entries.append(Packet(hits[0], real.slot, f, k))
    return CaptureReport(entries)


def block_captures(blk: Phase1Block, n_channels: int) -> list[list[tuple[int, int, int]]]:
    """Vectorized capture resolution for a whole block.

    Returns, per slot, ``(relay, channel, ed)`` triples ordered by relay then
    channel (the same order ``resolve_captures`` produces).
    """
    S, N = blk.active.shape
    arrive = (blk.active[:, :, None] & ~blk.erased).astype(np.int64)  # (S, N, K)
    onehot = (blk.channel[:, :, None] == np.arange(n_channels)).astype(np.int64)  # (S, N, F)
    counts = np.einsum("snk,snf->skf", arrive, onehot)
    who = np.einsum("snk,snf,n->skf", arrive, onehot, np.arange(N, dtype=np.int64))
    cap = counts == 1
    s_idx, k_idx, f_idx = np.nonzero(cap)
    eds = who[cap]
    bounds = np.searchsorted(s_idx, np.arange(S + 1))
    trip = list(zip(k_idx.tolist(), f_idx.tolist(), eds.tolist()))
    b = bounds.tolist()
    return [trip[b[s]:b[s + 1]] for s in range(S)]
