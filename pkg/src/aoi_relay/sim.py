"""Slot-by-slot simulation of the two-hop network under one forwarding policy."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .metrics import MetricsAccumulator
from .model import NetworkConfig, Packet, TransmissionPlan, resolve_at_ap
from .phase1 import block_captures, draw_block
from .rng import BLOCK, Entity, rng_stream
from .schedkind import SchedulerKind
from .schedulers import RelayBuffer, schedule, update_buffers
from .signaling import SymbolBudget

log = logging.getLogger(__name__)

COUNTERS = ("delivered", "ap_collisions", "erased_tx", "rts_collisions", "mam_fallback_slots",
            "overhead_symbols", "max_buffer")


@dataclass
class SlotView:
    """Everything a policy saw and did in one slot (passed to observers)."""

    slot: int
    captures: list[Packet]
    buffers: RelayBuffer | None
    h: list  # h[f][k]
    ages: list[int]
    jitter: list | None  # jitter[k][f]
    plan: TransmissionPlan
    delivered: list


@dataclass
class SimResult:
    config: NetworkConfig
    kind: SchedulerKind
    metrics: MetricsAccumulator
    counters: dict = field(default_factory=dict)
    wall_time: float = 0.0


def phase2_block(config: NetworkConfig, start: int) -> np.ndarray:
    """Connectivity draws ``h[s, f, k]`` for one block."""
    F, K = config.n_channels, config.n_relays
    h = np.empty((BLOCK, F, K), dtype=bool)
    for k in range(K):
        h[:, :, k] = rng_stream(config.seed, Entity.CHANNEL, k, start).random((BLOCK, F)) >= config.erasure_p2
    return h


def jitter_block(config: NetworkConfig, start: int) -> np.ndarray:
    """Uniform RTS jitter draws ``u[s, k, f]`` for one block."""
    F, K = config.n_channels, config.n_relays
    u = np.empty((BLOCK, K, F))
    for k in range(K):
        u[:, k, :] = rng_stream(config.seed, Entity.TIMER, k, start).random((BLOCK, F))
    return u


def _check_slot(kind: SchedulerKind, config: NetworkConfig, view: SlotView, out) -> None:
    # blind forwarding and the lossless bound are exempt from one-transmission-per-relay
    view.plan.check(single_relay=kind not in (SchedulerKind.ORACLE, SchedulerKind.ALOHA))
    if kind in (SchedulerKind.MAM, SchedulerKind.IMAS, SchedulerKind.B_IMAS):
        assert out.erased_tx == 0, f"slot {view.slot}: {kind} scheduled an erased link"
        assert out.ap_collisions == 0, f"slot {view.slot}: {kind} caused an AP collision"
    if kind.uses_timers and config.rts_resolution is None:
        assert out.ap_collisions == 0, f"slot {view.slot}: continuous {kind} caused a collision"
    held = {p.ident for p in view.captures} | ({p.ident for p in view.buffers.packets()} if view.buffers else set())
    for tx in view.plan.transmissions:
        assert tx.packet.ident in held, f"slot {view.slot}: {tx.packet.ident} is not held by any relay"
        assert tx.packet.holder == tx.relay, f"slot {view.slot}: relay {tx.relay} sends a packet it does not hold"


def simulate(config: NetworkConfig, kind: SchedulerKind | str, *, budget: SymbolBudget | None = None,
             check: bool = False, observer: Callable[[SlotView], None] | None = None,
             trace: TextIO | None = None, fast: bool = True, n_batches: int = 10) -> SimResult:
    """Run ``config.horizon_slots`` slots and return the accumulated metrics.

    All randomness comes from per-entity block streams, so two policies run
    on the same config see identical activations, erasures and jitter.
    The lossless policy takes a vectorized path unless ``fast`` is off or
    per-slot hooks are requested.
    """
    kind = SchedulerKind.parse(kind)
    t0 = time.perf_counter()
    if kind is SchedulerKind.ORACLE and fast and not check and observer is None and trace is None:
        res = _simulate_oracle(config, n_batches)
    else:
        res = _simulate_loop(config, kind, budget, check, observer, trace, n_batches)
    res.wall_time = time.perf_counter() - t0
    log.debug("%s: %d slots in %.1fs, AAoI %.4f", kind, config.horizon_slots, res.wall_time, res.metrics.aaoi)
    return res


def _simulate_loop(config, kind, budget, check, observer, trace, n_batches) -> SimResult:
    N, F, K, H, W = config.n_eds, config.n_channels, config.n_relays, config.horizon_slots, config.warmup_slots
    if budget is None:
        budget = SymbolBudget.for_network(N, K, buffer_size=config.buffer_size)
    eps1 = config.eps1_vector()
    acc = MetricsAccumulator(N, W, H, n_batches)
    counters = dict.fromkeys(COUNTERS, 0)
    buffers = RelayBuffer.empty(K, config.buffer_size) if kind.buffered else None
    ages = [1] * N
    for start in range(0, H, BLOCK):
        S = min(BLOCK, H - start)
        caps = block_captures(draw_block(config, start, S, eps1), F)
        hb = phase2_block(config, start)[:S].tolist()
        jb = jitter_block(config, start)[:S].tolist() if kind.uses_timers else None
        age_rows = np.empty((S, N), dtype=np.int64)
        pk_s, pk_i, pk_v = [], [], []
        for s in range(S):
            t = start + s
            age_rows[s] = ages
            entries = [Packet(ed, t, f, k) for k, f, ed in caps[s]]
            h = hb[s]
            jit = jb[s] if jb is not None else None
            plan, in_slot = schedule(kind, entries, buffers, h, ages, jit, slot=t, config=config, budget=budget)
            out = resolve_at_ap(plan, h, t)
            nxt = [a + 1 for a in ages]
            for pkt, age in out.delivered:
                i = pkt.source_ed
                if age + 1 < nxt[i]:
                    nxt[i] = age + 1
            measured = t >= W
            for i in {p.source_ed for p, _ in out.delivered}:
                if nxt[i] < ages[i] + 1:
                    pk_s.append(s)
                    pk_i.append(i)
                    pk_v.append(ages[i])
                    if measured:
                        counters["delivered"] += 1
            seen_buffers = buffers
            if kind.buffered:
                buffers = update_buffers(buffers, entries, out.delivered, nxt, t)
                if check:
                    occ = max(buffers.occupancy())
                    assert occ <= config.buffer_size, f"slot {t}: buffer holds {occ} > {config.buffer_size}"
            if measured:
                counters["ap_collisions"] += out.ap_collisions
                counters["erased_tx"] += out.erased_tx
                counters["rts_collisions"] += plan.meta.get("rts_collisions", 0)
                counters["mam_fallback_slots"] += int(bool(plan.meta.get("mam_fallback")))
                counters["overhead_symbols"] += in_slot
                if buffers is not None:
                    counters["max_buffer"] = max(counters["max_buffer"], max(buffers.occupancy()))
            if check or observer is not None:
                view = SlotView(t, entries, seen_buffers, h, ages, jit, plan, out.delivered)
                if check:
                    _check_slot(kind, config, view, out)
                if observer is not None:
                    observer(view)
            if trace is not None:
                trace.write(json.dumps({
                    "slot": t, "ages": ages, "captures": [list(p) for p in entries],
                    "tx": [[tx.channel, tx.relay, tx.packet.source_ed, tx.packet.gen_slot]
                           for tx in plan.transmissions],
                    "delivered": [[p.source_ed, p.gen_slot] for p, _ in out.delivered],
                    "ap_collisions": out.ap_collisions}) + "\n")
            ages = nxt
        acc.record_block(start, age_rows, np.array(pk_s, dtype=np.int64), np.array(pk_i, dtype=np.int64),
                         np.array(pk_v, dtype=np.int64))
    return SimResult(config, kind, acc, counters)


def _simulate_oracle(config: NetworkConfig, n_batches: int) -> SimResult:
    """Lossless phase-2: an ED's age resets to 1 after every slot in which any relay captured it."""
    N, F, H, W = config.n_eds, config.n_channels, config.horizon_slots, config.warmup_slots
    eps1 = config.eps1_vector()
    acc = MetricsAccumulator(N, W, H, n_batches)
    counters = dict.fromkeys(COUNTERS, 0)
    last = np.full(N, -1, dtype=np.int64)  # slot of the last capture (Δ(0) = 1)
    onehot_f = np.arange(F)
    for start in range(0, H, BLOCK):
        blk = draw_block(config, start, min(BLOCK, H - start), eps1)
        S = blk.size
        arrive = blk.active[:, :, None] & ~blk.erased  # (S, N, K)
        onehot = blk.channel[:, :, None] == onehot_f  # (S, N, F)
        counts = np.einsum("snk,snf->skf", arrive.astype(np.int64), onehot.astype(np.int64))
        # ED i is captured at relay k iff it arrived and was alone on its channel there
        alone = np.take_along_axis(counts, blk.channel[:, None, :], axis=2)  # (S, K, N)
        captured = np.any(arrive & (alone.transpose(0, 2, 1) == 1), axis=2)  # (S, N)
        t = start + np.arange(S)
        cap_slot = np.where(captured, t[:, None], -1)
        # last capture strictly before each slot
        prev = np.maximum.accumulate(np.vstack([last[None, :], cap_slot[:-1]]), axis=0)
        ages = t[:, None] - prev
        ps, pi = np.nonzero(captured)
        acc.record_block(start, ages, ps, pi, ages[ps, pi])
        counters["delivered"] += int(np.count_nonzero(captured[t >= W]))
        last = np.maximum(prev[-1], cap_slot[-1])
    return SimResult(config, SchedulerKind.ORACLE, acc, counters)
