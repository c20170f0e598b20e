"""Phase-2 forwarding policies.

Every policy maps the packets held by the relays (this slot's captures, plus
buffered packets for the buffered variants), the connectivity matrix and the
current AoI vector to a :class:`TransmissionPlan`.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .matching import WeightedBipartiteGraph, max_weight_matching
from .model import AoiState, CaptureReport, ConnectivityMatrix, NetworkConfig, Packet, Transmission, TransmissionPlan
from .schedkind import SchedulerKind
from .signaling import SymbolBudget, overhead_symbols

log = logging.getLogger(__name__)

# above this many candidate (relay, packet) pairs MAM switches to local search
MAM_EXACT_LIMIT = 12

__all__ = [
    "SchedulerKind", "RelayBuffer", "RtsTimer", "Contention", "schedule", "schedule_oracle",
    "schedule_aloha_forward", "schedule_mam", "schedule_imas", "schedule_b_imas", "schedule_abdr",
    "schedule_b_abdr", "compute_rts_time", "contend", "update_buffers", "fresh_candidates",
]


@dataclass
class RelayBuffer:
    """Packets retained by each relay between slots."""

    capacity: int
    slots: list[list[Packet]] = field(default_factory=list)

    @classmethod
    def empty(cls, n_relays: int, capacity: int) -> "RelayBuffer":
        return cls(capacity, [[] for _ in range(n_relays)])

    def packets(self) -> list[Packet]:
        return [p for rel in self.slots for p in rel]

    def occupancy(self) -> list[int]:
        return [len(rel) for rel in self.slots]


class RtsTimer(NamedTuple):
    relay: int
    channel: int
    expiry: float  # fraction of the RTS sub-slot, in [0, 1]
    packet: Packet | None = None


@dataclass
class Contention:
    winner: RtsTimer | None = None
    colliders: tuple[RtsTimer, ...] = ()


def _rows(h) -> Sequence[Sequence[bool]]:
    if isinstance(h, ConnectivityMatrix):
        return h.h.tolist()
    return h


def _age_list(ages) -> Sequence[int]:
    if isinstance(ages, AoiState):
        return ages.ages.tolist()
    return ages


def fresh_candidates(packets: Iterable[Packet], ages: Sequence[int], slot: int) -> list[Packet]:
    """Drop packets the AP already supersedes and keep only each ED's newest generation."""
    newest: dict[int, int] = {}
    kept = []
    for p in packets:
        if p.gen_slot > slot - ages[p.source_ed]:
            kept.append(p)
            if p.gen_slot > newest.get(p.source_ed, -1):
                newest[p.source_ed] = p.gen_slot
    return [p for p in kept if p.gen_slot == newest[p.source_ed]]


# -- baselines ---------------------------------------------------------------

def schedule_oracle(captures: CaptureReport | Iterable[Packet]) -> TransmissionPlan:
    entries = captures.entries if isinstance(captures, CaptureReport) else captures
    seen = set()
    txs = []
    for p in entries:
        if p.ident not in seen:
            seen.add(p.ident)
            txs.append(Transmission(p.capture_channel, p.holder, p))
    return TransmissionPlan(txs, lossless=True)


def schedule_aloha_forward(captures: CaptureReport | Iterable[Packet], h=None) -> TransmissionPlan:
    # relays forward blindly; the AP sorts out erasures and collisions
    entries = captures.entries if isinstance(captures, CaptureReport) else captures
    return TransmissionPlan([Transmission(p.capture_channel, p.holder, p) for p in entries])


# -- max-age matching --------------------------------------------------------

def _match_set(subset: Sequence[int], cands: Sequence[Packet], w: Sequence[int], h, F: int):
    g = WeightedBipartiteGraph([w[c] for c in subset], F,
                               [[bool(h[f][cands[c].holder]) for f in range(F)] for c in subset])
    pairs = max_weight_matching(g)
    return sum(g.weights[i] for i, _ in pairs), [(subset[i], f) for i, f in pairs]


def _compatible(c: Packet, chosen: Iterable[Packet]) -> bool:
    return all(c.holder != o.holder and c.ident != o.ident for o in chosen)


def _maximal_sets(cands: Sequence[Packet], F: int) -> list[tuple[int, ...]]:
    """Sets of <= F candidates with distinct relays and packets that cannot be extended."""
    out = []
    n = len(cands)

    def rec(i: int, chosen: list[int]):
        if len(chosen) == F or i == n:
            if len(chosen) == F or not any(
                    _compatible(cands[j], (cands[c] for c in chosen)) for j in range(n) if j not in chosen):
                out.append(tuple(chosen))
            return
        if _compatible(cands[i], (cands[c] for c in chosen)):
            chosen.append(i)
            rec(i + 1, chosen)
            chosen.pop()
        rec(i + 1, chosen)

    rec(0, [])
    return out


def _local_search(cands, w, h, F, starts):
    best_sum, best_pairs = -1, []
    for start in starts:
        cur = list(start)
        cur_sum, cur_pairs = _match_set(cur, cands, w, h, F)
        improved = True
        while improved:
            improved = False
            moves = [cur + [c] for c in range(len(cands))
                     if len(cur) < F and c not in cur and _compatible(cands[c], (cands[x] for x in cur))]
            for pos, c in itertools.product(range(len(cur)), range(len(cands))):
                rest = cur[:pos] + cur[pos + 1:]
                if c not in cur and _compatible(cands[c], (cands[x] for x in rest)):
                    moves.append(rest + [c])
            for m in moves:
                s, pairs = _match_set(m, cands, w, h, F)
                if s > cur_sum:
                    cur, cur_sum, cur_pairs, improved = m, s, pairs, True
                    break
        if cur_sum > best_sum:
            best_sum, best_pairs = cur_sum, cur_pairs
    return best_sum, best_pairs


def schedule_mam(cands: Sequence[Packet], h, ages, n_channels: int,
                 exact_limit: int = MAM_EXACT_LIMIT) -> TransmissionPlan:
    """Max-age matching over (relay, packet) candidates.

    Enumerates candidate sets with pairwise-distinct relays and packets, runs
    a max-weight matching of each set against the connected channels and
    keeps the best.  Sets are visited by decreasing weight upper bound so the
    search stops once no remaining set can win; the first set attaining the
    optimum (in that order) is returned.
    """
    rows, a = _rows(h), _age_list(ages)
    F = n_channels
    cands = sorted((c for c in cands if any(rows[f][c.holder] for f in range(F))),
                   key=lambda c: (c.holder, c.capture_channel, c.source_ed, c.gen_slot))
    if not cands:
        return TransmissionPlan()
    w = [int(a[c.source_ed]) for c in cands]
    meta = {}
    if len(cands) > exact_limit:
        greedy: list[int] = []
        for c in sorted(range(len(cands)), key=lambda c: (-w[c], c)):
            if len(greedy) < F and _compatible(cands[c], (cands[x] for x in greedy)):
                greedy.append(c)
        imas = schedule_imas(cands, rows, a, F)
        imas_set = [cands.index(tx.packet) for tx in imas.transmissions]
        best_sum, best_pairs = _local_search(cands, w, rows, F, [greedy, imas_set])
        meta["mam_fallback"] = True
    else:
        sets = _maximal_sets(cands, F)
        sets.sort(key=lambda s: (-sum(w[c] for c in s), s))
        best_sum, best_pairs = 0, []
        for s in sets:
            if sum(w[c] for c in s) <= best_sum:
                break
            total, pairs = _match_set(s, cands, w, rows, F)
            if total > best_sum:
                best_sum, best_pairs = total, pairs
    txs = sorted((Transmission(f, cands[c].holder, cands[c]) for c, f in best_pairs), key=lambda t: t.channel)
    return TransmissionPlan(txs, meta=meta)


def schedule_imas(cands: Sequence[Packet], h, ages, n_channels: int) -> TransmissionPlan:
    """Iterative max-age scheduling: channel by channel, the oldest connectable packet."""
    rows, a = _rows(h), _age_list(ages)
    used_relays: set[int] = set()
    served: set[int] = set()
    txs = []
    for f in range(n_channels):
        row = rows[f]
        best, best_key = None, None
        for c in cands:
            if c.holder in used_relays or c.source_ed in served or not row[c.holder]:
                continue
            key = (a[c.source_ed], -c.source_ed, c.gen_slot, -c.holder)
            if best_key is None or key > best_key:
                best, best_key = c, key
        if best is not None:
            txs.append(Transmission(f, best.holder, best))
            used_relays.add(best.holder)
            served.add(best.source_ed)
    return TransmissionPlan(txs)


def schedule_b_imas(captures, buffers: RelayBuffer, h, ages, slot: int, n_channels: int) -> TransmissionPlan:
    entries = captures.entries if isinstance(captures, CaptureReport) else list(captures)
    pool = fresh_candidates(entries + buffers.packets(), _age_list(ages), slot)
    return schedule_imas(pool, h, ages, n_channels)


# -- age-based delayed request ----------------------------------------------

def compute_rts_time(age: int, max_age: int, t_star: float, u: float) -> float:
    """RTS timer expiry ``min(1 - age/max_age + tau, 1)`` with ``tau = u * t_star``.

    ``u`` is a uniform draw in [0, 1), so ``tau ~ U(0, t_star)``.
    """
    if not (1 <= age <= max_age):
        raise ValueError(f"age {age} outside [1, {max_age}]")
    if not (0.0 <= t_star <= 1.0):
        raise ValueError(f"t_star {t_star} outside [0, 1]")
    return min(1.0 - age / max_age + u * t_star, 1.0)


def contend(timers: Iterable[RtsTimer], resolution: int | None = None) -> dict[int, Contention]:
    """Resolve RTS contention on every channel.

    Continuous timers: the earliest request on an idle channel wins.
    Discretized timers (``resolution`` mini-slots): requests sharing the
    earliest mini-slot of an idle channel all fire and collide.  Either way a
    relay that has fired withdraws its other requests; simultaneous requests
    of one relay are handled in ascending channel order.
    """
    timers = list(timers)
    out: dict[int, Contention] = {}
    fired: set[int] = set()
    if resolution is None:
        timers.sort(key=lambda t: (t.expiry, t.relay, t.channel))
        for i, t in enumerate(timers):
            if t.channel in out or t.relay in fired:
                continue
            if i + 1 < len(timers) and timers[i + 1].expiry == t.expiry and timers[i + 1].channel == t.channel:
                log.debug("timer tie on channel %d at %.17g; relay %d wins", t.channel, t.expiry, t.relay)
            out[t.channel] = Contention(winner=t)
            fired.add(t.relay)
        return out
    ticks: dict[int, list[RtsTimer]] = {}
    for t in timers:
        ticks.setdefault(min(int(t.expiry * resolution), resolution - 1), []).append(t)
    for tick in sorted(ticks):
        group = ticks[tick]
        for f in sorted({t.channel for t in group}):
            if f in out:
                continue
            contenders = sorted((t for t in group if t.channel == f and t.relay not in fired), key=lambda t: t.relay)
            if not contenders:
                continue
            fired.update(t.relay for t in contenders)
            if len(contenders) == 1:
                out[f] = Contention(winner=contenders[0])
            else:
                out[f] = Contention(colliders=tuple(contenders))
    return out


def _abdr(cands: Iterable[Packet], h, ages, jitter, t_star: float, resolution: int | None) -> TransmissionPlan:
    rows, a = _rows(h), _age_list(ages)
    max_age = max(a)
    # one request per (relay, capture channel): the relay's oldest-ED packet there
    best: dict[tuple[int, int], Packet] = {}
    for c in cands:
        key = (c.holder, c.capture_channel)
        o = best.get(key)
        if o is None or (a[c.source_ed], c.gen_slot, -c.source_ed) > (a[o.source_ed], o.gen_slot, -o.source_ed):
            best[key] = c
    timers = [RtsTimer(k, f, compute_rts_time(a[p.source_ed], max_age, t_star, jitter[k][f]), p)
              for (k, f), p in best.items() if rows[f][k]]
    result = contend(timers, resolution)
    txs = []
    collisions = 0
    for f in sorted(result):
        r = result[f]
        if r.winner is not None:
            txs.append(Transmission(f, r.winner.relay, r.winner.packet))
        else:
            collisions += 1
            txs.extend(Transmission(f, t.relay, t.packet) for t in r.colliders)
    return TransmissionPlan(txs, meta={"rts_collisions": collisions} if collisions else {})


def schedule_abdr(captures, h, ages, jitter, t_star: float = 0.1, resolution: int | None = None) -> TransmissionPlan:
    entries = captures.entries if isinstance(captures, CaptureReport) else captures
    return _abdr(entries, h, ages, jitter, t_star, resolution)


def schedule_b_abdr(captures, buffers: RelayBuffer, h, ages, jitter, slot: int, t_star: float = 0.1,
                    resolution: int | None = None) -> TransmissionPlan:
    entries = captures.entries if isinstance(captures, CaptureReport) else list(captures)
    a = _age_list(ages)
    # each relay only knows its own packets and the AoI feedback
    pool = [p for p in entries + buffers.packets() if p.gen_slot > slot - a[p.source_ed]]
    return _abdr(pool, h, a, jitter, t_star, resolution)


def update_buffers(buffers: RelayBuffer, captures, delivered: Iterable[tuple[Packet, int]],
                   ages_next: AoiState | Sequence[int], slot: int) -> RelayBuffer:
    """End-of-slot buffer maintenance from the AP feedback.

    Packets already delivered, or superseded by a delivered update, are
    dropped; each relay keeps its newest packet per ED and then the
    ``capacity`` packets whose EDs are currently oldest.
    """
    entries = captures.entries if isinstance(captures, CaptureReport) else list(captures)
    a = _age_list(ages_next)
    nxt = slot + 1
    done = {p.ident for p, _ in delivered}
    pools: list[list[Packet]] = [list(rel) for rel in buffers.slots]
    for p in entries:
        pools[p.holder].append(p)
    out = []
    for pool in pools:
        newest: dict[int, Packet] = {}
        for p in pool:
            if p.ident in done or p.gen_slot <= nxt - a[p.source_ed]:
                continue
            o = newest.get(p.source_ed)
            if o is None or p.gen_slot > o.gen_slot:
                newest[p.source_ed] = p
        keep = sorted(newest.values(), key=lambda p: (-a[p.source_ed], p.gen_slot, p.source_ed))
        out.append(keep[:buffers.capacity])
    return RelayBuffer(buffers.capacity, out)


# -- dispatch ----------------------------------------------------------------

def schedule(kind: SchedulerKind | str, captures: CaptureReport, buffers: RelayBuffer | None, h, ages,
             jitter=None, *, slot: int, config: NetworkConfig,
             budget: SymbolBudget | None = None) -> tuple[TransmissionPlan, int]:
    """Run one policy for one slot; returns the plan and its in-slot signaling symbols."""
    kind = SchedulerKind.parse(kind)
    F = config.n_channels
    if kind.buffered and (buffers is None or buffers.capacity < 1):
        raise ValueError(f"{kind} needs a relay buffer with capacity >= 1")
    if kind.uses_timers and jitter is None:
        raise ValueError(f"{kind} needs RTS jitter draws")
    entries = captures.entries if isinstance(captures, CaptureReport) else list(captures)
    if kind is SchedulerKind.ORACLE:
        plan = schedule_oracle(entries)
    elif kind is SchedulerKind.ALOHA:
        plan = schedule_aloha_forward(entries, h)
    elif kind is SchedulerKind.MAM:
        plan = schedule_mam(entries, h, ages, F)
    elif kind is SchedulerKind.IMAS:
        plan = schedule_imas(entries, h, ages, F)
    elif kind is SchedulerKind.B_IMAS:
        plan = schedule_b_imas(entries, buffers, h, ages, slot, F)
    elif kind is SchedulerKind.ABDR:
        plan = schedule_abdr(entries, h, ages, jitter, config.rts_max_delay, config.rts_resolution)
    else:
        plan = schedule_b_abdr(entries, buffers, h, ages, jitter, slot, config.rts_max_delay,
                               config.rts_resolution)
    if budget is None:
        budget = SymbolBudget.for_network(config.n_eds, config.n_relays, buffer_size=config.buffer_size)
    return plan, overhead_symbols(kind, budget, config.n_relays).in_slot
