"""Domain types and AoI bookkeeping shared by every scheduler."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .rng import Entity, rng_stream


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ConfigError(name, f"must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class NetworkConfig:
    n_eds: int = 30
    activation_prob: float = 0.1
    n_channels: int = 2
    n_relays: int = 5
    # scalar, or one value per ED
    erasure_p1: float | tuple[float, ...] = 0.1
    erasure_p2: float = 0.1
    buffer_size: int = 1
    rts_max_delay: float = 0.1
    # mini-slots per RTS sub-slot; None means a continuous timer
    rts_resolution: int | None = None
    horizon_slots: int = 1_000_000
    warmup_slots: int = 1_000
    seed: int = 0
    # draw per-ED erasure rates uniformly from this range once per network
    hetero_eps1: tuple[float, float] | None = None

    def __post_init__(self):
        for name in ("n_eds", "n_channels", "n_relays"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {v!r}")
        _prob("activation_prob", self.activation_prob)
        _prob("erasure_p2", self.erasure_p2)
        _prob("rts_max_delay", self.rts_max_delay)
        if isinstance(self.erasure_p1, (list, tuple, np.ndarray)):
            eps = tuple(float(e) for e in self.erasure_p1)
            if len(eps) != self.n_eds:
                raise ConfigError("erasure_p1", f"per-ED vector has length {len(eps)}, expected {self.n_eds}")
            for e in eps:
                _prob("erasure_p1", e)
            object.__setattr__(self, "erasure_p1", eps)
        else:
            _prob("erasure_p1", self.erasure_p1)
        if self.hetero_eps1 is not None:
            lo, hi = self.hetero_eps1
            _prob("hetero_eps1", lo)
            _prob("hetero_eps1", hi)
            if lo > hi:
                raise ConfigError("hetero_eps1", "lower end exceeds upper end")
            object.__setattr__(self, "hetero_eps1", (float(lo), float(hi)))
        if self.buffer_size < 0:
            raise ConfigError("buffer_size", "must be >= 0")
        if self.rts_resolution is not None and self.rts_resolution < 1:
            raise ConfigError("rts_resolution", "must be >= 1 or None (continuous)")
        if self.horizon_slots < 1:
            raise ConfigError("horizon_slots", "must be >= 1")
        if not (0 <= self.warmup_slots < self.horizon_slots):
            raise ConfigError("warmup_slots", "must satisfy 0 <= warmup_slots < horizon_slots")

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    @property
    def heterogeneous(self) -> bool:
        return self.hetero_eps1 is not None or isinstance(self.erasure_p1, tuple)

    def eps1_vector(self) -> np.ndarray:
        """Per-ED phase-1 erasure probabilities for this network realization."""
        if self.hetero_eps1 is not None:
            lo, hi = self.hetero_eps1
            return rng_stream(self.seed, Entity.AP, 0, 0).uniform(lo, hi, size=self.n_eds)
        if isinstance(self.erasure_p1, tuple):
            return np.asarray(self.erasure_p1, dtype=float)
        return np.full(self.n_eds, float(self.erasure_p1))


class Packet(NamedTuple):
    """A captured update.  Replicas share ``ident`` but differ in ``holder``."""

    source_ed: int
    gen_slot: int
    capture_channel: int
    holder: int

    @property
    def ident(self) -> tuple[int, int]:
        return (self.source_ed, self.gen_slot)


@dataclass(frozen=True)
class AoiState:
    """Instantaneous AoI of every ED at the start of a slot."""

    ages: np.ndarray
    max_age: int = field(init=False)

    def __post_init__(self):
        ages = np.asarray(self.ages, dtype=np.int64)
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "max_age", int(ages.max()) if ages.size else 0)

    @classmethod
    def initial(cls, n_eds: int) -> "AoiState":
        return cls(np.ones(n_eds, dtype=np.int64))


def advance_ages(state: AoiState) -> AoiState:
    return AoiState(state.ages + 1)


def apply_deliveries(state: AoiState, delivered: Iterable[tuple[Packet, int]], slot: int) -> AoiState:
    """Ages at the start of ``slot + 1`` given this slot's deliveries.

    A delivered packet resets its ED to ``slot - gen_slot + 1``; the AP keeps
    the freshest update, so an older packet never raises an age.
    """
    ages = state.ages + 1
    for pkt, age in delivered:
        if pkt.gen_slot > slot:
            raise ValueError(f"packet {pkt.ident} generated after delivery slot {slot}")
        if age != slot - pkt.gen_slot:
            raise ValueError(f"delivery age {age} inconsistent with packet {pkt.ident} at slot {slot}")
        i = pkt.source_ed
        ages[i] = min(ages[i], age + 1)
    return AoiState(ages)


@dataclass
class CaptureReport:
    """Packets captured by the relays in one slot."""

    entries: list[Packet]

    def __post_init__(self):
        seen = set()
        for p in self.entries:
            key = (p.holder, p.capture_channel)
            if key in seen:
                raise ValueError(f"relay {p.holder} captured twice on channel {p.capture_channel}")
            seen.add(key)

    def by_relay(self) -> dict[int, list[Packet]]:
        out: dict[int, list[Packet]] = {}
        for p in self.entries:
            out.setdefault(p.holder, []).append(p)
        return out

    def identities(self) -> set[tuple[int, int]]:
        return {p.ident for p in self.entries}

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class ConnectivityMatrix:
    """Phase-2 link state ``h[f][k]``: relay ``k`` reaches the AP on channel ``f``."""

    h: np.ndarray

    @classmethod
    def full(cls, n_channels: int, n_relays: int) -> "ConnectivityMatrix":
        return cls(np.ones((n_channels, n_relays), dtype=bool))

    @property
    def n_channels(self) -> int:
        return self.h.shape[0]

    @property
    def n_relays(self) -> int:
        return self.h.shape[1]

    def __call__(self, f: int, k: int) -> bool:
        return bool(self.h[f, k])


class Transmission(NamedTuple):
    channel: int
    relay: int
    packet: Packet


@dataclass
class TransmissionPlan:
    """Phase-2 transmissions chosen for one slot.

    ``lossless`` marks the idealized plan of the lower bound: every listed
    packet reaches the AP regardless of connectivity or channel count.
    """

    transmissions: list[Transmission] = field(default_factory=list)
    lossless: bool = False
    meta: dict = field(default_factory=dict)

    def by_channel(self) -> dict[int, list[Transmission]]:
        out: dict[int, list[Transmission]] = {}
        for tx in self.transmissions:
            out.setdefault(tx.channel, []).append(tx)
        return out

    def check(self, *, single_relay: bool = True) -> None:
        """Raise ``AssertionError`` on a broken plan invariant."""
        if single_relay:
            relays = [tx.relay for tx in self.transmissions]
            assert len(relays) == len(set(relays)), f"relay scheduled twice: {relays}"
        chan_of: dict[tuple[int, int], int] = {}
        for tx in self.transmissions:
            prev = chan_of.setdefault(tx.packet.ident, tx.channel)
            assert prev == tx.channel, f"packet {tx.packet.ident} on channels {prev} and {tx.channel}"


@dataclass
class SlotOutcome:
    delivered: list[tuple[Packet, int]] = field(default_factory=list)
    ap_collisions: int = 0
    erased_tx: int = 0
    overhead_symbols: int = 0


def resolve_at_ap(plan: TransmissionPlan, h: ConnectivityMatrix | Sequence, slot: int) -> SlotOutcome:
    """AP-side reception: erased links are lost, two or more arrivals collide."""
    out = SlotOutcome()
    if plan.lossless:
        seen = set()
        for tx in plan.transmissions:
            if tx.packet.ident not in seen:
                seen.add(tx.packet.ident)
                out.delivered.append((tx.packet, slot - tx.packet.gen_slot))
        return out
    hm = h.h if isinstance(h, ConnectivityMatrix) else h
    for f, txs in plan.by_channel().items():
        row = hm[f]
        arrived = [tx for tx in txs if row[tx.relay]]
        out.erased_tx += len(txs) - len(arrived)
        if len(arrived) == 1:
            pkt = arrived[0].packet
            out.delivered.append((pkt, slot - pkt.gen_slot))
        elif len(arrived) > 1:
            out.ap_collisions += 1
    return out
