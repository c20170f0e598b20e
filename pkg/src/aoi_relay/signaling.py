"""Symbol accounting of the phase-2 information exchange."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .schedkind import SchedulerKind


@dataclass(frozen=True)
class SymbolBudget:
    t_total: int = 218  # phase-2 slot length T
    t_pilot: int = 5  # T_p
    t_id: int = 5  # T_i, packet / ED identifier
    t_relay_id: int = 3  # T_k
    t_rts: int = 45  # T_r
    buffer_size: int = 1  # B

    @classmethod
    def for_network(cls, n_eds: int, n_relays: int, **kw) -> "SymbolBudget":
        """Budget with identifier lengths set to their minimum for N EDs, K relays."""
        kw.setdefault("t_id", min_id_symbols(n_eds))
        kw.setdefault("t_relay_id", min_id_symbols(n_relays))
        return cls(**kw)

    def check(self, n_eds: int, n_relays: int) -> None:
        if self.t_id < min_id_symbols(n_eds):
            raise ValueError(f"t_id={self.t_id} cannot address {n_eds} EDs")
        if self.t_relay_id < min_id_symbols(n_relays):
            raise ValueError(f"t_relay_id={self.t_relay_id} cannot address {n_relays} relays")

    def with_buffer(self, b: int) -> "SymbolBudget":
        return replace(self, buffer_size=b)


def min_id_symbols(count: int) -> int:
    return math.ceil(math.log2(count)) if count > 1 else 0


@dataclass(frozen=True)
class OverheadLedger:
    """One row of the information-exchange table, in symbols."""

    pilot: int
    packet_id: int
    grant: int
    rts: int
    cts: int
    in_slot: int  # everything in the phase-2 slot that is not payload
    payload: int
    acknowledge: int  # AP feedback broadcast, outside the payload budget

    @property
    def total_exchange(self) -> int:
        return self.in_slot + self.acknowledge


def overhead_symbols(scheme: SchedulerKind | str, budget: SymbolBudget, n_relays: int) -> OverheadLedger:
    scheme = SchedulerKind.parse(scheme)
    K, B = n_relays, budget.buffer_size
    Tp, Ti, Tk, Tr, T = budget.t_pilot, budget.t_id, budget.t_relay_id, budget.t_rts, budget.t_total
    if scheme in (SchedulerKind.IMAS, SchedulerKind.MAM):
        pilot, pid, grant, rts, cts = K * Tp, K * Ti, Tk, 0, 0
        in_slot = K * Tp + K * Ti + 2 * Tk
    elif scheme is SchedulerKind.B_IMAS:
        # each relay reports its fresh capture plus B buffered packet IDs
        pilot, pid, grant, rts, cts = K * Tp, K * (B + 1) * Ti, Tk + Ti, 0, 0
        in_slot = K * Tp + K * (B + 1) * Ti + 2 * Tk + Ti
    elif scheme in (SchedulerKind.ABDR, SchedulerKind.B_ABDR):
        pilot, pid, grant, rts, cts = Tp, 0, 0, Tr, Tk
        in_slot = Tp + Tr + 2 * Tk
    elif scheme is SchedulerKind.ALOHA:
        return OverheadLedger(0, 0, 0, 0, 0, 0, T, Ti)
    else:  # idealized bound: no exchange at all
        return OverheadLedger(0, 0, 0, 0, 0, 0, T, 0)
    return OverheadLedger(pilot, pid, grant, rts, cts, in_slot, T - in_slot, Ti)


def max_rts_budget(budget: SymbolBudget, n_relays: int, buffer_size: int = 0, buffered: bool = False) -> int:
    """Strict upper bound on T_r for which (B-)ABDR exchanges fewer symbols
    than the centralized comparator (memoryless or buffered IMAS/MAM)."""
    b = replace(budget, buffer_size=buffer_size, t_rts=0)
    comparator = SchedulerKind.B_IMAS if buffered else SchedulerKind.IMAS
    return overhead_symbols(comparator, b, n_relays).in_slot - overhead_symbols(SchedulerKind.ABDR, b, n_relays).in_slot
