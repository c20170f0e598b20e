"""Exit criteria at desk scale; each test prints one PASS/FAIL line.

Statistical comparisons use 95% intervals (1.96 standard errors) from batch
means within a run or from independent replications, with common random
numbers shared across schedulers and sweep points.
"""
import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

from aoi_relay import analytics
from aoi_relay.experiment import PRESETS, figure_preset, run, write_result
from aoi_relay.matching import WeightedBipartiteGraph, matching_weight, max_weight_matching
from aoi_relay.model import NetworkConfig
from aoi_relay.schedkind import SchedulerKind
from aoi_relay.schedulers import schedule_imas, schedule_mam
from aoi_relay.signaling import SymbolBudget, max_rts_budget, overhead_symbols
from aoi_relay.sim import simulate

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

Z = 1.96
DEFAULTS = NetworkConfig()
P_STAR_TARGET, P_STAR_TOL = 0.0917, 0.001


def bound_of(cfg):
    return analytics.aoi_bound(analytics.BoundInputs.from_config(cfg))


def by_point(result, field="aaoi"):
    """{(value, scheduler): [per-replication field]} from the main table."""
    out = {}
    for r in result.table.records():
        out.setdefault((r["value"], r["scheduler"]), []).append(r[field])
    return out


def paired(a, b):
    """Mean and standard error of a - b over CRN-paired replications."""
    d = np.asarray(a) - np.asarray(b)
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(len(d)))


@pytest.fixture(scope="module")
def oracle_1e6():
    cfg = DEFAULTS.replace(horizon_slots=1_000_000, warmup_slots=1_000, erasure_p2=0.0)
    t = time.process_time()
    res = simulate(cfg, "oracle")
    return cfg, res, time.process_time() - t


def test_c1_bound_bridge(oracle_1e6, verdict):
    cfg, res, cpu = oracle_1e6
    b = bound_of(cfg)
    ea = abs(res.metrics.aaoi / b.aaoi - 1)
    ep = abs(res.metrics.paoi / b.paoi - 1)
    verdict("1", ea < 0.02 and ep < 0.02 and cpu < 60,
            f"bound {b.aaoi:.4f}, AAoI {res.metrics.aaoi:.4f} ({ea:.2%}), PAoI {res.metrics.paoi:.4f} ({ep:.2%}), "
            f"{cpu:.1f}s CPU for 1e6 slots")


def test_c2a_optimal_activation_value(verdict):
    p = analytics.optimize_activation(30, 2, 5, 0.1)
    verdict("2a", abs(p - P_STAR_TARGET) <= P_STAR_TOL,
            f"p* = {p:.6f} vs target {P_STAR_TARGET} +/- {P_STAR_TOL} "
            f"(bound at target {analytics.aoi_bound(analytics.BoundInputs(30, P_STAR_TARGET, 2, 5, 0.1)).aaoi:.5f}, "
            f"at p* {analytics.aoi_bound(analytics.BoundInputs(30, p, 2, 5, 0.1)).aaoi:.5f})")


def test_c2b_f5_minimizer(verdict):
    p_star = analytics.optimize_activation(30, 2, 5, 0.1)
    spec = figure_preset("f5", horizon_slots=100_000, warmup_slots=1_000, replications=2)
    step = spec.values[1] - spec.values[0]
    summary = {(r["value"], r["scheduler"]): r["aaoi"] for r in run(spec).summary.records()}
    argmin = {}
    for kind in spec.schedulers:
        curve = {v: summary[(v, kind.value)] for v in spec.values}
        argmin[kind.value] = min(curve, key=curve.get)
    ok = all(abs(v - p_star) <= step + 1e-9 for v in argmin.values())
    verdict("2b", ok, f"f5 minimizers {argmin} vs p* {p_star:.4f} (grid step {step:g})")


def test_c3_convolution_equivalence(verdict):
    worst = 0.0
    for pq in (0.01, 0.1, 0.5):
        d = np.arange(0, 51)
        pi = np.where(d >= 1, pq * (1 - pq) ** np.maximum(d - 1, 0), 0.0)
        conv = pi.copy()
        for n in range(1, 6):
            if n > 1:
                conv = np.convolve(conv, pi)[:51]
            closed = analytics.convolved_pmf_closed(n, d, pq, 1.0)
            nz = conv > 0
            assert np.all(closed[~nz] == 0)
            worst = max(worst, float(np.max(np.abs(closed[nz] / conv[nz] - 1))))
    verdict("3", worst <= 1e-12, f"max relative error {worst:.2e} over n<=5, delta<=50, pQ in {{0.01, 0.1, 0.5}}")


def test_c4_network_aoi_distribution(oracle_1e6, verdict):
    cfg, res, _ = oracle_1e6
    b = bound_of(cfg)
    ks = res.metrics.ks_distance(cfg.activation_prob, b.q)
    verdict("4", ks < 0.05, f"KS distance {ks:.4f} (Oracle, eps2=0, 1e6 slots)")


def test_c5_matching_optimality(verdict):
    rng = random.Random(5)
    n, bad = 2_000, 0
    for _ in range(n):
        L, R = rng.randint(0, 8), rng.randint(1, 6)
        d = rng.random()
        g = WeightedBipartiteGraph([rng.randint(1, 50) for _ in range(L)], R,
                                   [[rng.random() < d for _ in range(R)] for _ in range(L)])
        best = 0
        # exhaustive search: every assignment of each left vertex to a free neighbour or nothing
        stack = [(0, 0, 0)]
        while stack:
            i, used, w = stack.pop()
            if i == L:
                best = max(best, w)
                continue
            stack.append((i + 1, used, w))
            for j in range(R):
                if g.adj[i][j] and not used >> j & 1:
                    stack.append((i + 1, used | 1 << j, w + g.weights[i]))
        bad += matching_weight(g, max_weight_matching(g)) != best
    verdict("5", bad == 0, f"{n - bad}/{n} random graphs (<=8 left, <=6 right) match the exhaustive optimum")


def test_c6_protocol_invariants(verdict):
    cfg = DEFAULTS.replace(horizon_slots=100_000, warmup_slots=0, erasure_p2=0.3)
    maxbuf = {}
    for kind in SchedulerKind:
        res = simulate(cfg, kind, check=True)  # raises on any violated invariant
        maxbuf[kind.value] = res.counters["max_buffer"]
        if kind in (SchedulerKind.MAM, SchedulerKind.IMAS):
            assert res.counters["erased_tx"] == res.counters["ap_collisions"] == 0
        if kind is SchedulerKind.ABDR:
            assert res.counters["ap_collisions"] == 0
    ok = maxbuf["b-abdr"] <= cfg.buffer_size and maxbuf["b-imas"] <= cfg.buffer_size
    verdict("6", ok, f"1e5 checked slots per scheduler ({len(maxbuf)} schedulers), max buffer occupancy "
                     f"{maxbuf['b-abdr']} (B={cfg.buffer_size})")


def test_c7_per_slot_dominance(verdict):
    stats = {"slots": 0, "violations": 0, "strict": 0}

    def obs(v):
        m = schedule_mam(v.captures, v.h, v.ages, cfg.n_channels)
        i = schedule_imas(v.captures, v.h, v.ages, cfg.n_channels)
        sm = sum(v.ages[t.packet.source_ed] for t in m.transmissions)
        si = sum(v.ages[t.packet.source_ed] for t in i.transmissions)
        stats["slots"] += 1
        stats["violations"] += sm < si
        stats["strict"] += sm > si

    cfg = DEFAULTS.replace(horizon_slots=100_000, warmup_slots=0, erasure_p2=0.3)
    simulate(cfg, "mam", observer=obs)
    verdict("7", stats["violations"] == 0 and stats["slots"] == 100_000,
            f"{stats['slots']} slots, MAM < IMAS in {stats['violations']}, MAM > IMAS in {stats['strict']}")


def test_c8a_f4_relays(verdict):
    spec = figure_preset("f4", horizon_slots=30_000, warmup_slots=1_000, replications=4)
    pts = by_point(run(spec))
    notes, ok = [], True
    for kind in spec.schedulers:
        for k0, k1 in zip(spec.values, spec.values[1:]):
            m, se = paired(pts[(k1, kind.value)], pts[(k0, kind.value)])
            if not m + Z * se < 0:
                ok = False
                notes.append(f"{kind.value} K{k0}->{k1} {m:+.3f}+/-{Z * se:.3f}")
    gaps = []
    for k in spec.values:
        m, se = paired(pts[(k, "mam")], pts[(k, "imas")])
        gaps.append(-m)
        if not -m + Z * se < 1:
            ok = False
            notes.append(f"IMAS-MAM at K={k}: {-m:.3f}+/-{Z * se:.3f}")
    verdict("8a", ok, f"AAoI decreasing in K for all schedulers; IMAS-MAM gaps "
                      f"{', '.join(f'{g:.3f}' for g in gaps)}" + (f"; violations: {notes}" if notes else ""))


def test_c8b_f8_buffered_gap(verdict):
    spec = figure_preset("f8", values=(0.5,), schedulers=("b-abdr",), horizon_slots=100_000, warmup_slots=1_000,
                         replications=5)
    (row,) = run(spec).summary.records()
    ua = row["aaoi_gap"] + Z * row["aaoi_se"]
    up = row["paoi_gap"] + Z * row["paoi_se"]
    verdict("8b", ua <= 1 and up <= 2,
            f"eps2=0.5 B-ABDR AAoI gap {row['aaoi_gap']:.3f} (95% upper {ua:.3f}, limit 1), "
            f"PAoI gap {row['paoi_gap']:.3f} (95% upper {up:.3f}, limit 2)")


def test_c8c_f9_large_networks(verdict):
    spec = figure_preset("f9", schedulers=("imas", "abdr", "b-abdr"), horizon_slots=15_000, warmup_slots=1_000,
                         replications=4)
    res = run(spec)
    pts = by_point(res)
    bounds = {r["value"]: r["bound_aaoi"] for r in res.summary.records()}
    ok, notes = True, []
    for n in spec.values:
        b = bounds[n]
        gaps = {k: float(np.mean(pts[(n, k)])) - b for k in ("imas", "abdr", "b-abdr")}
        for other in ("imas", "abdr"):
            m, se = paired(pts[(n, "b-abdr")], pts[(n, other)])
            if not m + Z * se < 0:
                ok = False
        notes.append(f"N={n}: " + "/".join(f"{g:.2f}" for g in gaps.values()))
    verdict("8c", ok, "B-ABDR closest to the bound at every N; gaps IMAS/ABDR/B-ABDR " + "; ".join(notes))


def test_c8d_f10_timer_resolution(verdict):
    spec = figure_preset("f10", horizon_slots=20_000, warmup_slots=1_000, replications=5)
    pts = by_point(run(spec))
    ok, notes = True, []
    finite = [v for v in spec.values if v is not None]
    for kind in ("abdr", "b-abdr"):
        seq = [pts[(v, kind)] for v in finite]
        for (r0, a0), (r1, a1) in zip(zip(finite, seq), zip(finite[1:], seq[1:])):
            m, se = paired(a1, a0)
            if m - Z * se > 0:
                ok = False
                notes.append(f"{kind} R{r0}->{r1} rises {m:+.3f}")
        m, se = paired(seq[-1], pts[("continuous", kind)])
        if abs(m) > Z * max(se, 1e-12) and abs(m) > 1e-9:
            ok = False
            notes.append(f"{kind} R={finite[-1]} differs from continuous by {m:+.3f}+/-{Z * se:.3f}")
        notes.append(f"{kind} R=1 {np.mean(seq[0]):.3f} -> R={finite[-1]} {np.mean(seq[-1]):.3f}, "
                     f"continuous {np.mean(pts[('continuous', kind)]):.3f}")
    verdict("8d", ok, "; ".join(notes))


def test_c9_signaling(verdict):
    K, Tp, Ti, Tk, T, B = 5, 5, 5, 3, 218, 1
    budget = SymbolBudget(t_total=T, t_pilot=Tp, t_id=Ti, t_relay_id=Tk, t_rts=45, buffer_size=B)
    ids = B + 1  # reported IDs per relay in the buffered exchange: B buffered plus the fresh capture
    rows = {
        "imas": (K * Tp, K * Ti, Tk, 0, 0, T - K * Tp - K * Ti - 2 * Tk, Ti),
        "b-imas": (K * Tp, K * ids * Ti, Tk + Ti, 0, 0, T - K * Tp - K * ids * Ti - 2 * Tk - Ti, Ti),
        "abdr": (Tp, 0, 0, 45, Tk, T - Tp - 45 - 2 * Tk, Ti),
    }
    rows["mam"], rows["b-abdr"] = rows["imas"], rows["abdr"]
    ok = True
    for kind, want in rows.items():
        r = overhead_symbols(kind, budget, K)
        ok &= (r.pilot, r.packet_id, r.grant, r.rts, r.cts, r.payload, r.acknowledge) == want
    m, b = max_rts_budget(budget, K), max_rts_budget(budget, K, B, buffered=True)
    ok &= (m, b) == (45, 75)
    verdict("9", ok, f"table rows match for {sorted(rows)}; max T_r {m} (memoryless) and {b} (buffered, B=1)")


def test_c10_determinism(tmp_path, verdict):
    differing = []
    for name in PRESETS:
        kw = dict(horizon_slots=1_200, warmup_slots=100, replications=2)
        files = []
        for tag in ("a", "b"):
            write_result(run(figure_preset(name, **kw)), tmp_path / tag / f"{name}.csv")
            files.append(sorted((tmp_path / tag).glob(f"{name}.*csv")))
        for fa, fb in zip(*files):
            if fa.read_bytes() != fb.read_bytes():
                differing.append(fa.name)
    verdict("10", not differing, f"{len(PRESETS)} presets rerun with the same seed; differing files: {differing}")
