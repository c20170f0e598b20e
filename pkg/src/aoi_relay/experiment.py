"""Sweeps, replications, figure presets and CSV output."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analytics
from .metrics import MetricsAccumulator
from .model import ConfigError, NetworkConfig
from .rng import replication_seed
from .schedkind import SchedulerKind
from .signaling import SymbolBudget
from .sim import simulate

log = logging.getLogger(__name__)

OUTDIR_ENV = "AOI_RELAY_OUTDIR"

# sweep axis -> NetworkConfig field
AXES = {
    "none": None,
    "K": "n_relays",
    "F": "n_channels",
    "p": "activation_prob",
    "eps1": "erasure_p1",
    "eps2": "erasure_p2",
    "N": "n_eds",
    "R": "rts_resolution",
    "B": "buffer_size",
}

QUANTILES = (0.5, 0.9, 0.99)

COLUMNS = [
    "axis", "value", "scheduler", "replication", "seed",
    "n_eds", "activation_prob", "n_channels", "n_relays", "erasure_p1", "erasure_p2", "buffer_size",
    "rts_resolution", "horizon", "warmup",
    "aaoi", "aaoi_se", "paoi", "paoi_se", "aoi_p50", "aoi_p90", "aoi_p99", "ks_distance",
    "delivered", "ap_collisions", "erased_tx", "rts_collisions", "mam_fallback_slots",
    "overhead_symbols", "overhead_per_slot",
    "bound_q", "bound_aaoi", "bound_paoi", "aaoi_gap", "paoi_gap",
]
SUMMARY_COLUMNS = [
    "axis", "value", "scheduler", "replications", "activation_prob",
    "aaoi", "aaoi_se", "paoi", "paoi_se", "bound_aaoi", "bound_paoi", "aaoi_gap", "paoi_gap",
]


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def column(self, name: str) -> list:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


@dataclass(frozen=True)
class ExperimentSpec:
    base: NetworkConfig = field(default_factory=NetworkConfig)
    schedulers: tuple[SchedulerKind, ...] = (SchedulerKind.ORACLE,)
    axis: str = "none"
    values: tuple = (None,)
    replications: int = 5
    output: str | None = None
    optimize_p: bool = False
    name: str = "run"
    budget: SymbolBudget | None = None
    ccdf_table: bool = False
    per_ed_table: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError("axis", f"unknown sweep axis {self.axis!r}; expected one of {', '.join(AXES)}")
        if self.replications < 1:
            raise ConfigError("replications", f"must be >= 1, got {self.replications}")
        if not self.schedulers:
            raise ConfigError("schedulers", "at least one scheduler is required")
        object.__setattr__(self, "schedulers", tuple(SchedulerKind.parse(s) for s in self.schedulers))
        if self.axis == "none":
            object.__setattr__(self, "values", (None,))
        elif not self.values:
            raise ConfigError("values", "sweep needs at least one value")
        for v in self.values:
            self.point_config(v)  # validates every point up front

    def point_config(self, value) -> NetworkConfig:
        cfg = self.base
        attr = AXES[self.axis]
        if attr is not None:
            if attr == "rts_resolution" and isinstance(value, str):
                value = None if value.lower() in ("continuous", "inf", "none") else int(value)
            try:
                cfg = cfg.replace(**{attr: value})
            except ConfigError as e:
                raise ConfigError(e.field, f"sweep value {value!r}: {e}") from None
        if self.optimize_p:
            eps = analytics.BoundInputs.from_config(cfg).erasure_p1
            p = analytics.optimize_activation(cfg.n_eds, cfg.n_channels, cfg.n_relays, eps)
            cfg = cfg.replace(activation_prob=p)
        return cfg

    def resolved(self) -> dict:
        """Plain-data view embedded in CSV headers for provenance."""
        d = dataclasses.asdict(self)
        d["schedulers"] = [s.value for s in self.schedulers]
        d["values"] = [_plain(v) for v in self.values]
        d["base"] = {k: _plain(v) for k, v in d["base"].items()}
        d.pop("output")  # keeps the bytes independent of where they are written
        return d


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    table: Table
    summary: Table
    aux: dict[str, Table] = field(default_factory=dict)


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _bound(cfg: NetworkConfig) -> analytics.BoundResult:
    return analytics.aoi_bound(analytics.BoundInputs.from_config(cfg))


def _task(args):
    cfg, kind, budget = args
    res = simulate(cfg, kind, budget=budget)
    return res.metrics, res.counters, res.wall_time


def run(spec: ExperimentSpec, jobs: int = 1) -> ExperimentResult:
    """Simulate every (sweep value, scheduler, replication).

    Replication ``r`` uses the same seed for every scheduler and sweep point
    (common random numbers).  Results do not depend on ``jobs``.
    """
    points = [(v, spec.point_config(v)) for v in spec.values]
    tasks, keys = [], []
    for v, cfg in points:
        for kind in spec.schedulers:
            for r in range(spec.replications):
                tasks.append((cfg.replace(seed=replication_seed(spec.base.seed, r)), kind, spec.budget))
                keys.append((v, cfg, kind, r))
    log.info("%s: %d simulations of %d slots", spec.name, len(tasks), spec.base.horizon_slots)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_task, tasks))
    else:
        outs = []
        for i, t in enumerate(tasks):
            outs.append(_task(t))
            log.info("[%d/%d] %s=%s %s rep %d done", i + 1, len(tasks), spec.axis, keys[i][0], keys[i][2], keys[i][3])

    cols = COLUMNS + (["wall_time"] if spec.timing else [])
    table = Table(cols)
    merged: dict[tuple, list] = {}
    for (v, cfg, kind, r), (acc, ctr, wall), (task_cfg, _, _) in zip(keys, outs, tasks):
        b = _bound(cfg)
        measured = cfg.horizon_slots - cfg.warmup_slots
        q = [acc.quantile(x) for x in QUANTILES]
        ks = acc.ks_distance(cfg.activation_prob, b.q) if math.isfinite(b.aaoi) else float("nan")
        row = [spec.axis, _cell(v), kind.value, r, task_cfg.seed,
               cfg.n_eds, cfg.activation_prob, cfg.n_channels, cfg.n_relays, _cell(cfg.erasure_p1),
               cfg.erasure_p2, cfg.buffer_size, _cell(cfg.rts_resolution), cfg.horizon_slots, cfg.warmup_slots,
               acc.aaoi, acc.aaoi_se, acc.paoi, acc.paoi_se, *q, ks,
               ctr["delivered"], ctr["ap_collisions"], ctr["erased_tx"], ctr["rts_collisions"],
               ctr["mam_fallback_slots"], ctr["overhead_symbols"], ctr["overhead_symbols"] / measured,
               b.q, b.aaoi, b.paoi, acc.aaoi - b.aaoi, acc.paoi - b.paoi]
        if spec.timing:
            row.append(wall)
        table.rows.append(row)
        merged.setdefault((v, kind), []).append((cfg, acc))

    summary = Table(SUMMARY_COLUMNS)
    for (v, kind), runs in merged.items():
        cfg = runs[0][0]
        accs = [a for _, a in runs]
        total = accs[0]
        for a in accs[1:]:
            total = total.merge(a)
        b = _bound(cfg)
        if len(accs) > 1:
            a_se = float(np.std([a.aaoi for a in accs], ddof=1) / math.sqrt(len(accs)))
            p_se = float(np.std([a.paoi for a in accs], ddof=1) / math.sqrt(len(accs)))
        else:
            a_se, p_se = total.aaoi_se, total.paoi_se
        summary.rows.append([spec.axis, _cell(v), kind.value, len(accs), cfg.activation_prob,
                             total.aaoi, a_se, total.paoi, p_se, b.aaoi, b.paoi,
                             total.aaoi - b.aaoi, total.paoi - b.paoi])

    aux = {}
    if spec.ccdf_table:
        aux["ccdf"] = _ccdf_table(spec, merged)
    if spec.per_ed_table:
        aux["per_ed"], aux["regression"] = _per_ed_tables(spec, keys, tasks, outs)
    return ExperimentResult(spec, table, summary, aux)


def _cell(v):
    if v is None:
        return "continuous"
    if isinstance(v, tuple):
        return "hetero"
    return v


def _ccdf_table(spec: ExperimentSpec, merged) -> Table:
    """Empirical vs. analytic CCDF of the network-average AoI, per point and scheduler."""
    t = Table(["axis", "value", "scheduler", "delta", "ccdf", "ccdf_analytic"])
    for (v, kind), runs in merged.items():
        cfg = runs[0][0]
        total = runs[0][1]
        for _, a in runs[1:]:
            total = total.merge(a)
        keys, _ = total.sums_and_pmf()
        N = cfg.n_eds
        grid = np.arange(N, int(keys[-1]) + 1) / N
        emp = total.ccdf(grid)
        b = _bound(cfg)
        ana = analytics.network_aoi_distribution(N, cfg.activation_prob, b.q).ccdf(grid)
        for d, e, a in zip(grid, emp, ana):
            t.rows.append([spec.axis, _cell(v), kind.value, float(d), float(e), float(a)])
    return t


def _per_ed_tables(spec, keys, tasks, outs) -> tuple[Table, Table]:
    """Per-ED AAoI/PAoI against each ED's phase-1 erasure rate, plus a
    least-squares line of AAoI on that rate for every scheduler."""
    per_ed = Table(["value", "scheduler", "replication", "ed", "erasure_p1", "aaoi", "paoi"])
    pts: dict[tuple, tuple[list, list]] = {}
    for (v, _, kind, r), (acc, _, _), (task_cfg, _, _) in zip(keys, outs, tasks):
        eps = task_cfg.eps1_vector()
        for i, (e, a, p) in enumerate(zip(eps, acc.aaoi_per_ed(), acc.paoi_per_ed())):
            per_ed.rows.append([_cell(v), kind.value, r, i, float(e), float(a), float(p)])
            xs, ys = pts.setdefault((v, kind), ([], []))
            xs.append(float(e))
            ys.append(float(a))
    reg = Table(["value", "scheduler", "slope", "intercept", "points"])
    for (v, kind), (xs, ys) in pts.items():
        if len(set(xs)) > 1:
            slope, icpt = np.polyfit(xs, ys, 1)
        else:
            slope, icpt = float("nan"), float(np.mean(ys))
        reg.rows.append([_cell(v), kind.value, float(slope), float(icpt), len(xs)])
    return per_ed, reg


# -- CSV ----------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.9g" % v
    return str(v)


def emit_csv(table: Table, path: str | os.PathLike, comments: Sequence[str] = ()) -> Path:
    """Write ``table`` as CSV: optional ``#`` comment lines, a header row, one line per row."""
    buf = io.StringIO()
    for c in comments:
        for line in str(c).splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(x) for x in r])
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(buf.getvalue())
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    return path


def read_csv(path: str | os.PathLike) -> Table:
    """Parse a file written by :func:`emit_csv`; numeric cells come back as numbers."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        return Table([])

    def conv(s: str):
        if s == "":
            return None
        for f in (int, float):
            try:
                return f(s)
            except ValueError:
                pass
        return s

    return Table(rows[0], [[conv(x) for x in r] for r in rows[1:]])


def provenance(spec: ExperimentSpec) -> list[str]:
    return [f"experiment: {spec.name}", f"seed: {spec.base.seed}",
            "config: " + json.dumps(spec.resolved(), sort_keys=True, default=str)]


def write_result(result: ExperimentResult, path: str | os.PathLike) -> list[Path]:
    """Main table at ``path``; summary and auxiliary tables next to it."""
    path = Path(path)
    head = provenance(result.spec)
    stem = path.with_suffix("")
    out = [emit_csv(result.table, path, head),
           emit_csv(result.summary, f"{stem}.summary.csv", head)]
    for name, t in result.aux.items():
        out.append(emit_csv(t, f"{stem}.{name}.csv", head))
    return out


def default_output(name: str) -> Path:
    return Path(os.environ.get(OUTDIR_ENV, ".")) / f"{name}.csv"


# -- figure presets -------------------------------------------------------------

_EXCHANGE = ("imas", "mam", "b-imas", "abdr", "b-abdr", "oracle")
_MAIN = ("imas", "abdr", "b-abdr", "oracle")

PRESETS: dict[str, dict] = {
    "f3": dict(axis="F", values=(1, 2, 3, 4, 5), schedulers=("aloha", "imas", "oracle")),
    "f4": dict(axis="K", values=(2, 3, 4, 5), schedulers=_EXCHANGE),
    "f5": dict(axis="p", values=tuple(round(0.04 + 0.01 * i, 2) for i in range(13)), schedulers=_MAIN),
    "f6": dict(axis="F", values=(1, 2, 3, 4, 5), schedulers=_MAIN, optimize_p=True),
    "f7": dict(axis="eps2", values=(0.1, 0.5), schedulers=_MAIN, ccdf_table=True),
    "f8": dict(axis="eps2", values=(0.1, 0.2, 0.3, 0.4, 0.5), schedulers=("imas", "abdr", "b-abdr", "b-imas", "oracle")),
    "f9": dict(axis="N", values=(30, 75, 150, 225, 300), schedulers=_MAIN, optimize_p=True),
    "f10": dict(axis="R", values=(1, 2, 4, 8, 16, 32, 64, 128, 256, 1024, 4096, 16384, None), schedulers=("abdr", "b-abdr")),
    "hetnet": dict(axis="none", schedulers=_MAIN, replications=100, per_ed_table=True,
                   base=dict(hetero_eps1=(0.05, 0.5), horizon_slots=100_000)),
}


def figure_preset(name: str, /, **overrides) -> ExperimentSpec:
    """Sweep reproducing one evaluation figure; ``overrides`` replace spec or base-config fields."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    kw = dict(PRESETS[name])
    base_kw = dict(kw.pop("base", {}))
    spec_fields = {f.name for f in dataclasses.fields(ExperimentSpec)}
    cfg_fields = {f.name for f in dataclasses.fields(NetworkConfig)}
    for k, v in overrides.items():
        if k in spec_fields and k != "base":
            kw[k] = v
        elif k in cfg_fields:
            base_kw[k] = v
        else:
            raise ConfigError(k, f"unknown override {k!r}")
    base = overrides.get("base", NetworkConfig())
    if base_kw:
        base = base.replace(**base_kw)
    kw.setdefault("name", name)
    return ExperimentSpec(base=base, **kw)
