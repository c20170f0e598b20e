"""Command-line driver: ``aoi-relay {run,preset,bound,signaling}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import yaml

from . import analytics
from .experiment import PRESETS, ExperimentSpec, default_output, figure_preset, run, write_result
from .model import ConfigError, NetworkConfig
from .schedkind import SchedulerKind
from .signaling import SymbolBudget, max_rts_budget, overhead_symbols

log = logging.getLogger("aoi_relay")

_CFG_FIELDS = {f.name for f in dataclasses.fields(NetworkConfig)}


def _kv(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), yaml.safe_load(v)


def _listify(v):
    return tuple(v) if isinstance(v, list) else v


def load_spec(path: str | Path) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from a YAML file.

    Top-level keys are spec fields (``schedulers``, ``axis``, ``values``,
    ``replications``, ``output``, ``optimize_p``, ``name``, ...); network
    parameters go under ``base``.  ``preset: <name>`` starts from a figure
    preset instead of the defaults.
    """
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as e:
        raise ConfigError("spec", f"cannot read {path}: {e.strerror or e}") from None
    except yaml.YAMLError as e:
        raise ConfigError("spec", f"{path} is not valid YAML: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("spec", f"{path} must hold a mapping")
    doc = dict(doc)
    base = doc.pop("base", {}) or {}
    unknown = set(base) - _CFG_FIELDS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown network parameter")
    base = {k: _listify(v) for k, v in base.items()}
    if "budget" in doc and doc["budget"] is not None:
        doc["budget"] = SymbolBudget(**doc["budget"])
    for k in ("values", "schedulers"):
        if k in doc:
            doc[k] = _listify(doc[k])
    preset = doc.pop("preset", None)
    if preset is not None:
        return figure_preset(preset, **doc, **base)
    spec_fields = {f.name for f in dataclasses.fields(ExperimentSpec)}
    unknown = set(doc) - spec_fields
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown experiment key")
    return ExperimentSpec(base=NetworkConfig(**base), **doc)


def apply_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    cfg_changes = dict(args.set or [])
    for flag, name in (("horizon", "horizon_slots"), ("warmup", "warmup_slots"), ("seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            cfg_changes[name] = v
    for k in cfg_changes:
        if k not in _CFG_FIELDS:
            raise ConfigError(k, "unknown network parameter")
    base = spec.base
    if "horizon_slots" in cfg_changes and "warmup_slots" not in cfg_changes:
        # keep the warm-up admissible when only the horizon shrinks
        cfg_changes["warmup_slots"] = min(base.warmup_slots, max(cfg_changes["horizon_slots"] - 1, 0))
    base = base.replace(**{k: _listify(v) for k, v in cfg_changes.items()})
    changes = {"base": base}
    if args.replications is not None:
        changes["replications"] = args.replications
    if args.output is not None:
        changes["output"] = args.output
    if args.schedulers:
        changes["schedulers"] = tuple(s for s in args.schedulers.split(",") if s)
    if args.values:
        changes["values"] = tuple(yaml.safe_load(v) for v in args.values.split(","))
    if args.timing:
        changes["timing"] = True
    return dataclasses.replace(spec, **changes)


def _execute(spec: ExperimentSpec, jobs: int) -> int:
    out = Path(spec.output) if spec.output else default_output(spec.name)
    result = run(spec, jobs=jobs)
    for p in write_result(result, out):
        log.info("wrote %s", p)
    return 0


def cmd_run(args) -> int:
    return _execute(apply_overrides(load_spec(args.spec), args), args.jobs)


def cmd_preset(args) -> int:
    return _execute(apply_overrides(figure_preset(args.name), args), args.jobs)


def cmd_bound(args) -> int:
    inp = analytics.BoundInputs(args.n_eds, args.p, args.channels, args.relays, args.eps1)
    NetworkConfig(n_eds=args.n_eds, activation_prob=args.p, n_channels=args.channels,
                  n_relays=args.relays, erasure_p1=args.eps1)  # validation only
    b = analytics.aoi_bound(inp)
    p_star = analytics.optimize_activation(args.n_eds, args.channels, args.relays, args.eps1)
    b_star = analytics.aoi_bound(dataclasses.replace(inp, activation_prob=p_star))
    print(f"N={args.n_eds} p={args.p:g} F={args.channels} K={args.relays} eps1={args.eps1:g}")
    print(f"Q       {b.q:.9g}")
    print(f"AAoI    {b.aaoi:.9g}")
    print(f"PAoI    {b.paoi:.9g}")
    print(f"p*      {p_star:.9g}")
    print(f"AAoI*   {b_star.aaoi:.9g}")
    return 0


def cmd_signaling(args) -> int:
    budget = SymbolBudget(args.t_total, args.t_pilot, args.t_id, args.t_relay_id, args.t_rts, args.buffer)
    budget.check(args.n_eds, args.relays)
    cols = ("pilot", "packet_id", "grant", "rts", "cts", "in_slot", "payload", "acknowledge")
    print(f"{'scheme':8s} " + " ".join(f"{c:>10s}" for c in cols))
    for kind in SchedulerKind:
        row = overhead_symbols(kind, budget, args.relays)
        print(f"{kind.value:8s} " + " ".join(f"{getattr(row, c):10d}" for c in cols))
    print(f"max T_r vs IMAS/MAM: {max_rts_budget(budget, args.relays)}")
    print(f"max T_r vs B-IMAS (B={args.buffer}): {max_rts_budget(budget, args.relays, args.buffer, buffered=True)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aoi-relay", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def sim_opts(p):
        p.add_argument("--horizon", type=int, help="slots per simulation")
        p.add_argument("--warmup", type=int, help="discarded initial slots")
        p.add_argument("--seed", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--schedulers", help="comma-separated scheduler kinds")
        p.add_argument("--values", help="comma-separated sweep values")
        p.add_argument("-o", "--output", help="CSV path (default: $AOI_RELAY_OUTDIR/<name>.csv)")
        p.add_argument("-j", "--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--set", action="append", type=_kv, metavar="KEY=VALUE", help="override a network parameter")
        p.add_argument("--timing", action="store_true", help="add a wall_time column (not reproducible)")

    p = sub.add_parser("run", help="run an experiment from a YAML spec file")
    p.add_argument("spec")
    sim_opts(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a figure preset")
    p.add_argument("name", choices=sorted(PRESETS))
    sim_opts(p)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("bound", help="analytic success probability, AAoI/PAoI bound and optimal p")
    p.add_argument("-N", "--n-eds", type=int, default=30)
    p.add_argument("-p", type=float, default=0.1)
    p.add_argument("-F", "--channels", type=int, default=2)
    p.add_argument("-K", "--relays", type=int, default=5)
    p.add_argument("--eps1", type=float, default=0.1)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("signaling", help="information-exchange symbol counts per scheme")
    p.add_argument("-N", "--n-eds", type=int, default=30)
    p.add_argument("-K", "--relays", type=int, default=5)
    p.add_argument("-B", "--buffer", type=int, default=1)
    p.add_argument("--t-total", type=int, default=218)
    p.add_argument("--t-pilot", type=int, default=5)
    p.add_argument("--t-id", type=int, default=5)
    p.add_argument("--t-relay-id", type=int, default=3)
    p.add_argument("--t-rts", type=int, default=45)
    p.set_defaults(func=cmd_signaling)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * args.verbose if args.verbose else logging.INFO
    logging.basicConfig(level=max(level, logging.DEBUG), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"aoi-relay: invalid configuration: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as e:
        print(f"aoi-relay: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
