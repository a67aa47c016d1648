"""Command line: ``cranbench capacity | budget | bench``.

Every subcommand accepts ``--config FILE``: a flat ``key = value`` text file
whose keys are the long flag names (``workers = 4``, ``snr-db = 2.5``,
``check-paper = true``). Flags given on the command line override the file.
Lines starting with ``#`` are comments.

Exit codes: 0 success, 1 usage/configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .bench import BenchConfig, ModeResult, modes_from, physical_cores, run_benchmark
from .codec import BACKEND
from .fronthaul import (
    ALL_SPLITS,
    DL_DEADLINE_US,
    LTE_BANDWIDTHS_MHZ,
    UL_DEADLINE_US,
    ConfigError,
    FunctionalSplit,
    LinkBudget,
    capacity_table,
    cell_profile,
    check_published_table,
    format_mbps,
    remaining_processing_budget,
)
from .metrics import Direction, Granularity, export_csv, export_summary_csv, gain
from .scheduler import PoolConfig, SchedulerError
from .workload import ChannelModel, TrafficProfile

OUTPUT_DIR_ENV = "CRANBENCH_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("cranbench")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _ratio(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or ratio: {text!r}") from None


def _bool_word(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key = value")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


def _config_argv(parser: argparse.ArgumentParser, values: dict[str, str]) -> list[str]:
    """Translate config-file entries into flags placed before the real ones."""
    by_flag = {}
    for action in parser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_flag[opt[2:]] = action
    argv = []
    for key, value in values.items():
        action = by_flag.get(key)
        if action is None or key == "config":
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            if _bool_word(value):
                argv.append("--" + key)
        else:
            argv += ["--" + key, value]
    return argv


# -- capacity -----------------------------------------------------------------


def _add_capacity(sub):
    p = sub.add_parser("capacity", help="fronthaul bit rate per functional split")
    p.add_argument("--bw", default="all", help="cell bandwidths in MHz, comma separated, or 'all'")
    p.add_argument("--split", "--splits", dest="splits", default="all", help="splits (fs1..fs7, comma separated) or 'all'")
    p.add_argument("--check-paper", action="store_true", help="compare against the published table")
    p.add_argument("--grid", choices=("published", "lte"), default="published",
                   help="RB grid: 'published' (12 RB at 3 MHz, as published) or 'lte' (15 RB)")
    p.add_argument("--m-bits", type=int, default=15)
    p.add_argument("--f-coding", type=_ratio, default=10 / 8, help="line coding factor, e.g. 10/8 or 66/64")
    p.add_argument("--f-control", type=_ratio, default=16 / 15)
    p.add_argument("--n-ant", type=int, default=2)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--o-m", type=int, default=6)
    p.add_argument("--code-rate", type=_ratio, default=11 / 12)
    p.add_argument("--csv", help="also write the table to this CSV file")
    p.set_defaults(func=cmd_capacity)


def _parse_list(text: str, all_values, parse):
    if text.strip().lower() == "all":
        return list(all_values)
    return [parse(t) for t in text.split(",") if t.strip()]


def cmd_capacity(args) -> int:
    bws = _parse_list(args.bw, LTE_BANDWIDTHS_MHZ, float)
    splits = _parse_list(args.splits, ALL_SPLITS, FunctionalSplit.parse)
    cfgs = [
        cell_profile(
            bw,
            grid=args.grid,
            m_bits=args.m_bits,
            f_coding=args.f_coding,
            f_control=args.f_control,
            n_ant=args.n_ant,
            rho=args.rho,
            o_m=args.o_m,
            code_rate_k=args.code_rate,
        )
        for bw in bws
    ]
    table = capacity_table(cfgs, splits)
    if len(cfgs) == 1 and len(splits) == 1:
        print(format_mbps(table[0][0]))
    else:
        header = ["split"] + [f"{c.bw_cell:g} MHz" for c in cfgs]
        rows = [[s.label] + [format_mbps(table[i][j]) for i in range(len(cfgs))] for j, s in enumerate(splits)]
        widths = [max(len(r[c]) for r in [header, *rows]) for c in range(len(header))]
        print("Required fronthaul capacity [Mbps]")
        for r in [header, *rows]:
            print("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["split"] + [c.bw_cell for c in cfgs])
            for j, s in enumerate(splits):
                w.writerow([s.label] + [table[i][j] for i in range(len(cfgs))])
    if args.check_paper:
        if args.grid != "published":
            print("note: --check-paper always uses the published grid and default parameters")
        checks = check_published_table(splits, bws)
        unexpected = 0
        print("\nComparison with published table (tolerance 0.1 Mbps)")
        for c in checks:
            if c.matches:
                status = "ok"
            elif c.known_discrepancy:
                status = "KNOWN DISCREPANCY (published value inconsistent with the rate formula)"
            else:
                status = "MISMATCH"
                unexpected += 1
            print(f"  {c.split.label:7s} {c.bw_cell:5g} MHz  computed {c.computed:8.2f}  "
                  f"published {c.published:8.1f}  delta {c.delta:+8.2f}  {status}")
        known = sum(1 for c in checks if not c.matches and c.known_discrepancy)
        print(f"{len(checks) - unexpected - known}/{len(checks)} cells match, "
              f"{known} known discrepancy, {unexpected} unexpected mismatch")
    return EXIT_OK


# -- budget -------------------------------------------------------------------


def _add_budget(sub):
    p = sub.add_parser("budget", help="fronthaul transmission time and remaining BBU budget")
    p.add_argument("--km", type=float, default=0.0, help="fibre distance in km")
    p.add_argument("--hops", type=int, default=0, help="switching hops")
    p.add_argument("--us-per-hop", type=float, default=50.0)
    p.add_argument("--us-per-km", type=float, default=7.0,
                   help="propagation latency; 7 us/km matches the published example, "
                        "2.1e8 m/s is ~4.7619 us/km")
    p.add_argument("--link", choices=("dl", "ul"), default="dl", help="deadline preset (1 ms DL, 2 ms UL)")
    p.add_argument("--deadline-us", type=float, help="explicit RAN deadline in us")
    p.set_defaults(func=cmd_budget)


def cmd_budget(args) -> int:
    deadline = args.deadline_us
    if deadline is None:
        deadline = DL_DEADLINE_US if args.link == "dl" else UL_DEADLINE_US
    lb = LinkBudget(args.km, args.hops, args.us_per_hop, args.us_per_km, deadline)
    pb = remaining_processing_budget(lb)
    print(f"transmission time : {pb.transmission_us:.1f} us "
          f"({args.km:g} km x {args.us_per_km:g} us/km + {args.hops} hops x {args.us_per_hop:g} us)")
    print(f"RAN deadline      : {pb.deadline_us:.1f} us")
    print(f"remaining budget  : {pb.remaining_us:.1f} us")
    print(f"verdict           : {'feasible' if pb.feasible else 'INFEASIBLE'}")
    return EXIT_OK


# -- bench --------------------------------------------------------------------


def _add_bench(sub):
    p = sub.add_parser("bench", help="parallel turbo coding benchmark")
    p.add_argument("--mode", "--modes", dest="modes", default="none,cb", help="comma list of none, tb, cb")
    p.add_argument("--workers", type=int, default=6)
    p.add_argument("--ues", type=int, default=3)
    p.add_argument("--tbs", default="24000", help="TB size in bits, or comma list drawn uniformly")
    p.add_argument("--subframes", type=int, default=100)
    p.add_argument("--snr-db", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iterations", type=int, default=8)
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--direction", default="decode,encode", help="decode, encode or both")
    p.add_argument("--pacing", choices=("lockstep", "batch", "tick"), default="lockstep")
    p.add_argument("--tick-ms", type=float, default=1.0, help="subframe interval for --pacing tick")
    p.add_argument("--pinning", action="store_true", help="pin workers to cores (best effort)")
    p.add_argument("--rt-priority", action="store_true", help="SCHED_FIFO workers (best effort)")
    p.add_argument("--idle", choices=("block", "spin"), default="block")
    p.add_argument("--out-dir", default=None, help=f"CSV output directory (default ${OUTPUT_DIR_ENV} or none)")
    p.add_argument("--stream", default=None, help="stream KPI CSV lines to this path or named pipe")
    p.set_defaults(func=cmd_bench)


def _ms(ns: float) -> str:
    return f"{ns / 1e6:8.3f}"


def _print_mode(res: ModeResult) -> None:
    s = res.summary
    print(f"\n== mode {res.mode.mode_name}: {len(res.records)} jobs in {res.wall_s:.2f} s ==")
    print(f"   {'direction':9s} {'kpi':16s} {'mean':>8s} {'p50':>8s} {'p95':>8s} {'p99':>8s} {'max':>8s}  [ms]")
    for (d, g), gs in sorted(s.groups.items(), key=lambda kv: kv[0][0].value):
        for label, st in (("pre-processing", gs.pre_processing), ("channel coding", gs.coding),
                          ("post-processing", gs.post_processing), ("job total", gs.total)):
            print(f"   {d.value:9s} {label:16s} {_ms(st.mean)} {_ms(st.p50)} {_ms(st.p95)} {_ms(st.p99)} {_ms(st.max)}")
        if d is Direction.DECODE:
            print(f"   {d.value:9s} {'mean iterations':16s} {gs.mean_iterations:8.2f}")
    for d, st in s.subframe_latency.items():
        print(f"   {d.value:9s} {'SUBFRAME':16s} {_ms(st.mean)} {_ms(st.p50)} {_ms(st.p95)} {_ms(st.p99)} {_ms(st.max)}")
    print(f"   loss rate {s.loss_rate:.4f} ({s.lost_tbs}/{s.total_tbs} TBs)   "
          f"jobs per worker {s.worker_jobs}   records dropped {res.dropped}")


def cmd_bench(args) -> int:
    modes = modes_from(args.modes)
    if not modes:
        raise UsageError("no modes given")
    directions = tuple(Direction(d.strip()) for d in args.direction.split(",") if d.strip())
    tbs = [int(t) for t in args.tbs.split(",") if t.strip()]
    profile = TrafficProfile(
        n_ues=args.ues,
        tbs_bits=tbs[0] if len(tbs) == 1 else tuple(tbs),
        n_subframes=args.subframes,
        tick_ms=args.tick_ms if args.pacing == "tick" else 0.0,
        seed=args.seed,
    )
    pool = PoolConfig(
        num_workers=args.workers,
        pinning=args.pinning,
        realtime_priority=args.rt_priority,
        max_iterations=args.max_iterations,
        early_stop=not args.no_early_stop,
        idle=args.idle,
    )
    cfg = BenchConfig(profile, ChannelModel(args.snr_db), pool, directions, args.pacing, stream_path=args.stream)
    cores = physical_cores()
    if cores < args.workers:
        print(f"warning: {args.workers} workers on a host with {cores} physical core(s); "
              "parallel gains will not show", file=sys.stderr)
    print(f"kernels={BACKEND} workers={args.workers} ues={args.ues} tbs={args.tbs} "
          f"subframes={args.subframes} snr={args.snr_db} dB seed={args.seed} pacing={args.pacing}")
    results = run_benchmark(cfg, modes)
    for res in results.values():
        _print_mode(res)
    base = results.get(Granularity.SUBFRAME)
    if base is not None:
        print()
        for m, res in results.items():
            if m is Granularity.SUBFRAME:
                continue
            for d in directions:
                if d in base.summary.subframe_latency and d in res.summary.subframe_latency:
                    g = gain(base.summary.subframe_latency[d].mean, res.summary.subframe_latency[d].mean)
                    print(f"gain of mode {m.mode_name} vs none ({d.value}, mean subframe latency): {100 * g:.1f}%")
    out_dir = args.out_dir or os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for m, res in results.items():
            meta = {
                "mode": m.mode_name, "kernels": BACKEND, "workers": args.workers, "ues": args.ues,
                "tbs": args.tbs, "subframes": args.subframes, "snr_db": args.snr_db, "seed": args.seed,
                "pacing": args.pacing, "max_iterations": args.max_iterations,
                "emitted": res.emitted, "received": res.received, "dropped": res.dropped,
                "started": time.strftime("%Y-%m-%dT%H:%M:%S"),
            }
            export_csv(res.records, out / f"records_{m.mode_name}.csv", meta)
            export_summary_csv(res.summary, out / f"summary_{m.mode_name}.csv", meta)
        print(f"\nCSV written to {out}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cranbench", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for add in (_add_capacity, _add_budget, _add_bench):
        add(sub)
    for p in sub.choices.values():
        p.add_argument("--config", help="key = value file; command-line flags override it")
    return parser


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        file_argv = _config_argv(subparser, read_config_file(args.config))
        i = argv.index(args.command)
        args = parser.parse_args(argv[: i + 1] + file_argv + argv[i + 1 :])
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchedulerError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
