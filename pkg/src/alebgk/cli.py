"""Command line entry point: ``alebgk run|bench|profile <config>``.

Exit codes: 0 success, 2 configuration error, 3 numerical abort,
4 file system error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import kernels
from .config import ConfigError, load_config
from .harness import bench, profile
from .output import snapshot_name, write_diagnostics, write_snapshot
from .parallel import KernelError
from .solver import run

log = logging.getLogger("alebgk")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _worker_list(text):
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated integer list: {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("worker counts must be positive")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alebgk", description="Meshfree ALE solver for the BGK equation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="run configuration file")
        sp.add_argument("--out-dir", default="out", help="output directory (default: out)")
        sp.add_argument("--steps", type=int, help="override the number of steps")
        sp.add_argument("--seed", type=int, default=None,
                        help="reserved; the method is deterministic and ignores it")
        return sp

    r = common(sub.add_parser("run", help="run a simulation and write snapshots"))
    r.add_argument("--snapshot-every", type=int, help="override the snapshot interval")
    r.add_argument("--workers", type=int, help="override the worker count")
    b = common(sub.add_parser("bench", help="speedup table over worker counts"))
    b.add_argument("--workers", type=_worker_list, default=[1], help="e.g. 1,2,4,8")
    b.add_argument("--resolutions", type=_worker_list, help="particles per axis, e.g. 25,50,100")
    b.add_argument("--phase", help="time one profile phase instead of whole steps")
    pr = common(sub.add_parser("profile", help="per-phase share of the step time"))
    pr.add_argument("--workers", type=int, help="override the worker count")
    return p


def _config(args):
    cfg = load_config(args.config)
    over = {}
    if args.steps is not None:
        over["n_steps"] = args.steps
    if getattr(args, "snapshot_every", None) is not None:
        over["snapshot_every"] = args.snapshot_every
    if isinstance(getattr(args, "workers", None), int):
        over["workers"] = args.workers
    if over:
        try:
            cfg = cfg.with_(**over)
        except ValueError as e:
            raise ConfigError(str(e), key=str(e).split(":", 1)[0]) from None
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    written = []

    def save(snap):
        written.append(write_snapshot(snap, out / snapshot_name(snap.step, cfg.snapshot_format),
                                      cfg.snapshot_format).name)

    result = run(cfg, on_snapshot=save)
    write_diagnostics(result.diagnostics, out / "diagnostics.csv")
    last = result.diagnostics[-1] if result.diagnostics else None
    summary = {
        "backend": kernels.BACKEND,
        "steps": len(result.diagnostics),
        "time": result.solver.time,
        "particles": result.solver.cloud.n,
        "mass": result.solver.total_mass(),
        "max_wall_flux": max((d.wall_flux for d in result.diagnostics), default=0.0),
        "min_stable_dt": min((d.stable_dt for d in result.diagnostics), default=None),
        "final_min_f": last.min_f if last else None,
        "snapshots": written,
        "profile_percent": result.timer.breakdown(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{summary['steps']} steps, {summary['particles']} particles, "
          f"{len(written)} snapshots in {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    table = bench(cfg, args.workers, args.resolutions, phase=args.phase)
    (out / "bench.txt").write_text(table.text())
    (out / "bench.csv").write_text(table.csv())
    print(table.text(), end="")
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    prof = profile(cfg)
    (out / "profile.txt").write_text(prof.text())
    (out / "profile.csv").write_text(prof.csv())
    print(prof.text(), end="")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "profile": cmd_profile}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except KernelError as e:
        if isinstance(e.__cause__, ArithmeticError):
            print(f"numerical abort: {e}", file=sys.stderr)
            return EXIT_NUMERIC
        raise
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
