"""Command-line entry point: ``python -m isi_scldpc <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness import ConfigError, JobConfig, ResultRecord, run_job
from .trellis import PRESETS, ChannelModel, build_trellis, output_alphabet

EXIT_CONFIG = 2
EXIT_MODULE = 1


def _common(p: argparse.ArgumentParser, *, eps=True, gamma=True, grid=True):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--channel", help="preset name (CH-I, CH-II, CH-III)")
    p.add_argument("--taps", help="comma-separated impulse response, overrides --channel")
    p.add_argument("--dv", type=int)
    p.add_argument("--dc", type=int)
    p.add_argument("-m", type=int, dest="m", help="coupling memory (0: uncoupled)")
    p.add_argument("-L", type=int, dest="L", help="chain length (default 200 when coupled)")
    p.add_argument("--ic", type=int, dest="Ic", help="code iterations per channel iteration")
    p.add_argument("--noise", choices=("erasure", "awgn"))
    if eps:
        p.add_argument("--eps", type=float, help="channel erasure probability")
    if gamma:
        p.add_argument("--gamma", type=float, help="Eb/N0 in dB (awgn)")
    if grid:
        p.add_argument("--grid", help="start:stop:step or a comma-separated list")
    p.add_argument("--law", choices=("product", "joint"))
    p.add_argument("--spreading", choices=("edge", "node"))
    p.add_argument("--no-prior", dest="with_prior", action="store_false", default=None,
                   help="exclude the code prior from GEXIT quantities")
    p.add_argument("--precision", type=float, help="threshold bracket width or curve step")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isi-scldpc", description="Threshold analysis of coupled LDPC codes "
                                 "on ISI channels with erasures or AWGN.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("channels", help="list channel presets")

    p = sub.add_parser("run", help="run the task named in a config file (empty: echo defaults)")
    _common(p)
    p.add_argument("--task")

    p = sub.add_parser("transfer", help="detector transfer function g(delta, eps)")
    _common(p, gamma=False)
    p.add_argument("--delta", type=float)

    p = sub.add_parser("de", help="one density-evolution run")
    _common(p, grid=False)

    p = sub.add_parser("threshold", help="BP threshold or MAP bound")
    _common(p, eps=False, gamma=False, grid=False)
    p.add_argument("--kind", choices=("bp", "map"), default="bp")

    p = sub.add_parser("gexit", help="BP GEXIT curve")
    _common(p, eps=False, gamma=False)

    p = sub.add_parser("sir", help="SIR threshold and optional SIR curve")
    _common(p, eps=False, gamma=False)

    p = sub.add_parser("entropy", help="entropy-form thresholds for one ensemble")
    _common(p, eps=False, gamma=False, grid=False)

    p = sub.add_parser("tables", help="reproduce the published threshold tables")
    p.add_argument("--cell", action="append", help="filter such as (4,8)/CH-I/eps3; repeatable")
    p.add_argument("--awgn", action="store_true", help="include AWGN cells (hours)")
    p.add_argument("--dry-run", action="store_true", help="list the jobs and stop")
    p.add_argument("--workers", type=int, help="worker processes (default from ISI_SCLDPC_WORKERS)")
    p.add_argument("--out", help="CSV path (default stdout)")
    return ap


_TASK_OF = {"transfer": "transfer", "de": "de", "gexit": "gexit", "sir": "sir", "entropy": "entropy-table"}
_FLAG_KEYS = ("channel", "dv", "dc", "m", "L", "Ic", "noise", "eps", "gamma", "grid", "law", "spreading",
              "with_prior", "precision", "seed", "out", "format", "delta", "task")


def config_from_args(args) -> JobConfig:
    cfg = JobConfig()
    if getattr(args, "config", None):
        try:
            cfg = JobConfig.from_text(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    values = {k: getattr(args, k, None) for k in _FLAG_KEYS}
    if getattr(args, "taps", None):
        values["channel"] = args.taps
    if args.command == "threshold":
        values["task"] = f"threshold-{args.kind}"
    elif args.command in _TASK_OF:
        values["task"] = _TASK_OF[args.command]
    return cfg.updated(values)


def emit(rec: ResultRecord, cfg: JobConfig) -> None:
    """JSON for scalars, CSV (one file per curve) for curves."""
    out = Path(cfg.out) if cfg.out else None
    if cfg.format == "csv":
        text = rec.curve_csv(next(iter(rec.curves))) if rec.curves else rec.scalars_csv()
        _write(out, text)
        for name in list(rec.curves)[1:]:
            if out:
                _write(out.with_name(f"{out.stem}_{name}.csv"), rec.curve_csv(name))
        return
    if out and rec.curves:
        for name in rec.curves:
            _write(out.with_name(f"{out.stem}_{name}.csv"), rec.curve_csv(name))
        rec.curves = {name: f"{out.stem}_{name}.csv" for name in rec.curves}
    _write(out, rec.to_json() + "\n")


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _channels() -> int:
    for name in PRESETS:
        ch = ChannelModel.preset(name)
        alph = output_alphabet(build_trellis(ch))
        taps = ", ".join(f"{t:g}" for t in ch.taps)
        print(f"{name:7s} memory={ch.memory} taps=[{taps}] levels={len(alph.levels)} H(Z)={alph.entropy:.4f}")
    return 0


def _tables(args) -> int:
    from .tables import all_cells, reproduce_tables, select, write_csv

    cells = select(all_cells(include_awgn=args.awgn), args.cell)
    if not cells:
        raise ConfigError(f"no table cell matches {args.cell}")
    if args.dry_run:
        for c in cells:
            print(f"{c.id}\tpublished={c.published}")
        return 0

    def progress(r):
        print(f"{r['cell']}: {r['computed']:.6g} (published {r['published']}) {r['status']}", file=sys.stderr)

    rows = reproduce_tables(cells, args.workers, progress)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "channels":
            return _channels()
        if args.command == "tables":
            return _tables(args)
        cfg = config_from_args(args)
        emit(run_job(cfg), cfg)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # module errors: diagnostic and nonzero status
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MODULE


if __name__ == "__main__":
    sys.exit(main())
