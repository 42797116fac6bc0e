"""Command-line front end.

    fockops <kind> --config FILE|DIR [--out PATH] [--format json|csv]
                   [--n INT] [--tol FLOAT] [--timings]

Exit status: 0 success, 2 configuration error, 3 numerical non-convergence.
A directory passed to ``--config`` runs every ``*.yaml``/``*.yml``/``*.json``
file in it concurrently, capped by the FOCKOPS_MAX_WORKERS environment variable.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import KINDS, ConfigError, load_config
from .report import NumericalFailure, emit
from .runner import run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
WORKERS_ENV = "FOCKOPS_MAX_WORKERS"
CONFIG_SUFFIXES = (".yaml", ".yml", ".json")

log = logging.getLogger("fockops")


def write_atomic(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def max_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def run_one(kind: str, config_path: Path, out: Path | None, args) -> int:
    """Run a single config; returns its exit status."""
    overrides = {"N": args.n, "tol": args.tol}
    try:
        cfg = load_config(config_path, overrides)
        if cfg.kind != kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match command {kind!r}", "kind",
                              source=config_path)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    fmt = args.format or cfg.out_format
    target = out if out is not None else (Path(cfg.out_path) if cfg.out_path else None)
    status = EXIT_OK
    try:
        report = run(cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        log.error("%s: %s", config_path, exc)
        report, status = exc.report, EXIT_NUMERIC
    data = emit(report, fmt, timings=args.timings)
    if target is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        write_atomic(target, data)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fockops", description="Weighted composition operators on the Fock space."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, type=Path, help="config file, or a directory for batch mode")
        p.add_argument("--out", type=Path, help="output file (a directory in batch mode)")
        p.add_argument("--format", choices=("json", "csv"), help="output format (default: from config, else json)")
        p.add_argument("--n", type=int, help="override the truncation size N")
        p.add_argument("--tol", type=float, help="override the convergence tolerance")
        p.add_argument("--timings", action="store_true", help="include wall-clock timings (output is then not reproducible)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="fockops: %(levelname)s: %(message)s",
    )
    cfg_path: Path = args.config
    if not cfg_path.is_dir():
        return run_one(args.kind, cfg_path, args.out, args)

    files = sorted(p for p in cfg_path.iterdir() if p.suffix in CONFIG_SUFFIXES and p.is_file())
    if not files:
        log.error("%s: no config files", cfg_path)
        return EXIT_CONFIG
    if args.out is not None and args.out.exists() and not args.out.is_dir():
        log.error("--out must be a directory in batch mode")
        return EXIT_CONFIG
    try:
        workers = max_workers()
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    ext = "." + (args.format or "json")
    out_dir = args.out or cfg_path

    def job(p: Path) -> int:
        log.info("running %s", p)
        return run_one(args.kind, p, out_dir / (p.stem + ext), args)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(job, files))
    # configuration errors take precedence over numerical failures
    if EXIT_CONFIG in codes:
        return EXIT_CONFIG
    return EXIT_NUMERIC if EXIT_NUMERIC in codes else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
