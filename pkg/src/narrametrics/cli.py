"""Command-line interface.

One subcommand per pipeline stage plus ``run`` for the whole thing. Every
invocation takes ``--config`` pointing at a TOML file; common flags
(``--out``, ``--seed``, ``--threads``) and a few per-stage options override
config values. Exit codes: 0 success, 1 usage or configuration error,
2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional

from narrametrics import __version__
from narrametrics.config import load_config
from narrametrics.errors import ConfigError, DataError
from narrametrics.pipeline import StageError, run_pipeline

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_SUBCOMMAND_STAGES = {
    "run": None,  # all stages
    "ingest": ["ingest"],
    "stats": ["stats"],
    "topics": ["topics"],
    "sentiment": ["sentiment"],
    "escalate": ["escalate"],
    "correlate": ["correlate"],
    "entities": ["entities"],
    "report": ["report"],
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the documented contract is 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="narrametrics", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_STAGES:
        p = sub.add_parser(name, help=f"{'full pipeline' if name == 'run' else name + ' stage'}")
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="NMF random seed (overrides config)")
        p.add_argument("--threads", type=int, help="worker threads; never affects results")
        p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        if name in ("run", "topics"):
            p.add_argument("--k", type=int, help="number of topics")
            p.add_argument("--max-iter", type=int, help="NMF iteration cap")
        if name in ("run", "sentiment"):
            p.add_argument("--min-daily", type=int, help="minimum messages per day")
            p.add_argument("--rolling-window", type=int, help="rolling mean window in days")
        if name in ("run", "correlate"):
            p.add_argument("--max-lag", type=int, help="lag scan half-width in days")
        if name in ("run", "entities"):
            p.add_argument("--min-cooccur", type=int, help="minimum edge co-occurrence")
            p.add_argument("--backbone-k", type=int, help="top-k incident edges kept per node")
    return parser


def _apply_overrides(cfg, args: argparse.Namespace) -> None:
    if args.out is not None:
        cfg.output_dir = args.out
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg.nmf.seed = args.seed
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg.threads = args.threads
    for arg_name, section, key, minimum in (
        ("k", "nmf", "k", 1),
        ("max_iter", "nmf", "max_iter", 1),
        ("min_daily", "sentiment", "min_daily", 1),
        ("rolling_window", "sentiment", "rolling_window", 1),
        ("max_lag", "correlation", "max_lag", 0),
        ("min_cooccur", "entities", "min_cooccur", 1),
        ("backbone_k", "entities", "backbone_k", 1),
    ):
        value = getattr(args, arg_name, None)
        if value is not None:
            if value < minimum:
                raise ConfigError(f"--{arg_name.replace('_', '-')} must be >= {minimum}")
            setattr(getattr(cfg, section), key, value)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    log = logging.getLogger("narrametrics")
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        stages = _SUBCOMMAND_STAGES[args.command]
        ctx = run_pipeline(cfg, stages=stages)
        for stage in ctx.stages:
            log.info("stage %-10s %6.2fs  %d artifact(s)", stage["name"], stage["seconds"], len(stage["outputs"]))
        return EXIT_OK
    except ConfigError as exc:
        print(f"narrametrics: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        if isinstance(exc.cause, (DataError, OSError)):
            print(f"narrametrics: data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        log.exception("internal error")
        return EXIT_INTERNAL
    except DataError as exc:
        print(f"narrametrics: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
