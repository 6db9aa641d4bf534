"""Command-line entry point: ``linfest run | plot | evt``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, CsvParseError, LinfError
from .evt import berman_ratio, sigma_pattern, support_dominance
from .experiments import EVT_CHECK, ExperimentConfig, csv_path, resolve_threads, run_experiment
from .plot import emit_plot
from .signal_model import PriorSpec

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linfest", description="l-infinity estimation experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment described by a JSON config")
    run.add_argument("--config", required=True, metavar="PATH")
    run.add_argument("--seed", type=int, metavar="U64", help="override the master seed")
    run.add_argument("--out", metavar="DIR", help="override the output directory")
    run.add_argument("--threads", type=int, default=None, metavar="COUNT",
                     help="worker threads (LINF_THREADS takes precedence)")

    plot = sub.add_parser("plot", help="plot mean l-infinity error against N from a trial CSV")
    plot.add_argument("--csv", required=True, metavar="PATH")
    plot.add_argument("--out", required=True, metavar="PATH")
    plot.add_argument("--title", default="")

    evt = sub.add_parser("evt", help="Berman ratio and Wiener support-dominance checks")
    evt.add_argument("--n", type=int, default=100000)
    evt.add_argument("--trials", type=int, default=50)
    evt.add_argument("--seed", type=int, default=0)
    evt.add_argument("--s", type=float, default=0.05, help="sparsity of the Gaussian prior")
    evt.add_argument("--mu-x", type=float, default=1.0)
    evt.add_argument("--mu-z", type=float, default=5e-4)
    return parser


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    changes = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = args.out
    if changes:
        cfg = cfg.replace(**changes)
    threads = resolve_threads(args.threads)
    records, sweep = run_experiment(cfg, threads=threads)
    print(f"wrote {csv_path(cfg)}")
    if cfg.experiment == EVT_CHECK:
        for row in records:
            print(f"{row[1]} n={row[2]} value={row[5]:.4f} sd={row[6]:.4f}")
    else:
        print(sweep.table(), end="")
    return EXIT_OK


def _cmd_plot(args) -> int:
    out = emit_plot(args.csv, args.out, title=args.title)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_evt(args) -> int:
    if args.n < 2 or args.trials < 1:
        raise ConfigError("evt needs --n >= 2 and --trials >= 1")
    try:
        prior = PriorSpec.sparse_gaussian(args.s, args.mu_x)
        c, s1, s2 = sigma_pattern(args.mu_x, args.mu_z)
    except LinfError as exc:
        raise ConfigError(str(exc)) from exc
    mean, sd = berman_ratio(args.n, args.trials, args.seed)
    print(f"berman n={args.n} trials={args.trials} mean={mean:.4f} sd={sd:.4f}")
    print(f"gain c={c:.6g} sigma1={s1:.6g} sigma2={s2:.6g}")
    dom = support_dominance(prior, args.mu_z, args.n, args.trials, args.seed)
    print(f"dominance fraction={dom.fraction:.4f} se={dom.standard_error:.4f} "
          f"skipped={dom.skipped}")
    print(f"normalized maxima support={dom.normalized_support:.4f} "
          f"off_support={dom.normalized_off_support:.4f}")
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "plot": _cmd_plot, "evt": _cmd_evt}


def main(argv=None) -> int:
    # argparse itself exits with 2 on bad flags, the same code as a config error
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CsvParseError, LinfError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
