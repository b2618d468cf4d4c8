"""Command line entry point: ``rankdesign {solve,simulate,evaluate}``.

Exit codes: 0 success, 1 validation error, 2 numerical error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from ..errors import NumericalError, ValidationError
from ..metrics import evaluate
from ..solver import solve
from .config import SETTINGS, build_config, read_config_file
from .experiment import run_experiment
from .io import emit_results, load_features, load_vector, write_design

log = logging.getLogger("rankdesign")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

SOLVE_KEYS = ("features", "K", "normalize", "list_column", "R", "T_od", "gamma", "alpha_tol",
              "lmo_mode", "solver_seed", "inverse_refresh_period", "refresh_gamma", "stop_gap")
EVALUATE_KEYS = ("features", "normalize", "list_column", "theta_star", "ndcg_k", "gain", "temperature")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_settings(parser, keys):
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    for key in keys:
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        parser.add_argument(*flags, dest=key, default=None, metavar=key.upper())
    parser.add_argument("--config", help="key/value config file with an [experiment] section")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rankdesign", description=__doc__, allow_abbrev=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="compute a D-optimal design over K-subsets", allow_abbrev=False)
    _add_settings(p, SOLVE_KEYS)
    p.add_argument("--output", default="design.csv", help="design CSV (subset_index,item_ids,weight)")

    p = sub.add_parser("simulate", help="run the elicit/fit/evaluate experiment", allow_abbrev=False)
    _add_settings(p, list(SETTINGS))
    p.add_argument("--output", default="results.csv")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--sequential", action="store_true", help="single process, bit-reproducible")

    p = sub.add_parser("evaluate", help="score a fitted parameter vector", allow_abbrev=False)
    _add_settings(p, EVALUATE_KEYS)
    p.add_argument("--theta_hat", "--theta-hat", dest="theta_hat", required=True)
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    return parser


def _settings(args, keys) -> dict:
    values = read_config_file(args.config) if args.config else {}
    values = {k: v for k, v in values.items() if k in keys}
    values.update({k: getattr(args, k) for k in keys if getattr(args, k) is not None})
    return values


def cmd_solve(args) -> int:
    cfg = build_config(_settings(args, SOLVE_KEYS))
    if cfg.features_path is None:
        raise ValidationError("--features is required")
    features = load_features(cfg.features_path, cfg.normalize, cfg.list_column)
    K = cfg.K[0]
    if K > min(features.list_sizes):
        raise ValidationError(f"K={K} exceeds the smallest list size {min(features.list_sizes)}")
    t0 = time.monotonic()
    pi, trace = solve(features, features.collection(K), config=cfg.solver)
    seconds = time.monotonic() - t0
    write_design(args.output, pi, features)
    print(json.dumps({
        "objective": float(trace.objectives[-1]),
        "iterations": len(trace),
        "support": pi.nnz,
        "solve_seconds": seconds,
        "design": str(args.output),
    }))
    return EXIT_OK


def cmd_simulate(args) -> int:
    values = _settings(args, list(SETTINGS))
    if args.sequential:
        values["workers"] = 1
    cfg = build_config(values)
    table = run_experiment(cfg)
    emit_results(table, args.format, args.output)
    for a in table.aggregate():
        log.info("%s K=%d T=%d loss=%.4f+-%.4f ndcg=%.4f", a.policy, a.K, a.T, a.mean_loss, a.se_loss, a.mean_ndcg)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = build_config(_settings(args, EVALUATE_KEYS))
    if cfg.features_path is None or cfg.theta_star_path is None:
        raise ValidationError("--features and --theta_star are required")
    features = load_features(cfg.features_path, cfg.normalize, cfg.list_column)
    theta_hat = load_vector(args.theta_hat)
    theta_star = load_vector(cfg.theta_star_path)
    for name, v in (("theta_hat", theta_hat), ("theta_star", theta_star)):
        if v.shape != (features.d,):
            raise ValidationError(f"{name} has length {len(v)}, features have d={features.d}")
    report = evaluate(theta_hat, features, features.X @ theta_star, cfg.ndcg_k, cfg.gain, cfg.temperature)
    text = json.dumps(report.as_dict(), indent=1)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
