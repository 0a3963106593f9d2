"""Command-line entry point: ``simulate``, ``estimate`` and ``rates``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
The worker count for ``simulate`` defaults to ``$SUBINT_WORKERS`` or the
number of available CPUs.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .estimator import estimate
from .exceptions import DomainError, InvalidArgumentError, ReplicationError, SubintError
from .functionals import LinearOnChart, UpperContour
from .montecarlo import REPORT_FIELDS, STUDY_N, StudyReport, empirical_rate, get_dgp, run_study
from .quadrature import BAND_EPSILON, BAND_POINTS, CHART_POINTS, unit_circle
from .spline_sieve import Sample, TensorSplineBasis, fit_sieve

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    pass


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("sample sizes must be positive integers")
    return vals


def _load_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def _study_config(args) -> dict:
    cfg = _load_json(args.config) if args.config else {}
    for key in ("dgp", "n", "reps", "seed", "k", "epsilon", "nodes", "band_nodes", "out", "workers"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if "dgp" not in cfg:
        raise ConfigError("a data-generating process is required (--dgp circle|disk)")
    n = cfg.get("n", list(STUDY_N))
    cfg["n"] = _int_list(",".join(map(str, n)) if isinstance(n, list) else n)
    cfg.setdefault("reps", 1000)
    cfg.setdefault("seed", 0)
    if not isinstance(cfg["reps"], int) or cfg["reps"] < 2:
        raise ConfigError("reps must be an integer >= 2")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    return cfg


def cmd_simulate(args) -> int:
    try:
        cfg = _study_config(args)
        dgp = get_dgp(
            cfg["dgp"], k=cfg.get("k"), epsilon=cfg.get("epsilon"),
            nodes=cfg.get("nodes"), band_nodes=cfg.get("band_nodes"),
        )
        dgp.basis()
    except (ConfigError, InvalidArgumentError, argparse.ArgumentTypeError) as exc:
        args.parser.print_usage(sys.stderr)
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.get("out") or f"{dgp.name}_study.csv")
    try:
        report = run_study(dgp, cfg["n"], cfg["reps"], cfg["seed"], workers=cfg.get("workers"))
    except ReplicationError as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    csv_path, meta_path = report.write(out)
    print(",".join(REPORT_FIELDS))
    for row in report.rows:
        print(",".join([str(row.n)] + [_fmt(getattr(row, k)) for k in REPORT_FIELDS[1:]]))
    print(f"wrote {csv_path} and {meta_path}", file=sys.stderr)
    return EXIT_OK


def _functional_from_config(cfg: dict, lower, upper, epsilon, nodes):
    name = cfg.get("functional", "circle")
    if name in ("circle", "unit_circle"):
        return LinearOnChart(unit_circle(), num_points=nodes or CHART_POINTS)
    if name in ("upper_contour", "disk"):
        return UpperContour(
            lower, upper, epsilon=epsilon or BAND_EPSILON,
            num_points=nodes or BAND_POINTS,
            band_points=cfg.get("band_nodes", BAND_POINTS),
        )
    raise ConfigError(f"unknown functional {name!r}; choose 'circle' or 'upper_contour'")


def cmd_estimate(args) -> int:
    try:
        cfg = _load_json(args.functional) if args.functional else {}
        domain = cfg.get("domain", {"lower": [-2.0, -2.0], "upper": [2.0, 2.0]})
        lower, upper = domain.get("lower"), domain.get("upper")
        if not isinstance(lower, list) or not isinstance(upper, list) or len(lower) != len(upper):
            raise ConfigError("domain must give equal-length 'lower' and 'upper' lists")
        k = args.k if args.k is not None else cfg.get("k", 36)
        level = args.level if args.level is not None else cfg.get("level", 0.95)
        if not 0 < level < 1:
            raise ConfigError("level must be in (0, 1)")
        epsilon = args.epsilon if args.epsilon is not None else cfg.get("epsilon")
        nodes = args.nodes if args.nodes is not None else cfg.get("nodes")
        spec = _functional_from_config(cfg, lower, upper, epsilon, nodes)
        basis = TensorSplineBasis.for_total_count(int(k), lower, upper, cfg.get("degree", 3))
        sample = Sample.read_csv(args.data, lower, upper)
    except DomainError as exc:
        print(f"estimate: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, InvalidArgumentError, OSError) as exc:
        print(f"estimate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if basis.total_count * math.log(basis.total_count) > sample.n:
        print(
            f"estimate: warning: K log K = {basis.total_count * math.log(basis.total_count):.0f}"
            f" exceeds n = {sample.n}",
            file=sys.stderr,
        )
    try:
        result = estimate(spec, fit_sieve(sample, basis), level)
    except SubintError as exc:
        print(f"estimate: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if result.diagnostics.get("band_empty"):
        print("estimate: warning: derivative band contains no nodes", file=sys.stderr)
    if not args.no_header:
        print(result.csv_header())
    print(result.csv_row())
    return EXIT_OK


def cmd_rates(args) -> int:
    try:
        report = StudyReport.read_csv(args.report)
        slope = empirical_rate(report)
    except (InvalidArgumentError, OSError, KeyError) as exc:
        print(f"rates: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"slope,{_fmt(slope)}")
    if None not in (args.s, args.d, args.m):
        ref = -args.s / (2 * args.s + args.d - args.m)
        print(f"reference,{_fmt(ref)}")
        print(f"regular_reference,{_fmt(-0.5)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subint", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--config", help="JSON study config; flags override its keys")
    sim.add_argument("--dgp", choices=["circle", "disk", "circle_known_manifold", "disk_upper_contour"])
    sim.add_argument("--n", type=_int_list, help="comma-separated sample sizes")
    sim.add_argument("--reps", type=int, help="replications per sample size (>= 2)")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--k", type=int, help="override the sieve size K")
    sim.add_argument("--epsilon", type=float, help="band half-width for the contour derivative")
    sim.add_argument("--nodes", type=int, help="nodes for the plug-in integral")
    sim.add_argument("--band-nodes", type=int, dest="band_nodes", help="nodes for the band integral")
    sim.add_argument("--workers", type=int)
    sim.add_argument("--out", help="report CSV path (a .json sidecar is written beside it)")
    sim.set_defaults(func=cmd_simulate, parser=sim)

    est = sub.add_parser("estimate", help="estimate a functional from a data CSV")
    est.add_argument("data", help="CSV with header x1,...,xd,y")
    est.add_argument("--functional", help="JSON functional config")
    est.add_argument("--k", type=int)
    est.add_argument("--level", type=float)
    est.add_argument("--epsilon", type=float)
    est.add_argument("--nodes", type=int)
    est.add_argument("--no-header", action="store_true")
    est.set_defaults(func=cmd_estimate, parser=est)

    rat = sub.add_parser("rates", help="fit the log-log RMSE slope of a study report")
    rat.add_argument("report")
    rat.add_argument("--s", type=float, help="smoothness, for the reference rate")
    rat.add_argument("--d", type=float, help="ambient dimension")
    rat.add_argument("--m", type=float, help="manifold dimension")
    rat.set_defaults(func=cmd_rates, parser=rat)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
