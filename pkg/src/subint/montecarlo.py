"""Replication engine for the circle and disk simulation designs.

Every replication is a pure function of ``(dgp, n, seed)``. Replication ``b``
at sample size ``n`` of a study with master seed ``s`` uses the 64-bit seed
``split_seed(s, n, b)``: the first word generated by
``numpy.random.SeedSequence([s, n, b])``. Samples are drawn from a Philox
(counter-based) generator keyed by that seed: first the ``n x 2`` covariate
block, then ``n`` standard-normal errors.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from .estimator import EstimateResult, estimate
from .exceptions import InvalidArgumentError, ReplicationError
from .functionals import LinearOnChart, UpperContour
from .quadrature import BAND_EPSILON, BAND_POINTS, CHART_POINTS, unit_circle
from .spline_sieve import Sample, TensorSplineBasis, fit_sieve

__all__ = [
    "DgpSpec",
    "StudyRow",
    "StudyReport",
    "circle_h0",
    "disk_h0",
    "get_dgp",
    "split_seed",
    "draw_sample",
    "run_replication",
    "run_study",
    "empirical_rate",
    "default_workers",
    "WORKERS_ENV",
    "REPORT_FIELDS",
]

log = logging.getLogger(__name__)

WORKERS_ENV = "SUBINT_WORKERS"
REPORT_FIELDS = ("n", "rmse", "bias", "sd", "ci_l", "ci_u", "width", "coverage")
STUDY_N = (500, 1000, 2000, 4000, 8000)


def circle_h0(x):
    return x[:, 0] ** 2 + 2.0 * np.sin(x[:, 0]) * x[:, 1]


def disk_h0(x):
    r2 = x[:, 0] ** 2 + x[:, 1] ** 2
    return (1.0 - r2) * (4.0 + np.sin(x[:, 0]) * x[:, 1] + np.cos(x[:, 1]))


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process and the functional estimated from it.

    ``h0`` must be a module-level function so that specs can be shipped to
    worker processes.
    """

    name: str
    h0: Callable[[np.ndarray], np.ndarray]
    functional: str
    k: int
    theta0: float = math.pi
    lower: tuple = (-2.0, -2.0)
    upper: tuple = (2.0, 2.0)
    noise_sd: float = 1.0
    epsilon: float = BAND_EPSILON
    nodes: int = CHART_POINTS
    band_nodes: int = BAND_POINTS

    def basis(self) -> TensorSplineBasis:
        return _basis(self.k, tuple(self.lower), tuple(self.upper))

    def functional_spec(self):
        if self.functional == "circle":
            return _circle_spec(self.nodes)
        if self.functional == "upper_contour":
            return UpperContour(
                self.lower, self.upper, epsilon=self.epsilon,
                num_points=self.nodes, band_points=self.band_nodes,
            )
        raise InvalidArgumentError(f"unknown functional {self.functional!r}")


_CIRCLES: dict = {}


@lru_cache(maxsize=8)
def _basis(k, lower, upper) -> TensorSplineBasis:
    # shared instances let the node design-matrix cache hit across replications
    return TensorSplineBasis.for_total_count(k, lower, upper)


def _circle_spec(nodes: int) -> LinearOnChart:
    # one chart object per node count keeps its memoized node set alive
    if nodes not in _CIRCLES:
        _CIRCLES[nodes] = LinearOnChart(unit_circle(), num_points=nodes)
    return _CIRCLES[nodes]


_DGPS = {
    "circle_known_manifold": DgpSpec("circle_known_manifold", circle_h0, "circle", 36),
    "disk_upper_contour": DgpSpec(
        "disk_upper_contour", disk_h0, "upper_contour", 64, nodes=BAND_POINTS
    ),
}
_ALIASES = {"circle": "circle_known_manifold", "disk": "disk_upper_contour"}


def get_dgp(name: str, **overrides) -> DgpSpec:
    """Built-in design by name (``circle``/``disk`` or the full names)."""
    key = _ALIASES.get(name, name)
    if key not in _DGPS:
        raise InvalidArgumentError(f"unknown dgp {name!r}; choose from {sorted(_ALIASES)}")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(_DGPS[key], **overrides)


def split_seed(seed: int, n: int, b: int) -> int:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, n, b])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_sample(dgp: DgpSpec, n: int, seed: int) -> Sample:
    if n < 1:
        raise InvalidArgumentError("n must be positive")
    rng = np.random.Generator(np.random.Philox(seed & 0xFFFFFFFFFFFFFFFF))
    lo, hi = np.asarray(dgp.lower), np.asarray(dgp.upper)
    x = lo + (hi - lo) * rng.random((n, len(lo)))
    noise = rng.standard_normal(n)
    y = dgp.h0(x) + dgp.noise_sd * noise
    return Sample(x, y, lo, hi)


def run_replication(dgp: DgpSpec, n: int, seed: int, level: float = 0.95) -> EstimateResult:
    sample = draw_sample(dgp, n, seed)
    fit = fit_sieve(sample, dgp.basis())
    return estimate(dgp.functional_spec(), fit, level)


@dataclass(frozen=True)
class StudyRow:
    n: int
    rmse: float
    bias: float
    sd: float
    ci_l: float
    ci_u: float
    width: float
    coverage: float


@dataclass
class StudyReport:
    rows: list
    metadata: dict = field(default_factory=dict)
    # per-n arrays of shape (B, 4): theta_hat, std_error, ci_lower, ci_upper
    replications: dict = field(default_factory=dict, repr=False)

    def to_csv(self, path, digits: int = 6) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_FIELDS)
            for row in self.rows:
                vals = asdict(row)
                writer.writerow(
                    [row.n] + [f"{vals[k]:.{digits}g}" for k in REPORT_FIELDS[1:]]
                )

    def write(self, path) -> tuple[Path, Path]:
        """Write the CSV and a JSON metadata sidecar next to it."""
        path = Path(path)
        self.to_csv(path)
        side = path.with_suffix(".json")
        side.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")
        return path, side

    @classmethod
    def read_csv(cls, path) -> "StudyReport":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"n", "rmse"} - set(reader.fieldnames or ())
            if missing:
                raise InvalidArgumentError(f"report is missing columns {sorted(missing)}")
            rows = []
            for rec in reader:
                try:
                    vals = {k: float(rec[k]) if rec.get(k) not in (None, "") else math.nan
                            for k in REPORT_FIELDS}
                except ValueError as exc:
                    raise InvalidArgumentError(str(exc)) from None
                vals["n"] = int(vals["n"])
                rows.append(StudyRow(**vals))
        return cls(rows)


def summarize(n: int, reps: np.ndarray, theta0: float) -> StudyRow:
    theta, _, lo, hi = reps.T
    err = theta - theta0
    return StudyRow(
        n=n,
        rmse=float(np.sqrt(np.mean(err**2))),
        bias=float(np.mean(theta) - theta0),
        sd=float(np.std(theta, ddof=1)),
        ci_l=float(np.mean(lo)),
        ci_u=float(np.mean(hi)),
        width=float(np.mean(hi - lo)),
        coverage=float(np.mean((lo <= theta0) & (theta0 <= hi))),
    )


def _run_chunk(args):
    dgp, seed, jobs = args
    out = []
    with threadpool_limits(1):
        for n, b in jobs:
            rep_seed = split_seed(seed, n, b)
            try:
                res = run_replication(dgp, n, rep_seed)
            except Exception as exc:  # surfaced with its (n, b, seed) coordinates
                raise ReplicationError(n, b, rep_seed, exc) from exc
            out.append((n, b, res.theta_hat, res.std_error, res.ci_lower, res.ci_upper,
                        bool(res.diagnostics.get("band_empty"))))
    return out


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidArgumentError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def run_study(dgp: DgpSpec, n_list, reps: int, seed: int, *, workers: int | None = None,
              chunk_size: int = 25) -> StudyReport:
    """Run ``reps`` replications at each sample size and aggregate them.

    Results are stored by ``(n, b)`` and reduced in index order, so the report
    does not depend on ``workers``.
    """
    n_list = [int(n) for n in n_list]
    if not n_list or any(n < 1 for n in n_list):
        raise InvalidArgumentError("n_list must be a non-empty list of positive sizes")
    if reps < 2:
        raise InvalidArgumentError("need at least two replications")
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(n, b) for n in n_list for b in range(reps)]
    chunks = [(dgp, seed, jobs[i : i + chunk_size]) for i in range(0, len(jobs), chunk_size)]
    results = {n: np.empty((reps, 4)) for n in n_list}
    empty_bands = {n: 0 for n in n_list}
    if workers == 1:
        outputs = map(_run_chunk, chunks)
        executor = None
    else:
        executor = ProcessPoolExecutor(max_workers=workers)
        outputs = executor.map(_run_chunk, chunks)
    try:
        for out in outputs:
            for n, b, *vals, empty in out:
                results[n][b] = vals
                empty_bands[n] += empty
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)
    rows = [summarize(n, results[n], dgp.theta0) for n in n_list]
    for n, count in empty_bands.items():
        if count:
            log.warning("n=%d: %d replications had an empty derivative band", n, count)
    metadata = {
        "dgp": dgp.name,
        "K": dgp.k,
        "B": reps,
        "seed": seed,
        "n_list": n_list,
        "theta0": dgp.theta0,
        "nodes": dgp.nodes,
        "band_nodes": dgp.band_nodes,
        "epsilon": dgp.epsilon,
        "empty_bands": {str(n): c for n, c in empty_bands.items()},
        "versions": _versions(),
    }
    return StudyReport(rows, metadata, results)


def _versions() -> dict:
    import scipy

    from . import __version__

    return {"subint": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def empirical_rate(report: StudyReport) -> float:
    """Least-squares slope of ``log(rmse)`` on ``log(n)``."""
    if len(report.rows) < 3:
        raise InvalidArgumentError("need at least three sample sizes to fit a rate")
    n = np.array([r.n for r in report.rows], dtype=float)
    rmse = np.array([r.rmse for r in report.rows], dtype=float)
    if np.any(rmse <= 0) or np.any(n <= 0):
        raise InvalidArgumentError("rmse and n must be positive")
    return float(np.polyfit(np.log(n), np.log(rmse), 1)[0])
