"""Quasi-Monte Carlo integrals over charts, level-set bands and contour sets.

Integrands are vectorized callables: they take an ``(N, d)`` array of points
and return either ``(N,)`` values or an ``(N, K)`` block (one column per
function, e.g. a whole spline basis), in which case the integral is a
``K``-vector. Node sets are deterministic Sobol points, regenerated (and
memoized) per call signature with ``skip=0``.

Note on :func:`band_integral`: the average of ``f`` over the band
``{-eps < h < eps}`` divided by ``2 eps`` converges to the level-set integral
of ``f / |grad h|``, *not* of ``f``. The gradient never has to be formed; it
enters through the band's local width.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .exceptions import InvalidArgumentError, NumericError
from .quasirandom import scale_to_box, sobol_points

__all__ = [
    "ChartManifold",
    "BandSpec",
    "BandResult",
    "unit_circle",
    "box_chart",
    "box_nodes",
    "hausdorff_integral_chart",
    "band_integral",
    "indicator_integral",
    "CHART_POINTS",
    "BAND_POINTS",
    "BAND_EPSILON",
]

CHART_POINTS = 5000
BAND_POINTS = 100_000
BAND_EPSILON = 1e-3


def _box(lower, upper) -> tuple[tuple[float, ...], tuple[float, ...]]:
    lo = tuple(float(v) for v in np.atleast_1d(lower))
    hi = tuple(float(v) for v in np.atleast_1d(upper))
    if len(lo) != len(hi) or not lo:
        raise InvalidArgumentError("box bounds must be non-empty and of equal length")
    if any(a >= b for a, b in zip(lo, hi)):
        raise InvalidArgumentError(f"empty box: lower={lo} upper={hi}")
    return lo, hi


@lru_cache(maxsize=16)
def _box_nodes(lo: tuple, hi: tuple, count: int) -> np.ndarray:
    pts = scale_to_box(sobol_points(len(lo), count), lo, hi)
    pts.flags.writeable = False
    return pts


def box_nodes(lower, upper, count: int) -> np.ndarray:
    """Sobol nodes scaled to a box; the same read-only array for equal arguments."""
    lo, hi = _box(lower, upper)
    if count < 1:
        raise InvalidArgumentError("num_points must be positive")
    return _box_nodes(lo, hi, int(count))


def _volume(lo, hi) -> float:
    return float(np.prod(np.subtract(hi, lo)))


def _evaluate(fn, x: np.ndarray, what: str) -> np.ndarray:
    vals = np.asarray(fn(x), dtype=np.float64)
    if vals.ndim == 0:
        vals = np.full(x.shape[0], float(vals))
    if vals.shape[0] != x.shape[0]:
        raise InvalidArgumentError(
            f"{what} returned {vals.shape[0]} values for {x.shape[0]} points"
        )
    if not np.all(np.isfinite(vals)):
        row = int(np.flatnonzero(~np.all(np.isfinite(vals.reshape(x.shape[0], -1)), axis=1))[0])
        raise NumericError(f"{what} is not finite at node {row}, x={x[row].tolist()}")
    return vals


def _weighted_sum(vals: np.ndarray, weights: np.ndarray):
    if vals.ndim == 1:
        return float(np.sum(vals * weights))
    return np.sum(vals * weights.reshape((-1,) + (1,) * (vals.ndim - 1)), axis=0)


@dataclass(frozen=True, eq=False)
class ChartManifold:
    """An ``m``-dimensional manifold given by one chart over a parameter box.

    ``chart_map`` sends an ``(N, m)`` array of parameters to ``(N, d)`` points
    and ``jacobian`` returns ``sqrt(det(Dphi' Dphi))`` as an ``(N,)`` array.
    ``m == d`` is allowed and reduces to a Lebesgue integral over the image.
    """

    intrinsic_dim: int
    ambient_dim: int
    parameter_lower: tuple
    parameter_upper: tuple
    chart_map: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    name: str = "chart"
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        lo, hi = _box(self.parameter_lower, self.parameter_upper)
        if len(lo) != self.intrinsic_dim:
            raise InvalidArgumentError("parameter box dimension must equal intrinsic_dim")
        if not 0 < self.intrinsic_dim <= self.ambient_dim:
            raise InvalidArgumentError("need 0 < intrinsic_dim <= ambient_dim")
        object.__setattr__(self, "parameter_lower", lo)
        object.__setattr__(self, "parameter_upper", hi)

    @property
    def parameter_volume(self) -> float:
        return _volume(self.parameter_lower, self.parameter_upper)

    def nodes(self, num_points: int) -> tuple[np.ndarray, np.ndarray]:
        """Chart images of the Sobol parameter nodes and their Jacobians (memoized)."""
        hit = self._cache.get(num_points)
        if hit is not None:
            return hit
        u = box_nodes(self.parameter_lower, self.parameter_upper, num_points)
        x = np.array(self.chart_map(u), dtype=np.float64).reshape(num_points, self.ambient_dim)
        jac = np.array(self.jacobian(u), dtype=np.float64).reshape(num_points)
        bad = np.flatnonzero(~(jac > 0))
        if bad.size:
            raise NumericError(
                f"chart {self.name!r} has non-positive Jacobian at u={u[bad[0]].tolist()}"
            )
        x.flags.writeable = False
        jac.flags.writeable = False
        self._cache[num_points] = (x, jac)
        return x, jac


def unit_circle() -> ChartManifold:
    """The unit circle parametrized by angle on ``[0, 2 pi)``."""

    def chart(u):
        return np.column_stack([np.cos(u[:, 0]), np.sin(u[:, 0])])

    def jac(u):
        return np.ones(u.shape[0])

    return ChartManifold(1, 2, (0.0,), (2.0 * np.pi,), chart, jac, name="unit_circle")


def box_chart(lower, upper) -> ChartManifold:
    """Identity chart of a full-dimensional box (Lebesgue measure)."""
    lo, hi = _box(lower, upper)
    d = len(lo)
    return ChartManifold(
        d, d, lo, hi, lambda u: u, lambda u: np.ones(u.shape[0]), name="box"
    )


def hausdorff_integral_chart(manifold: ChartManifold, integrand, num_points: int = CHART_POINTS):
    """Integral of ``integrand`` over the manifold w.r.t. Hausdorff measure.

    Pulls the integral back through the chart and averages over Sobol nodes
    in the parameter box: ``vol(U) / N * sum f(phi(u_j)) J(u_j)``.
    """
    x, jac = manifold.nodes(num_points)
    vals = _evaluate(integrand, x, "integrand")
    return _weighted_sum(vals, jac * (manifold.parameter_volume / num_points))


@dataclass(frozen=True, eq=False)
class BandSpec:
    level_function: Callable[[np.ndarray], np.ndarray]
    epsilon: float
    lower: tuple
    upper: tuple
    num_points: int = BAND_POINTS

    def __post_init__(self):
        lo, hi = _box(self.lower, self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if not self.epsilon > 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if self.num_points < 1:
            raise InvalidArgumentError("num_points must be positive")


@dataclass(frozen=True)
class BandResult:
    """Band integral value with the number of nodes that fell inside the band."""

    value: float | np.ndarray
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0


def band_integral(spec: BandSpec, integrand) -> BandResult:
    """``(1 / 2 eps) * vol / N * sum_j f(x_j) 1{-eps < h(x_j) < eps}``.

    Approximates the integral of ``f / |grad h|`` over ``{h = 0}``. The
    integrand is evaluated only at nodes inside the band. An empty band gives
    value 0 with ``count == 0``.
    """
    x = box_nodes(spec.lower, spec.upper, spec.num_points)
    level = _evaluate(spec.level_function, x, "level function")
    inside = np.flatnonzero((level > -spec.epsilon) & (level < spec.epsilon))
    scale = _volume(spec.lower, spec.upper) / spec.num_points / (2.0 * spec.epsilon)
    if inside.size == 0:
        probe = np.asarray(integrand(x[:1]), dtype=np.float64)
        zero = 0.0 if probe.ndim <= 1 else np.zeros(probe.shape[1:])
        return BandResult(zero, 0)
    vals = _evaluate(integrand, x[inside], "integrand")
    return BandResult(_weighted_sum(vals, np.full(inside.size, scale)), int(inside.size))


def indicator_integral(h, weight, lower, upper, num_points: int = CHART_POINTS):
    """Lebesgue integral of ``weight`` over ``{x in box : h(x) >= 0}``."""
    x = box_nodes(lower, upper, num_points)
    lo, hi = _box(lower, upper)
    on = _evaluate(h, x, "level function") >= 0
    if not on.any():
        return 0.0
    vals = _evaluate(weight, x[on], "weight")
    return _weighted_sum(vals, np.full(int(on.sum()), _volume(lo, hi) / num_points))
