"""Integral functionals of a regression function and their pathwise derivatives.

Three families are supported:

* :class:`LinearOnChart` -- ``int_M h w dH^m`` over a charted manifold.
* :class:`TransformOnChart` -- ``int_M phi(h(x), x) w(x) dH^m``.
* :class:`UpperContour` -- ``int 1{h >= 0} w dx`` over a box.

A direction ``v`` passed to :func:`directional_derivative` may return an
``(N, K)`` block, in which case all ``K`` derivatives are computed on one
shared node set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import InvalidArgumentError
from .quadrature import (
    BAND_EPSILON,
    BAND_POINTS,
    CHART_POINTS,
    BandSpec,
    ChartManifold,
    band_integral,
    hausdorff_integral_chart,
    indicator_integral,
)

__all__ = [
    "LinearOnChart",
    "TransformOnChart",
    "UpperContour",
    "PointEvaluation",
    "evaluate",
    "directional_derivative",
    "check_transform_derivative",
    "remainder_diagnostics",
    "constant",
]

Function = Callable[[np.ndarray], np.ndarray]


def constant(value: float = 1.0) -> Function:
    """Vectorized constant function, the default weight."""

    def fn(x):
        return np.full(np.shape(x)[0], float(value))

    return fn


def _times(vals: np.ndarray, factor: np.ndarray) -> np.ndarray:
    return vals * factor.reshape((-1,) + (1,) * (vals.ndim - 1))


@dataclass(frozen=True, eq=False)
class LinearOnChart:
    manifold: ChartManifold
    weight: Function = constant()
    num_points: int = CHART_POINTS

    def evaluate(self, h) -> float:
        return hausdorff_integral_chart(
            self.manifold, lambda x: _times(np.asarray(h(x), float), self.weight(x)), self.num_points
        )

    def derivative(self, h, direction):
        """Returns ``(value, band_empty)``; the functional is its own derivative."""
        return self.evaluate(direction), False


@dataclass(frozen=True, eq=False)
class TransformOnChart:
    manifold: ChartManifold
    transform: Callable[[np.ndarray, np.ndarray], np.ndarray]
    transform_dt: Callable[[np.ndarray, np.ndarray], np.ndarray]
    weight: Function = constant()
    num_points: int = CHART_POINTS

    def evaluate(self, h) -> float:
        def integrand(x):
            return self.transform(np.asarray(h(x), float), x) * self.weight(x)

        return hausdorff_integral_chart(self.manifold, integrand, self.num_points)

    def derivative(self, h, direction):
        def integrand(x):
            slope = self.transform_dt(np.asarray(h(x), float), x) * self.weight(x)
            return _times(np.asarray(direction(x), float), slope)

        return hausdorff_integral_chart(self.manifold, integrand, self.num_points), False


@dataclass(frozen=True, eq=False)
class UpperContour:
    """Weighted volume of the upper contour set ``{h >= 0}`` inside a box.

    The derivative is a level-set integral weighted by ``1 / |grad h|``; it is
    computed through the ``epsilon``-band on ``band_points`` nodes, which
    supplies the gradient factor without differentiating ``h``.

    The value itself defaults to the same dense node set as the band: with a
    few thousand nodes the discretization error of a 2-d indicator integral
    is as large as the sampling error of the plug-in at moderate ``n``.
    """

    lower: tuple
    upper: tuple
    weight: Function = constant()
    epsilon: float = BAND_EPSILON
    num_points: int = BAND_POINTS
    band_points: int = BAND_POINTS

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))

    def evaluate(self, h) -> float:
        return indicator_integral(h, self.weight, self.lower, self.upper, self.num_points)

    def derivative(self, h, direction):
        band = BandSpec(h, self.epsilon, self.lower, self.upper, self.band_points)
        res = band_integral(
            band, lambda x: _times(np.asarray(direction(x), float), self.weight(x))
        )
        return res.value, res.empty


@dataclass(frozen=True, eq=False)
class PointEvaluation:
    """``h -> h(x0)``; the degenerate zero-dimensional case, used in diagnostics."""

    point: tuple

    def evaluate(self, h):
        x = np.asarray(self.point, dtype=np.float64).reshape(1, -1)
        out = np.asarray(h(x), dtype=np.float64)
        return out[0] if out.ndim > 1 else float(out[0])

    def derivative(self, h, direction):
        return self.evaluate(direction), False


def evaluate(spec, h):
    """Value of the functional at the function ``h``."""
    return spec.evaluate(h)


def directional_derivative(spec, h, direction):
    """Pathwise derivative of the functional at ``h`` in the direction ``direction``."""
    return spec.derivative(h, direction)[0]


def check_transform_derivative(
    spec: TransformOnChart,
    t_range: tuple[float, float],
    x_lower,
    x_upper,
    *,
    pairs: int = 100,
    step: float = 1e-5,
    tol: float = 1e-4,
    seed: int = 0,
) -> float:
    """Compare ``transform_dt`` with central differences of ``transform``.

    Returns the largest discrepancy over ``pairs`` random ``(t, x)`` pairs and
    raises :class:`InvalidArgumentError` when it exceeds ``tol``.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(*t_range, size=pairs)
    x = rng.uniform(x_lower, x_upper, size=(pairs, len(np.atleast_1d(x_lower))))
    fd = (spec.transform(t + step, x) - spec.transform(t - step, x)) / (2 * step)
    err = float(np.max(np.abs(fd - spec.transform_dt(t, x))))
    if err > tol:
        raise InvalidArgumentError(f"transform_dt disagrees with finite differences by {err:.3g}")
    return err


def remainder_diagnostics(fit, h0, grad_h0=None, grid_size: int = 50) -> dict:
    """Sup-norm first-stage errors on a uniform grid of the fit's domain.

    Reports ``|h_hat - h0|_inf`` and, if ``grad_h0`` is given, the sup of the
    gradient error's Euclidean norm. These quantities govern the linearization
    remainders; nothing is enforced.
    """
    lo, hi = fit.basis.domain_lower, fit.basis.domain_upper
    axes = [np.linspace(a, b, grid_size) for a, b in zip(lo, hi)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    out = {"sup_error": float(np.max(np.abs(fit(grid) - h0(grid))))}
    if grad_h0 is not None:
        if fit.basis.degree < 1:
            raise InvalidArgumentError("gradient diagnostics need spline degree >= 1")
        diff = fit.gradient(grid) - np.asarray(grad_h0(grid))
        out["sup_gradient_error"] = float(np.max(np.linalg.norm(diff, axis=1)))
    return out

