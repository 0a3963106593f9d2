"""Plug-in estimates, sieve Riesz vectors and sandwich standard errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .exceptions import InvalidArgumentError
from .functionals import LinearOnChart, PointEvaluation
from .spline_sieve import FittedSieve, TensorSplineBasis, bspline_basis_1d

__all__ = [
    "EstimateResult",
    "RieszVector",
    "riesz_vector",
    "sandwich_covariance",
    "estimate",
    "normal_quantile",
    "uniform_gram",
    "riesz_norm_growth",
    "NormGrowth",
]

RESULT_FIELDS = ("theta_hat", "std_error", "ci_lower", "ci_upper", "level", "band_empty", "design_rank")


def normal_quantile(level: float) -> float:
    """Two-sided critical value; 1.96 exactly at the 95% level."""
    if not 0.0 < level < 1.0:
        raise InvalidArgumentError(f"confidence level must be in (0, 1), got {level}")
    if level == 0.95:
        return 1.96
    return float(ndtri(0.5 + 0.5 * level))


@dataclass(frozen=True)
class EstimateResult:
    theta_hat: float
    std_error: float
    ci_lower: float
    ci_upper: float
    level: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.ci_upper - self.ci_lower

    def covers(self, value: float) -> bool:
        return self.ci_lower <= value <= self.ci_upper

    def csv_header(self) -> str:
        return ",".join(RESULT_FIELDS)

    def csv_row(self, digits: int = 6) -> str:
        nums = [self.theta_hat, self.std_error, self.ci_lower, self.ci_upper, self.level]
        cells = [f"{v:.{digits}g}" for v in nums]
        cells.append(str(int(bool(self.diagnostics.get("band_empty", False)))))
        cells.append(str(self.diagnostics.get("design_rank", "")))
        return ",".join(cells)


@dataclass(frozen=True)
class RieszVector:
    values: np.ndarray
    basis: TensorSplineBasis
    band_empty: bool = False

    def __post_init__(self):
        if self.values.shape != (self.basis.total_count,):
            raise InvalidArgumentError("Riesz vector length must equal the basis size")


def riesz_vector(spec, fit: FittedSieve) -> RieszVector:
    """Derivatives of the functional at the fit along every basis function.

    All ``K`` entries share one node set: the direction handed to the
    functional is the whole basis, evaluated as an ``(N, K)`` block.
    """
    values, empty = spec.derivative(fit, fit.basis.design_matrix)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    return RieszVector(values, fit.basis, bool(empty))


def sandwich_covariance(fit: FittedSieve) -> np.ndarray:
    """Heteroskedasticity-robust covariance of the sieve coefficients.

    ``(Psi'Psi)^- (sum_i u_i^2 psi_i psi_i') (Psi'Psi)^-``, written with the
    stored ``(Psi'Psi / n)^-`` so that ``r' Omega r`` estimates the variance
    of ``r' beta_hat`` directly.
    """
    n = fit.n
    psi = fit.design
    u2 = fit.residuals**2
    meat = (psi * u2[:, None]).T @ psi / n
    cov = fit.gram_inverse @ meat @ fit.gram_inverse / n
    return 0.5 * (cov + cov.T)


def estimate(spec, fit: FittedSieve, level: float = 0.95) -> EstimateResult:
    """Plug-in estimate with a sandwich standard error and normal CI."""
    z = normal_quantile(level)
    theta = float(spec.evaluate(fit))
    r = riesz_vector(spec, fit)
    var = float(r.values @ sandwich_covariance(fit) @ r.values)
    se = math.sqrt(max(var, 0.0))
    diagnostics = {"band_empty": r.band_empty, "design_rank": fit.design_rank}
    return EstimateResult(theta, se, theta - z * se, theta + z * se, level, diagnostics)


def uniform_gram(basis: TensorSplineBasis) -> np.ndarray:
    """``E[psi psi']`` for ``X`` uniform on the basis domain, computed exactly.

    The univariate Gram is integrated with Gauss-Legendre rules on each knot
    interval (exact for the piecewise polynomial products); the tensor Gram
    is the Kronecker product of the univariate ones.
    """
    knots = basis.knots
    breaks = np.unique(knots)
    gl_t, gl_w = np.polynomial.legendre.leggauss(basis.degree + 1)
    t_all, w_all = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        t_all.append(0.5 * (b - a) * gl_t + 0.5 * (a + b))
        w_all.append(0.5 * (b - a) * gl_w)
    t = np.concatenate(t_all)
    w = np.concatenate(w_all)
    vals = bspline_basis_1d(t, knots, basis.degree)
    g1 = (vals * w[:, None]).T @ vals
    gram = g1
    for _ in range(basis.dimension - 1):
        gram = np.kron(gram, g1)
    return gram


@dataclass(frozen=True)
class NormGrowth:
    sizes: tuple
    squared_norms: tuple
    slope: float


def riesz_norm_growth(spec, basis_sizes, domain_lower, domain_upper, degree: int = 3) -> NormGrowth:
    """Squared norm of the functional applied to an orthonormalized basis, per ``K``.

    For each ``K`` the raw tensor basis is whitened against the uniform design
    on the domain box, giving ``Gamma(psi)' G^{-1} Gamma(psi)``; the slope of
    its logarithm on ``log K`` is fitted by least squares.
    """
    if not isinstance(spec, (LinearOnChart, PointEvaluation)):
        raise InvalidArgumentError("norm growth is defined for linear functionals only")
    sizes = [int(k) for k in basis_sizes]
    if len(sizes) < 3:
        raise InvalidArgumentError("need at least three basis sizes")
    norms = []
    for k in sizes:
        basis = TensorSplineBasis.for_total_count(k, domain_lower, domain_upper, degree)
        gamma = np.asarray(spec.evaluate(basis.design_matrix), dtype=np.float64).reshape(-1)
        gram = uniform_gram(basis)
        norms.append(float(gamma @ np.linalg.solve(gram, gamma)))
    slope = float(np.polyfit(np.log(sizes), np.log(norms), 1)[0])
    return NormGrowth(tuple(sizes), tuple(norms), slope)
