"""Least-squares regression on a tensor-product B-spline sieve.

Covariates are rescaled from their domain box onto ``[0, 1]^d`` before the
univariate bases are evaluated, so knots always live on the unit interval.
Tensor-basis columns are flattened row-major: the multi-index
``(k_1, ..., k_d)`` sits at column ``((k_1 * J + k_2) * J + ...) + k_d``.
"""

from __future__ import annotations

import csv
import weakref
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import DomainError, InvalidArgumentError, UnsupportedOperationError

__all__ = [
    "Sample",
    "TensorSplineBasis",
    "FittedSieve",
    "uniform_clamped_knots",
    "bspline_basis_1d",
    "bspline_basis_1d_derivative",
    "tensor_basis",
    "fit_sieve",
    "predict",
    "predict_gradient",
    "PINV_RCOND",
]

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class Sample:
    """Observations ``(x_i, y_i)`` together with the covariate support box."""

    x: np.ndarray
    y: np.ndarray
    domain_lower: np.ndarray
    domain_upper: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        lo = np.atleast_1d(np.asarray(self.domain_lower, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.domain_upper, dtype=np.float64))
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidArgumentError("a sample needs n >= 1 and d >= 1")
        if y.shape[0] != x.shape[0]:
            raise InvalidArgumentError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if lo.shape != (x.shape[1],) or hi.shape != (x.shape[1],):
            raise InvalidArgumentError("domain box dimension does not match x")
        if np.any(lo >= hi):
            raise InvalidArgumentError("domain box is empty")
        if not np.all(np.isfinite(y)):
            raise InvalidArgumentError("y contains non-finite values")
        bad = np.flatnonzero(np.any((x < lo) | (x > hi) | ~np.isfinite(x), axis=1))
        if bad.size:
            raise DomainError(f"row {int(bad[0])} of x lies outside the domain box")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "domain_lower", lo)
        object.__setattr__(self, "domain_upper", hi)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    @classmethod
    def read_csv(cls, path, domain_lower, domain_upper) -> "Sample":
        """Read a ``x1,...,xd,y`` CSV file; the domain box is supplied separately."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            d = len(header) - 1
            expected = [f"x{j + 1}" for j in range(d)] + ["y"]
            if d < 1 or header != expected:
                raise InvalidArgumentError(
                    f"expected header {','.join(expected) if d >= 1 else 'x1,...,xd,y'}, "
                    f"got {','.join(header)}"
                )
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != d + 1:
                    raise InvalidArgumentError(
                        f"line {lineno}: expected {d + 1} fields, got {len(row)}"
                    )
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise InvalidArgumentError(f"line {lineno}: {exc}") from None
        if not rows:
            raise InvalidArgumentError("no observations in file")
        data = np.array(rows)
        return cls(data[:, :d], data[:, d], domain_lower, domain_upper)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j + 1}" for j in range(self.dimension)] + ["y"])
            for xi, yi in zip(self.x, self.y):
                writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def uniform_clamped_knots(per_dim_count: int, degree: int) -> np.ndarray:
    """Clamped knot vector on ``[0, 1]`` with uniformly spaced interior knots."""
    if degree < 0:
        raise InvalidArgumentError("degree must be non-negative")
    if per_dim_count < degree + 1:
        raise InvalidArgumentError(
            f"need at least degree+1={degree + 1} basis functions, got {per_dim_count}"
        )
    breaks = np.linspace(0.0, 1.0, per_dim_count - degree + 1)
    return np.concatenate([np.zeros(degree), breaks, np.ones(degree)])


def _check_knots(knots: np.ndarray, degree: int) -> None:
    if knots.ndim != 1 or knots.size < degree + 2:
        raise InvalidArgumentError("knot vector too short for the requested degree")
    if np.any(np.diff(knots) < 0):
        raise InvalidArgumentError("knot vector must be non-decreasing")


def _cox_de_boor(t: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    """All B-splines of ``degree`` on ``knots`` at the points ``t`` (no checks)."""
    lo, hi = knots[degree], knots[-degree - 1]
    n_intervals = knots.size - 1
    # degree-0 indicators; the right end of the domain closes the last non-empty cell
    last = np.flatnonzero((knots[:-1] < knots[1:]) & (knots[1:] <= hi))[-1]
    basis = np.zeros((t.size, n_intervals))
    span = np.searchsorted(knots, t, side="right") - 1
    span = np.where(t >= hi, last, span)
    basis[np.arange(t.size), np.clip(span, 0, n_intervals - 1)] = 1.0
    basis[(t < lo) | (t > hi)] = 0.0
    tc = t[:, None]
    for k in range(1, degree + 1):
        m = n_intervals - k
        left_den = knots[k : k + m] - knots[:m]
        right_den = knots[k + 1 : k + 1 + m] - knots[1 : 1 + m]
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(left_den > 0, (tc - knots[:m]) / left_den, 0.0)
            right = np.where(right_den > 0, (knots[k + 1 : k + 1 + m] - tc) / right_den, 0.0)
        basis = left * basis[:, :m] + right * basis[:, 1 : m + 1]
    return basis


def _as_points(t, knots, degree) -> np.ndarray:
    tt = np.atleast_1d(np.asarray(t, dtype=np.float64)).reshape(-1)
    lo, hi = knots[degree], knots[-degree - 1]
    bad = (tt < lo) | (tt > hi) | ~np.isfinite(tt)
    if bad.any():
        raise DomainError(f"t={float(tt[bad][0])} outside spline domain [{lo}, {hi}]")
    return tt


def bspline_basis_1d(t, knots, degree: int) -> np.ndarray:
    """Evaluate every B-spline on ``knots`` via the Cox-de Boor recursion.

    Returns a vector of length ``len(knots) - degree - 1`` for scalar ``t`` and
    an ``(N, J)`` matrix for an array of points. Extrapolation is refused.
    """
    knots = np.asarray(knots, dtype=np.float64)
    _check_knots(knots, degree)
    tt = _as_points(t, knots, degree)
    out = _cox_de_boor(tt, knots, degree)
    return out[0] if np.ndim(t) == 0 else out


def bspline_basis_1d_derivative(t, knots, degree: int) -> np.ndarray:
    """First derivative of every B-spline, from the degree-lowering recurrence."""
    knots = np.asarray(knots, dtype=np.float64)
    _check_knots(knots, degree)
    if degree == 0:
        raise UnsupportedOperationError("degree-0 splines have no derivative")
    tt = _as_points(t, knots, degree)
    lower = _cox_de_boor(tt, knots, degree - 1)
    j = knots.size - degree - 1
    left_den = knots[degree : degree + j] - knots[:j]
    right_den = knots[degree + 1 : degree + 1 + j] - knots[1 : 1 + j]
    with np.errstate(divide="ignore"):
        a = np.where(left_den > 0, degree / left_den, 0.0)
        b = np.where(right_den > 0, degree / right_den, 0.0)
    out = a * lower[:, :j] - b * lower[:, 1 : j + 1]
    return out[0] if np.ndim(t) == 0 else out


# Design matrices of read-only node arrays (quadrature nodes) are memoized by
# identity; mutable arrays are never cached.
_DESIGN_CACHE: OrderedDict = OrderedDict()
_DESIGN_CACHE_SIZE = 8


@dataclass(frozen=True, eq=False)
class TensorSplineBasis:
    """Tensor product of ``dimension`` identical univariate B-spline bases.

    Attributes
    ----------
    degree : int
        Polynomial degree of the univariate splines.
    per_dim_count : int
        Univariate basis size ``J``.
    domain_lower, domain_upper : tuple of float
        The covariate box mapped onto ``[0, 1]^d``.
    """

    degree: int
    per_dim_count: int
    domain_lower: tuple
    domain_upper: tuple
    knots: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.domain_lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.domain_upper))
        if len(lo) != len(hi) or not lo:
            raise InvalidArgumentError("domain bounds must be non-empty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise InvalidArgumentError("domain box is empty")
        object.__setattr__(self, "domain_lower", lo)
        object.__setattr__(self, "domain_upper", hi)
        if self.knots is None:
            knots = uniform_clamped_knots(self.per_dim_count, self.degree)
        else:
            knots = np.asarray(self.knots, dtype=np.float64)
            _check_knots(knots, self.degree)
            if knots.size != self.per_dim_count + self.degree + 1:
                raise InvalidArgumentError("knot vector length must be J + degree + 1")
            if knots[self.degree] != 0.0 or knots[-self.degree - 1] != 1.0:
                raise InvalidArgumentError("knots must span the unit interval")
        knots.flags.writeable = False
        object.__setattr__(self, "knots", knots)

    @classmethod
    def for_total_count(cls, total_count: int, domain_lower, domain_upper, degree: int = 3):
        """Basis with ``J = total_count ** (1/d)`` functions per dimension."""
        d = len(np.atleast_1d(domain_lower))
        j = round(total_count ** (1.0 / d))
        if j**d != total_count:
            raise InvalidArgumentError(f"K={total_count} is not a perfect {d}-th power")
        return cls(degree, j, domain_lower, domain_upper)

    @property
    def dimension(self) -> int:
        return len(self.domain_lower)

    @property
    def total_count(self) -> int:
        return self.per_dim_count**self.dimension

    @cached_property
    def _scale(self) -> np.ndarray:
        return np.subtract(self.domain_upper, self.domain_lower)

    def _unit(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dimension:
            raise InvalidArgumentError(
                f"expected points of dimension {self.dimension}, got shape {x.shape}"
            )
        lo = np.asarray(self.domain_lower)
        hi = np.asarray(self.domain_upper)
        bad = np.any((x < lo) | (x > hi) | ~np.isfinite(x), axis=1)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(f"point {x[i].tolist()} (row {i}) outside domain box")
        return np.clip((x - lo) / self._scale, 0.0, 1.0)

    def _combine(self, factors) -> np.ndarray:
        out = factors[0]
        for f in factors[1:]:
            out = (out[:, :, None] * f[:, None, :]).reshape(out.shape[0], -1)
        return out

    def design_matrix(self, x) -> np.ndarray:
        """``(N, K)`` matrix whose rows are :func:`tensor_basis` at each point."""
        if isinstance(x, np.ndarray) and not x.flags.writeable:
            key = (id(self), id(x))
            hit = _DESIGN_CACHE.get(key)
            if hit is not None and hit[0]() is x and hit[1]() is self:
                _DESIGN_CACHE.move_to_end(key)
                return hit[2]
        u = self._unit(x)
        mat = self._combine(
            [_cox_de_boor(u[:, j], self.knots, self.degree) for j in range(self.dimension)]
        )
        if isinstance(x, np.ndarray) and not x.flags.writeable:
            mat.flags.writeable = False
            _DESIGN_CACHE[key] = (weakref.ref(x), weakref.ref(self), mat)
            while len(_DESIGN_CACHE) > _DESIGN_CACHE_SIZE:
                _DESIGN_CACHE.popitem(last=False)
        return mat

    def gradient_matrices(self, x) -> list[np.ndarray]:
        """Per-dimension ``(N, K)`` matrices of basis partial derivatives."""
        if self.degree == 0:
            raise UnsupportedOperationError("gradient requires spline degree >= 1")
        u = self._unit(x)
        vals = [_cox_de_boor(u[:, j], self.knots, self.degree) for j in range(self.dimension)]
        out = []
        for j in range(self.dimension):
            deriv = bspline_basis_1d_derivative(u[:, j], self.knots, self.degree)
            factors = vals[:j] + [deriv / self._scale[j]] + vals[j + 1 :]
            out.append(self._combine(factors))
        return out

    def __call__(self, x) -> np.ndarray:
        return self.design_matrix(x)


def tensor_basis(basis: TensorSplineBasis, x) -> np.ndarray:
    """Tensor B-spline vector of length ``K`` at a single point ``x``."""
    return basis.design_matrix(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


@dataclass(frozen=True, eq=False)
class FittedSieve:
    """Least-squares sieve fit. Callable on an ``(N, d)`` array of points."""

    basis: TensorSplineBasis
    coefficients: np.ndarray
    gram_inverse: np.ndarray
    residuals: np.ndarray
    design_rank: int
    design: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.residuals.shape[0]

    def __call__(self, x) -> np.ndarray:
        return self.basis.design_matrix(x) @ self.coefficients

    def gradient(self, x) -> np.ndarray:
        """``(N, d)`` analytic gradient of the fitted function."""
        return np.stack([g @ self.coefficients for g in self.basis.gradient_matrices(x)], axis=1)


def fit_sieve(sample: Sample, basis: TensorSplineBasis) -> FittedSieve:
    """Regress ``y`` on the tensor basis using a generalized inverse of the Gram.

    When the Gram matrix is singular (e.g. ``n < K``) the minimum-norm
    solution is returned; eigenvalues below ``PINV_RCOND`` times the largest
    are treated as zero.
    """
    if np.any(np.asarray(sample.domain_lower) < np.asarray(basis.domain_lower)) or np.any(
        np.asarray(sample.domain_upper) > np.asarray(basis.domain_upper)
    ):
        raise DomainError("sample domain box extends beyond the basis domain")
    psi = basis.design_matrix(sample.x)
    n = sample.n
    gram = psi.T @ psi / n
    gram_inv = np.linalg.pinv(gram, rcond=PINV_RCOND, hermitian=True)
    gram_inv = 0.5 * (gram_inv + gram_inv.T)
    coef = gram_inv @ (psi.T @ sample.y) / n
    eig = np.linalg.eigvalsh(gram)
    rank = int(np.sum(eig > PINV_RCOND * max(eig.max(), 0.0))) if eig.max() > 0 else 0
    resid = sample.y - psi @ coef
    for arr in (coef, gram_inv, resid, psi):
        arr.flags.writeable = False
    return FittedSieve(basis, coef, gram_inv, resid, rank, psi)


def predict(fit: FittedSieve, x) -> float:
    return float(fit(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def predict_gradient(fit: FittedSieve, x) -> np.ndarray:
    """Gradient of the fitted sieve at one point (analytic, not differenced)."""
    return fit.gradient(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]
