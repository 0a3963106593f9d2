"""Nadaraya-Watson regression with a product kernel.

Only second-order kernels are provided; higher-order kernels are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyNeighborhoodError, InvalidArgumentError
from .spline_sieve import Sample

__all__ = ["KernelSpec", "nw_estimate", "rate_optimal_bandwidth", "KERNELS"]


def _gaussian(u):
    return np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)


def _epanechnikov(u):
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


KERNELS = {"gaussian": _gaussian, "epanechnikov": _epanechnikov}


@dataclass(frozen=True)
class KernelSpec:
    family: str
    bandwidth: float
    dimension: int

    def __post_init__(self):
        if self.family not in KERNELS:
            raise InvalidArgumentError(f"unknown kernel family {self.family!r}")
        if not self.bandwidth > 0:
            raise InvalidArgumentError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.dimension < 1:
            raise InvalidArgumentError("dimension must be at least 1")

    def weights(self, x_data: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Product-kernel weights ``K_d((X_i - x) / b)``, shape ``(len(x), n)``."""
        k = KERNELS[self.family]
        u = (x_data[None, :, :] - x[:, None, :]) / self.bandwidth
        return np.prod(k(u), axis=2)


def rate_optimal_bandwidth(n: int, smoothness: float, dimension: int, manifold_dim: int) -> float:
    """Bandwidth ``n ** (-1 / (2 s + d - m))`` balancing squared bias and variance."""
    return float(n) ** (-1.0 / (2.0 * smoothness + dimension - manifold_dim))


def nw_estimate(sample: Sample, spec: KernelSpec, x, *, scaled: bool = True, chunk: int = 512):
    """Kernel-weighted average of ``y`` at ``x``.

    ``x`` may be one point (returns a float) or an ``(N, d)`` array. With
    ``scaled=True`` both sums carry the ``1 / (n b^d)`` factor, which cancels
    in the ratio.
    """
    if sample.dimension != spec.dimension:
        raise InvalidArgumentError("kernel dimension does not match the sample")
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != spec.dimension:
        raise InvalidArgumentError(f"expected points of dimension {spec.dimension}")
    scale = 1.0 / (sample.n * spec.bandwidth**spec.dimension) if scaled else 1.0
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        w = spec.weights(sample.x, block) * scale
        den = w.sum(axis=1)
        num = w @ sample.y
        empty = np.flatnonzero(~(den > 0))
        if empty.size:
            raise EmptyNeighborhoodError(block[empty[0]])
        out[start : start + chunk] = num / den
    # a convex combination cannot leave the data range; clip rounding spill
    out = np.clip(out, sample.y.min(), sample.y.max())
    return float(out[0]) if single else out
