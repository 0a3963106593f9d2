"""Unscrambled Sobol points from the Joe-Kuo direction-number table.

Point ``j`` (1-based) of a stream with ``skip=0`` is the Gray-code Sobol point
of rank ``j - 1``, so the first point emitted is the origin. This is the same
ordering as the Joe-Kuo reference generator and ``scipy.stats.qmc.Sobol``
with ``scramble=False``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = ["MAX_DIMENSION", "SobolStream", "sobol_points", "scale_to_box"]

MAX_DIMENSION = 16
_BITS = 32

# (degree s, packed coefficients a, initial m_1..m_s) for dimensions 2..16,
# first rows of new-joe-kuo-6.21201.
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
)


def _direction_numbers(s: int, a: int, m_init: tuple[int, ...]) -> list[int]:
    m = list(m_init)
    for k in range(s, _BITS):
        new = m[k - s] ^ (m[k - s] << s)
        for j in range(1, s):
            if (a >> (s - 1 - j)) & 1:
                new ^= m[k - j] << j
        m.append(new)
    return [m[k] << (_BITS - 1 - k) for k in range(_BITS)]


@lru_cache(maxsize=None)
def _direction_table() -> np.ndarray:
    """Shape ``(_BITS, MAX_DIMENSION)`` table of integer direction numbers."""
    cols = [[1 << (_BITS - 1 - k) for k in range(_BITS)]]
    cols += [_direction_numbers(*row) for row in _JOE_KUO]
    return np.array(cols, dtype=np.uint64).T


def _check_dimension(dimension: int) -> None:
    if not 1 <= dimension <= MAX_DIMENSION:
        raise InvalidArgumentError(
            f"Sobol dimension must be in [1, {MAX_DIMENSION}], got {dimension}"
        )


@lru_cache(maxsize=32)
def _cached_points(dimension: int, count: int, skip: int) -> np.ndarray:
    idx = np.arange(skip, skip + count, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    table = _direction_table()[:, :dimension]
    acc = np.zeros((count, dimension), dtype=np.uint64)
    for bit in range(_BITS):
        on = ((gray >> np.uint64(bit)) & np.uint64(1)).astype(bool)
        if not on.any():
            continue
        acc[on] ^= table[bit]
    pts = acc.astype(np.float64) / float(1 << _BITS)
    pts.flags.writeable = False
    return pts


def sobol_points(dimension: int, count: int, skip: int = 0) -> np.ndarray:
    """Return ``count`` Sobol points in ``[0, 1)^dimension``.

    Parameters
    ----------
    dimension : int
        Between 1 and :data:`MAX_DIMENSION`.
    count : int
        Number of points, at least 1.
    skip : int
        Number of leading points to discard.

    Returns
    -------
    ndarray, shape (count, dimension)
        Read-only; repeated calls with the same arguments return the same
        array object.
    """
    _check_dimension(dimension)
    if count < 1:
        raise InvalidArgumentError(f"count must be positive, got {count}")
    if skip < 0:
        raise InvalidArgumentError(f"skip must be non-negative, got {skip}")
    if skip + count > (1 << _BITS):
        raise InvalidArgumentError("requested points exceed 2**32")
    return _cached_points(int(dimension), int(count), int(skip))


def scale_to_box(points, lower, upper) -> np.ndarray:
    """Affinely map points from the unit cube onto ``prod [lower_j, upper_j)``."""
    pts = np.asarray(points, dtype=np.float64)
    lo = np.atleast_1d(np.asarray(lower, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise InvalidArgumentError("lower and upper must be vectors of equal length")
    if pts.ndim == 1:
        pts = pts[None, :] if lo.size > 1 else pts[:, None]
    if pts.shape[1] != lo.size:
        raise InvalidArgumentError(
            f"points have dimension {pts.shape[1]} but box has dimension {lo.size}"
        )
    if np.any(lo >= hi):
        raise InvalidArgumentError(f"empty box: lower={lo.tolist()} upper={hi.tolist()}")
    return lo + pts * (hi - lo)


class SobolStream:
    """Sequential consumer of a Sobol sequence.

    Two streams built with the same ``dimension`` and ``skip`` emit identical
    points.
    """

    def __init__(self, dimension: int, skip: int = 0):
        _check_dimension(dimension)
        if skip < 0:
            raise InvalidArgumentError(f"skip must be non-negative, got {skip}")
        self.dimension = dimension
        self.next_index = skip

    def take(self, count: int) -> np.ndarray:
        pts = sobol_points(self.dimension, count, self.next_index)
        self.next_index += count
        return pts

    def __repr__(self) -> str:
        return f"SobolStream(dimension={self.dimension}, next_index={self.next_index})"
