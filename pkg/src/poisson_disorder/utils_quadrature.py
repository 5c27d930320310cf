"""Gauss-Legendre quadrature on cells and geometrically graded meshes."""

from collections.abc import Callable
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

GAUSS_ORDER = 10
GRADING_RATIO = 0.5
SPLIT_RATIO = 1.5
MIN_WIDTH = 1e-12

Integrand = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def gauss_order_for(tolerance: float) -> int:
    """Number of Gauss points used for a target relative tolerance.

    Ten points for ``tolerance <= 1e-10``, one point (midpoint rule) for ``tolerance >= 0.1``.

    Examples
    --------
    >>> gauss_order_for(1e-10), gauss_order_for(1e-4), gauss_order_for(1.0)
    (10, 4, 1)
    """
    if tolerance <= 0:
        raise ValueError(f"Quadrature tolerance must be positive, got {tolerance}")
    return int(np.clip(np.ceil(-np.log10(tolerance)), 1, GAUSS_ORDER))


@lru_cache(maxsize=GAUSS_ORDER)
def gauss_legendre(order: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Nodes and weights on ``[-1, 1]``."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_integrate(
    func: Integrand, lo: NDArray[np.float64], hi: NDArray[np.float64], order: int = GAUSS_ORDER
) -> NDArray[np.float64]:
    """Integrate ``func`` over every interval ``[lo[i], hi[i]]`` with one vectorised call."""
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    if lo.size == 0:
        return np.zeros(0)
    nodes, weights = gauss_legendre(order)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    values = func(points.ravel()).reshape(points.shape)
    return half * (values @ weights)


def graded_breaks(
    a: float, b: float, singular_at: float, ratio: float = GRADING_RATIO, min_width: float = MIN_WIDTH
) -> tuple[NDArray[np.float64], float]:
    """Breakpoints of ``[a, b]`` shrinking geometrically toward the endpoint ``singular_at``.

    Returns the ascending breakpoints and the width next to ``singular_at`` that is left uncovered
    (non-zero only when the interval touches the singular point). The caller adds an analytic tail
    for that piece.

    Examples
    --------
    >>> breaks, uncovered = graded_breaks(0.0, 1.0, 0.0, min_width=0.1)
    >>> breaks.tolist(), uncovered
    ([0.1, 0.125, 0.25, 0.5, 1.0], 0.1)
    """
    near, far = sorted((abs(a - singular_at), abs(b - singular_at)))
    floor = near if near > 0.0 else min_width
    if far <= floor:
        distances = [far, near]
        uncovered = 0.0
    else:
        distances = [far]
        current = far * ratio
        while current > floor:
            distances.append(current)
            current *= ratio
        distances.append(floor)
        uncovered = floor - near
    direction = 1.0 if singular_at <= a else -1.0
    breaks = np.sort(singular_at + direction * np.asarray(distances))
    return breaks, uncovered


def integrate_graded(
    func: Integrand, a: float, b: float, singular_at: float, order: int = GAUSS_ORDER
) -> tuple[float, float]:
    """Integrate over ``[a, b]`` on a mesh graded toward ``singular_at``.

    Returns the integral over the covered part and the uncovered width (see :func:`graded_breaks`).
    """
    if b <= a:
        return 0.0, 0.0
    breaks, uncovered = graded_breaks(a, b, singular_at)
    return float(np.sum(gauss_integrate(func, breaks[:-1], breaks[1:], order))), uncovered


def integrate_cells(
    func: Integrand,
    lo: NDArray[np.float64],
    hi: NDArray[np.float64],
    order: int = GAUSS_ORDER,
    split_ratio: float = SPLIT_RATIO,
) -> NDArray[np.float64]:
    """Integrate over cells of ``[0, 1]`` for an integrand with power-law singularities at 0 and 1.

    A cell whose distances to the nearer endpoint differ by a factor above ``split_ratio`` goes
    through :func:`integrate_graded` toward that endpoint; the others take a single Gauss rule. A
    cell starting at 0 loses its uncovered width, which the caller handles.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    out = np.zeros(lo.shape)
    if lo.size == 0:
        return out
    with np.errstate(divide="ignore", invalid="ignore"):
        toward_zero = np.where(hi > lo, hi / lo, 1.0)
        toward_one = np.where(hi > lo, (1.0 - lo) / (1.0 - hi), 1.0)
    graded = np.maximum(toward_zero, toward_one) > split_ratio
    plain = ~graded
    out[plain] = gauss_integrate(func, lo[plain], hi[plain], order)
    for i in np.flatnonzero(graded):
        singular_at = 0.0 if toward_zero[i] >= toward_one[i] else 1.0
        out[i], _ = integrate_graded(func, float(lo[i]), float(hi[i]), singular_at, order)
    return out
