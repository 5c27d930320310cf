"""Piecewise-linear functions tabulated on a grid of ``[0, 1]``."""

from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np
import polars as pl
from numpy.typing import ArrayLike, NDArray


def cosine_knots(size: int) -> NDArray[np.float64]:
    """Chebyshev-extrema knots ``(1 - cos(k pi / (size - 1))) / 2`` with exact endpoints.

    Examples
    --------
    >>> cosine_knots(3).tolist()
    [0.0, 0.5, 1.0]
    """
    if size < 3:
        raise ValueError(f"A grid needs at least 3 knots, got {size}")
    angles = np.pi * np.arange(size) / (size - 1)
    knots = 0.5 * (1.0 - np.cos(angles))
    knots[0], knots[-1] = 0.0, 1.0
    if size % 2 == 1:
        knots[size // 2] = 0.5
    return knots


def _frozen(values: ArrayLike) -> NDArray[np.float64]:
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class GridFunction:
    """A function on ``[0, 1]`` known at knots and linear in between.

    Attributes
    ----------
    abscissae : NDArray
        Strictly increasing knots with ``abscissae[0] == 0`` and ``abscissae[-1] == 1``.
    ordinates : NDArray
        Values at the knots.
    is_concave_expected : bool
        Whether the function is meant to be concave (every value iterate is).
    derived_from_iteration : int | None
        Iteration index that produced the function, if any.
    """

    abscissae: NDArray[np.float64]
    ordinates: NDArray[np.float64]
    is_concave_expected: bool = True
    derived_from_iteration: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        """Validate the knots and freeze the arrays."""
        x = _frozen(self.abscissae)
        y = _frozen(self.ordinates)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError(f"abscissae {x.shape} and ordinates {y.shape} must be 1-d of equal length")
        if x.size < 2 or x[0] != 0.0 or x[-1] != 1.0:
            raise ValueError("abscissae must start at 0 and end at 1")
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        if not np.all(np.isfinite(y)):
            raise ValueError("ordinates must be finite")
        object.__setattr__(self, "abscissae", x)
        object.__setattr__(self, "ordinates", y)

    @classmethod
    def from_function(
        cls,
        func: Callable[[NDArray[np.float64]], NDArray[np.float64]],
        size: int = 2001,
        knots: NDArray[np.float64] | None = None,
        **metadata: object,
    ) -> "GridFunction":
        """Tabulate ``func`` on ``knots`` (cosine knots of ``size`` points by default)."""
        x = cosine_knots(size) if knots is None else knots
        return cls(x, np.asarray(func(x), dtype=np.float64), **metadata)  # type: ignore[arg-type]

    @classmethod
    def terminal_cost(cls, size: int = 2001, knots: NDArray[np.float64] | None = None) -> "GridFunction":
        """The stopping cost ``h(pi) = 1 - pi``."""
        return cls.from_function(lambda x: 1.0 - x, size=size, knots=knots, derived_from_iteration=0)

    @classmethod
    def zero(cls, size: int = 2001, knots: NDArray[np.float64] | None = None) -> "GridFunction":
        """The identically zero function."""
        return cls.from_function(np.zeros_like, size=size, knots=knots)

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        """Evaluate by linear interpolation."""
        return np.interp(np.asarray(x, dtype=np.float64), self.abscissae, self.ordinates)

    def at(self, x: float) -> float:
        """Evaluate at a single point."""
        return float(np.interp(x, self.abscissae, self.ordinates))

    @property
    def size(self) -> int:
        """Number of knots."""
        return int(self.abscissae.size)

    @property
    def max_spacing(self) -> float:
        """Largest distance between neighbouring knots."""
        return float(np.max(np.diff(self.abscissae)))

    def with_ordinates(self, ordinates: ArrayLike, **changes: object) -> "GridFunction":
        """Copy on the same knots with new values."""
        return replace(self, ordinates=np.asarray(ordinates, dtype=np.float64), **changes)  # type: ignore[arg-type]

    def sup_distance(self, other: "GridFunction") -> float:
        """Largest absolute difference at the knots of ``self``."""
        return float(np.max(np.abs(self.ordinates - other(self.abscissae))))

    def concavity_defect(self) -> float:
        """Largest amount by which a knot lies below the chord of its neighbours.

        Zero or negative for a concave function.
        """
        x, y = self.abscissae, self.ordinates
        weight = (x[1:-1] - x[:-2]) / (x[2:] - x[:-2])
        chord = (1.0 - weight) * y[:-2] + weight * y[2:]
        return float(np.max(chord - y[1:-1])) if y.size > 2 else 0.0

    def to_frame(self, name: str = "value") -> pl.DataFrame:
        """Return a two column frame ``pi, <name>``."""
        return pl.DataFrame({"pi": self.abscissae, name: self.ordinates})
