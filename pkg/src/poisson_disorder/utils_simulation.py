"""Random streams and time meshes for the path simulator."""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

DISORDER_STREAM = 0
GAUSSIAN_STREAM = 1


@dataclass(frozen=True)
class PathStreams:
    """Independent generators for one path.

    ``disorder`` drives the prior draw, the shocks and the disorder index; ``gaussian`` drives the
    Brownian increments, multiplied by ``sign`` (``-1`` for the mirrored member of an antithetic pair).
    """

    disorder: np.random.Generator
    gaussian: np.random.Generator
    sign: float = 1.0

    def normals(self, size: int) -> NDArray[np.float64]:
        """Draw ``size`` standard normals with the stream's sign."""
        return self.sign * self.gaussian.standard_normal(size)

    @classmethod
    def from_generator(cls, rng: np.random.Generator) -> "PathStreams":
        """Use one generator for everything."""
        return cls(rng, rng, 1.0)


def path_streams(seed: int, index: int, antithetic: bool = False) -> PathStreams:
    """Streams of path ``index`` derived from ``seed``.

    Every path gets its own ``SeedSequence`` child keyed by ``(index, stream)``, so results do not
    depend on how paths are split between workers. Under ``antithetic`` paths ``2k`` and ``2k + 1``
    share Gaussian draws with opposite signs while their disorder streams stay independent.

    Examples
    --------
    >>> a, b = path_streams(7, 0, antithetic=True), path_streams(7, 1, antithetic=True)
    >>> bool(a.normals(1)[0] == -b.normals(1)[0])
    True
    """
    if index < 0:
        raise ValueError(f"path index must be non-negative, got {index}")
    disorder = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, DISORDER_STREAM)))
    gaussian_key = index // 2 if antithetic else index
    gaussian = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(gaussian_key, GAUSSIAN_STREAM)))
    sign = -1.0 if antithetic and index % 2 == 1 else 1.0
    return PathStreams(disorder, gaussian, sign)


def mesh_between(start: float, stop: float, dt: float) -> NDArray[np.float64]:
    """Times of the global ``dt`` mesh strictly inside ``(start, stop)``, followed by ``stop``.

    Examples
    --------
    >>> mesh_between(0.25, 0.6, 0.1).round(10).tolist()
    [0.3, 0.4, 0.5, 0.6]
    """
    first = int(np.floor(start / dt)) + 1
    last = int(np.ceil(stop / dt)) - 1
    inner = dt * np.arange(first, last + 1, dtype=np.float64)
    inner = inner[(inner > start) & (inner < stop)]
    return np.append(inner, stop)


def chunk_indices(n_items: int, n_chunks: int) -> list[range]:
    """Split ``range(n_items)`` into at most ``n_chunks`` contiguous ranges."""
    n_chunks = max(1, min(n_chunks, n_items))
    bounds = np.linspace(0, n_items, n_chunks + 1).astype(int)
    return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:], strict=True) if b > a]
