"""Time grids and discretized Brownian driving paths.

Two constructions are offered, both of weak order one in the sense used by
the budget allocator:

* ``EULER`` -- cumulative sums of independent Gaussian increments.
* ``HAAR_LEVY`` -- the Levy-Ciesielski (Haar/Schauder) partial sum, using
  every level whose support width is at least the grid step.

Every path is drawn from its own Philox stream keyed by ``(seed, index)``,
so a path depends only on the seed, its index, the grid and the scheme.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from ._errors import InvalidArgument
from ._parallel import CHUNK_SIZE, map_chunks

__all__ = [
    "GridSpec",
    "DiscretePath",
    "Scheme",
    "PathBatchSpec",
    "PathBatch",
    "WEAK_ORDER",
    "make_grid",
    "generate_paths",
    "path_generator",
    "write_paths_csv",
    "read_paths_csv",
]

_SNAP = 1e-9  # relative slack when deciding whether T/h is integral


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on ``[0, T]`` with step ``h`` and a clamped final point."""

    horizon: float
    step: float

    def __post_init__(self):
        T, h = float(self.horizon), float(self.step)
        if not (math.isfinite(T) and T > 0):
            raise InvalidArgument(f"horizon must be positive, got {self.horizon!r}")
        if not (math.isfinite(h) and 0 < h <= T * (1 + _SNAP)):
            raise InvalidArgument(f"step must lie in (0, T], got {self.step!r}")
        object.__setattr__(self, "horizon", T)
        object.__setattr__(self, "step", min(h, T))

    @cached_property
    def times(self) -> np.ndarray:
        T, h = self.horizon, self.step
        k = int(math.floor(T / h + _SNAP))
        t = np.arange(k + 1, dtype=float) * h
        if T - t[-1] > _SNAP * T:
            t = np.append(t, T)
        else:
            t[-1] = T
        t.setflags(write=False)
        return t

    @property
    def num_points(self) -> int:
        return self.times.size

    @cached_property
    def increments(self) -> np.ndarray:
        d = np.diff(self.times)
        d.setflags(write=False)
        return d

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Weights ``w`` with ``w @ f`` the trapezoidal integral of ``f``."""
        d = self.increments
        w = np.zeros(self.num_points)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        w.setflags(write=False)
        return w

    def same_as(self, other: "GridSpec") -> bool:
        return self.num_points == other.num_points and np.array_equal(self.times, other.times)


def make_grid(T: float, h: float) -> GridSpec:
    """Build the grid ``t_i = i*h`` on ``[0, T]``, clamping the last point to ``T``.

    >>> make_grid(1.0, 0.4).times
    array([0. , 0.4, 0.8, 1. ])
    """
    return GridSpec(T, h)


@dataclass(frozen=True)
class DiscretePath:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size != self.grid.num_points:
            raise InvalidArgument(
                f"path has {v.size} values for a grid of {self.grid.num_points} points"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("path values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        if isinstance(other, DiscretePath):
            _check_same_grid(self.grid, other.grid)
            other = other.values
        return DiscretePath(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, DiscretePath):
            _check_same_grid(self.grid, other.grid)
            other = other.values
        return DiscretePath(self.grid, self.values - other)

    def __mul__(self, c):
        return DiscretePath(self.grid, self.values * float(c))

    __rmul__ = __mul__


def _check_same_grid(a: GridSpec, b: GridSpec):
    if not a.same_as(b):
        raise InvalidArgument("paths live on different grids")


class Scheme(str, enum.Enum):
    EULER = "euler"
    HAAR_LEVY = "haar_levy"


# weak convergence order attached to each scheme (metadata for the allocator)
WEAK_ORDER = {Scheme.EULER: 1.0, Scheme.HAAR_LEVY: 1.0}


@dataclass(frozen=True)
class PathBatchSpec:
    count: int
    scheme: Scheme = Scheme.EULER
    sigma: float = 1.0
    initial_x: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.count) < 1:
            raise InvalidArgument("count must be >= 1")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidArgument("sigma must be positive")
        if not math.isfinite(self.initial_x):
            raise InvalidArgument("initial_x must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgument("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def weak_order(self) -> float:
        return WEAK_ORDER[self.scheme]


def path_generator(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for path ``index`` under ``seed``.

    The seed is the Philox key and the path index occupies the top word of
    the 256-bit counter, so streams never overlap.
    """
    bitgen = np.random.Philox(key=[int(seed), 0], counter=[0, 0, 0, int(index)])
    return np.random.Generator(bitgen)


def _haar_levels(grid: GridSpec) -> int:
    """Number of Schauder levels with support width ``T / 2**l >= h``."""
    ratio = grid.horizon / grid.step
    return int(math.floor(math.log2(ratio) + _SNAP)) + 1


def _euler_block(spec, grid, start, stop):
    d = grid.increments
    out = np.empty((stop - start, grid.num_points))
    out[:, 0] = 0.0
    z = np.empty(d.size)
    for r, j in enumerate(range(start, stop)):
        path_generator(spec.seed, j).standard_normal(out=z)
        np.cumsum(np.sqrt(d) * z, out=out[r, 1:])
    return out


def _haar_block(spec, grid, start, stop):
    T = grid.horizon
    t = grid.times
    levels = _haar_levels(grid)
    n_coef = 2**levels  # 1 linear term + sum_{l<levels} 2**l
    coef = np.empty((stop - start, n_coef))
    for r, j in enumerate(range(start, stop)):
        path_generator(spec.seed, j).standard_normal(out=coef[r])
    out = np.outer(coef[:, 0], t / math.sqrt(T))
    offset = 1
    for lev in range(levels):
        width = 2**lev
        u = t * width / T
        k = np.minimum(np.floor(u).astype(np.int64), width - 1)
        frac = u - k
        peak = 0.5 * math.sqrt(T) * 2.0 ** (-lev / 2)
        tent = peak * 2.0 * np.minimum(frac, 1.0 - frac)
        out += coef[:, offset + k] * tent
        offset += width
    return out


def _raw_block(spec: PathBatchSpec, grid: GridSpec, start: int, stop: int) -> np.ndarray:
    if spec.scheme is Scheme.EULER:
        out = _euler_block(spec, grid, start, stop)
    else:
        out = _haar_block(spec, grid, start, stop)
    out *= spec.sigma
    out += spec.initial_x
    return out


class PathBatch(Sequence):
    """Immutable batch of ``N`` paths on one grid.

    Values are held as an ``N x num_points`` array unless the batch is
    larger than ``memory_cap`` floats, in which case chunks are regenerated
    from the seed on demand. Indexing yields :class:`DiscretePath` objects.
    """

    def __init__(self, spec: PathBatchSpec, grid: GridSpec, values=None, memory_cap=None,
                 threads=None):
        self.spec = spec
        self.grid = grid
        self._threads = threads
        if values is not None:
            values = np.array(values, dtype=float)
            if values.shape != (spec.count, grid.num_points):
                raise InvalidArgument("values shape does not match spec and grid")
            values.setflags(write=False)
        elif memory_cap is None or spec.count * grid.num_points <= memory_cap:
            blocks = map_chunks(lambda a, b: _raw_block(spec, grid, a, b), spec.count,
                                threads=threads)
            values = np.concatenate(blocks, axis=0)
            values.setflags(write=False)
        self._values = values

    @classmethod
    def from_array(cls, grid: GridSpec, values, **spec_kwargs) -> "PathBatch":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        spec = PathBatchSpec(count=values.shape[0], **spec_kwargs)
        return cls(spec, grid, values=values)

    @property
    def materialized(self) -> bool:
        return self._values is not None

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            return np.concatenate([blk for _, blk in self.iter_chunks()], axis=0)
        return self._values

    def __len__(self):
        return self.spec.count

    def __getitem__(self, j):
        if isinstance(j, slice):
            return [self[i] for i in range(*j.indices(len(self)))]
        j = range(len(self))[j]
        if self._values is not None:
            return DiscretePath(self.grid, self._values[j])
        return DiscretePath(self.grid, _raw_block(self.spec, self.grid, j, j + 1)[0])

    def iter_chunks(self, chunk_size=CHUNK_SIZE) -> Iterator[tuple[int, np.ndarray]]:
        for a in range(0, len(self), chunk_size):
            b = min(a + chunk_size, len(self))
            yield a, self.block(a, b)

    def block(self, start: int, stop: int) -> np.ndarray:
        if self._values is not None:
            return self._values[start:stop]
        return _raw_block(self.spec, self.grid, start, stop)

    def restrict(self, grid: GridSpec) -> "PathBatch":
        """Values at the points of a coarser grid whose times are a subset of ours."""
        idx = np.searchsorted(self.grid.times, grid.times)
        idx = np.minimum(idx, self.grid.num_points - 1)
        if not np.allclose(self.grid.times[idx], grid.times, rtol=0, atol=1e-12):
            raise InvalidArgument("target grid is not a subset of the batch grid")
        return PathBatch(self.spec, grid, values=self.values[:, idx])


def generate_paths(spec: PathBatchSpec, grid: GridSpec, memory_cap=None, threads=None) -> PathBatch:
    """Sample ``spec.count`` driving paths on ``grid``.

    Parameters
    ----------
    spec : PathBatchSpec
        Count, scheme, diffusion coefficient, start point and seed.
    grid : GridSpec
        Time grid shared by every path.
    memory_cap : int, optional
        Maximum number of floats to keep in memory; larger batches are
        regenerated chunk by chunk from the seed.
    threads : int, optional
        Worker threads. Output does not depend on this value.
    """
    return PathBatch(spec, grid, memory_cap=memory_cap, threads=threads)


def write_paths_csv(batch, file) -> None:
    """Write one row per path under a header row of grid times."""
    values = batch.values if isinstance(batch, PathBatch) else np.atleast_2d(batch[1])
    grid = batch.grid if isinstance(batch, PathBatch) else batch[0]
    close = False
    if not hasattr(file, "write"):
        file = open(file, "w", newline="", encoding="utf-8")
        close = True
    try:
        w = csv.writer(file, lineterminator="\n")
        w.writerow([repr(float(t)) for t in grid.times])
        for row in values:
            w.writerow([repr(float(v)) for v in row])
    finally:
        if close:
            file.close()


def read_paths_csv(file) -> tuple[np.ndarray, np.ndarray]:
    """Read ``(times, values)`` written by :func:`write_paths_csv`."""
    close = False
    if not hasattr(file, "read"):
        file = open(file, newline="", encoding="utf-8")
        close = True
    try:
        rows = list(csv.reader(file))
    finally:
        if close:
            file.close()
    if not rows:
        raise InvalidArgument("empty paths CSV")
    times = np.array([float(x) for x in rows[0]])
    values = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
    if values.size and values.shape[1] != times.size:
        raise InvalidArgument("row length does not match header")
    return times, values.reshape(-1, times.size)
