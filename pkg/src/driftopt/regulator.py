"""One-sided Skorokhod regulator on discrete paths.

For a path ``y`` with running minimum ``m_i = min_{s<=i} y_s`` the regulator
is ``L_i = max(0, -m_i)`` and the regulated path is ``y_i + L_i``.

Argmin sets ``Phi_i = {s <= i : y_s <= m_i + tol}`` (empty when
``m_i > tol``) are stored compactly. A grid index ``s`` enters ``Phi`` at
time ``s`` at most once and, because ``m`` is non-increasing, leaves it
for good at the first time ``m`` falls below ``y_s - tol``; so each set is
a family of half-open membership intervals ``[start, exit)``. On almost
every path the sets are singletons ``{a_i}`` where ``a_i`` is the latest
index attaining the running minimum; paths with near-ties carry their
interval lists explicitly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._errors import InvalidArgument
from .paths import DiscretePath, _check_same_grid

__all__ = [
    "RegulatedBatch",
    "RegulatedOutput",
    "default_tie_tol",
    "regulate_batch",
    "skorokhod_regulate",
    "lipschitz_probe",
]


def default_tie_tol(values: np.ndarray) -> np.ndarray:
    """Per-row default tolerance ``1e-12 * max(1, |y|_inf)``."""
    values = np.atleast_2d(values)
    return 1e-12 * np.maximum(1.0, np.max(np.abs(values), axis=1))


def _membership(y: np.ndarray, m: np.ndarray, tol: float):
    """Membership intervals ``(starts, exits)`` of the argmin sets of one row."""
    idx = np.flatnonzero((m <= tol) & (y <= m + tol))
    # first time i with m_i < y_s - tol; -m is non-decreasing
    exits = np.searchsorted(-m, tol - y[idx], side="right")
    return idx, exits


@dataclass(frozen=True, eq=False)
class RegulatedBatch:
    """Regulator output for ``N`` paths on a common grid (arrays are ``N x M``)."""

    values: np.ndarray
    running_min: np.ndarray
    regulator: np.ndarray
    regulated: np.ndarray
    argmin_index: np.ndarray
    tie_tol: np.ndarray
    tie_rows: np.ndarray
    tie_members: dict

    @property
    def shape(self):
        return self.values.shape

    def members(self, row: int):
        """``(starts, exits)`` membership intervals for ``row``."""
        if row in self.tie_members:
            return self.tie_members[row]
        return _membership(self.values[row], self.running_min[row], float(self.tie_tol[row]))


def regulate_batch(values, tie_tol=None) -> RegulatedBatch:
    """Regulate every row of ``values`` in one vectorized forward sweep.

    Parameters
    ----------
    values : array_like, shape (N, M)
        Input paths, one per row.
    tie_tol : float or array_like of shape (N,), optional
        Tolerance used to build argmin sets. Defaults to
        ``1e-12 * max(1, |y|_inf)`` per row.
    """
    y = np.atleast_2d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(y)):
        raise InvalidArgument("path values must be finite")
    n_rows, n_pts = y.shape
    if tie_tol is None:
        tol = default_tie_tol(y)
    else:
        tol = np.broadcast_to(np.asarray(tie_tol, dtype=float), (n_rows,)).copy()
        if np.any(tol < 0):
            raise InvalidArgument("tie_tol must be nonnegative")

    m = np.minimum.accumulate(y, axis=1)
    L = np.maximum(0.0, -m)
    gamma = y + L

    record = y == m
    pos = np.arange(n_pts)
    argmin = np.maximum.accumulate(np.where(record, pos, 0), axis=1)

    # Near-tie detection: a second live member exists at some time iff either
    # a non-record point comes within tol of the running minimum, or a new
    # record undercuts the previous one by at most tol.
    tcol = tol[:, None]
    active = m <= tcol
    near = (~record) & (y - m <= tcol) & active
    prev_m = np.empty_like(m)
    prev_m[:, 0] = np.inf
    prev_m[:, 1:] = m[:, :-1]
    shallow = record & (prev_m - y <= tcol) & (prev_m <= tcol)
    tie_rows = np.flatnonzero(np.any(near | shallow, axis=1))
    tie_members = {int(r): _membership(y[r], m[r], float(tol[r])) for r in tie_rows}

    for a in (y, m, L, gamma, argmin, tol):
        a.setflags(write=False)
    return RegulatedBatch(y, m, L, gamma, argmin, tol, tie_rows, tie_members)


@dataclass(frozen=True, eq=False)
class RegulatedOutput:
    """Regulated path, regulator path and argmin sets for a single input path."""

    input_path: DiscretePath
    regulated: DiscretePath
    regulator: DiscretePath
    running_min: np.ndarray
    argmin_index: np.ndarray
    tie_tol: float
    member_starts: np.ndarray
    member_exits: np.ndarray

    @property
    def grid(self):
        return self.input_path.grid

    @property
    def has_ties(self) -> bool:
        return bool(np.any(np.bincount(
            np.concatenate([self.member_starts, self.member_exits]),
            weights=np.concatenate([np.ones(self.member_starts.size),
                                    -np.ones(self.member_exits.size)]),
            minlength=self.grid.num_points + 1).cumsum() > 1))

    def argmin_set(self, i: int) -> np.ndarray:
        """Sorted grid indices in ``Phi_i``."""
        alive = (self.member_starts <= i) & (self.member_exits > i)
        return self.member_starts[alive]

    def argmin_sets(self) -> list:
        """Fully materialized sets (quadratic memory; for debugging and oracles)."""
        return [self.argmin_set(i) for i in range(self.grid.num_points)]

    def to_csv(self, file) -> None:
        """Debug dump: columns t, y, L, Gamma, Phi (indices joined by ';')."""
        close = False
        if not hasattr(file, "write"):
            file = open(file, "w", newline="", encoding="utf-8")
            close = True
        try:
            w = csv.writer(file, lineterminator="\n")
            w.writerow(["t", "y", "L", "Gamma", "Phi"])
            for i, t in enumerate(self.grid.times):
                w.writerow([repr(float(t)), repr(float(self.input_path.values[i])),
                            repr(float(self.regulator.values[i])),
                            repr(float(self.regulated.values[i])),
                            ";".join(str(int(s)) for s in self.argmin_set(i))])
        finally:
            if close:
                file.close()

    @classmethod
    def from_batch(cls, batch: RegulatedBatch, row: int, input_path: DiscretePath):
        g = input_path.grid
        starts, exits = batch.members(row)
        return cls(
            input_path=input_path,
            regulated=DiscretePath(g, batch.regulated[row]),
            regulator=DiscretePath(g, batch.regulator[row]),
            running_min=batch.running_min[row],
            argmin_index=batch.argmin_index[row],
            tie_tol=float(batch.tie_tol[row]),
            member_starts=starts,
            member_exits=exits,
        )


def skorokhod_regulate(y: DiscretePath, tie_tol: float | None = None) -> RegulatedOutput:
    """Apply the one-sided Skorokhod map to ``y``.

    >>> from driftopt.paths import make_grid, DiscretePath
    >>> g = make_grid(1.0, 0.5)
    >>> out = skorokhod_regulate(DiscretePath(g, -g.times))
    >>> out.regulator.values, out.regulated.values
    (array([0. , 0.5, 1. ]), array([0., 0., 0.]))
    """
    batch = regulate_batch(y.values[None, :], tie_tol)
    return RegulatedOutput.from_batch(batch, 0, y)


def lipschitz_probe(y1: DiscretePath, y2: DiscretePath) -> float:
    """Ratio ``|Gamma(y1) - Gamma(y2)|_inf / |y1 - y2|_inf`` (0 for equal paths)."""
    _check_same_grid(y1.grid, y2.grid)
    den = np.max(np.abs(y1.values - y2.values))
    if den == 0:
        return 0.0
    b = regulate_batch(np.vstack([y1.values, y2.values]))
    return float(np.max(np.abs(b.regulated[0] - b.regulated[1])) / den)
