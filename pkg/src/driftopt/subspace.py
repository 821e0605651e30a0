"""Finite-dimensional drift subspaces and coefficient-space feasible sets."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._errors import ConditioningError, InvalidArgument
from .paths import DiscretePath, GridSpec

__all__ = [
    "BasisKind",
    "BasisSpec",
    "DriftFunction",
    "FeasibleKind",
    "FeasibleSetSpec",
    "evaluate_basis",
    "evaluate_drift",
    "basis_sup_norms",
    "project_feasible",
    "projection_error_curve",
    "write_basis_csv",
]


class BasisKind(str, enum.Enum):
    INTEGRATED_LEGENDRE = "integrated_legendre"
    HAT = "hat"
    MONOMIAL = "monomial"


@dataclass(frozen=True)
class BasisSpec:
    kind: BasisKind
    dimension: int
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if int(self.dimension) < 1:
            raise InvalidArgument("basis dimension must be >= 1")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise InvalidArgument("basis horizon must be positive")
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "horizon", float(self.horizon))


def _legendre_table(x: np.ndarray, degree: int) -> np.ndarray:
    """Legendre polynomials ``L_0..L_degree`` at ``x`` by the three-term recurrence."""
    out = np.empty((x.size, degree + 1))
    out[:, 0] = 1.0
    if degree >= 1:
        out[:, 1] = x
    for m in range(1, degree):
        out[:, m + 1] = ((2 * m + 1) * x * out[:, m] - m * out[:, m - 1]) / (m + 1)
    return out


def _eval_kind(basis: BasisSpec, t: np.ndarray) -> np.ndarray:
    T, n = basis.horizon, basis.dimension
    t = np.asarray(t, dtype=float)
    if basis.kind is BasisKind.INTEGRATED_LEGENDRE:
        # int_{-1}^{x} L_m = (L_{m+1}(x) - L_{m-1}(x)) / (2m + 1) for m >= 1
        x = 2.0 * t / T - 1.0
        leg = _legendre_table(x, n)
        cols = [t.copy()]
        for j in range(2, n + 1):
            m = j - 1
            cols.append(0.5 * T * (leg[:, m + 1] - leg[:, m - 1]) / (2 * m + 1))
        out = np.column_stack(cols)
    elif basis.kind is BasisKind.HAT:
        knots = np.arange(n + 1) * (T / n)
        width = T / n
        out = np.maximum(0.0, 1.0 - np.abs(t[:, None] - knots[None, 1:]) / width)
    else:
        out = (t[:, None] / T) ** np.arange(1, n + 1)[None, :]
    out[t == 0.0, :] = 0.0
    return out


def evaluate_basis(basis: BasisSpec, grid: GridSpec) -> np.ndarray:
    """Basis matrix of shape ``(num_points, n)``; column ``j`` is ``P_{j+1}``."""
    if not math.isclose(basis.horizon, grid.horizon, rel_tol=1e-12):
        raise InvalidArgument("basis horizon differs from grid horizon")
    return _eval_kind(basis, grid.times)


def write_basis_csv(basis: BasisSpec, grid: GridSpec, file) -> None:
    """Columns ``t, P1..Pn`` on ``grid``."""
    close = False
    if not hasattr(file, "write"):
        file = open(file, "w", newline="", encoding="utf-8")
        close = True
    try:
        w = csv.writer(file, lineterminator="\n")
        w.writerow(["t"] + [f"P{j + 1}" for j in range(basis.dimension)])
        for t, row in zip(grid.times, evaluate_basis(basis, grid)):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    finally:
        if close:
            file.close()


def basis_sup_norms(basis: BasisSpec) -> np.ndarray:
    """Upper bounds on ``|P_j|_inf`` over ``[0, T]`` (exact for hat and monomial)."""
    n, T = basis.dimension, basis.horizon
    if basis.kind is BasisKind.INTEGRATED_LEGENDRE:
        j = np.arange(1, n + 1)
        # |L_{j} - L_{j-2}| <= 2 on [-1, 1]
        b = T / (2 * j - 1.0)
        b[0] = T
        return b
    return np.ones(n)


@dataclass(frozen=True, eq=False)
class DriftFunction:
    basis: BasisSpec
    coefficients: np.ndarray

    def __post_init__(self):
        a = np.array(self.coefficients, dtype=float).reshape(-1)
        if a.size != self.basis.dimension:
            raise InvalidArgument(
                f"expected {self.basis.dimension} coefficients, got {a.size}")
        if not np.all(np.isfinite(a)):
            raise InvalidArgument("coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)

    @classmethod
    def zero(cls, basis: BasisSpec) -> "DriftFunction":
        return cls(basis, np.zeros(basis.dimension))

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return _eval_kind(self.basis, t) @ self.coefficients


def evaluate_drift(F: DriftFunction, grid: GridSpec) -> DiscretePath:
    values = evaluate_basis(F.basis, grid) @ F.coefficients
    values[0] = 0.0
    return DiscretePath(grid, values)


class FeasibleKind(str, enum.Enum):
    L2_BALL = "l2_ball"
    BOX = "box"


@dataclass(frozen=True, eq=False)
class FeasibleSetSpec:
    """Closed convex coefficient set: a centred Euclidean ball or a box.

    ``radius`` is used for balls; ``lower``/``upper`` (length ``n``) for boxes.
    """

    kind: FeasibleKind
    radius: float | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FeasibleKind(self.kind))
        if self.kind is FeasibleKind.L2_BALL:
            if self.radius is None or not (math.isfinite(self.radius) and self.radius > 0):
                raise InvalidArgument("ball radius must be positive and finite")
            object.__setattr__(self, "radius", float(self.radius))
        else:
            lo = np.array(self.lower, dtype=float).reshape(-1)
            hi = np.array(self.upper, dtype=float).reshape(-1)
            if lo.shape != hi.shape or lo.size == 0:
                raise InvalidArgument("box bounds must be equal-length, nonempty")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo <= hi)):
                raise InvalidArgument("box bounds must be finite with lower <= upper")
            lo.setflags(write=False)
            hi.setflags(write=False)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    @classmethod
    def ball(cls, radius: float) -> "FeasibleSetSpec":
        return cls(FeasibleKind.L2_BALL, radius=radius)

    @classmethod
    def box(cls, lower, upper, n: int | None = None) -> "FeasibleSetSpec":
        if n is not None:
            lower = np.full(n, lower, dtype=float) if np.ndim(lower) == 0 else lower
            upper = np.full(n, upper, dtype=float) if np.ndim(upper) == 0 else upper
        return cls(FeasibleKind.BOX, lower=lower, upper=upper)

    def check_dimension(self, n: int):
        if self.kind is FeasibleKind.BOX and self.lower.size != n:
            raise InvalidArgument(f"box has {self.lower.size} coordinates, basis has {n}")

    def contains(self, a, tol: float = 0.0) -> bool:
        a = np.asarray(a, dtype=float)
        if self.kind is FeasibleKind.L2_BALL:
            return bool(np.linalg.norm(a) <= self.radius + tol)
        return bool(np.all(a >= self.lower - tol) and np.all(a <= self.upper + tol))

    def diameter(self) -> float:
        """Euclidean diameter of the coefficient set."""
        if self.kind is FeasibleKind.L2_BALL:
            return 2.0 * self.radius
        return float(np.linalg.norm(self.upper - self.lower))

    def sup_diameter(self, basis: BasisSpec) -> float:
        """Upper bound on ``sup |F1 - F2|_inf`` over drifts with feasible coefficients."""
        s = basis_sup_norms(basis)
        if self.kind is FeasibleKind.L2_BALL:
            return 2.0 * self.radius * float(np.linalg.norm(s))
        self.check_dimension(basis.dimension)
        return float(np.sum((self.upper - self.lower) * s))

    def mirror_radius_sq(self, start=None) -> float:
        """``sup_w psi(w) - psi(start)`` for the Euclidean map ``psi = |w|^2 / 2``."""
        if self.kind is FeasibleKind.L2_BALL:
            top = 0.5 * self.radius**2
        else:
            top = 0.5 * float(np.sum(np.maximum(self.lower**2, self.upper**2)))
        base = 0.0 if start is None else 0.5 * float(np.dot(start, start))
        return top - base

    def bounding_box(self, n: int):
        if self.kind is FeasibleKind.L2_BALL:
            return np.full(n, -self.radius), np.full(n, self.radius)
        return self.lower.copy(), self.upper.copy()


def project_feasible(a, feas: FeasibleSetSpec) -> np.ndarray:
    """Euclidean projection of a coefficient vector onto ``feas``.

    >>> project_feasible([1.2, 1.6], FeasibleSetSpec.ball(1.0))
    array([0.6, 0.8])
    """
    a = np.array(a, dtype=float)
    if feas.kind is FeasibleKind.L2_BALL:
        nrm = np.linalg.norm(a)
        if nrm > feas.radius:
            a = a * (feas.radius / nrm)
            # rounding can leave |a| one ulp above the radius
            while np.linalg.norm(a) > feas.radius:
                a = np.nextafter(a, 0.0)
        return a
    feas.check_dimension(a.size)
    return np.clip(a, feas.lower, feas.upper)


def projection_error_curve(target: DiscretePath, basis_kind, n_values: Sequence[int],
                           max_condition: float = 1e12) -> list[tuple[int, float]]:
    """Sup-norm residual of the least-squares fit of ``target`` on the first ``n`` basis columns.

    Raises
    ------
    ConditioningError
        If a basis matrix is numerically rank deficient on the target's grid.
    """
    grid = target.grid
    out = []
    for n in n_values:
        basis = BasisSpec(basis_kind, int(n), grid.horizon)
        P = evaluate_basis(basis, grid)
        sv = np.linalg.svd(P, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
        if cond > max_condition:
            raise ConditioningError(
                f"basis matrix for n={n} is rank deficient (cond ~ {cond:.3g})", cond)
        coef, *_ = np.linalg.lstsq(P, target.values, rcond=None)
        out.append((int(n), float(np.max(np.abs(target.values - P @ coef)))))
    return out
