"""Pathwise cost functionals and the sample-average objective.

A cost is ``a1 * int_0^T g(z(s)) ds + a2 * G(z(T))`` with the integral
approximated by the trapezoidal rule on the path's grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._errors import InvalidArgument, NumericOverflow
from ._parallel import map_chunks
from .paths import DiscretePath, GridSpec, PathBatch
from .regulator import regulate_batch
from .subspace import DriftFunction, evaluate_drift

__all__ = [
    "CostFunctionalSpec",
    "PRESETS",
    "linear_holding",
    "quadratic",
    "terminal_tracking",
    "make_cost",
    "pathwise_cost",
    "pathwise_cost_batch",
    "saa_objective",
    "per_path_objective",
    "lipschitz_constants",
    "check_convexity",
    "as_batch",
    "drift_values",
]

Fn = Callable[[np.ndarray], np.ndarray]


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class CostFunctionalSpec:
    """Running/terminal cost with optional derivative callbacks.

    Callables must accept and return numpy arrays elementwise.
    """

    running_weight: float = 1.0
    terminal_weight: float = 1.0
    g: Fn = _zero
    G: Fn = _zero
    dg: Fn | None = None
    dG: Fn | None = None
    convex: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for w in (self.running_weight, self.terminal_weight):
            if not (math.isfinite(w) and w >= 0):
                raise InvalidArgument("cost weights must be finite and nonnegative")

    @property
    def differentiable(self) -> bool:
        return self.dg is not None and self.dG is not None

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params),
                "running_weight": self.running_weight,
                "terminal_weight": self.terminal_weight}


def linear_holding(a1: float = 1.0, a2: float = 1.0) -> CostFunctionalSpec:
    return CostFunctionalSpec(
        a1, a2, g=lambda x: np.asarray(x, dtype=float) * 1.0, G=lambda x: np.asarray(x, dtype=float) * 1.0,
        dg=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        dG=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        convex=True, name="linear", params={"a1": a1, "a2": a2})


def quadratic(a1: float = 1.0, a2: float = 1.0) -> CostFunctionalSpec:
    # convex and nondecreasing on the regulated (nonnegative) state space
    return CostFunctionalSpec(
        a1, a2, g=np.square, G=np.square, dg=lambda x: 2.0 * np.asarray(x, dtype=float),
        dG=lambda x: 2.0 * np.asarray(x, dtype=float),
        convex=True, name="quadratic", params={"a1": a1, "a2": a2})


def terminal_tracking(target: float = 1.0, a2: float = 1.0) -> CostFunctionalSpec:
    c = float(target)
    return CostFunctionalSpec(
        0.0, a2, g=_zero, G=lambda x: (np.asarray(x, dtype=float) - c) ** 2,
        dg=_zero, dG=lambda x: 2.0 * (np.asarray(x, dtype=float) - c),
        convex=False, name="terminal_tracking", params={"target": c, "a2": a2})


PRESETS = {
    "linear": linear_holding,
    "quadratic": quadratic,
    "terminal_tracking": terminal_tracking,
}


def make_cost(name: str, **params) -> CostFunctionalSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InvalidArgument(f"unknown cost preset {name!r}; choose from {sorted(PRESETS)}")
    try:
        return factory(**params)
    except TypeError as exc:
        raise InvalidArgument(f"bad parameters for cost {name!r}: {exc}") from None


def pathwise_cost_batch(values: np.ndarray, grid: GridSpec, cost: CostFunctionalSpec) -> np.ndarray:
    """Cost of each row of ``values`` (already regulated, if desired)."""
    values = np.atleast_2d(values)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.zeros(values.shape[0])
        if cost.running_weight:
            out += cost.running_weight * (cost.g(values) * grid.trapezoid_weights).sum(axis=1)
        if cost.terminal_weight:
            out += cost.terminal_weight * cost.G(values[:, -1])
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise NumericOverflow(f"non-finite cost on path {bad}")
    return out


def pathwise_cost(z: DiscretePath, cost: CostFunctionalSpec) -> float:
    """``a1 * trapezoid(g(z)) + a2 * G(z(T))`` for one path."""
    return float(pathwise_cost_batch(z.values[None, :], z.grid, cost)[0])


def as_batch(paths) -> PathBatch:
    """Accept a :class:`PathBatch` or a nonempty sequence of :class:`DiscretePath`."""
    if isinstance(paths, PathBatch):
        return paths
    paths = list(paths)
    if not paths:
        raise InvalidArgument("empty path list")
    grid = paths[0].grid
    for p in paths[1:]:
        if not p.grid.same_as(grid):
            raise InvalidArgument("paths must share one grid")
    return PathBatch.from_array(grid, np.vstack([p.values for p in paths]))


def drift_values(F, grid: GridSpec) -> np.ndarray:
    """Drift on ``grid`` from a DriftFunction, DiscretePath, array or ``None``."""
    if F is None:
        return np.zeros(grid.num_points)
    if isinstance(F, DriftFunction):
        return evaluate_drift(F, grid).values
    if isinstance(F, DiscretePath):
        if not F.grid.same_as(grid):
            raise InvalidArgument("drift and paths live on different grids")
        return F.values
    v = np.asarray(F, dtype=float)
    if v.shape != (grid.num_points,):
        raise InvalidArgument("drift array does not match the grid")
    return v


def per_path_objective(paths, F, cost: CostFunctionalSpec, tie_tol=None, threads=None) -> np.ndarray:
    """Pathwise costs of ``Gamma(Z_i + F)`` for every path, in path order."""
    batch = as_batch(paths)
    f = drift_values(F, batch.grid)

    def work(a, b):
        reg = regulate_batch(batch.block(a, b) + f, tie_tol)
        return pathwise_cost_batch(reg.regulated, batch.grid, cost)

    return np.concatenate(map_chunks(work, len(batch), threads))


def _mean_se(x: np.ndarray):
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return mean, se


def saa_objective(paths, F, cost: CostFunctionalSpec, tie_tol=None, threads=None):
    """Sample mean and standard error of ``cost(Gamma(Z_i + F))`` over the batch.

    Returns
    -------
    mean, std_error : float
        ``std_error`` is 0 for a single path.
    """
    return _mean_se(per_path_objective(paths, F, cost, tie_tol, threads))


def _max_abs_on(fn, lo, hi, samples=257):
    x = np.linspace(lo, hi, samples)
    return np.max(np.abs(fn(x)), axis=0)


def lipschitz_constants(regulated: np.ndarray, grid: GridSpec, cost: CostFunctionalSpec,
                        drift_sup_diameter: float = 0.0, inflate: float = 0.10,
                        regulator_lipschitz: float = 2.0) -> np.ndarray:
    """Per-path Lipschitz constants of ``F -> cost(Gamma(z + F))`` in sup norm.

    Derivative bounds are taken over each path's state envelope: its
    regulated range widened by ``regulator_lipschitz * drift_sup_diameter``
    (every feasible drift moves the regulated path at most that far) and
    inflated by ``inflate``.
    """
    if not cost.differentiable:
        raise InvalidArgument("cost has no derivative callbacks")
    regulated = np.atleast_2d(regulated)
    shift = regulator_lipschitz * drift_sup_diameter
    lo = regulated.min(axis=1) - shift
    hi = regulated.max(axis=1) + shift
    pad = inflate * np.maximum(hi - lo, np.maximum(np.abs(lo), np.abs(hi)))
    lo, hi = lo - pad, hi + pad
    k = np.zeros(regulated.shape[0])
    if cost.running_weight:
        k += cost.running_weight * grid.horizon * _max_abs_on(cost.dg, lo, hi)
    if cost.terminal_weight:
        k += cost.terminal_weight * _max_abs_on(cost.dG, lo, hi)
    return regulator_lipschitz * k


def check_convexity(cost: CostFunctionalSpec, lo: float, hi: float, trials: int = 1000,
                    tol: float = 1e-9, seed: int = 0) -> bool:
    """Random midpoint-secant and monotonicity spot checks of g and G on ``[lo, hi]``."""
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(lo, hi, (2, trials))
    for fn, dfn in ((cost.g, cost.dg), (cost.G, cost.dG)):
        mid = fn((x + y) / 2)
        if np.any(mid > (fn(x) + fn(y)) / 2 + tol * (1 + np.abs(mid))):
            return False
        if dfn is not None and np.any(dfn(x) < -tol):
            return False
    return True
