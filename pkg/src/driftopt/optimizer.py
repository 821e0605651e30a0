"""Mirror descent over drift coefficients with iterate averaging.

With the Euclidean mirror map ``psi(w) = |w|^2 / 2`` the mirror step is a
plain gradient step and the Bregman projection is the Euclidean projection
onto the feasible coefficient set. The step size is fixed for the whole
run at ``eta0 * (R / Kbar) * sqrt(2 * rho / k)``.
"""
from __future__ import annotations

import csv
import enum
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._errors import InvalidArgument, NumericOverflow, OptimizationError
from .costs import CostFunctionalSpec, as_batch, lipschitz_constants, saa_objective
from .regulator import regulate_batch
from .sensitivity import saa_value_and_gradient
from .subspace import (BasisSpec, DriftFunction, FeasibleSetSpec, basis_sup_norms,
                       project_feasible)

__all__ = [
    "KbarMode",
    "MirrorDescentConfig",
    "IterationRecord",
    "OptimizerTrace",
    "mirror_descent",
    "mirror_descent_surrogate",
    "step_size",
    "kbar_from_cost_bounds",
]


class KbarMode(str, enum.Enum):
    COST_BOUNDS = "cost_bounds"
    GRADIENT_NORMS = "gradient_norms"


@dataclass(frozen=True)
class MirrorDescentConfig:
    num_steps: int
    eta0: float = 0.5
    mirror_map: str = "euclidean"
    rho: float = 1.0
    kbar_mode: KbarMode = KbarMode.COST_BOUNDS

    def __post_init__(self):
        if int(self.num_steps) < 1:
            raise InvalidArgument("num_steps must be >= 1")
        if not 0 < self.eta0 < 1:
            raise InvalidArgument("eta0 must lie in (0, 1)")
        if self.mirror_map != "euclidean":
            raise InvalidArgument("only the Euclidean mirror map is supported")
        if not self.rho > 0:
            raise InvalidArgument("rho must be positive")
        object.__setattr__(self, "num_steps", int(self.num_steps))
        object.__setattr__(self, "kbar_mode", KbarMode(self.kbar_mode))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    coefficients: np.ndarray
    objective: float
    objective_se: float
    grad_norm: float
    step_size: float


@dataclass(eq=False)
class OptimizerTrace:
    records: list
    final_coefficients: np.ndarray
    averaged_solution: DriftFunction | np.ndarray
    averaged_objective: float | None
    step_size: float
    radius: float
    kbar: float
    config: MirrorDescentConfig
    wall_time: dict = field(default_factory=dict)

    @property
    def averaged_coefficients(self) -> np.ndarray:
        a = self.averaged_solution
        return a.coefficients if isinstance(a, DriftFunction) else np.asarray(a)

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def to_csv(self, file) -> None:
        """Columns: iteration, objective, grad_norm, step, then coefficients a1..an."""
        close = False
        if not hasattr(file, "write"):
            file = open(file, "w", newline="", encoding="utf-8")
            close = True
        try:
            w = csv.writer(file, lineterminator="\n")
            n = len(self.final_coefficients)
            w.writerow(["iteration", "objective", "grad_norm", "step"]
                       + [f"a{j + 1}" for j in range(n)])
            for r in self.records:
                w.writerow([r.iteration, repr(r.objective), repr(r.grad_norm),
                            repr(r.step_size)] + [repr(float(c)) for c in r.coefficients])
        finally:
            if close:
                file.close()

    def summary(self) -> dict:
        """JSON-ready summary (no timings, so it is reproducible byte for byte)."""
        return {
            "num_steps": self.config.num_steps,
            "eta0": self.config.eta0,
            "rho": self.config.rho,
            "kbar_mode": self.config.kbar_mode.value,
            "step_size": self.step_size,
            "radius": self.radius,
            "kbar": self.kbar,
            "final_coefficients": [float(c) for c in self.final_coefficients],
            "averaged_coefficients": [float(c) for c in self.averaged_coefficients],
            "averaged_objective": self.averaged_objective,
            "initial_objective": self.records[0].objective if self.records else None,
        }

    def to_json(self, file) -> None:
        text = json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"
        if hasattr(file, "write"):
            file.write(text)
        else:
            with open(file, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)


def step_size(eta0: float, radius: float, kbar: float, rho: float, k: int) -> float:
    """``eta0 * (R / Kbar) * sqrt(2 rho / k)``; zero when ``Kbar`` is zero."""
    if kbar <= 0:
        return 0.0
    return eta0 * (radius / kbar) * math.sqrt(2.0 * rho / k)


def kbar_from_cost_bounds(batch, cost, basis, feas, tie_tol=None) -> float:
    """Mean per-path Lipschitz constant, converted to a bound on the coefficient gradient.

    A drift change ``delta`` in coefficient ``j`` moves the drift by at most
    ``|delta| * |P_j|_inf`` in sup norm, so the Euclidean norm of the
    coefficient gradient is at most ``K_z * |(|P_1|_inf, ..., |P_n|_inf)|_2``.
    """
    reg = np.concatenate([regulate_batch(blk, tie_tol).regulated
                          for _, blk in batch.iter_chunks()], axis=0)
    kz = lipschitz_constants(reg, batch.grid, cost, feas.sup_diameter(basis))
    return float(np.mean(kz) * np.linalg.norm(basis_sup_norms(basis)))


def _warmup_points(feas: FeasibleSetSpec, n: int):
    lo, hi = feas.bounding_box(n)
    pts = [np.zeros(n)]
    for j in range(n):
        for v in (lo[j], hi[j]):
            e = np.zeros(n)
            e[j] = v
            pts.append(project_feasible(e, feas))
    return pts


def _run(value_grad: Callable, n: int, feas: FeasibleSetSpec, eta: float, k: int,
         timings: dict):
    x = np.zeros(n)
    if not feas.contains(x):
        raise InvalidArgument("the zero starting point must be feasible")
    records = []
    total = np.zeros(n)
    for j in range(k):
        t0 = time.perf_counter()
        try:
            value, se, grad = value_grad(x)
        except NumericOverflow as exc:
            raise OptimizationError(f"iteration {j}: {exc}", iteration=j,
                                    path_index=getattr(exc, "path_index", None)) from exc
        grad = np.asarray(grad, dtype=float)
        if not np.all(np.isfinite(grad)):
            raise OptimizationError(f"iteration {j}: non-finite gradient", iteration=j)
        t1 = time.perf_counter()
        records.append(IterationRecord(j, x.copy(), float(value), float(se),
                                       float(np.linalg.norm(grad)), eta))
        x = project_feasible(x - eta * grad, feas)
        total += x
        timings["gradient"] = timings.get("gradient", 0.0) + (t1 - t0)
        timings["projection"] = timings.get("projection", 0.0) + (time.perf_counter() - t1)
    avg = total / k
    if not feas.contains(avg):
        avg = project_feasible(avg, feas)
    return records, x, avg


def mirror_descent(paths, cost: CostFunctionalSpec, basis: BasisSpec, feas: FeasibleSetSpec,
                   config: MirrorDescentConfig, tie_tol=None, threads=None,
                   evaluate_average: bool = True) -> OptimizerTrace:
    """Run ``k`` mirror-descent steps on the sample-average objective.

    Parameters
    ----------
    paths : PathBatch or sequence of DiscretePath
        Frozen driving paths ``Z_i``, reused at every iteration.
    cost, basis, feas :
        Cost functional, drift basis and feasible coefficient set.
    config : MirrorDescentConfig
    evaluate_average : bool
        Also evaluate the objective at the averaged solution.

    Returns
    -------
    OptimizerTrace
    """
    timings = {}
    t0 = time.perf_counter()
    batch = as_batch(paths)
    feas.check_dimension(basis.dimension)
    n = basis.dimension
    radius = math.sqrt(max(feas.mirror_radius_sq(np.zeros(n)), 0.0))

    def value_grad(a):
        F = DriftFunction(basis, a)
        v, se, g = saa_value_and_gradient(batch, F, cost, basis, tie_tol, threads)
        return v, se, g.coefficients

    if config.kbar_mode is KbarMode.COST_BOUNDS:
        kbar = kbar_from_cost_bounds(batch, cost, basis, feas, tie_tol)
    else:
        kbar = 2.0 * max(np.linalg.norm(value_grad(p)[2]) for p in _warmup_points(feas, n))
    timings["setup"] = time.perf_counter() - t0
    eta = step_size(config.eta0, radius, kbar, config.rho, config.num_steps)

    records, last, avg = _run(value_grad, n, feas, eta, config.num_steps, timings)
    averaged = DriftFunction(basis, avg)
    avg_obj = None
    if evaluate_average:
        t1 = time.perf_counter()
        avg_obj = saa_objective(batch, averaged, cost, tie_tol, threads)[0]
        timings["evaluate"] = time.perf_counter() - t1
    return OptimizerTrace(records, last, averaged, avg_obj, eta, radius, kbar, config, timings)


def mirror_descent_surrogate(value_grad: Callable, dim: int, feas: FeasibleSetSpec,
                             config: MirrorDescentConfig, kbar: float) -> OptimizerTrace:
    """Same recursion on a user-supplied deterministic objective.

    ``value_grad(a)`` must return ``(value, std_error, gradient)``. Used to
    check the optimizer against problems with known minimizers.
    """
    feas.check_dimension(dim)
    radius = math.sqrt(max(feas.mirror_radius_sq(np.zeros(dim)), 0.0))
    eta = step_size(config.eta0, radius, kbar, config.rho, config.num_steps)
    timings = {}
    records, last, avg = _run(value_grad, dim, feas, eta, config.num_steps, timings)
    avg_obj = float(value_grad(avg)[0])
    return OptimizerTrace(records, last, avg, avg_obj, eta, radius, kbar, config, timings)
