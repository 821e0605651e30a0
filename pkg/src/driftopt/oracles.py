"""Brute-force twins of the fast paths and the statistical studies built on them.

Nothing here is tuned for speed. The regulator and derivative oracles
follow the definitions literally, the coefficient-grid search evaluates
every grid point, and the studies report log-log slopes with OLS
confidence intervals.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from ._errors import InvalidArgument
from .allocator import BudgetAllocation, ErrorModel
from .costs import (CostFunctionalSpec, as_batch, drift_values, lipschitz_constants, make_cost,
                    per_path_objective, pathwise_cost)
from .optimizer import KbarMode, MirrorDescentConfig, mirror_descent
from .paths import (WEAK_ORDER, DiscretePath, GridSpec, PathBatch, PathBatchSpec, Scheme,
                    generate_paths, make_grid)
from .regulator import RegulatedOutput, default_tie_tol, regulate_batch
from .sensitivity import d_cost_batch, saa_value_and_gradient
from .subspace import (BasisKind, BasisSpec, DriftFunction, FeasibleKind, FeasibleSetSpec,
                       basis_sup_norms, evaluate_basis, project_feasible, projection_error_curve)

__all__ = [
    "LogLogFit",
    "StudyReport",
    "fit_loglog",
    "fd_directional_derivative",
    "brute_force_regulate",
    "brute_force_d_gamma",
    "grid_search_optimum",
    "GridSearchResult",
    "grid_tolerance",
    "solve_saa_reference",
    "stationary_allocation",
    "sup_gap",
    "unbiasedness_study",
    "equiconvergence_study",
    "RateProblem",
    "default_rate_problem",
    "rate_decomposition_study",
    "subbatch",
]


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    stderr: float


def fit_loglog(x, y, level: float = 0.95) -> LogLogFit:
    """OLS fit of ``log y = a + b log x`` with a t-based confidence interval for ``b``.

    >>> f = fit_loglog([1, 2, 4, 8], [1, 0.5, 0.25, 0.125])
    >>> round(f.slope, 12)
    -1.0
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 4:
        raise InvalidArgument("a log-log fit needs at least 4 paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgument("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    X = np.column_stack([lx, np.ones_like(lx)])
    (b, a), *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - X @ np.array([b, a])
    dof = x.size - 2
    s2 = float(resid @ resid) / dof
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    se = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    q = stats.t.ppf(0.5 + level / 2, dof)
    return LogLogFit(float(b), float(a), float(b - q * se), float(b + q * se), se)


@dataclass
class StudyReport:
    """Outcome of one empirical study; serializable to JSON and CSV."""

    study_name: str
    variable: str
    x: list
    y: list
    y_se: list
    slope: float | None = None
    intercept: float | None = None
    slope_ci: tuple | None = None
    window: tuple | None = None
    passed: bool | None = None
    inconclusive: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("slope_ci", "window"):
            if d[key] is not None:
                d[key] = [float(v) for v in d[key]]
        return _jsonable(d)

    def to_json(self, file) -> None:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if hasattr(file, "write"):
            file.write(text)
        else:
            with open(file, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)

    def to_csv(self, file) -> None:
        """Point cloud ``(x, y, y_se)`` for plotting."""
        close = False
        if not hasattr(file, "write"):
            file = open(file, "w", newline="", encoding="utf-8")
            close = True
        try:
            w = csv.writer(file, lineterminator="\n")
            w.writerow([self.variable, "value", "std_error"])
            for a, b, c in zip(self.x, self.y, self.y_se):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(c))])
        finally:
            if close:
                file.close()

    def summary_line(self) -> str:
        verdict = {True: "PASS", False: "FAIL", None: "INFO"}[self.passed]
        extra = " (inconclusive)" if self.inconclusive else ""
        if self.slope is None:
            return f"{verdict} {self.study_name}{extra}"
        return (f"{verdict} {self.study_name}: slope {self.slope:.3f} "
                f"CI [{self.slope_ci[0]:.3f}, {self.slope_ci[1]:.3f}] "
                f"window [{self.window[0]:.3f}, {self.window[1]:.3f}]{extra}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _slope_report(name, variable, x, y, se, window, details=None, decreasing=True):
    if min(y) <= 0:
        # an exact zero gap leaves nothing to fit
        return StudyReport(name, variable, [float(v) for v in x], [float(v) for v in y],
                           [float(v) for v in se], window=tuple(window), passed=None,
                           inconclusive=True, details=dict(details or {}))
    fit = fit_loglog(x, y)
    passed = window[0] <= fit.slope <= window[1]
    return StudyReport(name, variable, [float(v) for v in x], [float(v) for v in y],
                       [float(v) for v in se], fit.slope, fit.intercept,
                       (fit.ci_low, fit.ci_high), tuple(window), bool(passed),
                       inconclusive=not _dominance_ok(y, se, decreasing),
                       details=dict(details or {}))


def _dominance_ok(y, se, decreasing=True) -> bool:
    """Gap should shrink along the sweep, up to two standard errors."""
    y, se = np.asarray(y, float), np.asarray(se, float)
    step = np.diff(y) if decreasing else -np.diff(y)
    slack = 2.0 * (se[1:] + se[:-1]) + 1e-12 * np.max(np.abs(y))
    return bool(np.all(step <= slack))


# ---------------------------------------------------------------- pathwise oracles

def fd_directional_derivative(y: DiscretePath, u: DiscretePath, f=None, eps: float = 1e-8,
                              mode: str = "forward"):
    """Finite-difference directional derivative of ``f`` at ``y`` along ``u``.

    Parameters
    ----------
    f : None, CostFunctionalSpec or callable
        ``None`` differentiates the regulated path itself and returns a
        :class:`DiscretePath`; a cost differentiates ``cost(Gamma(.))``; any
        other callable maps a DiscretePath to a float or an array.
    mode : {"forward", "central"}
    """
    if eps <= 0:
        raise InvalidArgument("eps must be positive")
    if f is None:
        fn = lambda p: regulate_batch(p.values[None, :]).regulated[0]
    elif isinstance(f, CostFunctionalSpec):
        fn = lambda p: pathwise_cost(DiscretePath(p.grid, regulate_batch(p.values[None, :]).regulated[0]), f)
    else:
        fn = f
    if mode == "forward":
        d = (np.asarray(fn(y + u * eps)) - np.asarray(fn(y))) / eps
    elif mode == "central":
        d = (np.asarray(fn(y + u * eps)) - np.asarray(fn(y + u * (-eps)))) / (2 * eps)
    else:
        raise InvalidArgument("mode must be 'forward' or 'central'")
    if f is None:
        return DiscretePath(y.grid, d)
    return float(d) if np.ndim(d) == 0 else d


def brute_force_regulate(y: DiscretePath, tie_tol: float | None = None) -> RegulatedOutput:
    """Regulator by the literal definition ``L_t = max(0, max_{s<=t} -y_s)`` (O(M^2))."""
    v = y.values
    M = v.size
    tol = float(default_tie_tol(v)[0]) if tie_tol is None else float(tie_tol)
    L = np.empty(M)
    m = np.empty(M)
    argmin = np.empty(M, dtype=np.int64)
    member = np.zeros((M, M), dtype=bool)  # member[i, s]: s in Phi_i
    for i in range(M):
        past = v[: i + 1]
        m[i] = np.min(past)
        L[i] = max(0.0, np.max(-past))
        argmin[i] = np.flatnonzero(past == m[i])[-1]
        if m[i] <= tol:
            member[i, : i + 1] = past <= m[i] + tol
    starts, exits = [], []
    for s in range(M):
        rows = np.flatnonzero(member[:, s])
        if rows.size:
            starts.append(rows[0])
            exits.append(rows[-1] + 1)
    g = y.grid
    return RegulatedOutput(
        input_path=y, regulated=DiscretePath(g, v + L), regulator=DiscretePath(g, L),
        running_min=m, argmin_index=argmin, tie_tol=tol,
        member_starts=np.array(starts, dtype=np.int64),
        member_exits=np.array(exits, dtype=np.int64))


def brute_force_d_gamma(y: DiscretePath, u: DiscretePath, tie_tol: float | None = None) -> np.ndarray:
    """Directional derivative of the regulated path from explicitly listed argmin sets."""
    v, w = y.values, u.values
    tol = float(default_tie_tol(v)[0]) if tie_tol is None else float(tie_tol)
    out = np.empty(v.size)
    for i in range(v.size):
        m = np.min(v[: i + 1])
        if m > tol:
            out[i] = w[i]
            continue
        phi = np.flatnonzero(v[: i + 1] <= m + tol)
        best = np.max(-w[phi])
        if m >= -tol:
            best = max(0.0, best)
        out[i] = w[i] + best
    return out


# ---------------------------------------------------------------- optimum oracles

@dataclass(frozen=True, eq=False)
class GridSearchResult:
    coefficients: np.ndarray
    objective: float
    spacing: float
    num_points: int

    def __iter__(self):
        return iter((self.coefficients, self.objective))


def grid_search_optimum(paths, cost: CostFunctionalSpec, basis: BasisSpec, feas: FeasibleSetSpec,
                        grid_resolution: int = 101, tie_tol=None, threads=None) -> GridSearchResult:
    """Exhaustive minimum of the sample-average objective on a coefficient grid.

    The grid is uniform over the bounding box of ``feas`` with
    ``grid_resolution`` points per axis; infeasible points are skipped.
    Only ``n <= 2`` is supported. Ties go to the first point in
    lexicographic order.
    """
    n = basis.dimension
    if n > 2:
        raise InvalidArgument("exhaustive grid search is only supported for n <= 2")
    if grid_resolution < 2:
        raise InvalidArgument("grid_resolution must be >= 2")
    feas.check_dimension(n)
    batch = as_batch(paths)
    lo, hi = feas.bounding_box(n)
    axes = [np.linspace(lo[j], hi[j], grid_resolution) for j in range(n)]
    spacing = float(max((hi - lo) / (grid_resolution - 1)))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    pts = pts[[feas.contains(p) for p in pts]]
    P = evaluate_basis(basis, batch.grid)
    best, best_val = None, math.inf
    for p in pts:
        val = float(np.mean(per_path_objective(batch, P @ p, cost, tie_tol, threads)))
        if val < best_val:
            best, best_val = p, val
    return GridSearchResult(np.array(best), best_val, spacing, int(pts.shape[0]))


def grid_tolerance(paths, cost: CostFunctionalSpec, basis: BasisSpec, feas: FeasibleSetSpec,
                   spacing: float, tie_tol=None) -> float:
    """``2 * spacing * Khat`` with ``Khat`` the coefficient-space Lipschitz constant.

    One grid cell moves the drift by at most ``spacing * sum_j |P_j|_inf``
    in sup norm, so ``Khat = mean(K_z) * sum_j |P_j|_inf``.
    """
    batch = as_batch(paths)
    reg = np.concatenate([regulate_batch(blk, tie_tol).regulated
                          for _, blk in batch.iter_chunks()], axis=0)
    kz = lipschitz_constants(reg, batch.grid, cost, feas.sup_diameter(basis))
    return 2.0 * spacing * float(np.mean(kz) * np.sum(basis_sup_norms(basis)))


def solve_saa_reference(paths, cost: CostFunctionalSpec, basis: BasisSpec, feas: FeasibleSetSpec,
                        x0=None, tie_tol=None, threads=None, tol: float = 1e-12):
    """High-accuracy SAA minimizer by quasi-Newton with the pathwise gradient.

    Boxes use L-BFGS-B; balls use SLSQP with the constraint
    ``r^2 - |a|^2 >= 0``. The result is projected onto ``feas``.

    Returns
    -------
    coefficients : ndarray
    objective : float
    """
    batch = as_batch(paths)
    n = basis.dimension
    feas.check_dimension(n)
    start = np.zeros(n) if x0 is None else project_feasible(x0, feas)

    def fun(a):
        a = project_feasible(a, feas)
        v, _, g = saa_value_and_gradient(batch, DriftFunction(basis, a), cost, basis,
                                         tie_tol, threads)
        return v, g.coefficients

    if feas.kind is FeasibleKind.BOX:
        res = optimize.minimize(fun, start, jac=True, method="L-BFGS-B",
                                bounds=list(zip(feas.lower, feas.upper)),
                                options={"ftol": tol, "gtol": 1e-10, "maxiter": 500})
    else:
        r2 = feas.radius**2
        cons = {"type": "ineq", "fun": lambda a: r2 - a @ a, "jac": lambda a: -2.0 * a}
        res = optimize.minimize(fun, start, jac=True, method="SLSQP", constraints=[cons],
                                options={"ftol": tol, "maxiter": 500})
    a = project_feasible(res.x, feas)
    return a, fun(a)[0]


def stationary_allocation(model: ErrorModel, budget: float) -> dict:
    """Continuous unconstrained optimum of the error model for any ``alpha, beta``.

    Stationarity of ``c1/sqrt k + c2/sqrt N + c3 h^b + c4 n^-a`` under
    ``k N n / h = B`` equates ``c1/(2 sqrt k) = c2/(2 sqrt N) = b c3 h^b =
    a c4 n^-a =: lam``; the budget then fixes ``lam``.
    """
    a, b = model.alpha, model.beta
    lam = (model.c1**2 * model.c2**2 * (a * model.c4) ** (1 / a) * (b * model.c3) ** (1 / b)
           / (16.0 * budget)) ** (1.0 / (4 + 1 / a + 1 / b))
    return {"k": (model.c1 / (2 * lam)) ** 2, "N": (model.c2 / (2 * lam)) ** 2,
            "n": (a * model.c4 / lam) ** (1 / a), "h": (lam / (b * model.c3)) ** (1 / b)}


# ---------------------------------------------------------------- studies

def subbatch(batch: PathBatch, start: int, stop: int) -> PathBatch:
    """Rows ``start:stop`` of a batch as a batch of their own."""
    spec = replace(batch.spec, count=stop - start)
    return PathBatch(spec, batch.grid, values=batch.block(start, stop))


def _pooled_z(m1, s1, m2, s2):
    diff = m1 - m2
    se = math.hypot(s1, s2)
    # central differences cannot resolve anything below ~sqrt(eps) * scale
    floor = math.sqrt(np.finfo(float).eps) * max(1.0, abs(m1), abs(m2))
    if se <= floor:
        return 0.0 if abs(diff) <= floor else math.copysign(math.inf, diff)
    return diff / se


def _batch_means(x: np.ndarray, num_batches: int):
    means = x.reshape(num_batches, -1).mean(axis=1)
    return means, float(means.mean()), float(means.std(ddof=1) / math.sqrt(num_batches))


def unbiasedness_study(num_batches: int, batch_N: int, F, direction, cost: CostFunctionalSpec,
                       grid: GridSpec, sigma: float = 1.0, initial_x: float = 0.0, seed: int = 0,
                       eps: float = 1e-5, scheme=Scheme.EULER, rerun: bool = True,
                       threads=None) -> StudyReport:
    """Compare the mean pathwise derivative with a central difference of the mean cost.

    The derivative estimator and the finite difference use independent
    path batches (the difference itself uses common paths at ``+-eps``),
    so the z-score tests the expectation identity and not a pathwise one.
    One rerun with fresh seeds is allowed when ``|z| > 3``.
    """
    if num_batches < 30:
        raise InvalidArgument("num_batches must be >= 30")
    f = drift_values(F, grid)
    u = drift_values(direction, grid)
    attempts = []
    for attempt in range(2 if rerun else 1):
        s = seed + 2 * attempt
        total = num_batches * batch_N
        spec = PathBatchSpec(total, scheme, sigma, initial_x, s)
        est_paths = generate_paths(spec, grid, threads=threads)
        fd_paths = generate_paths(replace(spec, seed=s + 1), grid, threads=threads)

        derivs = np.concatenate([
            d_cost_batch(regulate_batch(blk + f), grid, u, cost)[:, 0]
            for _, blk in est_paths.iter_chunks()])
        plus = per_path_objective(fd_paths, f + eps * u, cost, threads=threads)
        minus = per_path_objective(fd_paths, f - eps * u, cost, threads=threads)
        fd = (plus - minus) / (2 * eps)

        est_means, est_mean, est_se = _batch_means(derivs, num_batches)
        _, fd_mean, fd_se = _batch_means(fd, num_batches)
        z = _pooled_z(est_mean, est_se, fd_mean, fd_se)
        attempts.append({"seed": s, "estimator_mean": est_mean, "estimator_se": est_se,
                         "fd_mean": fd_mean, "fd_se": fd_se, "z": z})
        if abs(z) <= 3.0:
            break
    final = attempts[-1]
    return StudyReport(
        "unbiasedness", "batch", list(range(num_batches)), [float(v) for v in est_means],
        [0.0] * num_batches, passed=bool(abs(final["z"]) <= 3.0),
        details={"attempts": attempts, "z": final["z"], "eps": eps, "batch_N": batch_N,
                 "cost": cost.describe()})


def _random_probes(basis: BasisSpec, feas: FeasibleSetSpec, count: int, seed: int):
    rng = np.random.default_rng(seed)
    lo, hi = feas.bounding_box(basis.dimension)
    return [project_feasible(rng.uniform(lo, hi), feas) for _ in range(count)]


def sup_gap(paths, reference_values: np.ndarray, drifts: Sequence[np.ndarray],
            cost: CostFunctionalSpec, threads=None) -> float:
    """``max_F |J_N(F) - J_ref(F)|`` over drift vectors (already on the grid)."""
    return float(max(abs(np.mean(per_path_objective(paths, d, cost, threads=threads)) - r)
                     for d, r in zip(drifts, reference_values)))


def equiconvergence_study(N_values, probe_count: int, cost: CostFunctionalSpec, grid: GridSpec,
                          basis: BasisSpec | None = None, feas: FeasibleSetSpec | None = None,
                          reference_N: int | None = None, replicates: int = 16,
                          sigma: float = 1.0, initial_x: float = 0.0, seed: int = 0,
                          window=(-0.65, -0.35), scheme=Scheme.EULER, threads=None) -> StudyReport:
    """Decay of ``sup_F |J_N(F) - J_ref(F)|`` over a fixed set of random feasible drifts.

    Each ``N`` is measured on ``replicates`` fresh, disjoint batches and the
    sup-gaps are averaged; the reference uses ``reference_N`` paths
    (default ``64 * max(N_values)``) from an independent stream.
    """
    N_values = sorted(int(v) for v in N_values)
    basis = basis or BasisSpec(BasisKind.INTEGRATED_LEGENDRE, 2, grid.horizon)
    feas = feas or FeasibleSetSpec.ball(1.0)
    reference_N = reference_N or 64 * N_values[-1]
    probes = _random_probes(basis, feas, probe_count, seed)
    P = evaluate_basis(basis, grid)
    drifts = [P @ a for a in probes]

    ref = generate_paths(PathBatchSpec(reference_N, scheme, sigma, initial_x, seed), grid,
                         threads=threads)
    ref_vals = [float(np.mean(per_path_objective(ref, d, cost, threads=threads))) for d in drifts]

    total = replicates * sum(N_values)
    fresh = generate_paths(PathBatchSpec(total, scheme, sigma, initial_x, seed + 1), grid,
                           threads=threads)
    means, ses, offset = [], [], 0
    for N in N_values:
        gaps = []
        for _ in range(replicates):
            gaps.append(sup_gap(subbatch(fresh, offset, offset + N), ref_vals, drifts, cost, threads))
            offset += N
        gaps = np.array(gaps)
        means.append(float(gaps.mean()))
        ses.append(float(gaps.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0)
    return _slope_report("equiconvergence", "N", N_values, means, ses, window,
                         details={"probe_count": probe_count, "replicates": replicates,
                                  "reference_N": reference_N, "cost": cost.describe()})


@dataclass(frozen=True)
class RateProblem:
    """Problem and base allocation for a rate-decomposition sweep.

    ``profile_depth > 0`` switches to the basis-size experiment: hat basis,
    box whose lower corner samples the convex profile
    ``b(t) = depth * ((t/T)^2 - 2 t/T)`` at the knots.
    """

    horizon: float = 1.0
    sigma: float = 1.0
    initial_x: float = 0.0
    cost_name: str = "quadratic"
    cost_params: tuple = ()
    basis_kind: BasisKind = BasisKind.INTEGRATED_LEGENDRE
    radius: float = 1.0
    box_lower: tuple = ()
    box_upper: tuple = ()
    profile_depth: float = 0.0
    k: int = 256
    N: int = 1024
    n: int = 2
    h: float = 1 / 32
    scheme: Scheme = Scheme.EULER
    seed: int = 0
    replicates: int = 16
    reference_N: int = 2**16
    reference_h: float = 2.0**-12
    eta0: float = 0.5
    kbar_mode: KbarMode = KbarMode.GRADIENT_NORMS

    @property
    def cost(self) -> CostFunctionalSpec:
        return make_cost(self.cost_name, **dict(self.cost_params))

    def basis(self, n=None) -> BasisSpec:
        return BasisSpec(self.basis_kind, n or self.n, self.horizon)

    def profile(self, t):
        s = np.asarray(t, dtype=float) / self.horizon
        return self.profile_depth * (s**2 - 2 * s)

    def feasible(self, n=None) -> FeasibleSetSpec:
        n = n or self.n
        if self.profile_depth > 0:
            lower = self.profile(np.arange(1, n + 1) * self.horizon / n)
            return FeasibleSetSpec.box(lower, lower + 2.0 * self.profile_depth + 1.0)
        if self.box_lower:
            return FeasibleSetSpec.box(self.box_lower, self.box_upper)
        return FeasibleSetSpec.ball(self.radius)

    def paths(self, count, grid, seed_offset=0, threads=None):
        spec = PathBatchSpec(count, self.scheme, self.sigma, self.initial_x, self.seed + seed_offset)
        return generate_paths(spec, grid, threads=threads)

    @classmethod
    def from_allocation(cls, alloc: BudgetAllocation, **kw) -> "RateProblem":
        return cls(k=alloc.k, N=alloc.N, n=alloc.n, h=alloc.h, **kw)


_DEFAULT_SWEEPS = {
    "k": [2**j for j in range(4, 11)],
    "N": [2**j for j in range(5, 11)],
    "h": [2.0**-j for j in range(4, 10)],
    "n": [2, 3, 4, 6, 8, 12, 16],
}


def default_rate_problem(sweep: str) -> RateProblem:
    """Base problems in which the swept error term dominates."""
    if sweep == "k":
        return RateProblem(cost_name="linear", N=1024, n=2, h=1 / 32)
    if sweep == "N":
        return RateProblem(cost_name="quadratic", n=2, h=1 / 16, replicates=32, reference_N=2**16)
    if sweep == "h":
        return RateProblem(cost_name="quadratic", n=2, N=2048, reference_h=2.0**-12)
    if sweep == "n":
        return RateProblem(cost_name="linear", basis_kind=BasisKind.HAT, initial_x=3.0,
                           profile_depth=0.5, N=2048, h=1 / 256)
    raise InvalidArgument(f"unknown sweep {sweep!r}; choose from k, N, h, n")


def _per_path_diff_stats(a: np.ndarray, b: np.ndarray):
    d = a - b
    return float(np.mean(d)), float(np.std(d, ddof=1) / math.sqrt(d.size))


def rate_decomposition_study(base=None, sweep: str = "N", values=None, threads=None) -> StudyReport:
    """Measure how the optimality gap scales with one of ``k, N, h, n``.

    Parameters
    ----------
    base : RateProblem or BudgetAllocation, optional
        Problem and the non-swept parameters; defaults to
        :func:`default_rate_problem`.
    sweep : {"k", "N", "h", "n"}
    values : sequence, optional
        Swept values (at least 4).

    Notes
    -----
    Non-swept optimizer error is removed by solving each SAA problem with
    :func:`solve_saa_reference` except in the ``k`` sweep, which runs
    mirror descent on one frozen batch. Windows: ``k`` slope <= -0.4,
    ``N`` in [-0.65, -0.35], ``h`` in [beta - 0.5, beta + 0.5],
    ``n`` in [-alpha - 0.6, -alpha + 0.6] with ``alpha`` measured from the
    projection error of the limiting drift.
    """
    if isinstance(base, BudgetAllocation):
        base = RateProblem.from_allocation(base)
    prob = base or default_rate_problem(sweep)
    values = list(values or _DEFAULT_SWEEPS.get(sweep, []))
    if len(values) < 4:
        raise InvalidArgument("a sweep needs at least 4 values")
    cost = prob.cost
    details = {"problem": {k: _jsonable(v) for k, v in asdict(prob).items()}}

    if sweep == "k":
        grid = make_grid(prob.horizon, prob.h)
        batch = prob.paths(prob.N, grid, threads=threads)
        basis, feas = prob.basis(), prob.feasible()
        _, j_star = solve_saa_reference(batch, cost, basis, feas, threads=threads)
        gaps = []
        for k in values:
            cfg = MirrorDescentConfig(int(k), prob.eta0, kbar_mode=prob.kbar_mode)
            tr = mirror_descent(batch, cost, basis, feas, cfg, threads=threads)
            gaps.append(tr.averaged_objective - j_star)
        details["reference_objective"] = j_star
        return _slope_report("rate_k", "k", values, gaps, [0.0] * len(gaps), (-math.inf, -0.4),
                             details)

    if sweep == "N":
        grid = make_grid(prob.horizon, prob.h)
        basis, feas = prob.basis(), prob.feasible()
        ref = prob.paths(prob.reference_N, grid, threads=threads)
        a_ref, j_ref = solve_saa_reference(ref, cost, basis, feas, threads=threads)
        values = sorted(int(v) for v in values)
        fresh = prob.paths(prob.replicates * sum(values), grid, seed_offset=1, threads=threads)
        means, ses, offset = [], [], 0
        for N in values:
            errs = []
            for _ in range(prob.replicates):
                b = subbatch(fresh, offset, offset + N) if N < prob.reference_N else ref
                offset += N
                _, j = solve_saa_reference(b, cost, basis, feas, x0=a_ref, threads=threads)
                errs.append(abs(j - j_ref))
            errs = np.array(errs)
            means.append(float(errs.mean()))
            ses.append(float(errs.std(ddof=1) / math.sqrt(errs.size)))
        details["reference_objective"] = j_ref
        return _slope_report("rate_N", "N", values, means, ses, (-0.65, -0.35), details)

    if sweep == "h":
        beta = WEAK_ORDER[prob.scheme]
        fine_grid = make_grid(prob.horizon, prob.reference_h)
        fine = prob.paths(prob.N, fine_grid, threads=threads)
        basis, feas = prob.basis(), prob.feasible()
        a_ref, _ = solve_saa_reference(fine, cost, basis, feas, threads=threads)
        ref_costs = per_path_objective(fine, DriftFunction(basis, a_ref), cost, threads=threads)
        values = sorted((float(v) for v in values), reverse=True)
        means, ses = [], []
        for h in values:
            coarse = fine.restrict(make_grid(prob.horizon, h))
            a_h, _ = solve_saa_reference(coarse, cost, basis, feas, x0=a_ref, threads=threads)
            c_h = per_path_objective(coarse, DriftFunction(basis, a_h), cost, threads=threads)
            m, s = _per_path_diff_stats(c_h, ref_costs)
            means.append(abs(m))
            ses.append(s)
        details["weak_order"] = beta
        return _slope_report("rate_h", "h", values, means, ses, (beta - 0.5, beta + 0.5),
                             details)

    if sweep == "n":
        grid = make_grid(prob.horizon, prob.h)
        batch = prob.paths(prob.N, grid, threads=threads)
        if prob.profile_depth <= 0:
            raise InvalidArgument("the n sweep needs a RateProblem with profile_depth > 0")
        target = DiscretePath(grid, prob.profile(grid.times))
        values = sorted(int(v) for v in values)
        curve = projection_error_curve(target, prob.basis_kind, values)
        alpha = -fit_loglog([c[0] for c in curve], [c[1] for c in curve]).slope
        ref_costs = per_path_objective(batch, target.values, cost, threads=threads)
        means, ses = [], []
        for n in values:
            basis, feas = prob.basis(n), prob.feasible(n)
            a_n, _ = solve_saa_reference(batch, cost, basis, feas, x0=feas.lower, threads=threads)
            c_n = per_path_objective(batch, DriftFunction(basis, a_n), cost, threads=threads)
            m, s = _per_path_diff_stats(c_n, ref_costs)
            means.append(abs(m))
            ses.append(s)
        details["alpha"] = alpha
        details["projection_error"] = [c[1] for c in curve]
        return _slope_report("rate_n", "n", values, means, ses, (-alpha - 0.6, -alpha + 0.6),
                             details)

    raise InvalidArgument(f"unknown sweep {sweep!r}; choose from k, N, h, n")
