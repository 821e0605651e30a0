"""Budget split between optimizer steps, samples, basis size and time step.

The error model is ``c1/sqrt(k) + c2/sqrt(N) + c3 h^beta + c4 n^(-alpha)``
and the work is ``k n N / h = B``. Eliminating ``h`` and working in
``(log k, log N, log n)`` turns the objective into a sum of exponentials
of linear forms.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._errors import InvalidArgument, WrongMethod

__all__ = [
    "ErrorModel",
    "AllocationMethod",
    "BudgetAllocation",
    "allocate_closed_form",
    "allocate_numeric",
    "predict_bound",
    "budget_exponent",
    "fit_budget_exponents",
    "random_allocations",
]


@dataclass(frozen=True)
class ErrorModel:
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4", "alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidArgument(f"{name} must be a positive finite number")
            object.__setattr__(self, name, float(v))

    @property
    def convex(self) -> bool:
        """Whether the reduced objective is guaranteed convex in (k, N, n)."""
        return self.beta >= 1.0

    def bound(self, k, N, n, h):
        return (self.c1 / np.sqrt(k) + self.c2 / np.sqrt(N)
                + self.c3 * np.power(h, self.beta) + self.c4 * np.power(n, -self.alpha))


class AllocationMethod(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class BudgetAllocation:
    budget: float
    k: int
    N: int
    n: int
    h: float
    predicted_bound: float
    method: AllocationMethod
    continuous: tuple = ()
    converged: bool = True
    hessian_pd: bool | None = None
    warnings: tuple = field(default_factory=tuple)

    @property
    def work(self) -> float:
        return self.k * self.N * self.n / self.h

    def as_dict(self) -> dict:
        return {
            "budget": self.budget, "k": self.k, "N": self.N, "n": self.n, "h": self.h,
            "predicted_bound": self.predicted_bound, "method": self.method.value,
            "continuous": list(self.continuous), "converged": self.converged,
            "hessian_pd": self.hessian_pd, "warnings": list(self.warnings),
        }


def predict_bound(model: ErrorModel, allocation) -> float:
    """Four-term error bound at an allocation (any object with k, N, n, h)."""
    a = allocation
    return float(model.bound(a.k, a.N, a.n, a.h))


def budget_exponent(alpha: float, beta: float) -> float:
    """Growth exponent of ``k*`` and ``N*`` in ``B``: ``2 alpha beta / (alpha + beta + 4 alpha beta)``."""
    return 2.0 * alpha * beta / (alpha + beta + 4.0 * alpha * beta)


def _round_and_repair(budget, k, N, n):
    k, N, n = (max(1, int(round(v))) for v in (k, N, n))
    return k, N, n, k * N * n / budget


def allocate_closed_form(model: ErrorModel, budget: float) -> BudgetAllocation:
    """Closed-form optimum for ``alpha = beta = 1``.

    Stationarity gives ``c1/(2 sqrt k) = c2/(2 sqrt N) = c3 h = c4/n`` so, with
    ``lam = (c1^2 c2^2 c3 c4 / (16 B))^(1/6)``,

    ``k = (c1 / 2 lam)^2``, ``N = (c2 / 2 lam)^2``, ``n = c4 / lam``, ``h = lam / c3``.

    >>> a = allocate_closed_form(ErrorModel(), 1e6)
    >>> (a.k, a.N, a.n), round(a.h, 6)
    ((63, 63, 16), 0.063504)
    """
    if model.alpha != 1.0 or model.beta != 1.0:
        raise WrongMethod("closed form needs alpha = beta = 1; use allocate_numeric")
    if not (math.isfinite(budget) and budget > 0):
        raise InvalidArgument("budget must be positive")
    c1, c2, c3, c4 = model.c1, model.c2, model.c3, model.c4
    lam = (c1**2 * c2**2 * c3 * c4 / (16.0 * budget)) ** (1.0 / 6.0)
    kc, Nc, nc, hc = (c1 / (2 * lam)) ** 2, (c2 / (2 * lam)) ** 2, c4 / lam, lam / c3
    k, N, n, h = _round_and_repair(budget, kc, Nc, nc)
    bound = float(model.bound(k, N, n, h))
    return BudgetAllocation(budget, k, N, n, h, bound, AllocationMethod.CLOSED_FORM,
                            continuous=(kc, Nc, nc, hc))


# reduced objective in x = (log k, log N, log n): sum_i w_i exp(a_i . x)
def _terms(model: ErrorModel, budget: float):
    b = model.beta
    A = np.array([[-0.5, 0.0, 0.0],
                  [0.0, -0.5, 0.0],
                  [b, b, b],
                  [0.0, 0.0, -model.alpha]])
    w = np.array([model.c1, model.c2, model.c3 * budget ** (-b), model.c4])
    return A, w


def _objective(x, A, w):
    return float(w @ np.exp(A @ x))


def _coordinate_newton(x, A, w, lo, hi, max_sweeps, tol):
    for sweep in range(max_sweeps):
        x_old = x.copy()
        for j in range(3):
            for _ in range(50):
                e = w * np.exp(A @ x)
                g = e @ A[:, j]
                H = e @ (A[:, j] ** 2)
                step = -g / H
                new = min(max(x[j] + step, lo[j]), hi[j])
                done = abs(new - x[j]) <= tol
                x[j] = new
                if done:
                    break
        if np.max(np.abs(x - x_old)) <= tol:
            return x, True
    return x, False


def _projected_newton(x, A, w, lo, hi, max_iter=200, tol=1e-12):
    """Full Newton on the free coordinates with backtracking; polishes coordinate sweeps."""
    f = lambda z: _objective(z, A, w)
    for _ in range(max_iter):
        e = w * np.exp(A @ x)
        g = A.T @ e
        H = A.T @ (e[:, None] * A)
        free = ~(((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0)))
        if not np.any(free):
            return x, True
        d = np.zeros(3)
        d[free] = -np.linalg.solve(H[np.ix_(free, free)], g[free])
        fx, t = f(x), 1.0
        while True:
            new = np.clip(x + t * d, lo, hi)
            if f(new) <= fx or t < 1e-12:
                break
            t *= 0.5
        if np.max(np.abs(new - x)) <= tol:
            return new, True
        x = new
    return x, False


def _hessian_pd(x, A, w, step=1e-4) -> bool:
    f = lambda z: _objective(z, A, w)
    H = np.empty((3, 3))
    I = np.eye(3) * step
    for i in range(3):
        for j in range(3):
            H[i, j] = (f(x + I[i] + I[j]) - f(x + I[i] - I[j])
                       - f(x - I[i] + I[j]) + f(x - I[i] - I[j])) / (4 * step * step)
    H = 0.5 * (H + H.T)
    return bool(np.all(np.linalg.eigvalsh(H) > 0))


def allocate_numeric(model: ErrorModel, budget: float, bounds=None, max_sweeps: int = 50,
                     tol: float = 1e-12) -> BudgetAllocation:
    """Minimize the reduced bound by coordinate-wise Newton from 8 starts.

    Each start runs a few coordinate sweeps and is then polished by a
    projected full Newton iteration, which converges where the coordinate
    sweeps crawl (badly scaled terms, e.g. very small ``alpha``).

    Parameters
    ----------
    model : ErrorModel
    budget : float
        Total work ``k n N / h``.
    bounds : dict, optional
        ``{"k": (lo, hi), "N": (lo, hi), "n": (lo, hi)}`` search ranges;
        default ``[1, B]`` for each.
    """
    if not (math.isfinite(budget) and budget > 0):
        raise InvalidArgument("budget must be positive")
    bounds = dict(bounds or {})
    lo, hi = np.zeros(3), np.full(3, math.log(max(budget, 2.0)))
    for j, key in enumerate(("k", "N", "n")):
        if key in bounds:
            a, b = bounds[key]
            if not (0 < a <= b):
                raise InvalidArgument(f"bad search range for {key}: {bounds[key]}")
            lo[j], hi[j] = math.log(a), math.log(b)
    unknown = set(bounds) - {"k", "N", "n"}
    if unknown:
        raise InvalidArgument(f"unknown bound keys {sorted(unknown)}")

    A, w = _terms(model, budget)
    best, best_val, all_ok = None, math.inf, True
    # 8 corners of a log-grid inside the box
    for c in np.ndindex(2, 2, 2):
        x0 = lo + (hi - lo) * (0.25 + 0.5 * np.array(c))
        with np.errstate(over="ignore", invalid="ignore"):
            x, _ = _coordinate_newton(x0.copy(), A, w, lo, hi, max_sweeps, tol)
            x, ok = _projected_newton(x, A, w, lo, hi)
        all_ok &= ok
        v = _objective(x, A, w)
        if v < best_val:
            best, best_val = x, v
    kc, Nc, nc = np.exp(best)
    hc = kc * Nc * nc / budget
    k, N, n, h = _round_and_repair(budget, kc, Nc, nc)
    warnings = []
    if not model.convex:
        warnings.append("beta < 1: reduced objective is not convex in (k, N, n)")
    if not all_ok:
        warnings.append("Newton iteration hit its limit; best point returned")
    pd = _hessian_pd(best, A, w) if model.convex else None
    return BudgetAllocation(budget, k, N, n, h, float(model.bound(k, N, n, h)),
                            AllocationMethod.NUMERIC, continuous=(kc, Nc, nc, hc),
                            converged=all_ok, hessian_pd=pd, warnings=tuple(warnings))


def random_allocations(budget: float, count: int, rng: np.random.Generator, max_value=None):
    """Random integer ``(k, N, n)`` log-uniform in ``[1, max_value]`` with ``h`` set by the budget."""
    top = math.log(max_value or budget)
    out = []
    for _ in range(count):
        k, N, n = (int(v) for v in np.maximum(1, np.rint(np.exp(rng.uniform(0, top, 3)))))
        out.append(BudgetAllocation(budget, k, N, n, float(k) * N * n / budget,
                                    math.nan, AllocationMethod.NUMERIC))
    return out


def fit_budget_exponents(model: ErrorModel, budgets, continuous: bool = True) -> dict:
    """Least-squares slopes of ``log k*, log N*, log n*`` against ``log B``.

    Uses the pre-rounding optimum by default so integer rounding does not
    blur the exponents at small budgets.
    """
    logs = np.log(np.asarray(budgets, dtype=float))
    rows = []
    for B in budgets:
        a = allocate_numeric(model, float(B))
        rows.append(a.continuous[:3] if continuous else (a.k, a.N, a.n))
    Y = np.log(np.asarray(rows, dtype=float))
    X = np.column_stack([logs, np.ones_like(logs)])
    coef = np.linalg.lstsq(X, Y, rcond=None)[0]
    return {"k": float(coef[0, 0]), "N": float(coef[0, 1]), "n": float(coef[0, 2])}
