"""Pathwise directional derivatives of the regulated path and of the cost.

At grid time ``i`` the right derivative of ``Gamma(y)_i`` along ``u`` is

* ``u_i`` when the running minimum is above ``tol`` (regulator idle),
* ``u_i + max_{s in Phi_i} (-u_s)`` when it is below ``-tol``,
* ``u_i + max(0, max_{s in Phi_i} (-u_s))`` when it is within ``tol`` of 0,

where the last line is the boundary case in which both the zero branch
and the argmin branch of ``max(0, -min y)`` are active. For a path that
starts at 0 and stays positive it reduces to ``u_i`` if ``u_0 >= 0`` and
to ``u_i - u_0`` otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._errors import InvalidArgument, NumericOverflow, UnsupportedCost
from ._parallel import map_chunks
from .costs import CostFunctionalSpec, as_batch, drift_values, pathwise_cost_batch
from .paths import DiscretePath
from .regulator import RegulatedBatch, RegulatedOutput, regulate_batch, skorokhod_regulate
from .subspace import BasisSpec, DriftFunction, evaluate_basis

__all__ = [
    "DirectionPath",
    "GradientEstimate",
    "d_gamma",
    "d_gamma_batch",
    "d_cost",
    "d_cost_batch",
    "saa_gradient",
    "saa_value_and_gradient",
]

# a direction is just a path on the same grid
DirectionPath = DiscretePath


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    coefficients: np.ndarray
    std_errors: np.ndarray
    num_paths: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))


def _tie_row_sup(starts, exits, negU, n_pts):
    """``max_{s in Phi_i} (-u_s)`` for every ``i`` from membership intervals."""
    best = np.full((n_pts,) + negU.shape[1:], -np.inf)
    for s, e in zip(starts, exits):
        np.maximum(best[s:e], negU[s], out=best[s:e])
    return best


def d_gamma_batch(batch: RegulatedBatch, U: np.ndarray) -> np.ndarray:
    """Derivative of every regulated row along shared direction(s).

    Parameters
    ----------
    batch : RegulatedBatch
    U : ndarray, shape (M,) or (M, n)
        Direction(s) on the batch grid, shared by all rows.

    Returns
    -------
    ndarray, shape (N, M) or (N, M, n)
    """
    U = np.asarray(U, dtype=float)
    squeeze = U.ndim == 1
    if squeeze:
        U = U[:, None]
    n_rows, n_pts = batch.shape
    if U.shape[0] != n_pts:
        raise InvalidArgument("direction length does not match the grid")

    m = batch.running_min
    tol = batch.tie_tol[:, None]
    active = m <= tol
    zero_branch = m >= -tol

    sup = -U[batch.argmin_index]  # (N, M, n); correct on tie-free rows
    for r in batch.tie_rows:
        starts, exits = batch.tie_members[int(r)]
        sup[r] = _tie_row_sup(starts, exits, -U, n_pts)
    inner = np.where(zero_branch[..., None], np.maximum(sup, 0.0), sup)
    D = U[None] + np.where(active[..., None], inner, 0.0)
    return D[..., 0] if squeeze else D


def d_gamma(reg: RegulatedOutput, u: DiscretePath, tie_tol: float | None = None) -> DiscretePath:
    """Right directional derivative of the regulated path along ``u``.

    >>> from driftopt.paths import make_grid, DiscretePath
    >>> g = make_grid(1.0, 0.5)
    >>> reg = skorokhod_regulate(DiscretePath(g, -g.times))
    >>> d_gamma(reg, DiscretePath(g, [1.0, 1.0, 1.0])).values
    array([1., 0., 0.])
    """
    if not u.grid.same_as(reg.grid):
        raise InvalidArgument("direction and path live on different grids")
    if tie_tol is not None and tie_tol != reg.tie_tol:
        reg = skorokhod_regulate(reg.input_path, tie_tol)
    batch = regulate_batch(reg.input_path.values[None, :], reg.tie_tol)
    return DiscretePath(reg.grid, d_gamma_batch(batch, u.values)[0])


def _require_derivatives(cost: CostFunctionalSpec):
    if not cost.differentiable:
        raise UnsupportedCost(f"cost {cost.name!r} lacks derivative callbacks g', G'")


def d_cost_batch(batch: RegulatedBatch, grid, U: np.ndarray, cost: CostFunctionalSpec) -> np.ndarray:
    """Directional derivatives of the pathwise cost, shape ``(N, n)``."""
    _require_derivatives(cost)
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    D = d_gamma_batch(batch, U)
    gam = batch.regulated
    out = np.zeros((gam.shape[0], U.shape[1]))
    if cost.running_weight:
        wg = cost.dg(gam) * grid.trapezoid_weights  # (N, M)
        out += cost.running_weight * np.einsum("im,imk->ik", wg, D)
    if cost.terminal_weight:
        out += cost.terminal_weight * cost.dG(gam[:, -1])[:, None] * D[:, -1, :]
    return out


def d_cost(reg: RegulatedOutput, u: DiscretePath, cost: CostFunctionalSpec) -> float:
    """Directional derivative of ``cost(Gamma(y))`` along ``u`` (chain rule through ``d_gamma``)."""
    _require_derivatives(cost)
    if not u.grid.same_as(reg.grid):
        raise InvalidArgument("direction and path live on different grids")
    batch = regulate_batch(reg.input_path.values[None, :], reg.tie_tol)
    return float(d_cost_batch(batch, reg.grid, u.values, cost)[0, 0])


def _per_path(paths, F, cost, directions, tie_tol, threads):
    batch = as_batch(paths)
    grid = batch.grid
    f = drift_values(F, grid)

    def work(a, b):
        reg = regulate_batch(batch.block(a, b) + f, tie_tol)
        return (pathwise_cost_batch(reg.regulated, grid, cost),
                d_cost_batch(reg, grid, directions, cost),
                reg.regulated)

    # (rows x M x n) temporaries; chunking depends on shape only, not on threads
    chunk = int(max(16, min(2048, 4_000_000 // (grid.num_points * directions.shape[1]))))
    parts = map_chunks(work, len(batch), threads, chunk_size=chunk)
    values = np.concatenate([p[0] for p in parts])
    derivs = np.concatenate([p[1] for p in parts], axis=0)
    return values, derivs, parts


def _estimate(derivs: np.ndarray) -> GradientEstimate:
    n_paths = derivs.shape[0]
    mean = np.mean(derivs, axis=0)
    if n_paths > 1:
        se = np.std(derivs, axis=0, ddof=1) / math.sqrt(n_paths)
    else:
        se = np.zeros_like(mean)
    return GradientEstimate(mean, se, n_paths)


def saa_value_and_gradient(paths, F: DriftFunction, cost: CostFunctionalSpec,
                           basis: BasisSpec | None = None, tie_tol=None, threads=None):
    """Objective mean, its standard error and the sample-average gradient.

    Each path is regulated once; the argmin data is shared by all ``n``
    basis directions.
    """
    _require_derivatives(cost)
    batch = as_batch(paths)
    basis = basis or F.basis
    P = evaluate_basis(basis, batch.grid)
    values, derivs, _ = _per_path(batch, F, cost, P, tie_tol, threads)
    if not np.all(np.isfinite(derivs)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(derivs), axis=1))[0])
        err = NumericOverflow(f"non-finite pathwise derivative on path {bad}")
        err.path_index = bad
        raise err
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return mean, se, _estimate(derivs)


def saa_gradient(paths, F: DriftFunction, cost: CostFunctionalSpec,
                 basis: BasisSpec | None = None, tie_tol=None, threads=None) -> GradientEstimate:
    """Sample-average directional derivatives along each basis function."""
    return saa_value_and_gradient(paths, F, cost, basis, tie_tol, threads)[2]
