import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate
from scipy.special import eval_legendre

from driftopt import ConditioningError, InvalidArgument
from driftopt.oracles import fit_loglog
from driftopt.paths import DiscretePath, make_grid
from driftopt.subspace import (BasisKind, BasisSpec, DriftFunction, FeasibleSetSpec,
                               basis_sup_norms, evaluate_basis, evaluate_drift, project_feasible,
                               projection_error_curve, write_basis_csv)


@pytest.mark.parametrize("kind", list(BasisKind))
def test_basis_vanishes_at_zero(kind):
    P = evaluate_basis(BasisSpec(kind, 6, 2.0), make_grid(2.0, 0.1))
    assert P.shape == (21, 6)
    assert np.all(P[0] == 0.0)


def test_integrated_legendre_closed_forms():
    g = make_grid(1.0, 1 / 50)
    P = evaluate_basis(BasisSpec("integrated_legendre", 2, 1.0), g)
    np.testing.assert_allclose(P[:, 0], g.times, atol=1e-15)
    np.testing.assert_allclose(P[:, 1], g.times**2 - g.times, atol=1e-14)


@pytest.mark.parametrize("T", [1.0, 2.5])
def test_integrated_legendre_against_quadrature(T):
    t = np.linspace(0, T, 7)
    basis = BasisSpec("integrated_legendre", 8, T)
    P = evaluate_basis(basis, make_grid(T, T / 6))
    for j in range(1, 9):
        ref = [integrate.quad(lambda s: eval_legendre(j - 1, 2 * s / T - 1), 0, ti,
                              epsabs=1e-14, epsrel=1e-14)[0] for ti in t]
        np.testing.assert_allclose(P[:, j - 1], ref, atol=1e-12)


@pytest.mark.parametrize("kind", list(BasisKind))
def test_sup_norm_bounds_hold(kind):
    basis = BasisSpec(kind, 10, 3.0)
    P = evaluate_basis(basis, make_grid(3.0, 1e-3))
    assert np.all(np.max(np.abs(P), axis=0) <= basis_sup_norms(basis) * (1 + 1e-12))


def test_hat_and_monomial_shapes():
    g = make_grid(1.0, 0.25)
    H = evaluate_basis(BasisSpec("hat", 4, 1.0), g)
    np.testing.assert_array_equal(H[1:], np.eye(4))
    M = evaluate_basis(BasisSpec("monomial", 3, 1.0), g)
    np.testing.assert_allclose(M[:, 2], g.times**3)


def test_evaluate_drift_examples(rng):
    g = make_grid(1.0, 0.1)
    basis = BasisSpec("integrated_legendre", 5, 1.0)
    assert np.all(evaluate_drift(DriftFunction.zero(basis), g).values == 0)
    np.testing.assert_allclose(evaluate_drift(DriftFunction(basis, [1, 0, 0, 0, 0]), g).values,
                               g.times, atol=1e-15)
    a = rng.normal(size=5)
    F = DriftFunction(basis, a)
    direct = [sum(a[j] * integrate.quad(lambda s: eval_legendre(j, 2 * s - 1), 0, t)[0]
                  for j in range(5)) for t in g.times]
    np.testing.assert_allclose(evaluate_drift(F, g).values, direct, atol=1e-12)
    np.testing.assert_allclose(F(g.times), evaluate_drift(F, g).values, atol=1e-15)
    with pytest.raises(InvalidArgument):
        DriftFunction(basis, [1.0, 2.0])
    with pytest.raises(InvalidArgument):
        evaluate_basis(basis, make_grid(2.0, 0.1))


def test_projection_examples():
    ball = FeasibleSetSpec.ball(1.0)
    np.testing.assert_array_equal(project_feasible([0.1, 0.2], ball), [0.1, 0.2])
    a = np.array([3.0, 4.0]) / 5 * 2
    p = project_feasible(a, ball)
    np.testing.assert_allclose(p, a / 2)
    assert np.linalg.norm(p) <= 1.0
    box = FeasibleSetSpec.box(-1.0, 1.0, n=2)
    np.testing.assert_array_equal(project_feasible([2.0, -0.5], box), [1.0, -0.5])


def test_feasible_set_validation():
    with pytest.raises(InvalidArgument):
        FeasibleSetSpec.ball(0.0)
    with pytest.raises(InvalidArgument):
        FeasibleSetSpec.box([1.0], [0.0])
    with pytest.raises(InvalidArgument):
        FeasibleSetSpec.box([0.0, 0.0], [1.0])
    with pytest.raises(InvalidArgument):
        FeasibleSetSpec.box([0.0], [1.0]).check_dimension(2)


vec = arrays(float, 3, elements=st.floats(-1e6, 1e6))
feas_sets = st.sampled_from([FeasibleSetSpec.ball(0.7), FeasibleSetSpec.ball(3.0),
                             FeasibleSetSpec.box([-1, 0, -2], [1, 0.5, 3])])


@given(vec, vec, feas_sets)
def test_projection_properties(a, b, feas):
    pa, pb = project_feasible(a, feas), project_feasible(b, feas)
    assert feas.contains(pa) and feas.contains(pb)
    np.testing.assert_array_equal(project_feasible(pa, feas), pa)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) * (1 + 1e-12) + 1e-9


@pytest.mark.parametrize("feas", [FeasibleSetSpec.ball(1.5), FeasibleSetSpec.box([-1, -0.5], [1, 2])])
def test_sup_diameter_bounds_random_pairs(feas, rng):
    basis = BasisSpec("integrated_legendre", 2, 1.0)
    P = evaluate_basis(basis, make_grid(1.0, 0.01))
    lo, hi = feas.bounding_box(2)
    pts = np.array([project_feasible(rng.uniform(lo, hi), feas) for _ in range(20_000)])
    pairs = pts[:10_000] - pts[10_000:]
    brute = np.max(np.abs(pairs @ P.T))
    bound = feas.sup_diameter(basis)
    assert brute <= bound
    assert bound <= feas.diameter() * basis_sup_norms(basis).sum() + 1e-12


def test_mirror_radius():
    assert FeasibleSetSpec.ball(2.0).mirror_radius_sq() == 2.0
    assert FeasibleSetSpec.box([-1, 0], [0.5, 3]).mirror_radius_sq() == 0.5 * (1 + 9)


def test_projection_error_exact_representation():
    g = make_grid(1.0, 1 / 100)
    target = DiscretePath(g, 2 * g.times - 3 * (g.times**2 - g.times))
    for n, err in projection_error_curve(target, "integrated_legendre", [2, 3, 5]):
        assert err <= 1e-10


def test_projection_error_smooth_target_decreases():
    g = make_grid(1.0, 1 / 400)
    target = DiscretePath(g, np.sin(2 * np.pi * g.times))
    errs = [e for _, e in projection_error_curve(target, "integrated_legendre", [2, 4, 8, 16])]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_projection_error_hat_rate():
    g = make_grid(1.0, 1 / 1024)
    target = DiscretePath(g, np.exp(g.times) - 1)
    curve = projection_error_curve(target, "hat", [4, 8, 16, 32, 64])
    slope = fit_loglog(*zip(*curve)).slope
    assert -2.4 <= slope <= -1.6


def test_projection_error_conditioning():
    g = make_grid(1.0, 0.25)  # 5 points cannot support 8 hats
    with pytest.raises(ConditioningError) as exc:
        projection_error_curve(DiscretePath(g, g.times), "hat", [8])
    assert exc.value.condition_number > 1e12


def test_basis_csv():
    buf = io.StringIO()
    write_basis_csv(BasisSpec("monomial", 2, 1.0), make_grid(1.0, 0.5), buf)
    assert buf.getvalue().splitlines() == ["t,P1,P2", "0.0,0.0,0.0", "0.5,0.5,0.25", "1.0,1.0,1.0"]
