import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftopt import InvalidArgument, WrongMethod
from driftopt.allocator import (AllocationMethod, BudgetAllocation, ErrorModel, allocate_closed_form,
                                allocate_numeric, budget_exponent, fit_budget_exponents,
                                predict_bound, random_allocations)
from driftopt.oracles import stationary_allocation

BUDGETS = [1e4, 1e5, 1e6, 1e7, 1e8]


def test_closed_form_unit_example():
    a = allocate_closed_form(ErrorModel(), 1e6)
    assert (a.k, a.N, a.n) == (63, 63, 16)
    assert a.h == pytest.approx(0.063504)
    assert a.k * a.N * a.n / a.h == pytest.approx(1e6, rel=1e-12)
    kc, Nc, nc, hc = a.continuous
    assert kc == pytest.approx(2 ** (-2 / 3) * 100, rel=1e-12)
    assert nc == pytest.approx(2 ** (2 / 3) * 10, rel=1e-12)
    assert hc == pytest.approx(2 ** (-2 / 3) * 0.1, rel=1e-12)
    assert a.method is AllocationMethod.CLOSED_FORM


def test_closed_form_scale_invariance():
    a = allocate_closed_form(ErrorModel(1.3, 0.7, 2.0, 0.5), 1e7)
    b = allocate_closed_form(ErrorModel(2.6, 1.4, 4.0, 1.0), 1e7)
    assert (a.k, a.N, a.n, a.h) == (b.k, b.N, b.n, b.h)
    np.testing.assert_allclose(a.continuous, b.continuous, rtol=1e-12)


def test_closed_form_exponent():
    logs = np.log(BUDGETS)
    ks = [math.log(allocate_closed_form(ErrorModel(), B).continuous[0]) for B in BUDGETS]
    assert np.polyfit(logs, ks, 1)[0] == pytest.approx(1 / 3, abs=1e-12)


def test_closed_form_matches_independent_stationary_oracle():
    m = ErrorModel(1.3, 0.7, 2.0, 0.5)
    a = allocate_closed_form(m, 1e6)
    s = stationary_allocation(m, 1e6)
    np.testing.assert_allclose(a.continuous, [s["k"], s["N"], s["n"], s["h"]], rtol=1e-10)


def test_closed_form_errors():
    with pytest.raises(WrongMethod):
        allocate_closed_form(ErrorModel(alpha=2.0), 1e6)
    with pytest.raises(InvalidArgument):
        allocate_closed_form(ErrorModel(), -1.0)
    with pytest.raises(InvalidArgument):
        ErrorModel(c1=0.0)


def test_predict_bound_examples():
    m = ErrorModel()
    a = BudgetAllocation(1.0, 4, 4, 1, 1.0, math.nan, AllocationMethod.NUMERIC)
    assert predict_bound(m, a) == 3.0
    big = BudgetAllocation(1.0, 10**12, 10**12, 10**6, 1e-6, math.nan, AllocationMethod.NUMERIC)
    # each of the four terms is exactly 1e-6, so the sum is 4e-6 (not <= 3e-6)
    assert predict_bound(m, big) == pytest.approx(4e-6, rel=1e-12)


def test_closed_form_beats_random_allocations(rng):
    m = ErrorModel()
    best = allocate_closed_form(m, 1e6)
    for a in random_allocations(1e6, 100, rng):
        assert best.predicted_bound < predict_bound(m, a)


def test_numeric_matches_closed_form():
    cf = allocate_closed_form(ErrorModel(), 1e6)
    nu = allocate_numeric(ErrorModel(), 1e6)
    for x, y in zip(cf.continuous, nu.continuous):
        assert abs(x - y) <= 0.02 * x
    for x, y in ((cf.k, nu.k), (cf.N, nu.N), (cf.n, nu.n), (cf.h, nu.h)):
        assert abs(x - y) <= 0.02 * x
    assert nu.converged and nu.hessian_pd and not nu.warnings


models = st.builds(ErrorModel, *(st.floats(0.2, 5.0) for _ in range(4)),
                   alpha=st.floats(0.5, 3.0), beta=st.floats(1.0, 3.0))


@given(models, st.sampled_from([1e4, 1e6, 1e8]))
def test_numeric_constraint_and_optimality(model, B):
    a = allocate_numeric(model, B)
    assert a.k * a.N * a.n / a.h == pytest.approx(B, rel=1e-12)
    assert min(a.k, a.N, a.n) >= 1 and a.h > 0
    # nearest-integer rounding is not the integer optimum, so optimality is
    # checked on the continuous point and the rounding loss is bounded apart
    cont = BudgetAllocation(B, *a.continuous, math.nan, AllocationMethod.NUMERIC)
    best = predict_bound(model, cont)
    assert a.predicted_bound <= best * 1.05
    rng = np.random.default_rng(int(B))
    for r in random_allocations(B, 1000, rng):
        assert best <= predict_bound(model, r) * (1 + 1e-9)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
@pytest.mark.parametrize("beta", [1.0, 2.0])
def test_exponent_laws(alpha, beta):
    ex = fit_budget_exponents(ErrorModel(alpha=alpha, beta=beta), BUDGETS)
    g = budget_exponent(alpha, beta)
    assert abs(ex["k"] - g) <= 0.03 and abs(ex["N"] - g) <= 0.03


def test_unit_exponents_rounded():
    ex = fit_budget_exponents(ErrorModel(), BUDGETS, continuous=False)
    assert 0.30 <= ex["k"] <= 0.36 and 0.30 <= ex["N"] <= 0.36


def test_large_alpha_freezes_n():
    ex = fit_budget_exponents(ErrorModel(alpha=1e3), BUDGETS)
    assert ex["n"] <= 0.02


def test_small_alpha_starves_sampling():
    # continuous relaxation: below alpha ~ 0.1 the unconstrained n* drops under 1
    wide = {key: (1e-300, 1e300) for key in ("k", "N", "n")}
    logs = np.log(BUDGETS)
    for alpha, lim in ((0.1, 0.2), (0.02, 0.05)):
        ks = [math.log(allocate_numeric(ErrorModel(alpha=alpha), B, bounds=wide).continuous[0])
              for B in BUDGETS]
        slope = np.polyfit(logs, ks, 1)[0]
        assert slope == pytest.approx(budget_exponent(alpha, 1.0), abs=0.03)
        assert slope <= lim


def test_non_convex_warning():
    a = allocate_numeric(ErrorModel(beta=0.5), 1e6)
    assert a.hessian_pd is None
    assert any("beta < 1" in w for w in a.warnings)


def test_bad_bounds():
    with pytest.raises(InvalidArgument):
        allocate_numeric(ErrorModel(), 1e6, bounds={"k": (0, 10)})
    with pytest.raises(InvalidArgument):
        allocate_numeric(ErrorModel(), 1e6, bounds={"h": (1, 10)})


def test_as_dict_roundtrip():
    d = allocate_closed_form(ErrorModel(), 1e6).as_dict()
    assert d["method"] == "closed_form" and d["k"] == 63
