"""How the optimal split of a compute budget moves with the approximation rates.

Prints the allocation ``(k, N, n, h)`` for a few budgets and ``(alpha, beta)``
pairs, then the fitted budget exponents next to ``2ab / (a + b + 4ab)``.
"""
from driftopt.allocator import (ErrorModel, allocate_closed_form, allocate_numeric, budget_exponent,
                                fit_budget_exponents)

BUDGETS = [1e4, 1e5, 1e6, 1e7, 1e8]

print("unit constants, alpha = beta = 1 (closed form)")
print(f"{'B':>8} {'k':>6} {'N':>6} {'n':>5} {'h':>10} {'bound':>10}")
for B in BUDGETS:
    a = allocate_closed_form(ErrorModel(), B)
    print(f"{B:8.0e} {a.k:6d} {a.N:6d} {a.n:5d} {a.h:10.5f} {a.predicted_bound:10.5f}")

print("\nfitted exponents of k*, N*, n* in B")
print(f"{'alpha':>7} {'beta':>5} {'k':>7} {'N':>7} {'n':>7} {'gamma':>7}")
for alpha, beta in [(1, 1), (2, 1), (1, 2), (2, 2), (10, 1), (1000, 1)]:
    ex = fit_budget_exponents(ErrorModel(alpha=alpha, beta=beta), BUDGETS)
    print(f"{alpha:7g} {beta:5g} {ex['k']:7.4f} {ex['N']:7.4f} {ex['n']:7.4f} "
          f"{budget_exponent(alpha, beta):7.4f}")

# fast function approximation: nearly all extra budget goes to sampling
a = allocate_numeric(ErrorModel(alpha=1000.0), 1e8)
print(f"\nalpha = 1000, B = 1e8: k={a.k}, N={a.N}, n={a.n}, h={a.h:.3g}")
