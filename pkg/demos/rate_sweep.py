"""Run one rate-decomposition sweep and save the log-log points.

``python3 demos/rate_sweep.py N`` (or ``k``, ``h``, ``n``) prints the fitted
slope against its window and writes ``rate_<sweep>.csv`` for plotting.
"""
import sys

from driftopt.oracles import rate_decomposition_study

sweep = sys.argv[1] if len(sys.argv) > 1 else "N"
report = rate_decomposition_study(sweep=sweep)
for x, y, s in zip(report.x, report.y, report.y_se):
    print(f"{sweep}={x:<12.6g} gap={y:.6g} (se {s:.2g})")
print(report.summary_line())
report.to_csv(f"rate_{sweep}.csv")
