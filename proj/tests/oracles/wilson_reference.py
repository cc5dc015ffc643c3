"""Reference Wilson score intervals used by the metric tests.

Run with statsmodels installed:  python3 wilson_reference.py
"""
from statsmodels.stats.proportion import proportion_confint

CASES = [(0, 100), (50, 100), (100, 100), (1, 10), (7, 20000), (3, 1000)]

for k, n in CASES:
    low, high = proportion_confint(k, n, alpha=0.05, method="wilson")
    print(f"{k},{n},{low:.10f},{high:.10f}")
