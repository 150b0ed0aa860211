"""Walkthrough: how fast does a single linearly separable class become confident?

Run with ``python3 notebooks/01_degenerate_dynamics.py``. Prints tables only;
no plotting library is needed.
"""
import numpy as np

from neurodyn import bce, hinge

# In the degenerate case the logit of a class-1 point obeys u' = rate * sigma(-u).
# The exact solution is closed form through the exponential integral.
u0 = 0.1
print("t      u(t) rate=0.5   u(t) rate=1   log bound (rate=1)")
for t in (0.0, 1.0, 2.0, 5.0, 10.0, 20.0):
    print(f"{t:5.1f}  {bce.solve_degenerate(u0, 0.5, t):12.6f}  {bce.solve_degenerate(u0, 1.0, t):12.6f}"
          f"  {bce.convergence_bound(u0, 1.0, t):12.6f}")

# The logit grows only logarithmically, so each extra "nine" of confidence
# costs roughly ten times more training time.
print("\nconfidence  time to reach it (u0=0.1, rate=1)")
for conf in (0.9, 0.99, 0.999, 0.9999):
    target = np.log(conf / (1 - conf))
    print(f"{conf:10.4f}  {bce.time_to_logit(u0, target, 1.0):10.2f}")

# Hinge loss has no such slowdown: it reaches the margin in finite time.
print("\ndelta      t_bce        t_hinge (u0=0.1, norm=1, p=0.5)")
for row in hinge.compare_losses(0.1, 1.0, 0.5, (1e-2, 1e-4, 1e-6)):
    print(f"{row.delta:8.0e}  {row.t_bce:10.2f}  {row.t_hinge:10.4f}")
