"""Walkthrough: a rare feature never gets learned when a frequent one suffices.

A fraction ``lam`` of class-1 points carry an extra feature. Training stops
once class 1 is confident, and we ask how confident the model is on the rare
feature alone.
"""
from neurodyn import simulator, starvation

print("lambda  delta    bound    integrated conf_x2")
for row in starvation.bound_surface((0.5, 0.2, 0.1), (1e-2, 1e-4), beta0=0.005):
    print(f"{row.lam:6.2f}  {row.delta:6.0e}  {row.bound:7.3f}  {row.conf_x2_at_tstar:7.3f}")

print("\nstochastic training, lam=0.1, delta=1e-4")
for seed in range(3):
    res = simulator.starvation_experiment(0.1, 1e-4, seed)
    print(f"seed {seed}: rare-feature confidence {res.conf_x2:.3f}")
