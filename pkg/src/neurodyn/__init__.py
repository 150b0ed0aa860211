"""Closed-form and simulated learning dynamics of small ReLU classifiers.

Submodules:

- ``specfn``: exponential integral, ``log + Ei`` and its inverse, sigmoid.
- ``ode``: fixed-step RK4 oracle and trajectories.
- ``bce``: cross-entropy dynamics (closed forms, hyperbolic flow, extensions).
- ``phase``: phase diagram of initializations.
- ``deep``: logit dynamics of deeper networks.
- ``hinge``: hinge-loss dynamics and loss comparison.
- ``starvation``: gradient-starvation system and bounds.
- ``simulator``: discrete SGD on the actual network.
- ``cli``: scenario-driven command line.
"""
from .errors import (
    ConvergenceError,
    DomainError,
    HorizonError,
    NeurodynError,
    NonFiniteStateError,
    RegionError,
)
from .specfn import ei, inverse_log_plus_ei, log_plus_ei, sigmoid, sigmoid_inverse

__version__ = "0.1.0"
