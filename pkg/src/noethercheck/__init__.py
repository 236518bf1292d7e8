"""Gauge-symmetry verification and Noether-current certification for
optimal control problems.

The package checks whether a candidate transformation group depending on
arbitrary functions of time is a gauge symmetry of a declared optimal
control problem, constructs the guaranteed conserved currents, and
certifies their conservation numerically along Pontryagin extremals.
"""

__version__ = "0.1.0"
