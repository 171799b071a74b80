"""Nadir-optimal supplementary active power control of wind turbine fleets.

Solve the frequency-support trajectory optimization on an average-system
frequency model, turn the optimum into a deployable feedback controller, and
validate the loop in time-domain simulation against a virtual-inertia
baseline.
"""

from ._accel import USING_NUMBA, backend_name

__version__ = "0.1.0"
__all__ = ["USING_NUMBA", "backend_name", "__version__"]
