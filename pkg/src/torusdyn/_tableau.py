"""Butcher tableaus shared by the compiled and pure-numpy integrator backends.

Two fixed-step explicit schemes: the classic 4th-order Runge-Kutta and the
5th-order Dormand-Prince solution weights (the error-estimator row of the
embedded pair is dropped; step size is fixed, so no adaptivity is needed).
"""

from __future__ import annotations

import numpy as np

# classic RK4
RK4_C = np.array([0.0, 0.5, 0.5, 1.0])
RK4_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0],
        [0.5, 0.0, 0.0, 0.0],
        [0.0, 0.5, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)
RK4_B = np.array([1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0])

# Dormand-Prince 5th-order weights (6 effective stages)
DP5_C = np.array([0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0])
DP5_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    ]
)
DP5_B = np.array(
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0]
)

ORDERS = {"rk4": 4, "dp5": 5}


def tableau(order: str):
    """Return (A, B, C, nominal order) for an order identifier."""
    if order == "rk4":
        return RK4_A, RK4_B, RK4_C, 4
    if order == "dp5":
        return DP5_A, DP5_B, DP5_C, 5
    raise ValueError(f"unknown integrator order {order!r} (expected 'rk4' or 'dp5')")
