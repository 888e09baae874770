"""Vertical-axis drone: a sampled double integrator from altitude and velocity.

The printed reference gains are rounded to three decimals.
"""
import numpy as np

from .lti import LtiSystem

#: Initial states [altitude, vertical velocity] of the landing scenarios.
INITIAL_STATES = ((10.0, 0.0), (5.0, 10.0), (13.0, 20.0))
LAMBDA = 0.4

#: (model, monotone), (model, unconstrained), (data, monotone), (data, unconstrained)
K1 = np.array([[-1.889, -1.442, 188.887, -235.882]])
K2 = np.array([[-0.317, -0.464, 18.571, -19.785]])
K3 = np.array([[-1.248, -1.084, 124.835, -146.322]])
K4 = np.array([[0.019, 0.257, 5.774, -6.258]])
REFERENCE_GAINS = {"K1": K1, "K2": K2, "K3": K3, "K4": K4}


def drone(ts: float = 0.1) -> LtiSystem:
    A = np.array([[1.0, ts], [0.0, 1.0]])
    B = np.array([[0.0], [ts]])
    C = np.array([[1.0, 0.0]])
    return LtiSystem(A, B, C)
