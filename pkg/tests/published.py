"""Published gate matrices, transcribed as (magnitude, phase) pairs.

Rows and columns run from the higher to the lower mode label. For the
single-qubit operators that is (up, down); for the two-qubit operator the
basis is (up,up), (up,down), (down,up), (down,down).
"""

import numpy as np


def polar(rows):
    return np.array([[m * np.exp(1j * p) for m, p in row] for row in rows])


O_PLUS1 = polar([[(0.705, 0.131), (0.702, 0.13)], [(0.702, 0.13), (0.707, -3.011)]])
O_ZERO = polar([[(0.705, -3.085), (0.702, -3.083)], [(0.702, -3.083), (0.705, 0.056)]])
O_MINUS1 = polar([[(0.707, -0.035), (0.701, -0.035)], [(0.701, -0.035), (0.705, 3.107)]])

# 8f transform truncated to modes 1, 0, -1, -2
T_CNOT = polar(
    [
        [(0.58, 2.758), (0.0, -0.642), (0.004, 2.993), (0.005, -2.713)],
        [(0.0, -0.642), (0.568, 2.762), (0.576, -1.25), (0.57, 1.89)],
        [(0.004, 2.993), (0.576, -1.25), (0.579, -2.115), (0.006, -2.506)],
        [(0.005, -2.713), (0.57, 1.89), (0.006, -2.506), (0.574, -2.125)],
    ]
)
T_CNOT_LABELS = (1, 0, -1, -2)

O_CNOT = polar(
    [
        [(0.336, 0.643), (0.003, 0.252), (0.002, 1.743), (0.003, 2.32)],
        [(0.003, 0.252), (0.333, 0.633), (0.002, -1.4), (0.003, -0.823)],
        [(0.002, 1.743), (0.002, -1.4), (0.003, -3.049), (0.331, 0.636)],
        [(0.003, 2.32), (0.003, -0.823), (0.331, 0.636), (0.001, 0.253)],
    ]
)

HADAMARD_FIDELITY = 0.99999
HADAMARD_SUCCESS = 0.99
CNOT_FIDELITY = 0.999
CNOT_SUCCESS = 0.99 / 9


def embed_cnot_transform(window):
    """Published CNOT transform placed on a full window, zeros elsewhere."""
    T = np.zeros((window.M, window.M), dtype=complex)
    idx = [window.index(l) for l in T_CNOT_LABELS]
    T[np.ix_(idx, idx)] = T_CNOT
    return T


def phase_diff(a, b):
    return abs(np.angle(a * np.conj(b)))
