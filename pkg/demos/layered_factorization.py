"""Deeper stacks reach more of U(M).

A single pupil is a circulant. Alternating pupils and modulators cover
arbitrary unitaries as the depth grows; here a random 4x4 target.

    python demos/layered_factorization.py
"""

import numpy as np
from scipy.stats import unitary_group

from qfo import fit_unitary

U = unitary_group.rvs(4, random_state=7)
for depth in (1, 3, 5, 7):
    _, _, err = fit_unitary(U, depth, restarts=3, seed=1)
    print(f"{depth} layers: ||stack - e^(i theta) U||_F = {err:.2e}")
