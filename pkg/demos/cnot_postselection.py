"""Post-selected CNOT: from |+>|up> to a Bell pair, one time in nine.

    python demos/cnot_postselection.py
"""

import numpy as np

from qfo import load_fixture
from qfo.evolution import CoincidenceProjector, coincidence_project, evolve, reduced_one_photon_density
from qfo.modes import QubitLayout, make_qubit_state, product_state
from qfo.propagation import PropagationScene, fringe_visibility, output_scene

rep = load_fixture("cnot_physical")
w = rep.problem.window
layout = QubitLayout(w, (0, -1))
print(rep.operators[0].format(3))
print(f"F={rep.fidelity:.9f}  S={rep.success:.5f}  9S={9 * rep.success:.4f}\n")

s2 = 1 / np.sqrt(2)
psi = product_state([make_qubit_state(layout, 0, s2, s2), make_qubit_state(layout, -1, 0, 1)])
out = evolve(psi, rep.transform())

proj = CoincidenceProjector.for_qubits(layout, 0, -1)
kept = coincidence_project(out, proj)
print(f"coincidence probability {kept.norm2:.4f} (ideal 1/9 = {1 / 9:.4f})")

# two-qubit amplitudes, control first
dn0, up0 = layout.labels(0)
dnt, upt = layout.labels(-1)
for c, cl in ((up0, "up"), (dn0, "dn")):
    for t, tl in ((upt, "up"), (dnt, "dn")):
        a = kept.amplitude_at([c, t]) / np.sqrt(kept.norm2)
        print(f"  |{cl},{tl}>  {abs(a):.4f} e^{{{np.angle(a):+.3f}i}}")

# after the projection each photon is maximally mixed: no fringes behind the gate
rho = reduced_one_photon_density(kept)
post = output_scene(PropagationScene(window=w), 0.02)
for q in (0, -1):
    pair = layout.labels(q)
    print(f"qubit {q:+d} fringe visibility {fringe_visibility(post, rho, pair, 0.01):.2e}")
