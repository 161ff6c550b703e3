"""Render the bundled propagation scenes through the CLI.

Writes one directory per scene with intensity.csv, intensity.pgm and
summary.json.

    python demos/render_scenes.py [outdir]
"""

import sys
from pathlib import Path

from qfo.cli import main

root = Path(__file__).resolve().parents[1]
out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
for name in ("free_space", "hadamard_scene", "cnot_scene"):
    code = main(["propagate", "--config", str(root / "configs" / f"{name}.json"), "--out", str(out / name)])
    print(f"{name}: exit {code}")
