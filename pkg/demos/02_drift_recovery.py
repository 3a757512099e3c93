"""Drift and recovery on a synthetic teleport sequence.

The target jumps to a new position at frame 50. The tracker alone stays
behind; with the verifier attached, the request at frame 50 fails,
re-detection finds the target and the tracker replays from the
corrected box.

Run with ``python demos/02_drift_recovery.py``.
"""

import numpy as np

from ptav.benchmark import run_ope
from ptav.config import RunConfig
from ptav.synthetic import SyntheticSpec, generate_synthetic

spec = SyntheticSpec(name="teleport", seed=0, n_frames=120, teleport_frame=50, teleport_x=140, teleport_y=110)
seq = generate_synthetic(spec)

pure = run_ope(seq, RunConfig(verifier="none"))
ptav = run_ope(seq, RunConfig())

for name, rep in [("tracker only", pure), ("with verifier", ptav)]:
    after = np.mean(rep.overlaps[50:] >= 0.5)
    print(f"{name:14s} DPR {rep.dpr:.3f}  OSR {rep.osr:.3f}  IoU>=0.5 after jump {after:.3f}")

print("\nverification events:")
for ev in ptav.events:
    if ev.kind not in ("update", "replay"):
        print(" ", ev.format())
