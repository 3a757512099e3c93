"""Why run the verifier on its own thread.

A slow verifier (50 ms per call here) stalls a sequential loop every V
frames. On its own thread the tracker keeps going and only applies the
answers when they arrive.

Run with ``python demos/03_throughput.py``.
"""

from ptav.benchmark import run_ope
from ptav.config import RunConfig
from ptav.synthetic import SyntheticSpec, generate_synthetic

seq = generate_synthetic(SyntheticSpec(name="speed", seed=2, n_frames=300))

for mode in ("deterministic", "parallel"):
    rep = run_ope(seq, RunConfig(mode=mode, verifier_delay_ms=50))
    print(f"{mode:13s} {rep.fps:6.1f} fps  requests {rep.event_summary().get('request', 0)}")

# Sequentially, fewer verifications mean fewer stalls.
for V in (5, 10, 15):
    rep = run_ope(seq, RunConfig(V=V, verifier_delay_ms=50))
    print(f"V = {V:2d}: {rep.fps:6.1f} fps, DPR {rep.dpr:.3f}")
