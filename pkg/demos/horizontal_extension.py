"""Stretch a cylinder transverse to the horizontal until horizontal
saddle connections grow tenfold.

    python3 demos/horizontal_extension.py [seed]
"""
import sys

from flatlab.experiments import ExperimentConfig, run_aw_extension

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = ExperimentConfig("aw_extension", family={"family": "two_tori", "x": 0.05}, seed=seed, histograms=False)
rep = run_aw_extension(cfg)
for st in rep.results["steps"]:
    print(f"step {st['step']}: area {st['area']:.4f} t {st['t']:.6f} "
          f"shortest {st['before']:.6f} -> {st['after']:.6f} (rel err {st['rel_error']:.1e})")
s = rep.results["summary"]
print(f"reached {s['final']:.4f} > {s['target']:.4f} in {s['steps']} steps (bound {s['step_bound']})")
