"""Push two different H(2) bundles along the geodesic flow and watch the
KS distance between their shortest-saddle-connection laws shrink.

    python3 demos/horocycle_equidistribution.py [N]
"""
import sys

from flatlab.experiments import ExperimentConfig, run_equidistribution

N = int(sys.argv[1]) if len(sys.argv) > 1 else 300
cfg = ExperimentConfig("equidistribution", N=N, t_grid=[0.0, 1.0, 2.0, 3.0], seed=7, histograms=False)
rep = run_equidistribution(cfg)
ks = rep.results["replications"][0]["cross_ks"]
for t, vals in ks.items():
    print(f"t = {t}: KS distance {vals['shortest_sc']:.4f}")
