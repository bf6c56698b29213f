"""A short tour: build surfaces, list saddle connections, read off cylinders.

    python3 demos/surfaces_tour.py
"""
from flatlab.families import build_h11, build_h2, regular_octagon, sample_h2
from flatlab.surface import area, periods, validate
from flatlab.trace import Periodic, horizontal_cylinders, saddle_connections, shortest_sc

import numpy as np


def show(name, q, L=1.5):
    rep = validate(q)
    print(f"{name}: stratum {rep.stratum}, area {area(q):.6f}, shortest SC {shortest_sc(q):.4f}")
    for s in sorted(saddle_connections(q, L), key=lambda s: s.length)[:6]:
        print(f"    holonomy ({s.holonomy[0]: .4f}, {s.holonomy[1]: .4f})  length {s.length:.4f}")
    hc = horizontal_cylinders(q, 20.0)
    if isinstance(hc, Periodic):
        for c in hc.cylinders:
            print(f"    horizontal cylinder: circumference {c.circumference:.4f}, "
                  f"height {c.height:.4f}, twist {c.twist:.4f}")
    else:
        print("    horizontal direction is not periodic within the cap")


if __name__ == "__main__":
    show("H(1,1) a=0.6 b=0.2", build_h11(0.6, 0.2, 0.1, 0.3))
    show("H(2) slit torus", build_h2(sample_h2(0.3, np.random.default_rng(0))))
    show("regular octagon", regular_octagon(), L=3.0)
    print("period coordinates of the H(1,1) example:")
    pv = periods(build_h11(0.6, 0.2, 0.1, 0.3))
    for n, (x, y) in zip(pv.names, pv.entries):
        print(f"    {n}: ({x:.4f}, {y:.4f})")
