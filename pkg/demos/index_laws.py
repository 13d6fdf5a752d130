"""Index distributions of Brownian bridges on several fibrations.

Run: python demos/index_laws.py
"""
import numpy as np

from loopwind import BridgeSpec, Geometry, index_distribution

CASES = [
    ("cp1", Geometry.cp1(), BridgeSpec(0.6, 0.9, 0.0, 0.8)),
    ("sphere n=2 mu=1", Geometry.sphere(2, 1.0), BridgeSpec(0.4, 0.7, 0.0, 0.8)),
    ("ch1", Geometry.ch1(), BridgeSpec(0.7, 1.1, 0.0, 1.0)),
    ("ads n=1 mu=1", Geometry.ads(1, 1.0), BridgeSpec(0.5, 0.9, 0.0, 1.0)),
]

for name, g, br in CASES:
    d = index_distribution(g, br, -30, 30)
    print(f"{name:18s} P(0)={d.prob(0):.6f} P(1)={d.prob(1):.3e} P(5)={d.prob(5):.3e} "
          f"defect={d.norm_defect:.1e} tail_const={d.tail_constant}")

# heavy (k^-2) versus Gaussian-type tails
for name, g, br in CASES[::2]:
    d = index_distribution(g, br, -30, 30)
    k = d.k[d.k > 0]
    print(name, "k^2 P(k) at k=10,20,30:", np.round(k[[9, 19, 29]] ** 2 * d.probs[d.k > 0][[9, 19, 29]], 6))
