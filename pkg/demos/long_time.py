"""Long-time behaviour: rescaled winding laws and the CH1 limit law.

Run: python demos/long_time.py
"""
import numpy as np

from loopwind import BridgeSpec, Geometry, bridge_cf, ch1_longtime_index, index_distribution, limit_cf

# winding / t on CP1 approaches a Cauchy law with CF exp(-2 |lam|)
g = Geometry.cp1()
for t in (10.0, 40.0, 160.0):
    v = bridge_cf(g, 1.0 / t, BridgeSpec(0.6, 0.9, 0.0, t)).real
    print(f"cp1 t={t:5.0f}  E exp(i theta/t) = {v:.5f}  limit {float(limit_cf(g, 1.0)):.5f}")

# on CH1 the index itself has a limit law
r0, r = 0.7, 1.1
k = np.arange(0, 4)
print("ch1 limit P(k):", np.round(ch1_longtime_index(r0, r, 0.0, k), 5))
for t in (30.0, 120.0):
    d = index_distribution(Geometry.ch1(), BridgeSpec(r0, r, 0.0, t), -40, 40)
    print(f"ch1 t={t:4.0f}     P(k):", np.round(d.probs[40:44], 5))
