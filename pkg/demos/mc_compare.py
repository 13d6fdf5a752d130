"""Monte Carlo check of an analytic index law.

Run: python demos/mc_compare.py  (about a minute)
"""
from loopwind import BridgeSpec, Geometry, SimConfig, estimate_index_distribution, index_distribution

g = Geometry.cp1()
br = BridgeSpec(0.6, 0.9, 0.0, 0.8)
exact = index_distribution(g, br, -30, 30)
cfg = SimConfig(dt=br.t / 200, n_paths=100_000, seed=7, bin_halfwidth=0.05)
mc = estimate_index_distribution(g, br, cfg, -30, 30)
z = mc.z_scores(exact.probs)

print(f"accepted {mc.n_accepted} of {mc.n_paths} paths")
print(" k   analytic     mc         stderr     z")
for i in range(27, 34):
    print(f"{mc.k[i]:2d}  {exact.probs[i]:.6f}  {mc.probs[i]:.6f}  {mc.stderr[i]:.2e}  {z[i]:+.2f}")
