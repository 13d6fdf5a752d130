import math

import numpy as np
import pytest
from scipy import integrate, stats

from loopwind import BridgeSpec, Geometry, SimConfig, conditional_cf
from loopwind.errors import DomainError, InsufficientStatisticsError, UnsupportedGeometryError
from loopwind.kernels import compact_jacobi_kernel, hyperbolic_jacobi_kernel
from loopwind.montecarlo import (estimate_conditional_cf, estimate_index_distribution,
                                 simulate_radial, simulate_winding_pair, wilson_interval)


def test_config_validation():
    with pytest.raises(DomainError):
        SimConfig(dt=0.0)
    with pytest.raises(DomainError):
        SimConfig(n_paths=0)
    with pytest.raises(DomainError):
        SimConfig(kappa=2.0)
    with pytest.raises(DomainError):
        SimConfig(dt=0.1).check_horizon(1.0)


def test_deterministic_and_thread_independent():
    g = Geometry.ads(1, 1.0)
    cfg = SimConfig(dt=0.01, n_paths=20000, seed=3)
    a = simulate_winding_pair(g, 0.5, 1.0, cfg)
    b = simulate_winding_pair(g, 0.5, 1.0, cfg)
    c = simulate_winding_pair(g, 0.5, 1.0, SimConfig(dt=0.01, n_paths=20000, seed=3, threads=2))
    for x, y in ((a, b), (a, c)):
        assert np.array_equal(x.r_end, y.r_end)
        assert np.array_equal(x.theta_end, y.theta_end)
        assert np.array_equal(x.variance, y.variance)
    d = simulate_winding_pair(g, 0.5, 1.0, SimConfig(dt=0.01, n_paths=20000, seed=4))
    assert not np.array_equal(a.r_end, d.r_end)


def test_drift_pushes_off_the_pole():
    r = simulate_radial(Geometry.cp1(), 0.1, 0.02, SimConfig(dt=2e-4, n_paths=20000, seed=1))
    assert r.mean() > 0.1 + 5 * r.std() / math.sqrt(r.size)


def test_paths_stay_in_domain():
    for g, r0 in ((Geometry.cp1(), 0.05), (Geometry.sphere(1, 1.0), 1.5), (Geometry.ch1(), 0.05)):
        s = simulate_winding_pair(g, r0, 0.5, SimConfig(dt=0.005, n_paths=5000, seed=2))
        assert np.all(s.r_end > 0) and np.all(np.isfinite(s.theta_end))
        if g.kind != "ch1":
            assert np.all(s.r_end < math.pi / 2)
        assert np.all(s.variance > 0)


def _chi2_pvalue(r, density, edges):
    counts, _ = np.histogram(r, edges)
    probs = np.array([integrate.quad(density, a, b, epsabs=1e-12)[0]
                      for a, b in zip(edges[:-1], edges[1:])])
    probs = np.append(probs, max(1.0 - probs.sum(), 0.0))
    counts = np.append(counts, r.size - counts.sum())
    # every bin within 3 standard errors of its expected count
    se = np.sqrt(np.maximum(probs * (1 - probs), 1e-300) * r.size)
    assert np.all(np.abs(counts - probs * r.size) <= 3 * se)
    keep = probs * r.size >= 5
    exp = probs[keep] * r.size
    obs = counts[keep]
    exp *= obs.sum() / exp.sum()
    return stats.chisquare(obs, exp).pvalue


@pytest.mark.parametrize("geom,alpha,r0,t", [(Geometry.cp1(), 0.0, 0.6, 0.5),
                                             (Geometry.sphere(2, 0.5), 1.0, 0.6, 0.5)])
def test_radial_law_compact(geom, alpha, r0, t):
    r = simulate_radial(geom, r0, t, SimConfig(dt=t / 200, n_paths=20000, seed=5))
    edges = np.linspace(0, math.pi / 2, 21)
    p = _chi2_pvalue(r, lambda x: float(compact_jacobi_kernel(alpha, 0.0, t, r0, x)), edges)
    assert p > 1e-3


def test_radial_law_hyperbolic():
    t, r0 = 1.0, 0.7
    r = simulate_radial(Geometry.ch1(), r0, t, SimConfig(dt=t / 200, n_paths=20000, seed=5))
    edges = np.linspace(0, 4.0, 21)
    p = _chi2_pvalue(r, lambda x: float(hyperbolic_jacobi_kernel(0.0, 0.0, t, r0, x)), edges)
    assert p > 1e-3


@pytest.mark.parametrize("geom,r0,r,t", [(Geometry.cp1(), 0.6, 0.9, 0.8),
                                         (Geometry.ch1(), 0.7, 1.1, 1.0)])
def test_polar_form_agrees_with_clock(geom, r0, r, t):
    cfg = SimConfig(dt=t / 200, n_paths=20000, seed=11, bin_halfwidth=0.05)
    a = simulate_winding_pair(geom, r0, t, cfg, r_target=r, fiber="clock")
    b = simulate_winding_pair(geom, r0, t, cfg, r_target=r, fiber="polar")
    ea, sa = estimate_conditional_cf(geom, 1.0, r0, r, t, cfg, sample=a)
    eb, sb = estimate_conditional_cf(geom, 1.0, r0, r, t, cfg, sample=b)
    assert abs(ea - eb) <= 4 * math.hypot(sa, sb)


def test_radial_law_independent_of_mu():
    cfg0 = SimConfig(dt=0.005, n_paths=10000, seed=21)
    cfg1 = SimConfig(dt=0.005, n_paths=10000, seed=22)
    a = simulate_winding_pair(Geometry.sphere(1, 0.0), 0.4, 0.8, cfg0).r_end
    b = simulate_winding_pair(Geometry.sphere(1, 1.0), 0.4, 0.8, cfg1).r_end
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_cf_estimator_basics():
    g = Geometry.ads(1, 1.0)
    cfg = SimConfig(dt=0.01, n_paths=20000, seed=8, bin_halfwidth=0.05)
    s = simulate_winding_pair(g, 0.5, 1.0, cfg, r_target=0.9)
    assert estimate_conditional_cf(g, 0.0, 0.5, 0.9, 1.0, cfg, sample=s) == (1.0, 0.0)
    e1, s1 = estimate_conditional_cf(g, 0.7, 0.5, 0.9, 1.0, cfg, sample=s)
    e2, s2 = estimate_conditional_cf(g, -0.7, 0.5, 0.9, 1.0, cfg, sample=s)
    assert e2 == e1.conjugate() and s1 == s2
    ref = conditional_cf(g, 0.7, 0.5, 0.9, 1.0)
    assert abs(e1 - ref) <= 4 * s1
    ec, sc = estimate_conditional_cf(g, 0.7, 0.5, 0.9, 1.0, cfg, sample=s, conditional=True)
    assert ec.imag == 0.0 and sc < s1
    assert abs(ec - ref) <= 4 * sc


def test_insufficient_statistics():
    g = Geometry.ch1()
    cfg = SimConfig(dt=0.01, n_paths=2000, seed=1, bin_halfwidth=0.001)
    with pytest.raises(InsufficientStatisticsError):
        estimate_conditional_cf(g, 1.0, 0.7, 3.5, 1.0, cfg)


def test_unsupported_dimension():
    with pytest.raises(UnsupportedGeometryError):
        simulate_winding_pair(Geometry.sphere(2, 1.0), 0.4, 0.8, SimConfig(dt=0.005, n_paths=10))


def test_wilson_interval():
    lo, hi = wilson_interval(5, 10)
    assert lo == pytest.approx(0.2365931, abs=1e-6)
    assert hi == pytest.approx(0.7634069, abs=1e-6)
    lo, hi = wilson_interval(0, 50)
    assert abs(lo) <= 1e-15 and 0 < hi < 0.1


def test_cp1_loop_symmetric():
    g = Geometry.cp1()
    cfg = SimConfig(dt=0.004, n_paths=20000, seed=13, bin_halfwidth=0.05)
    e = estimate_index_distribution(g, BridgeSpec.loop(0.6, 0.8), cfg, -3, 3)
    z = (e.probs - e.probs[::-1]) / np.hypot(e.stderr, e.stderr[::-1]).clip(1e-300)
    assert np.all(np.abs(z[:3]) <= 3)
    assert abs(e.probs.sum() - 1) <= 1e-12


def test_bin_mode_consistent_with_conditional_mode():
    g = Geometry.ads(1, 1.0)
    cfg = SimConfig(dt=0.02, n_paths=40000, seed=17, bin_halfwidth=0.15, angle_halfwidth=0.5)
    br = BridgeSpec(0.5, 0.9, 0.0, 2.0)
    s = simulate_winding_pair(g, br.r0, br.t, cfg, r_target=br.r)
    a = estimate_index_distribution(g, br, cfg, -2, 2, method="bin", sample=s)
    b = estimate_index_distribution(g, br, cfg, -2, 2, method="conditional", sample=s)
    assert np.all(np.abs(a.probs - b.probs) <= 4 * np.hypot(a.stderr, b.stderr))
    assert np.all((a.ci_lo <= a.probs) & (a.probs <= a.ci_hi))


def test_bin_refinement():
    g = Geometry.sphere(1, 1.0)
    ref = conditional_cf(g, 1.0, 0.4, 0.7, 0.8)
    for hw in (0.05, 0.02):
        cfg = SimConfig(dt=0.004, n_paths=40000, seed=19, bin_halfwidth=hw)
        e, se = estimate_conditional_cf(g, 1.0, 0.4, 0.7, 0.8, cfg, conditional=True)
        assert abs(e - ref) <= 3 * se


def test_dt_halving_within_one_standard_error():
    # the comparison runs use 8x the nominal paths so the sampling noise of
    # the difference is half a nominal standard error
    g = Geometry.ads(1, 1.0)
    nominal = 10000
    est = []
    for dt in (0.01, 0.005):
        cfg = SimConfig(dt=dt, n_paths=8 * nominal, seed=23, bin_halfwidth=0.05)
        est.append(estimate_conditional_cf(g, 1.0, 0.5, 0.9, 1.0, cfg, conditional=True))
    se_nominal = est[0][1] * math.sqrt(8)
    assert abs(est[0][0] - est[1][0]) < se_nominal
