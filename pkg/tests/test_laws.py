import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopwind import (BridgeSpec, Geometry, ads_fiber_density, ads_joint_density, bridge_cf,
                      ch1_fiber_density_integral, ch1_longtime_index, conditional_cf, fiber_density,
                      index_distribution, limit_cf, mu_convolution_check, planar_index,
                      planar_index_distribution, sl2_loop_index, sl2_weight)
from loopwind.errors import DomainError, UnsupportedGeometryError, WindowTooNarrowError
from loopwind.kernels import compact_jacobi_kernel, fs_distance, hyperbolic_jacobi_kernel
from loopwind.laws import lattice_sum

# (geometry, r0, r, theta, t) per geometry
CANON = {
    "cp1": (Geometry.cp1(), 0.6, 0.9, 1.0, 0.8),
    "ch1": (Geometry.ch1(), 0.7, 1.1, 1.0, 1.0),
    "sphere": (Geometry.sphere(1, 1.0), 0.4, 0.7, 1.0, 0.8),
    "sphere0": (Geometry.sphere(1, 0.0), 0.4, 0.7, 1.0, 0.8),
    "sphere2": (Geometry.sphere(2, 1.0), 0.4, 0.7, 1.0, 0.8),
    "ads": (Geometry.ads(1, 1.0), 0.5, 0.9, 1.0, 1.0),
    "ads2": (Geometry.ads(2, 0.5), 0.5, 0.9, 1.0, 1.0),
    "sl2": (Geometry.sl2(1.0), 0.3, 0.8, 1.0, 1.0),
    "plane": (Geometry.plane(), 1.0, 1.2, 1.0, 1.0),
}
NAMES = list(CANON)
LAMS = np.linspace(0.05, 5.0, 12)


# conditional characteristic functions

@pytest.mark.parametrize("name", NAMES)
def test_cf_axioms(name):
    g, r0, r, _, t = CANON[name]
    assert conditional_cf(g, 0.0, r0, r, t) == 1.0
    v = conditional_cf(g, LAMS, r0, r, t)
    w = conditional_cf(g, -LAMS, r0, r, t)
    assert np.max(np.abs(v - w)) <= 1e-12
    assert np.all(v > 0) and np.all(v <= 1.0)
    assert np.all(np.diff(v) < 0)


@settings(max_examples=15, deadline=None)
@given(name=st.sampled_from(["cp1", "sphere", "ads", "plane"]), lam=st.floats(0.01, 5.0),
       r0=st.floats(0.1, 1.2), r=st.floats(0.1, 1.2), t=st.floats(0.2, 2.0))
def test_cf_axioms_property(name, lam, r0, r, t):
    g = CANON[name][0]
    v = conditional_cf(g, lam, r0, r, t)
    assert 0 < v <= 1.0
    assert conditional_cf(g, -lam, r0, r, t) == v


def test_cf_sl2_dispatch_identical():
    g, r0, r, _, t = CANON["sl2"]
    a = conditional_cf(g, LAMS, r0, r, t)
    b = conditional_cf(Geometry.ads(1, 1.0), LAMS, r0, r, t)
    assert np.array_equal(a, b)


def test_cf_rejects_bad_radius():
    with pytest.raises(DomainError):
        conditional_cf(Geometry.cp1(), 1.0, 0.3, 2.0, 1.0)
    with pytest.raises(DomainError):
        conditional_cf(Geometry.ch1(), 1.0, 0.3, 0.5, -1.0)


def test_plane_cf_bessel_identity():
    # E[exp(i lam theta) | |z(t)|] = I_|lam|(r0 r / t) / I_0(r0 r / t)
    from scipy import special
    r0, r, t = 1.0, 1.2, 1.0
    x = r0 * r / t
    for lam in (0.3, 1.0, 2.5):
        ref = special.ive(lam, x) / special.ive(0, x)
        assert abs(conditional_cf(Geometry.plane(), lam, r0, r, t) / ref - 1) <= 1e-10


# fiber densities

@pytest.mark.parametrize("name", ["cp1", "ch1", "sphere", "ads", "plane"])
def test_fiber_density_normalized_and_even(name):
    g, r0, r, _, t = CANON[name]
    res = fiber_density(g, r0, r, t, np.array([0.7, -0.7, 3.0, -3.0]))
    assert abs(res.value[0] - res.value[1]) <= 1e-9
    assert abs(res.value[2] - res.value[3]) <= 1e-9
    # mass over [-L, L] by panels, closed with the c / theta^2 asymptote for heavy tails
    edges = [0.0, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0]
    x, w = np.polynomial.legendre.leggauss(64)
    inner = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        th = 0.5 * (b - a) * x + 0.5 * (a + b)
        inner += 0.5 * (b - a) * float(np.sum(w * fiber_density(g, r0, r, t, th).value))
    big = edges[-1]
    tail = 0.0 if g.dispatch.gaussian_tails else big * fiber_density(g, r0, r, t, big).value
    assert abs(2 * (inner + tail) - 1.0) <= 1e-5


@pytest.mark.parametrize("tup", [(0.7, 1.1, 1.0, 2.0), (0.4, 0.9, 0.6, 0.5)])
def test_ch1_inversion_matches_triple_integral(tup):
    r0, r, t, theta = tup
    a = fiber_density(Geometry.ch1(), r0, r, t, theta).value
    b = ch1_fiber_density_integral(r0, r, t, theta).value
    assert abs(a / b - 1) <= 1e-4


def test_ads_inversion_matches_joint_density_path():
    g, r0, r, _, t = CANON["ads"]
    th = np.array([0.3, 2.0])
    a = fiber_density(g, r0, r, t, th).value
    b = ads_fiber_density(1, 1.0, t, r0, r, th).value
    assert np.max(np.abs(a / b - 1)) <= 1e-4
    c = fiber_density(g, r0, r, t, th, method="oracle").value
    assert np.array_equal(b, c)


def test_fiber_density_oracle_unsupported():
    with pytest.raises(UnsupportedGeometryError):
        fiber_density(Geometry.cp1(), 0.6, 0.9, 0.8, 0.0, method="oracle")


# index distributions

@pytest.mark.parametrize("name", ["cp1", "sphere", "sphere2", "ads", "plane"])
def test_index_distribution_defect(name):
    g, r0, r, th, t = CANON[name]
    d = index_distribution(g, BridgeSpec(r0, r, th, t), -60, 60)
    assert d.norm_defect <= 1e-4
    assert abs(d.probs.sum() - 1.0) <= 1e-12
    assert np.all(d.probs >= 0)


@pytest.mark.parametrize("name", ["cp1", "sphere", "ads"])
def test_loop_distribution_even(name):
    g, _, r, _, t = CANON[name]
    d = index_distribution(g, BridgeSpec.loop(r, t), -40, 40)
    assert np.max(np.abs(d.probs - d.probs[::-1])) <= 1e-12


def test_cp1_absolute_form_sums_to_one():
    g, r0, r, th, t = CANON["cp1"]
    w0 = math.tan(r0)
    w = math.tan(r) * complex(math.cos(th), math.sin(th))
    d = fs_distance(w0, w)
    pref = (2 * math.pi * math.sin(2 * d) / math.sin(2 * r)
            * compact_jacobi_kernel(0, 0, t, r0, r) / compact_jacobi_kernel(0, 0, t, 0.0, d))
    total = pref * lattice_sum(g, r0, r, t, th)
    assert abs(total - 1.0) <= 1e-3


def test_cp1_heavy_tail_constant():
    g, r0, r, th, t = CANON["cp1"]
    d = index_distribution(g, BridgeSpec(r0, r, th, t), -60, 60)
    ks = np.arange(20, 41)
    c = ks ** 2 * d.absolute()[ks + 60]
    assert c.max() / c.min() - 1 <= 0.1
    assert d.tail_constant > 0


def test_window_too_narrow_and_bad_window():
    g, r0, r, th, t = CANON["cp1"]
    with pytest.raises(WindowTooNarrowError):
        index_distribution(g, BridgeSpec(r0, r, th, t), -2, 2)
    d = index_distribution(g, BridgeSpec(r0, r, th, t), -2, 2, strict=False)
    assert d.norm_defect > 1e-4
    with pytest.raises(DomainError):
        index_distribution(g, BridgeSpec(r0, r, th, t), 1, 10)


def test_prob_accessor():
    g, r0, r, th, t = CANON["sphere"]
    d = index_distribution(g, BridgeSpec(r0, r, th, t), -30, 30)
    assert d.prob(0) == d.probs[30]
    with pytest.raises(KeyError):
        d.prob(31)


# bridge characteristic function

@pytest.mark.parametrize("name", ["cp1", "sphere", "ads"])
@pytest.mark.parametrize("m", [1, 2, -1])
def test_bridge_cf_lattice_shift(name, m):
    g, r0, r, th, t = CANON[name]
    br = BridgeSpec(r0, r, th, t)
    lam = 0.3
    a = bridge_cf(g, lam + m, br)
    b = complex(math.cos(m * th), math.sin(m * th)) * bridge_cf(g, lam, br)
    assert abs(a - b) <= 1e-8


@pytest.mark.parametrize("name", ["cp1", "ads"])
def test_bridge_cf_matches_distribution(name):
    g, r0, r, th, t = CANON[name]
    br = BridgeSpec(r0, r, th, t)
    d = index_distribution(g, br, -200, 200)
    lam = 0.37
    emp = np.sum(d.absolute() * np.exp(1j * lam * (th + 2 * math.pi * d.k)))
    # mass outside the window can rotate the sum by at most tail_mass
    assert abs(emp - bridge_cf(g, lam, br)) <= d.tail_mass + 1e-4
    assert bridge_cf(g, 0.0, br) == pytest.approx(1.0, abs=1e-15)


# SL2 closed forms

@pytest.mark.parametrize("t", [1.0, 4.0, 16.0])
def test_sl2_closed_form_matches_integral(t):
    a = sl2_loop_index(t, 0.0, -5, 5).probs
    b = sl2_loop_index(t, 0.0, -5, 5, method="closed").probs
    assert np.max(np.abs(a / b - 1)) <= 1e-8


def test_sl2_closed_form_requires_mu_zero():
    with pytest.raises(DomainError):
        sl2_weight(1, 1.0, 0.5, method="closed")


def test_sl2_gaussian_limit():
    L, mu = 100.0, 1.0
    d = sl2_loop_index(L, mu, -60, 60)
    x = 2 * math.pi * d.k / math.sqrt(2 * L)
    var = np.sum(d.probs * x * x)
    skew = np.sum(d.probs * x ** 3) / var ** 1.5
    assert 0.95 <= var <= 1.05
    assert abs(skew) <= 0.02


def test_sl2_origin_loop_matches_ads_inversion_limit():
    # the closed form at the origin against the ads inversion at a nearby base point
    ref = sl2_loop_index(4.0, 0.0, -8, 8, method="closed")
    d = index_distribution(Geometry.sl2(0.0), BridgeSpec(0.0, 0.0, 0.0, 4.0), -8, 8)
    assert np.max(np.abs(d.probs - ref.probs)) <= 1e-6


# planar law

def test_planar_telescoping():
    d = planar_index_distribution(1.0, -50, 50)
    assert abs(d.probs.sum() - 1.0) <= 1e-12
    raw = planar_index(1.0, np.arange(-50, 51))
    assert abs(1.0 - raw.sum()) <= 1e-3
    assert d.norm_defect <= 1e-3


def test_planar_symmetry_and_tail():
    ks = np.arange(1, 41)
    assert np.allclose(planar_index(1.0, ks), planar_index(1.0, -ks), rtol=0, atol=1e-15)
    c = np.arange(20, 41) ** 2 * planar_index(1.0, np.arange(20, 41))
    assert c.max() / c.min() - 1 <= 0.05


def test_planar_rejects():
    with pytest.raises(DomainError):
        planar_index(0.0, 1)
    with pytest.raises(DomainError):
        planar_index(1.0, 0.5)


# long-time laws

def test_ch1_longtime_normalized_and_even():
    ks = np.arange(-200, 201)
    p = ch1_longtime_index(0.7, 1.1, 0.0, ks)
    # beyond the window P(k) ~ C / k^2 with C read off at the edge
    tail = 2 * p[-1] * 200 ** 2 / 200.5
    assert abs(p.sum() + tail - 1.0) <= 1e-2
    assert np.max(np.abs(p - p[::-1])) <= 1e-12


def test_limit_cf_values():
    assert limit_cf(Geometry.cp1(), 0.0) == 1.0
    assert limit_cf(Geometry.cp1(), 1.0) == pytest.approx(math.exp(-2))
    assert limit_cf(Geometry.sphere(3, 0.5), 1.0) == pytest.approx(math.exp(-3))
    assert limit_cf(Geometry.ads(1, 0.5), 1.0) == pytest.approx(math.exp(-0.625))
    assert limit_cf(Geometry.sl2(0.5), 1.0) == limit_cf(Geometry.ads(1, 0.5), 1.0)
    with pytest.raises(UnsupportedGeometryError):
        limit_cf(Geometry.plane(), 1.0)
    with pytest.raises(UnsupportedGeometryError):
        limit_cf(Geometry.ch1(), 1.0)


# anti-de Sitter joint density

def test_ads_marginal_matches_radial_kernel():
    t, r0, r = 1.0, 0.5, 0.9
    x, w = np.polynomial.legendre.leggauss(200)
    half = 14 * math.sqrt(2 * t) + 2
    j = ads_joint_density(1, 1.0, t, r0, r, half * x).value
    marg = np.sum(w * half * j) * math.sinh(r) * math.cosh(r)
    assert abs(marg / hyperbolic_jacobi_kernel(0, 0, t, r0, r) - 1) <= 1e-3


def test_ads_joint_even_and_mu_zero():
    j = ads_joint_density(1, 1.0, 1.0, 0.5, 0.9, np.array([0.8, -0.8])).value
    assert abs(j[0] - j[1]) <= 1e-9 * abs(j[0])
    # mu = 0 loop at the origin: the fiber law matches the sl2 closed form
    f = ads_fiber_density(1, 0.0, 4.0, 0.0, 0.0, 2 * math.pi * np.arange(-30, 31)).value
    ref = sl2_loop_index(4.0, 0.0, -30, 30, method="closed").probs
    assert abs(f[31] / f.sum() / ref[31] - 1) <= 1e-6


# mu-convolution

def test_mu_convolution_canonical():
    assert mu_convolution_check(1, 1.0, 0.4, 0.7, 0.8, 1.0) <= 1e-4


def test_mu_convolution_small_mu_identity():
    assert mu_convolution_check(1, 1e-3, 0.4, 0.7, 0.8, 1.0, identity=True) <= 1e-3


def test_mu_convolution_theta_symmetry():
    a = fiber_density(Geometry.sphere(1, 1.0), 0.4, 0.7, 0.8, 1.3).value
    b = fiber_density(Geometry.sphere(1, 1.0), 0.4, 0.7, 0.8, -1.3).value
    assert abs(a - b) <= 1e-12
    with pytest.raises(DomainError):
        mu_convolution_check(1, 0.0, 0.4, 0.7, 0.8, 1.0)
