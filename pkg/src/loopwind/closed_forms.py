"""Explicit formulas that do not go through CF inversion.

Planar loop law, the SL(2,R) loop law in its integral and mu = 0 closed
forms, the CH1 fiber density as a triple integral, the CH1 long-time index
law, and the anti-de Sitter joint density of (r(t), theta(t)).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError
from .geometry import Geometry
from .kernels import (bergman_distance, hyperbolic_reduced_kernel,
                      odd_hyperbolic_log_kernel)
from .laws import IndexDistribution, NORM_TOL
from .quadrature import NumericResult, Tolerance, integrate_line
from .specfun import spherical_fn, yor_phi

__all__ = [
    "planar_index",
    "planar_index_distribution",
    "sl2_weight",
    "sl2_loop_index",
    "ch1_fiber_density_integral",
    "ch1_longtime_index",
    "ads_joint_density",
    "ads_fiber_density",
]

LINE_TOL = Tolerance(rel=1e-12, abs=1e-15, max_evals=40000)


# ---------------------------------------------------------------------------
# plane


def planar_index(r_param: float, k) -> float | np.ndarray:
    """P(index = k) for the planar Brownian loop, r_param = |z0|^2 / L."""
    if not r_param > 0:
        raise DomainError("r_param must be > 0")
    ks = np.atleast_1d(np.asarray(k))
    if np.any(ks != np.round(ks)):
        raise DomainError("k must be an integer")
    out = np.empty(ks.shape)
    e = math.exp(-r_param)
    for i, kk in enumerate(ks.astype(int)):
        if kk == 0:
            out[i] = 1.0 - 2.0 * e * yor_phi(r_param, math.pi)
        else:
            out[i] = e * (yor_phi(r_param, (2 * kk - 1) * math.pi) - yor_phi(r_param, (2 * kk + 1) * math.pi))
    return float(out[0]) if np.ndim(k) == 0 else out


def planar_index_distribution(r_param: float, k_min: int, k_max: int) -> IndexDistribution:
    """Window of the planar loop law; the tail mass telescopes exactly."""
    ks = np.arange(k_min, k_max + 1)
    p = planar_index(r_param, ks)
    e = math.exp(-r_param)
    tail = e * (yor_phi(r_param, (2 * k_max + 1) * math.pi) + yor_phi(r_param, (-2 * k_min + 1) * math.pi))
    window = float(np.sum(p))
    defect = abs(1.0 - window - tail)
    outer = max(3, ks.size // 4)
    sel = np.r_[np.arange(outer), np.arange(ks.size - outer, ks.size)]
    sel = sel[ks[sel] != 0]
    c = float(np.median(ks[sel] ** 2 * p[sel])) if sel.size else None
    return IndexDistribution(int(k_min), int(k_max), p / window, defect, c, float(tail), "plane",
                             dict(r_param=r_param))


# ---------------------------------------------------------------------------
# SL(2, R)


def _sl2_integral(a: float, mu: float, s: float) -> float:
    """int cos(a y) y/sinh(y) exp(-mu^2 y^2 / (2 s)) dy, s = (1 + mu^2) t.

    For a >= 1 the contour is moved to Im y = 3 pi/2 past the pole at i pi,
    so that the exponentially small result is not formed by cancellation.
    """
    g2 = mu * mu / (2.0 * s)
    hint = 1.0 if mu == 0 else min(1.0, 1.0 / math.sqrt(2 * g2))
    c = 1.5 * math.pi
    if a >= 1.0 and g2 * c * c < 30.0:
        lead = 2.0 * math.pi ** 2 * math.exp(-a * math.pi + g2 * math.pi ** 2)

        def shifted(y):
            z = y + 1j * c
            # z / sinh(z) = i z / cosh(y) on this line
            return np.real(np.exp(1j * a * y - a * c - g2 * z * z) * 1j * z / np.cosh(y))

        # accuracy is only needed relative to the residue term
        res = integrate_line(shifted, hint, Tolerance(1e-12, max(1e-13 * lead, 1e-300), 40000))
        return lead + float(res.value)

    def direct(y):
        ratio = 1.0 if y == 0 else y / math.sinh(y)
        return math.cos(a * y) * ratio * math.exp(-g2 * y * y)

    return float(integrate_line(direct, hint, LINE_TOL).value)


def sl2_weight(k: int, t: float, mu: float, method: str = "integral") -> float:
    """Unnormalized SL2 loop weight of index k."""
    s = (1.0 + mu * mu) * t
    gauss = math.exp(-4.0 * math.pi ** 2 * k * k / (2.0 * s))
    if method == "closed":
        if mu != 0:
            raise DomainError("the closed form holds for mu = 0 only")
        # pi^2 / (1 + cosh x) written to avoid overflow for large x
        x = 2.0 * math.pi ** 2 * abs(k) / t
        return gauss * math.pi ** 2 * 2.0 * math.exp(-x) / (1.0 + math.exp(-x)) ** 2
    if method != "integral":
        raise DomainError(f"unknown method {method!r}")
    a = 2.0 * math.pi * abs(k) / s
    return gauss * _sl2_integral(a, mu, s)


def sl2_loop_index(t: float, mu: float, k_min: int, k_max: int,
                   method: str = "integral") -> IndexDistribution:
    """Index law of the Berger Brownian loop on SL(2, R) from the identity."""
    if not t > 0:
        raise DomainError("t must be > 0")
    if not mu >= 0:
        raise DomainError("mu must be >= 0")
    if not k_min <= 0 <= k_max:
        raise DomainError("the window must contain k = 0")
    ks = np.arange(k_min, k_max + 1)
    w = np.array([sl2_weight(int(k), t, mu, method) for k in ks])
    total = float(np.sum(w))
    # log-concave Gaussian-type tails: geometric bound past each end
    tail = 0.0
    for last, prev in ((w[-1], w[-2]), (w[0], w[1])):
        if last > 0:
            q = last / prev
            tail += float("inf") if q >= 1 else last * q / (1 - q)
    defect = tail / total
    if not defect <= NORM_TOL:
        from .errors import WindowTooNarrowError

        raise WindowTooNarrowError(f"window [{k_min}, {k_max}] too narrow for the SL2 law "
                                   f"(tail {defect:.2e}); widen the window")
    return IndexDistribution(int(k_min), int(k_max), w / total, float(defect), None,
                             float(defect / (1 + defect)), Geometry.sl2(mu).label(),
                             dict(r0=0.0, r=0.0, theta=0.0, t=t, method=method))


# ---------------------------------------------------------------------------
# CH1: the fiber density as an explicit triple integral

_S_MAX = 70.0


def _logistic_grid(h: float):
    s = np.arange(-_S_MAX, _S_MAX + 0.5 * h, h)
    return s, np.logaddexp(0.0, s)  # log(1 + e^s)


def _euler_factor(s, log1p_es, sh2_log, p, sign):
    """Euler integrand after v = e^s / (1 + e^s), including dv.

    sign = +1 gives v^{(1-ip)/2} (1-v)^{(1+ip)/2} (1 + v sinh^2)^{-(1+ip)/2},
    sign = -1 its conjugate-parameter partner. Shape (len(p), len(s)).
    """
    ip = 1j * p[:, None] * sign
    # 1 + v sinh^2 r = (1 + e^s cosh^2 r) / (1 + e^s)
    log_base = np.logaddexp(0.0, s + sh2_log)[None, :] - log1p_es[None, :]
    return np.exp((0.5 - 0.5 * ip) * s[None, :] - log1p_es[None, :]
                  - (0.5 + 0.5 * ip) * log_base)


@lru_cache(maxsize=32)
def _ch1_matrix(r0: float, r: float, t: float, h: float, npanel: int):
    """M[i, j] = int dp g(p) A_p(s_i) B_p(s_j) on the logistic grid, plus the grid."""
    s, l1 = _logistic_grid(h)
    pmax = math.sqrt(2.0 * (40.0 + 2 * math.pi * 8.0) / t) + 2 * math.pi / t
    gx, gw = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(0.0, pmax, npanel + 1)
    p = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * np.diff(edges)[:, None] * gx).ravel()
    w = (0.5 * np.diff(edges)[:, None] * gw).ravel()
    # e^{-p^2 t/2} / |Gamma(i p)|^2 = e^{-p^2 t/2} p sinh(pi p) / pi, in log form
    lg = -0.5 * p * p * t + np.log(p) + np.log(-np.expm1(-2 * math.pi * p)) + math.pi * p - math.log(2 * math.pi)
    g = w * np.exp(lg)
    a_v = _euler_factor(s, l1, 2.0 * math.log(math.cosh(r)), p, +1)    # variable v, endpoint r
    b_u = _euler_factor(s, l1, 2.0 * math.log(math.cosh(r0)), p, -1)   # variable u, start r0
    m = (a_v * g[:, None]).T @ b_u
    return s, l1, m


def _ch1_density_grid(r0, r, t, theta, h, npanel):
    s, l1, m = _ch1_matrix(float(r0), float(r), float(t), h, npanel)
    c0 = -math.log(math.tanh(r0) * math.tanh(r))
    a = c0 + l1[:, None] + l1[None, :]
    k0 = hyperbolic_reduced_kernel(0.0, 0.0, t, r0, r, drop_gaussian=True)
    out = []
    for th in np.atleast_1d(theta):
        kern = a / (a * a + th * th)
        out.append(h * h * np.real(np.sum(kern * m)) / (2.0 * math.pi ** 2 * k0))
    return np.array(out)


def ch1_fiber_density_integral(r0: float, r: float, t: float, theta) -> NumericResult:
    """CH1 conditional density of theta(t) given r(t) = r from the explicit triple integral.

    The two Euler integrals of the spherical functions and the Cauchy kernel
    in the angle are integrated on a logistic-substituted trapezoid grid,
    the spectral variable by composite Gauss-Legendre. The error estimate
    compares two grids.
    """
    if not (r0 > 0 and r > 0 and t > 0):
        raise DomainError("r0, r, t must be > 0")
    fine = _ch1_density_grid(r0, r, t, theta, 0.25, 40)
    coarse = _ch1_density_grid(r0, r, t, theta, 0.35, 28)
    err = np.abs(fine - coarse)
    n = 2 * (2 * int(_S_MAX / 0.25) + 1) ** 2
    if np.ndim(theta) == 0:
        return NumericResult(float(fine[0]), float(err[0]), n)
    return NumericResult(fine, err, n)


@lru_cache(maxsize=32)
def _ch1_limit_weights(r0: float, r: float, h: float):
    s, l1 = _logistic_grid(h)
    zero = np.zeros(1)
    a_v = _euler_factor(s, l1, 2.0 * math.log(math.cosh(r)), zero, +1)[0].real
    b_u = _euler_factor(s, l1, 2.0 * math.log(math.cosh(r0)), zero, -1)[0].real
    c0 = -math.log(math.tanh(r0) * math.tanh(r))
    a = c0 + l1[:, None] + l1[None, :]
    return a, h * h * np.outer(a_v, b_u)


def ch1_longtime_index(r0: float, r: float, theta: float, k) -> float | np.ndarray:
    """t -> infinity limit of P(theta(t) = theta + 2 pi k | w(t) = w) on CH1.

    The bridge ends at w = tanh(r) e^{i theta} from w0 = tanh(r0).
    """
    if not (r0 > 0 and r > 0):
        raise DomainError("r0 and r must be > 0")
    d = bergman_distance(math.tanh(r0), math.tanh(r) * complex(math.cos(theta), math.sin(theta)))
    phi0 = spherical_fn(0.0, 0.0, 0.0, d)
    a, wts = _ch1_limit_weights(float(r0), float(r), 0.25)
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.empty(ks.shape)
    for i, kk in enumerate(ks):
        x = theta + 2.0 * math.pi * kk
        out[i] = 2.0 / (math.pi ** 2 * phi0) * np.sum(wts * a / (a * a + x * x))
    return float(out[0]) if np.ndim(k) == 0 else out


# ---------------------------------------------------------------------------
# anti-de Sitter joint density


def _base_nodes(n: int, r0: float, r: float):
    """Quadrature over the direction of w for a start w0 = tanh(r0) e_1.

    Returns (weights, cosh of the distance to w0, fiber shift). The shift is
    arg(1 - <w, w0>), the change of the fiber angle under the isometry that
    moves w0 to the origin.
    """
    a = math.tanh(r0) * math.tanh(r)
    if a == 0.0:
        return np.ones(1), np.array([math.cosh(r)]), np.zeros(1)
    nphi = int(min(4096, max(32, math.ceil(40.0 / -math.log(a)))))
    phi = 2.0 * math.pi * np.arange(nphi) / nphi
    if n == 1:
        u = np.exp(1j * phi)
        w = np.full(nphi, 1.0 / nphi)
    else:
        # |u_1|^2 ~ Beta(1, n - 1), independent uniform phase
        x, wx = special.roots_jacobi(24, n - 2.0, 0.0)
        v = 0.5 * (x + 1.0)
        wv = wx / wx.sum()
        u = (np.sqrt(v)[:, None] * np.exp(1j * phi)[None, :]).ravel()
        w = (wv[:, None] * np.full(nphi, 1.0 / nphi)[None, :]).ravel()
    z = 1.0 - a * u
    ch = np.abs(z) * math.cosh(r0) * math.cosh(r)
    return w, np.maximum(ch, 1.0), np.angle(z)


def _eq8_q(n: int, t: float, s: float, ch_d, y):
    """q^{n-1/2,-1/2}_t(0, R) / sinh(R)^{2n} * exp(y^2 / 2s), cosh R = cosh(d) cosh(y)."""
    big_r = np.arccosh(ch_d * math.cosh(y))
    sphere = 2.0 * math.pi ** (n + 0.5) / special.gamma(n + 0.5)
    out = np.empty(big_r.shape)
    closed = (big_r >= 1.0) | (n == 1)
    if np.any(closed):
        out[closed] = sphere * np.exp(odd_hyperbolic_log_kernel(n, t, big_r[closed], y * y / (2.0 * s)))
    if np.any(~closed):
        out[~closed] = hyperbolic_reduced_kernel(n - 0.5, -0.5, t, 0.0, big_r[~closed]) * math.exp(y * y / (2 * s))
    return out


def ads_joint_density(n: int, mu: float, t: float, r0: float, r: float, theta) -> NumericResult:
    """Joint density p_t(r, theta) of (r(t), theta(t)) on AdS^{2n+1}.

    Density with respect to sinh(r)^{2n-1} cosh(r) dr dtheta, for a start at
    radius r0 with theta(0) = 0. From the origin it is the y-integral of
    the odd-dimensional real hyperbolic kernel against a complex-shifted
    Gaussian of variance (1 + mu^2) t; for r0 > 0 the origin formula is
    transported by the isometry moving the start to the origin and averaged
    over the direction of w.
    """
    if not (n >= 1 and mu >= 0 and t > 0 and r0 >= 0 and r >= 0):
        raise DomainError("need n >= 1, mu >= 0, t > 0, r0 >= 0, r >= 0")
    s = (1.0 + mu * mu) * t
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    wts, ch_d, shift = _base_nodes(n, r0, r)
    th_node = th[None, :] + shift[:, None]  # (nodes, thetas)

    def integrand(y):
        q = _eq8_q(n, t, s, ch_d, y)
        return (np.cos(y * th_node / s) * q[:, None]).ravel()

    # the integrand is even in y
    res = integrate_line(integrand, math.sqrt(t), Tolerance(1e-10, 1e-16, 40000))
    inner = np.asarray(res.value).reshape(th_node.shape)
    pref = special.gamma(n + 0.5) / (math.sqrt(math.pi) * special.gamma(n)) / math.sqrt(2 * math.pi * s)
    vals = pref * np.sum(wts[:, None] * np.exp(-th_node ** 2 / (2 * s)) * inner, axis=0)
    err = pref * float(np.max(np.abs(res.abs_error_estimate)))
    if np.ndim(theta) == 0:
        return NumericResult(float(vals[0]), err, res.evaluations)
    return NumericResult(vals, np.full(vals.shape, err), res.evaluations)


def ads_fiber_density(n: int, mu: float, t: float, r0: float, r: float, theta) -> NumericResult:
    """Conditional density of theta(t) given r(t) = r from the joint density."""
    joint = ads_joint_density(n, mu, t, r0, r, theta)
    # the radial density relative to sinh^{2n-1} cosh, finite at r = 0
    scale = 1.0 / float(hyperbolic_reduced_kernel(n - 1.0, 0.0, t, r0, r))
    return NumericResult(np.asarray(joint.value) * scale if np.ndim(theta) else joint.value * scale,
                         np.asarray(joint.abs_error_estimate) * scale, joint.evaluations)
