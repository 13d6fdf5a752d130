"""Winding laws: conditional characteristic functions, fiber densities,
index distributions and bridge characteristic functions.

Every fiber density is obtained by Fourier inversion of the conditional
characteristic function of the winding angle given the radial endpoint.
Index probabilities are values of that density on the lattice theta + 2 pi k,
normalized by the exact lattice sum from Poisson summation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, UnsupportedGeometryError, WindowTooNarrowError
from .geometry import BridgeSpec, Geometry
from .kernels import compact_reduced_kernel, hyperbolic_reduced_kernel
from .quadrature import CFInterpolant, NumericResult, Tolerance, integrate_interval

__all__ = [
    "conditional_cf",
    "fiber_density",
    "fiber_interpolant",
    "IndexDistribution",
    "index_distribution",
    "bridge_cf",
    "limit_cf",
    "mu_convolution_check",
    "lattice_sum",
    "NORM_TOL",
]

CF_TOL = Tolerance(rel=1e-10, abs=1e-13, max_evals=20000)
NORM_TOL = 1e-4


def _threads(threads):
    if threads is None:
        import os

        try:
            threads = int(os.environ.get("LOOPWIND_THREADS", "1"))
        except ValueError:
            threads = 1
    return max(1, int(threads))


# ---------------------------------------------------------------------------
# conditional characteristic functions


@lru_cache(maxsize=8192)
def _cf_one(g: Geometry, lam: float, r0: float, r: float, t: float) -> float:
    """Conditional CF at a single lam >= 0 (dispatched geometry); pure, so cached."""
    if lam == 0.0:
        return 1.0
    k = g.kind
    if k == "plane":
        x = r0 * r / t
        return float(special.ive(lam, x) / special.ive(0.0, x))
    if k == "cp1":
        den = compact_reduced_kernel(0.0, 0.0, t, r0, r)
        num = compact_reduced_kernel(lam, lam, t, r0, r)
        lg = -2.0 * lam * (lam + 1.0) * t + lam * (math.log(math.sin(2 * r0) * math.sin(2 * r))
                                                    - 2.0 * math.log(2.0))
        return float(math.exp(lg) * num / den)
    if k == "sphere":
        a = g.n - 1.0
        den = compact_reduced_kernel(a, 0.0, t, r0, r)
        num = compact_reduced_kernel(a, lam, t, r0, r)
        lg = -lam * (g.n + 0.5 * lam * g.mu ** 2) * t + lam * math.log(math.cos(r0) * math.cos(r))
        return float(math.exp(lg) * num / den)
    if k == "ch1":
        den = hyperbolic_reduced_kernel(0.0, 0.0, t, r0, r, drop_gaussian=True)
        num = hyperbolic_reduced_kernel(lam, -lam, t, r0, r, drop_gaussian=True)
        lg = lam * math.log(math.tanh(r0) * math.tanh(r))
        return float(math.exp(lg) * num / den)
    if k == "ads":
        a = g.n - 1.0
        lg = -0.5 * lam * lam * (1.0 + g.mu ** 2) * t + lam * math.log(math.cosh(r0) * math.cosh(r))
        den = hyperbolic_reduced_kernel(a, 0.0, t, r0, r, drop_gaussian=True)
        num = hyperbolic_reduced_kernel(a, lam, t, r0, r, drop_gaussian=True, log_factor=lg)
        return float(num / den)
    raise UnsupportedGeometryError(f"no conditional characteristic function for {g.label()}")


def _check_args(geom: Geometry, r0, r, t):
    if not t > 0:
        raise DomainError("t must be > 0")
    geom.check_radius(r0, "r0")
    geom.check_radius(r, "r")


def conditional_cf(geom: Geometry, lam, r0: float, r: float, t: float, threads: int | None = None):
    """E[exp(i lam theta(t)) | r(t) = r] for a start at radius r0.

    ``lam`` may be a scalar or an array; the value depends on |lam| only.
    """
    _check_args(geom, r0, r, t)
    g = geom.dispatch
    lam_arr = np.abs(np.asarray(lam, dtype=float))
    flat = lam_arr.ravel()
    nt = _threads(threads)
    if nt > 1 and flat.size > 1:
        with ThreadPoolExecutor(nt) as ex:
            vals = list(ex.map(lambda v: _cf_one(g, float(v), r0, r, t), flat))
    else:
        vals = [_cf_one(g, float(v), r0, r, t) for v in flat]
    out = np.asarray(vals, dtype=float).reshape(lam_arr.shape)
    return float(out) if out.ndim == 0 else out


def _cf_scale(geom: Geometry, t: float) -> float:
    """Rough width of the CF in lam, used to start the cutoff search."""
    g = geom.dispatch
    if g.kind == "ads":
        return 1.0 / math.sqrt((1.0 + g.mu ** 2) * t)
    if g.kind == "plane":
        return 1.0
    return min(1.0, 1.0 / t)


@lru_cache(maxsize=256)
def _interp(geom: Geometry, r0: float, r: float, t: float, tol: Tolerance) -> CFInterpolant:
    g = geom.dispatch
    return CFInterpolant(lambda lam: conditional_cf(g, lam, r0, r, t, threads=None), tol,
                         scale=_cf_scale(g, t))


def fiber_interpolant(geom: Geometry, r0: float, r: float, t: float,
                      tol: Tolerance = CF_TOL) -> CFInterpolant:
    """Cached Chebyshev model of the conditional CF, reused across angles."""
    _check_args(geom, r0, r, t)
    return _interp(geom.dispatch, float(r0), float(r), float(t), tol)


def fiber_density(geom: Geometry, r0: float, r: float, t: float, theta, method: str = "inversion",
                  tol: Tolerance = CF_TOL) -> NumericResult:
    """Conditional density of the winding angle theta(t) given r(t) = r.

    ``method="inversion"`` inverts the conditional CF (all geometries).
    ``method="oracle"`` uses the independent explicit integral available
    for CH1 (triple integral) and AdS (joint density over the radial law).
    """
    if method == "inversion":
        interp = fiber_interpolant(geom, r0, r, t, tol)
        th = np.asarray(theta, dtype=float)
        val, err = interp.density(th.ravel())
        val, err = val.reshape(th.shape), err.reshape(th.shape)
        if th.ndim == 0:
            val, err = float(val), float(err)
        return NumericResult(val, err, max(1, interp.evaluations))
    if method == "oracle":
        from . import closed_forms

        g = geom.dispatch
        if g.kind == "ch1":
            return closed_forms.ch1_fiber_density_integral(r0, r, t, theta)
        if g.kind == "ads":
            return closed_forms.ads_fiber_density(g.n, g.mu, t, r0, r, theta)
        raise UnsupportedGeometryError(f"no independent fiber-density path for {geom.label()}")
    raise DomainError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# lattice sums and index distributions


def lattice_sum(geom: Geometry, r0: float, r: float, t: float, theta: float) -> float:
    """sum_k f(theta + 2 pi k) = (1/2 pi) sum_m cf(m) e^{-i m theta} (Poisson summation)."""
    g = geom.dispatch
    total = 1.0
    m = 1
    while True:
        c = _cf_one(g, float(m), r0, r, t)
        total += 2.0 * c * math.cos(m * theta)
        if abs(c) < 1e-17 * abs(total) or (m > 3 and abs(c) < 1e-300):
            break
        m += 1
        if m > 10000:
            raise WindowTooNarrowError("lattice sum did not converge")
    return total / (2.0 * math.pi)


@dataclass(frozen=True)
class IndexDistribution:
    """Index probabilities P(k) for k_min <= k <= k_max.

    ``probs`` are normalized over the window. ``tail_mass`` is the estimated
    probability outside the window, so ``probs * (1 - tail_mass)`` are the
    absolute probabilities. ``norm_defect`` is |1 - (window mass + tail
    estimate)| before renormalization. ``tail_constant`` estimates
    lim k^2 P(k) (None for Gaussian-type tails).
    """

    k_min: int
    k_max: int
    probs: np.ndarray
    norm_defect: float
    tail_constant: float | None
    tail_mass: float = 0.0
    geometry: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (self.k_max - self.k_min + 1,):
            raise ValueError("probs length does not match the window")
        if np.any(p < 0):
            raise ValueError("negative probability")
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def prob(self, k: int) -> float:
        if not self.k_min <= k <= self.k_max:
            raise KeyError(k)
        return float(self.probs[k - self.k_min])

    def absolute(self) -> np.ndarray:
        return self.probs * (1.0 - self.tail_mass)

    def moment(self, order: int) -> float:
        return float(np.sum(self.probs * self.k.astype(float) ** order))


def _heavy_tail(theta_k, p, side_sel, offset):
    """Fit A/x^2 + B/x^4 on one side and sum it beyond the window.

    ``offset`` is q in x = 2 pi (j + q), j = 1, 2, ... past the last index.
    """
    x = np.abs(theta_k[side_sel])
    y = p[side_sel]
    design = np.stack([x ** -2.0, x ** -4.0], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a, b = coef
    two_pi = 2.0 * math.pi
    mass = a * special.zeta(2.0, offset) / two_pi ** 2 + b * special.zeta(4.0, offset) / two_pi ** 4
    return max(float(mass), 0.0)


def _gauss_tail(p_last, p_prev):
    """Geometric bound of the tail past p_last (log-concave decay)."""
    if p_last <= 0:
        return 0.0
    q = p_last / p_prev if p_prev > 0 else 1.0
    if q >= 1.0:
        return float("inf")
    return p_last * q / (1.0 - q)


def index_distribution(geom: Geometry, bridge: BridgeSpec, k_min: int, k_max: int,
                       tol: Tolerance = CF_TOL, strict: bool = True) -> IndexDistribution:
    """Law of the index k in theta(t) = theta + 2 pi k, given the bridge endpoint."""
    if not k_min <= 0 <= k_max:
        raise DomainError("the window must contain k = 0")
    if k_max - k_min < 4:
        raise DomainError("the window must hold at least 5 integers")
    r0, r, th, t = bridge.r0, bridge.r, bridge.theta, bridge.t
    interp = fiber_interpolant(geom, r0, r, t, tol)
    ks = np.arange(k_min, k_max + 1)
    theta_k = th + 2.0 * math.pi * ks
    f, ferr = interp.density(theta_k)
    # values below the inversion error floor carry no information
    f = np.where(f > 2.0 * ferr, f, 0.0)
    denom = lattice_sum(geom, r0, r, t, th)
    raw = f / denom
    g = geom.dispatch
    n = ks.size
    quart = max(3, n // 4)
    if g.gaussian_tails:
        tail = _gauss_tail(raw[-1], raw[-2]) + _gauss_tail(raw[0], raw[1])
        tail_constant = None
    else:
        hi_sel = np.zeros(n, bool)
        lo_sel = np.zeros(n, bool)
        hi_sel[-quart:] = True
        lo_sel[:quart] = True
        # keep the fit away from k = 0 where the lattice angle can be tiny
        hi_sel &= ks > 0
        lo_sel &= ks < 0
        tail = 0.0
        c_est = []
        q_hi = k_max + 1 + th / (2 * math.pi)
        q_lo = -k_min + 1 - th / (2 * math.pi)
        if hi_sel.sum() >= 2:
            tail += _heavy_tail(theta_k, raw, hi_sel, q_hi)
            c_est.append(ks[hi_sel] ** 2 * raw[hi_sel])
        else:
            tail += float("inf")
        if lo_sel.sum() >= 2:
            tail += _heavy_tail(theta_k, raw, lo_sel, q_lo)
            c_est.append(ks[lo_sel] ** 2 * raw[lo_sel])
        else:
            tail += float("inf")
        tail_constant = float(np.median(np.concatenate(c_est))) if c_est else None
    window = float(np.sum(raw))
    defect = abs(1.0 - window - tail)
    if strict and not defect <= NORM_TOL:
        raise WindowTooNarrowError(
            f"window [{k_min}, {k_max}] leaves a normalization defect of {defect:.2e} "
            f"(limit {NORM_TOL:g}); widen the window", best_estimate=window,
            abs_error_estimate=defect)
    probs = raw / window
    return IndexDistribution(int(k_min), int(k_max), probs, float(defect), tail_constant,
                             float(min(max(tail, 0.0), 1.0)), geom.label(),
                             dict(r0=r0, r=r, theta=th, t=t))


# ---------------------------------------------------------------------------
# bridge characteristic function and limits


def _lattice_cf_sum(g: Geometry, lam: float, theta: float, r0, r, t) -> complex:
    """sum_k e^{-i k theta} cf(lam + k), summed outward until terms vanish."""
    base = math.floor(lam)
    total = 0.0 + 0.0j
    # start from the integer shift closest to the peak at lam + k = 0
    for direction in (0, 1):
        j = 0
        small = 0
        while True:
            k = -base - j if direction == 0 else -base + 1 + j
            c = _cf_one(g, abs(lam + k), r0, r, t)
            total += c * complex(math.cos(k * theta), -math.sin(k * theta))
            if abs(c) <= 1e-18 * max(abs(total), 1e-300) or c == 0.0:
                small += 1
                if small >= 2:
                    break
            else:
                small = 0
            j += 1
            if j > 10000:
                raise WindowTooNarrowError("bridge characteristic function sum did not converge")
    return total


def bridge_cf(geom: Geometry, lam: float, bridge: BridgeSpec) -> complex:
    """E[exp(i lam theta(t)) | endpoint], with theta(t) in theta + 2 pi Z."""
    _check_args(geom, bridge.r0, bridge.r, bridge.t)
    g = geom.dispatch
    args = (bridge.r0, bridge.r, bridge.t)
    num = _lattice_cf_sum(g, float(lam), bridge.theta, *args)
    den = _lattice_cf_sum(g, 0.0, bridge.theta, *args)
    return complex(num / den)


def limit_cf(geom: Geometry, lam):
    """CF of the long-time limit of the rescaled winding.

    CP1 and Sphere(n, .): theta(t)/t, Cauchy laws of parameter 2 and n.
    AdS(n, mu) and SL2(mu): theta(t)/sqrt(t), centred Gaussian of variance 1 + mu^2.
    """
    g = geom.dispatch
    lam = np.abs(np.asarray(lam, dtype=float))
    if g.kind == "cp1":
        out = np.exp(-2.0 * lam)
    elif g.kind == "sphere":
        out = np.exp(-g.n * lam)
    elif g.kind == "ads":
        out = np.exp(-0.5 * lam * lam * (1.0 + g.mu ** 2))
    else:
        raise UnsupportedGeometryError(f"no long-time limit law for {geom.label()}")
    return float(out) if out.ndim == 0 else out


def mu_convolution_check(n: int, mu: float, r0: float, r: float, t: float, theta: float,
                         tol: Tolerance = CF_TOL, identity: bool = False) -> float:
    """|f^mu(theta) - (N(0, mu^2 t) * f^0)(theta)| for the Berger sphere fiber density.

    With ``identity`` the Gaussian convolution is replaced by the identity
    (the mu -> 0 comparison).
    """
    if not mu > 0:
        raise DomainError("mu must be > 0")
    f_mu = fiber_density(Geometry.sphere(n, mu), r0, r, t, theta, tol=tol).value
    g0 = Geometry.sphere(n, 0.0)
    if identity:
        return abs(f_mu - fiber_density(g0, r0, r, t, theta, tol=tol).value)
    interp = fiber_interpolant(g0, r0, r, t, tol)
    sd = mu * math.sqrt(t)

    def integrand(z):
        # z is the standardized Gaussian variable
        z = np.atleast_1d(z)
        dens, _ = interp.density(theta - sd * z)
        return dens * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    conv = integrate_interval(lambda z: float(integrand(z)[0]), -12.0, 12.0,
                              Tolerance(1e-11, 1e-14, 20000)).value
    return float(abs(f_mu - conv))
