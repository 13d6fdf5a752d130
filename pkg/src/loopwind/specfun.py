"""Special functions used by the Jacobi heat kernels and the winding laws.

Everything here is vectorized over numpy arrays and pure. The complex
log-Gamma comes from :mod:`scipy.special`; the Gauss hypergeometric
function, Jacobi/Gegenbauer polynomials, spherical functions and the
Plancherel density are evaluated locally.
"""

from __future__ import annotations

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericError

__all__ = [
    "log_gamma",
    "jacobi_poly",
    "jacobi_table",
    "gegenbauer_poly",
    "gegenbauer_via_integral",
    "gauss_2f1",
    "spherical_fn",
    "spherical_fn_discrete",
    "plancherel_density",
    "yor_phi",
]

_EPS = np.finfo(float).eps
# beyond this Pfaff argument the series is replaced by the 1 - z connection
_Z_SWITCH = 0.75
_MAX_TERMS = 20000


def _is_nonpos_int(z):
    z = np.asarray(z)
    re = np.real(z)
    return (np.imag(z) == 0) & (re <= 0) & (re == np.round(re))


def log_gamma(z):
    """Principal branch of log Gamma(z) for complex z.

    Raises DomainError at the poles 0, -1, -2, ...
    """
    z = np.asarray(z, dtype=complex)
    if np.any(_is_nonpos_int(z)):
        raise DomainError("log_gamma: argument is a pole of Gamma (nonpositive integer)")
    out = special.loggamma(z)
    return out[()] if out.ndim == 0 else out


def _log_rgamma(z):
    """log(1/Gamma(z)) with -inf at the poles (where 1/Gamma vanishes)."""
    z = np.asarray(z, dtype=complex)
    pole = _is_nonpos_int(z)
    safe = np.where(pole, 1.0, z)
    out = -special.loggamma(safe)
    return np.where(pole, -np.inf + 0j, out)


# ---------------------------------------------------------------------------
# Jacobi and Gegenbauer polynomials


def _check_jacobi(alpha, beta):
    if not alpha > -1 or not beta > -1:
        raise DomainError(f"Jacobi parameters need alpha, beta > -1 (got {alpha}, {beta})")


def _jacobi_sum(m, alpha, beta, x):
    # terminating 2F1(-m, m+a+b+1; a+1; (1-x)/2), Horner in the argument;
    # x < 0 goes through P^{a,b}(x) = (-1)^m P^{b,a}(-x) to keep z <= 1/2
    neg = x < 0
    if np.any(neg):
        out = np.empty_like(x)
        pos = ~neg
        if np.any(pos):
            out[pos] = _jacobi_sum(m, alpha, beta, x[pos])
        out[neg] = (-1) ** m * _jacobi_sum(m, beta, alpha, -x[neg])
        return out
    z = (1.0 - x) / 2.0
    acc = np.ones_like(x)
    for j in range(m, 0, -1):
        coef = (j - 1 - m) * (m + alpha + beta + j) / ((alpha + j) * j)
        acc = 1.0 + coef * z * acc
    lognorm = special.gammaln(m + alpha + 1) - special.gammaln(m + 1) - special.gammaln(alpha + 1)
    return np.exp(lognorm) * acc


def jacobi_table(mmax: int, alpha: float, beta: float, x):
    """All P_m^{alpha,beta}(x) for m = 0..mmax by the three-term recurrence.

    Returns an array of shape (mmax + 1,) + x.shape.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((mmax + 1,) + x.shape)
    out[0] = 1.0
    if mmax == 0:
        return out
    ab = alpha + beta
    out[1] = (alpha + 1.0) + (ab + 2.0) * (x - 1.0) / 2.0
    for m in range(1, mmax):
        s = 2.0 * m + ab
        a1 = 2.0 * (m + 1) * (m + ab + 1) * s
        a2 = (s + 1.0) * (alpha * alpha - beta * beta)
        a3 = s * (s + 1.0) * (s + 2.0)
        a4 = 2.0 * (m + alpha) * (m + beta) * (s + 2.0)
        out[m + 1] = ((a2 + a3 * x) * out[m] - a4 * out[m - 1]) / a1
    return out


def jacobi_poly(m: int, alpha: float, beta: float, x, method: str = "recurrence"):
    """Jacobi polynomial P_m^{alpha,beta}(x) for real alpha, beta > -1.

    Args:
        m: degree, m >= 0.
        alpha, beta: real parameters (non-integer allowed).
        x: point(s) in [-1, 1].
        method: "recurrence" (default) for the three-term recurrence, "sum"
            for the terminating hypergeometric sum. The sum loses digits to
            cancellation as the degree grows (about 1e-11 relative at m = 9);
            it is kept as an independent check.
    """
    if m < 0 or int(m) != m:
        raise DomainError("jacobi_poly: degree must be a nonnegative integer")
    _check_jacobi(alpha, beta)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-14):
        raise DomainError("jacobi_poly: x must lie in [-1, 1]")
    m = int(m)
    if method == "sum":
        out = _jacobi_sum(m, alpha, beta, x)
    elif method == "recurrence":
        out = jacobi_table(m, alpha, beta, x)[m]
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[()] if out.ndim == 0 else out


def gegenbauer_poly(m: int, alpha: float, x):
    """Gegenbauer polynomial C_m^{alpha+1/2}(x) through P_m^{alpha,alpha}."""
    if not alpha >= 0:
        raise DomainError("gegenbauer_poly: alpha must be >= 0")
    lr = (special.gammaln(alpha + 1) + special.gammaln(m + 2 * alpha + 1)
          - special.gammaln(2 * alpha + 1) - special.gammaln(m + alpha + 1))
    return np.exp(lr) * jacobi_poly(m, alpha, alpha, x)


def gegenbauer_via_integral(m: int, alpha: float, r: float, rtol: float = 1e-12):
    """Integral form of the normalized Gegenbauer polynomial.

    Integrates (cos 2r + i sin 2r cos eta)^m (sin eta)^(2 alpha) over
    [0, pi]. The imaginary part cancels by eta -> pi - eta and is checked;
    the returned NumericResult holds the real part.
    """
    from .quadrature import NumericResult

    if not 0 < r < np.pi / 2:
        raise DomainError("gegenbauer_via_integral: r must lie in (0, pi/2)")
    if not alpha >= 0:
        raise DomainError("gegenbauer_via_integral: alpha must be >= 0")
    c, s = np.cos(2 * r), np.sin(2 * r)

    def f(eta):
        return (c + 1j * s * np.cos(eta)) ** m * np.sin(eta) ** (2 * alpha)

    re, e_re, info_re = integrate.quad(lambda u: f(u).real, 0.0, np.pi, epsabs=1e-14,
                                       epsrel=rtol, limit=200, full_output=1)[:3]
    im, e_im, info_im = integrate.quad(lambda u: f(u).imag, 0.0, np.pi, epsabs=1e-14,
                                       epsrel=rtol, limit=200, full_output=1)[:3]
    neval = info_re["neval"] + info_im["neval"]
    scale = max(abs(re), 1e-300)
    if abs(im) > 1e3 * max(e_im, rtol * scale, 1e-14):
        raise NumericError("imaginary part of the Gegenbauer integral does not cancel",
                           best_estimate=re, abs_error_estimate=abs(im), evaluations=neval)
    if e_re > max(1e3 * rtol * scale, 1e-12):
        raise NumericError("Gegenbauer integral did not converge", best_estimate=re,
                           abs_error_estimate=e_re, evaluations=neval)
    return NumericResult(float(re), float(e_re + abs(im)), int(neval))


# ---------------------------------------------------------------------------
# Gauss hypergeometric function on the negative real axis


def _series(a, b, c, z, max_terms=_MAX_TERMS):
    """Plain 2F1 series, vectorized, |z| < 1.

    Converged entries are dropped from the working set so the cost follows
    the typical element rather than the slowest one.
    """
    a, b, c, z = (np.asarray(v, dtype=complex).ravel() for v in np.broadcast_arrays(a, b, c, z))
    shape = np.broadcast(a, b, c, z).shape
    total = np.ones(shape, dtype=complex)
    term = np.ones(shape, dtype=complex)
    quiet = np.zeros(shape, dtype=np.int8)
    idx = np.arange(total.size)
    for k in range(max_terms):
        new = term * ((a + k) * (b + k) / ((c + k) * (k + 1.0))) * z
        total[idx] += new
        small = (np.abs(new) <= _EPS * 0.25 * np.abs(total[idx])) & (np.abs(new) <= np.abs(term))
        quiet = np.where(small, quiet + 1, 0)
        term = new
        done = (quiet >= 2) | (new == 0)
        if np.any(done):
            keep = ~done
            if not np.any(keep):
                return total
            idx, a, b, c, z, term, quiet = idx[keep], a[keep], b[keep], c[keep], z[keep], term[keep], quiet[keep]
    raise NumericError("2F1 series did not converge", best_estimate=total,
                       evaluations=max_terms)


def _log_series(a, b, z, w):
    """2F1(a, b; a + b; z) near z = 1 (logarithmic case), w = 1 - z."""
    lw = np.log(w)
    coef = np.exp(special.loggamma(a + b) - special.loggamma(a) - special.loggamma(b))
    term = np.ones(np.broadcast(a, b, z).shape, dtype=complex)
    total = np.zeros_like(term)
    quiet = 0
    for n in range(_MAX_TERMS):
        bracket = 2 * special.digamma(n + 1.0) - special.digamma(a + n) - special.digamma(b + n) - lw
        piece = term * bracket
        total = total + piece
        term = term * (a + n) * (b + n) / ((n + 1.0) ** 2) * w
        if np.all(np.abs(piece) <= _EPS * 0.25 * np.abs(total)):
            quiet += 1
            if quiet >= 2:
                return coef * total
        else:
            quiet = 0
    raise NumericError("logarithmic 2F1 series did not converge", best_estimate=coef * total)


def _connection(a, b, c, z, w):
    """2F1(a, b; c; z) through the 1 - z connection formula (c - a - b not integer)."""
    s = c - a - b
    l1 = special.loggamma(c) + special.loggamma(s) + _log_rgamma(c - a) + _log_rgamma(c - b)
    l2 = special.loggamma(c) + special.loggamma(-s) + _log_rgamma(a) + _log_rgamma(b)
    f1 = _series(a, b, 1.0 - s, w)
    f2 = _series(c - a, c - b, 1.0 + s, w)
    return np.exp(l1) * f1 + np.exp(l2 + s * np.log(w)) * f2


def _f_pfaff(a, b, c, z, w):
    # F(a, b; c; z) for 0 <= z < 1 with w = 1 - z given accurately
    out = np.empty(z.shape, dtype=complex)
    # the direct series peaks near exp(2 sqrt|ab z|); the connection series
    # near exp(|ab / (1 - s)| (1 - z)). Take whichever loses fewer digits.
    s_all = c - a - b
    g_direct = 2.0 * np.sqrt(np.abs(a * b) * z)
    g_conn = np.maximum(np.abs(a * b / (1.0 - s_all)), np.abs((c - a) * (c - b) / (1.0 + s_all))) * w
    near = (z > _Z_SWITCH) | ((z > 0.1) & (g_direct > g_conn + 2.0))
    if np.any(~near):
        idx = ~near
        out[idx] = _series(a[idx], b[idx], c[idx], z[idx])
    if np.any(near):
        idx = near
        aa, bb, cc, zz, ww = a[idx], b[idx], c[idx], z[idx], w[idx]
        s = cc - aa - bb
        integer = (np.imag(s) == 0) & (np.real(s) == np.round(np.real(s)))
        res = np.empty(zz.shape, dtype=complex)
        gen = ~integer
        if np.any(gen):
            res[gen] = _connection(aa[gen], bb[gen], cc[gen], zz[gen], ww[gen])
        zero = integer & (np.real(s) == 0)
        if np.any(zero):
            poly = _is_nonpos_int(aa[zero]) | _is_nonpos_int(bb[zero])
            sub = np.empty(poly.shape, dtype=complex)
            if np.any(~poly):
                sub[~poly] = _log_series(aa[zero][~poly], bb[zero][~poly], zz[zero][~poly], ww[zero][~poly])
            if np.any(poly):
                sub[poly] = _series(aa[zero][poly], bb[zero][poly], cc[zero][poly], zz[zero][poly])
            res[zero] = sub
        other = integer & (np.real(s) != 0)
        if np.any(other):
            res[other] = _series(aa[other], bb[other], cc[other], zz[other])
        out[idx] = res
    return out


def gauss_2f1(a, b, c, x):
    """Gauss hypergeometric 2F1(a, b; c; x) for complex parameters and real x <= 0.

    The Pfaff transformation maps x to z = x / (x - 1) in [0, 1); close to
    z = 1 the 1 - z connection formula (or its logarithmic limit) is used.
    """
    a, b, c, x = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex),
                                     np.asarray(c, dtype=complex), np.asarray(x, dtype=float))
    if np.any(_is_nonpos_int(c)):
        raise DomainError("gauss_2f1: c must not be a nonpositive integer")
    if np.any(x > 0):
        raise DomainError("gauss_2f1: only x <= 0 is supported")
    shape = x.shape
    a, b, c, x = (v.ravel() for v in (a, b, c, x))
    out = np.ones(x.shape, dtype=complex)
    nz = x != 0
    if np.any(nz):
        xa = x[nz]
        z = xa / (xa - 1.0)
        pre = np.exp(-a[nz] * np.log1p(-xa))
        out[nz] = pre * _f_pfaff(a[nz], c[nz] - b[nz], c[nz], z, 1.0 / (1.0 - xa))
    out = out.reshape(shape)
    return out[()] if out.ndim == 0 else out


def spherical_fn(alpha: float, beta: float, p, r, check: bool = True):
    """Jacobi spherical function Phi_p^{alpha,beta}(r), real for real p."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("spherical_fn: r must be >= 0")
    if not alpha > -1:
        raise DomainError("spherical_fn: alpha must be > -1")
    rho = alpha + beta + 1.0
    val = gauss_2f1((rho + 1j * p) / 2, (rho - 1j * p) / 2, alpha + 1.0, -np.sinh(r) ** 2)
    val = np.asarray(val)
    if check:
        bad = np.abs(val.imag) > 1e-8 * np.maximum(np.abs(val.real), 1e-300) + 1e-14
        if np.any(bad):
            raise NumericError("spherical_fn: imaginary residue above tolerance")
    out = val.real
    return out[()] if out.ndim == 0 else out


def spherical_fn_discrete(alpha: float, beta: float, j: int, r):
    """Phi at the discrete spectral point attached to index j (|beta| > alpha + 1 + 2j).

    Equals (cosh r)^(-2(|beta| - j)) times a degree-j polynomial in tanh^2 r
    when beta > 0; the sign-flipped case follows from the cosh-power
    conjugation between the (alpha, beta) and (alpha, -beta) families.
    """
    b = abs(beta)
    r = np.asarray(r, dtype=float)
    z = np.tanh(r) ** 2
    acc = np.ones_like(z)
    for i in range(j, 0, -1):
        acc = 1.0 + (i - 1 - j) * (b - j + i - 1) / ((alpha + i) * i) * z * acc
    logc = np.log(np.cosh(r))
    if beta > 0:
        return np.exp(-2.0 * (b - j) * logc) * acc
    # for beta < 0 the eigenfunction picks up a factor cosh^(-2 beta)
    return np.exp((2.0 * j) * logc) * acc


def plancherel_density(alpha: float, beta: float, p):
    """Plancherel density m_{alpha,beta}(p), computed in log space.

    Vanishes at p = 0 unless one of the numerator Gamma factors sits on a
    pole, in which case the finite limit is returned.
    """
    p = np.asarray(p, dtype=float)
    if not alpha > -1:
        raise DomainError("plancherel_density: alpha must be > -1")
    rho = alpha + beta + 1.0
    d = alpha - beta + 1.0
    at0 = p == 0
    ps = np.where(at0, 1.0, p)
    lg = (special.loggamma((rho + 1j * ps) / 2) + special.loggamma((d + 1j * ps) / 2)
          - special.loggamma(1j * ps))
    out = np.exp(2.0 * lg.real - 2.0 * special.gammaln(alpha + 1.0))
    if np.any(at0):
        limit = 0.0
        for u, v in ((rho, d), (d, rho)):
            h = u / 2
            if h <= 0 and h == round(h):
                jj = int(-h)
                # |Gamma(-j + ip/2)|^2 |1/Gamma(ip)|^2 -> 4 / (j!)^2
                limit = 4.0 / special.factorial(jj) ** 2 * special.gamma(v / 2) ** 2 \
                    / special.gamma(alpha + 1.0) ** 2
        out = np.where(at0, limit, out)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------


def _yor_phi_scalar(rp: float, x: float, epsabs: float, epsrel: float):
    # e^{-r cosh t} is below 1e-320 past this point
    tmax = np.arccosh(1.0 + 740.0 / rp) if rp > 0 else 0.0
    ax = abs(x)
    scale = min(ax, tmax)
    pts = [v for v in (scale, 2 * scale) if 0 < v < tmax]
    val, err, info = integrate.quad(lambda s: np.exp(-rp * np.cosh(s)) / (s * s + ax * ax), 0.0, tmax,
                                    points=pts or None, epsabs=epsabs, epsrel=epsrel, limit=200,
                                    full_output=1)[:3]
    if err > max(epsabs, epsrel * abs(val)) * 100:
        raise NumericError("yor_phi quadrature did not converge", best_estimate=val,
                           abs_error_estimate=err, evaluations=info["neval"])
    return np.copysign(ax / np.pi * val, x)


def yor_phi(r_param: float, x, epsrel: float = 1e-12):
    """Phi_r(x) = (x / pi) int_0^inf exp(-r cosh t) / (t^2 + x^2) dt."""
    if not r_param > 0:
        raise DomainError("yor_phi: r_param must be > 0")
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise DomainError("yor_phi: x must be nonzero")
    out = np.vectorize(lambda v: _yor_phi_scalar(r_param, v, 1e-300, epsrel), otypes=[float])(x)
    return out[()] if out.ndim == 0 else out
