"""Jacobi heat kernels (compact and hyperbolic) and the CP^n / CH^n kernels.

Kernels are densities in the radial variable r with respect to Lebesgue
measure. Internally everything is computed in *reduced* form, the kernel
divided by the weight sin^{2a+1} cos^{2b+1} (resp. sinh, cosh), which is
symmetric in (r0, r) and finite at r = 0.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, NumericError
from .quadrature import NumericResult
from .specfun import jacobi_table, plancherel_density, spherical_fn, spherical_fn_discrete

__all__ = [
    "compact_weight",
    "hyperbolic_weight",
    "compact_reduced_kernel",
    "compact_jacobi_kernel",
    "hyperbolic_spectral_integral",
    "hyperbolic_reduced_kernel",
    "hyperbolic_jacobi_kernel",
    "hyperbolic_kernel_asymptotic",
    "fs_distance",
    "bergman_distance",
    "cpn_heat_kernel",
    "chn_heat_kernel",
    "odd_hyperbolic_kernel",
    "odd_hyperbolic_log_kernel",
]

_LOG_EPS = np.log(1e-18)
_EPS = np.finfo(float).eps
# relative accuracy of the continuous part when it cancels against the point spectrum
_CANCEL_REL = 1e-12
MAX_SERIES_TERMS = 4000


# ---------------------------------------------------------------------------
# compact family


def compact_weight(alpha: float, beta: float, r):
    r = np.asarray(r, dtype=float)
    return 2.0 * np.cos(r) ** (2 * beta + 1) * np.sin(r) ** (2 * alpha + 1)


def _compact_log_coef(alpha, beta, m):
    rho = alpha + beta + 1.0
    return (np.log(2 * m + rho) + special.gammaln(m + rho) + special.gammaln(m + 1.0)
            - special.gammaln(m + alpha + 1.0) - special.gammaln(m + beta + 1.0))


def _compact_terms(alpha, beta, t):
    """Number of series terms so that the neglected tail is below 1e-18 relative."""
    rho = alpha + beta + 1.0
    big = max(alpha, beta)
    logp = lambda m: special.gammaln(m + big + 1.0) - special.gammaln(m + 1.0) - special.gammaln(big + 1.0)
    head = _compact_log_coef(alpha, beta, 0) + 2 * logp(0)
    m = 1
    while True:
        lb = _compact_log_coef(alpha, beta, m) + 2 * logp(m) - 2.0 * m * (m + rho) * t
        # once past the peak of the polynomial growth the Gaussian factor wins geometrically
        if lb - head < _LOG_EPS and 4.0 * m * t > 1.0:
            return m
        m += 1
        if m > MAX_SERIES_TERMS:
            raise NumericError(f"compact kernel series needs more than {MAX_SERIES_TERMS} terms "
                               f"(t = {t} too small)", evaluations=MAX_SERIES_TERMS)


def compact_reduced_kernel(alpha: float, beta: float, t: float, r0, r):
    """Sum_m c_m e^{-2m(m+rho)t} P_m(cos 2r0) P_m(cos 2r)."""
    if not (alpha >= 0 and beta >= 0):
        raise DomainError("compact kernel needs alpha, beta >= 0")
    if not t > 0:
        raise DomainError("compact kernel needs t > 0")
    r0 = np.asarray(r0, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any((r0 < 0) | (r0 > np.pi / 2)) or np.any((r < 0) | (r > np.pi / 2)):
        raise DomainError("compact kernel radial arguments must lie in [0, pi/2]")
    rho = alpha + beta + 1.0
    M = _compact_terms(alpha, beta, t)
    m = np.arange(M + 1, dtype=float)
    logc = _compact_log_coef(alpha, beta, m) - 2.0 * m * (m + rho) * t
    x0, x = np.broadcast_arrays(np.cos(2 * r0), np.cos(2 * r))
    p0 = jacobi_table(M, alpha, beta, x0)
    p1 = p0 if (x0 is x or np.array_equal(x0, x)) else jacobi_table(M, alpha, beta, x)
    coef = np.exp(logc).reshape((-1,) + (1,) * x0.ndim)
    out = np.sum(coef * p0 * p1, axis=0)
    return out[()] if out.ndim == 0 else out


def compact_jacobi_kernel(alpha: float, beta: float, t: float, r0, r):
    """Transition density q_t^{alpha,beta}(r0, r) of the Jacobi diffusion on [0, pi/2]."""
    return compact_weight(alpha, beta, r) * compact_reduced_kernel(alpha, beta, t, r0, r)


# ---------------------------------------------------------------------------
# hyperbolic family


def hyperbolic_weight(alpha: float, beta: float, r):
    r = np.asarray(r, dtype=float)
    return np.sinh(r) ** (2 * alpha + 1) * np.cosh(r) ** (2 * beta + 1)


_GLX, _GLW = np.polynomial.legendre.leggauss(20)


def _p_nodes(t, freq, pmax, refine0, npanel_scale=1.0):
    """Composite Gauss-Legendre nodes on [0, pmax]."""
    width = min(np.pi / max(freq, 1e-3), 1.5 / np.sqrt(t), 2.0) / npanel_scale
    n = max(2, int(np.ceil(pmax / width)))
    edges = list(np.linspace(0.0, pmax, n + 1))
    if refine0:
        # geometric panels resolve a steep rise of the density close to p = 0
        first = edges[1]
        geo = first * np.logspace(-6, 0, 7)[:-1]
        edges = [0.0] + list(geo) + edges[1:]
    edges = np.asarray(edges)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = (0.5 * (lo + hi) + 0.5 * (hi - lo) * _GLX[None, :]).ravel()
    w = (0.5 * (hi - lo) * _GLW[None, :]).ravel()
    return x, w


@lru_cache(maxsize=4096)
def _pmax(alpha, beta, t):
    # e^{-p^2 t/2} m(p) is below 1e-19 of its peak; m grows like p^{2 alpha + 1}
    p = np.linspace(0.0, 60.0 / np.sqrt(t) + 60.0, 4001)[1:]
    lg = -0.5 * p * p * t + np.log(np.maximum(plancherel_density(alpha, beta, p), 1e-300))
    keep = np.nonzero(lg > lg.max() + np.log(1e-19))[0]
    return max(float(p[keep[-1]]) * 1.05, 8.0 / np.sqrt(t))


def _discrete_terms(alpha, beta):
    """(s_j, log D_j, j) for the point spectrum present when beta > alpha + 1."""
    out = []
    j = 0
    while True:
        s = beta - alpha - 1.0 - 2.0 * j
        if s <= 0:
            return out
        logd = (np.log(2.0 * s) + special.gammaln(alpha + 1.0 + j) + special.gammaln(beta - j)
                - special.gammaln(j + 1.0) - 2.0 * special.gammaln(alpha + 1.0)
                - special.gammaln(beta - alpha - j))
        out.append((s, logd, j))
        j += 1


def _spectral_block(alpha, beta, t, r0, r, pmax, refine0):
    """Two panel resolutions of the spectral integral for flat arrays r0, r."""
    freq = float(np.max(r0 + r)) if r0.size else 0.0
    vals = []
    nev = 0
    uniq, inv = np.unique(np.concatenate([r0, r]), return_inverse=True)
    for scale in (1.0, 1.6):
        p, w = _p_nodes(t, freq, pmax, refine0, scale)
        g = np.exp(-0.5 * p * p * t) * plancherel_density(alpha, beta, p) * w
        phi = spherical_fn(alpha, beta, p[:, None], uniq[None, :], check=False)
        ab = phi[:, inv[: r0.size]] * phi[:, inv[r0.size:]]
        vals.append(g @ ab)
        absum = np.abs(g) @ np.abs(ab)
        nev += p.size
    err = np.abs(vals[1] - vals[0]) + 1e-16 * np.abs(vals[1]) + 8 * _EPS * absum
    return vals[1], err, nev


def hyperbolic_spectral_integral(alpha: float, beta: float, t: float, r0, r) -> NumericResult:
    """S = int_0^inf e^{-p^2 t/2} Phi_p(r0) Phi_p(r) m(p) dp (continuous spectrum only).

    Error estimate from a second evaluation on a finer panel grid, plus a
    rounding floor: at large r the integrand oscillates and the sum cancels
    down to eps times the sum of its absolute values. Points are grouped by
    r0 + r so that the panel width follows the oscillation of each group.
    """
    r0b, rb = np.broadcast_arrays(np.asarray(r0, dtype=float), np.asarray(r, dtype=float))
    pmax = _pmax(float(alpha), float(beta), float(t))
    refine0 = beta > alpha + 0.5 or -beta > alpha + 0.5
    flat0, flat = r0b.ravel(), rb.ravel()
    # octave groups of the oscillation frequency r0 + r
    group = np.ceil(np.log2(np.maximum(flat0 + flat, 1.0))).astype(int)
    v = np.empty(flat.size)
    err = np.empty(flat.size)
    nev = 0
    for gk in np.unique(group):
        sel = group == gk
        v[sel], err[sel], n = _spectral_block(alpha, beta, t, flat0[sel], flat[sel], pmax, refine0)
        nev += n
    v, err = v.reshape(r0b.shape), err.reshape(r0b.shape)
    if v.ndim == 0:
        v, err = float(v), float(err)
    return NumericResult(v, err, max(nev, 1))


def _log_reduced_parts(alpha, beta, t, r0, r, lf):
    """exp(lf) times (continuous part + point spectrum), with its error.

    ``lf`` is folded into each term before exponentiation so that large
    point-spectrum exponents cannot overflow.
    """
    res = hyperbolic_spectral_integral(alpha, beta, t, r0, r)
    scale = np.exp(lf) / (2.0 * np.pi)
    x = np.asarray(res.value) * scale
    err = np.asarray(res.abs_error_estimate) * scale
    disc = _discrete_terms(alpha, beta)
    if disc:
        # far out the two parts cancel; the continuous part is good to about _CANCEL_REL
        err = err + _CANCEL_REL * np.abs(x)
    for s, logd, j in disc:
        term = np.exp(logd + 0.5 * s * s * t + lf) * spherical_fn_discrete(alpha, beta, j, r0) \
            * spherical_fn_discrete(alpha, beta, j, r)
        x = x + term
        err = err + _CANCEL_REL * np.abs(term)
    return x, err


def hyperbolic_reduced_kernel(alpha: float, beta: float, t: float, r0, r, with_error: bool = False,
                              drop_gaussian: bool = False, log_factor=0.0):
    """Hyperbolic kernel divided by its weight, symmetric in (r0, r).

    With ``drop_gaussian`` the common factor exp(-rho^2 t / 2) is left out,
    which keeps long-time ratios of kernels free of underflow. The result
    is multiplied by exp(log_factor), applied term by term.
    """
    if not alpha > -1:
        raise DomainError("hyperbolic kernel needs alpha > -1")
    if not t > 0:
        raise DomainError("hyperbolic kernel needs t > 0")
    r0 = np.asarray(r0, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r0 < 0) or np.any(r < 0):
        raise DomainError("hyperbolic kernel radial arguments must be >= 0")
    rho = alpha + beta + 1.0
    if beta < -(alpha + 1.0):
        # conjugation by cosh^{-2 beta} maps the (alpha, beta) family onto (alpha, -beta)
        rho_f = alpha - beta + 1.0
        lg = -2.0 * beta * (alpha + 1.0) * t - 2.0 * beta * (np.log(np.cosh(r)) + np.log(np.cosh(r0)))
        # exp(-rho_f^2 t/2) exp(-2 beta (alpha+1) t) = exp(-rho^2 t/2)
        lf = lg - 0.5 * rho_f ** 2 * t + (0.5 * rho * rho * t if drop_gaussian else 0.0) + log_factor
        val, err = _log_reduced_parts(alpha, -beta, t, r0, r, lf)
    else:
        lf = (0.0 if drop_gaussian else -0.5 * rho * rho * t) + log_factor
        val, err = _log_reduced_parts(alpha, beta, t, r0, r, lf)
    # values within the error floor carry no digits; the true kernel is positive and tiny there
    if np.any(val < -err):
        raise NumericError("hyperbolic kernel: negative value beyond the error estimate "
                           f"(alpha={alpha}, beta={beta}, t={t})")
    val = np.where(np.abs(val) <= err, 0.0, val)
    val = val[()] if np.ndim(val) == 0 else val
    err = err[()] if np.ndim(err) == 0 else err
    if with_error:
        return val, err
    return val


def hyperbolic_jacobi_kernel(alpha: float, beta: float, t: float, r0, r):
    """Transition density q_t^{alpha,beta}(r0, r) of the hyperbolic Jacobi diffusion."""
    return hyperbolic_weight(alpha, beta, r) * hyperbolic_reduced_kernel(alpha, beta, t, r0, r)


def hyperbolic_kernel_asymptotic(alpha: float, beta: float, t: float, r0, r):
    """Large-t equivalent of the hyperbolic kernel.

    weight(r) / (2 sqrt(2 pi) t^{3/2}) e^{-rho^2 t/2} Phi_0(r0) Phi_0(r)
    |Gamma(rho/2) Gamma((alpha-beta+1)/2) / Gamma(1+alpha)|^2,
    the constant matching the 1/(2 pi) Plancherel normalization used here.
    """
    rho = alpha + beta + 1.0
    c = (special.gamma(rho / 2) * special.gamma((alpha - beta + 1) / 2) / special.gamma(1 + alpha)) ** 2
    phi0 = spherical_fn(alpha, beta, 0.0, r0) * spherical_fn(alpha, beta, 0.0, r)
    return (hyperbolic_weight(alpha, beta, r) / (2.0 * np.sqrt(2.0 * np.pi) * t ** 1.5)
            * np.exp(-0.5 * rho * rho * t) * phi0 * c)


# ---------------------------------------------------------------------------
# complex projective and hyperbolic spaces


def _as_vec(w):
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    return w


def _lagrange(w0, w):
    """|w0|^2 |w|^2 - |<w, w0>|^2 as a sum of squares (0 exactly for n = 1)."""
    if w0.size == 1:
        return 0.0
    m = np.outer(w0, w) - np.outer(w, w0)
    return 0.5 * float(np.sum(np.abs(m) ** 2))


def fs_distance(w0, w) -> float:
    """Fubini-Study distance between affine points of CP^n, in [0, pi/2].

    cos d = |1 + <w, w0>| / (sqrt(1 + |w0|^2) sqrt(1 + |w|^2)); the sine is
    formed from |w - w0|^2 and the Lagrange term so that d is accurate near 0.
    """
    w0, w = _as_vec(w0), _as_vec(w)
    den2 = (1.0 + np.vdot(w0, w0).real) * (1.0 + np.vdot(w, w).real)
    c = abs(1.0 + np.vdot(w0, w)) / np.sqrt(den2)
    s2 = (np.vdot(w - w0, w - w0).real + _lagrange(w0, w)) / den2
    return float(np.arctan2(np.sqrt(max(s2, 0.0)), c))


def bergman_distance(w0, w) -> float:
    """Bergman distance between points of the unit ball (CH^n).

    cosh d = |1 - <w, w0>| / (sqrt(1 - |w0|^2) sqrt(1 - |w|^2)), with
    sinh^2 d formed from |w - w0|^2 minus the Lagrange term.
    """
    w0, w = _as_vec(w0), _as_vec(w)
    n0 = np.vdot(w0, w0).real
    n1 = np.vdot(w, w).real
    if n0 >= 1.0 or n1 >= 1.0:
        raise DomainError("bergman_distance: points must lie in the open unit ball")
    den2 = (1.0 - n0) * (1.0 - n1)
    sh2 = (np.vdot(w - w0, w - w0).real - _lagrange(w0, w)) / den2
    return float(np.arcsinh(np.sqrt(max(sh2, 0.0))))


def cpn_heat_kernel(n: int, t: float, w0, w) -> float:
    """Heat kernel of CP^n in affine coordinates, with respect to Lebesgue measure."""
    if n < 1:
        raise DomainError("cpn_heat_kernel: n must be >= 1")
    d = fs_distance(w0, w)
    nw = np.vdot(_as_vec(w), _as_vec(w)).real
    red = compact_reduced_kernel(n - 1.0, 0.0, t, 0.0, d)
    return float(special.gamma(n) / np.pi ** n * red * (1.0 + nw) ** (-(n + 1)))


def chn_heat_kernel(n: int, t: float, w0, w) -> float:
    """Heat kernel of CH^n in ball coordinates, with respect to Lebesgue measure."""
    if n < 1:
        raise DomainError("chn_heat_kernel: n must be >= 1")
    d = bergman_distance(w0, w)
    nw = np.vdot(_as_vec(w), _as_vec(w)).real
    red = hyperbolic_reduced_kernel(n - 1.0, 0.0, t, 0.0, d)
    # the hyperbolic weight has no factor 2, unlike the compact one
    return float(special.gamma(n) / (2.0 * np.pi ** n) * red * (1.0 - nw) ** (-(n + 1)))


# ---------------------------------------------------------------------------
# real hyperbolic space of odd dimension 2n + 1


@lru_cache(maxsize=64)
def _odd_hyperbolic_terms(n: int):
    """Monomials (c, i, j, l) of (-1/(2 pi sinh d) d/dd)^n e^{-d^2/2t}.

    Each term is c d^i sinh(d)^{-j} cosh(d)^l t^{-k} e^{-d^2/2t}, returned
    as (c, i, j, l, k).
    """
    terms = {(0, 0, 0, 0): 1.0}
    for _ in range(n):
        new: dict = {}

        def add(key, c):
            new[key] = new.get(key, 0.0) + c

        for (i, j, l, k), c in terms.items():
            c2 = -c / (2.0 * np.pi)
            if i:
                add((i - 1, j + 1, l, k), c2 * i)
            if j:
                add((i, j + 2, l + 1, k), -c2 * j)
            if l:
                add((i, j, l - 1, k), c2 * l)
            add((i + 1, j + 1, l, k + 1), -c2)
        terms = {key: c for key, c in new.items() if c != 0.0}
    return tuple((c, i, j, l, k) for (i, j, l, k), c in sorted(terms.items()))


def odd_hyperbolic_log_kernel(n: int, t: float, d, shift=0.0):
    """log of the heat kernel of (1/2) Laplacian on H^{2n+1} at distance d, plus ``shift``.

    The shift is added before exponentiation so that callers can fold in
    large Gaussian factors. Exact for n = 1 at every d; for n >= 2 the
    monomial form is only used at d >= 1 (cancellation below).
    """
    d = np.asarray(d, dtype=float)
    if n == 1:
        ratio = np.where(d < 1e-8, 1.0, d / np.sinh(np.maximum(d, 1e-300)))
        acc = ratio / (2.0 * np.pi * t)
    else:
        acc = 0.0
        for c, i, j, l, k in _odd_hyperbolic_terms(n):
            acc = acc + c * d ** i * np.sinh(d) ** (-j) * np.cosh(d) ** l * t ** (-k)
    return (np.log(acc) - 0.5 * n * n * t - 0.5 * np.log(2 * np.pi * t)
            - d * d / (2.0 * t) + shift)


def odd_hyperbolic_kernel(n: int, t: float, d):
    """Heat kernel of (1/2) Laplacian on H^{2n+1}, as a function of distance.

    Closed form at d >= 1 and the spectral radial kernel below, where the
    closed form loses digits to cancellation.
    """
    d = np.asarray(d, dtype=float)
    out = np.empty(d.shape)
    big = (d >= 1.0) | (n == 1)
    if np.any(big):
        out[big] = np.exp(odd_hyperbolic_log_kernel(n, t, d[big]))
    if np.any(~big):
        sphere = 2.0 * np.pi ** (n + 0.5) / special.gamma(n + 0.5)
        out[~big] = hyperbolic_reduced_kernel(n - 0.5, -0.5, t, 0.0, d[~big]) / sphere
    return out[()] if out.ndim == 0 else out
