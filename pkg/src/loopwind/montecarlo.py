"""Monte Carlo oracle: radial Jacobi diffusions and their winding functionals.

Every geometry with n = 1 (and the plane) has a radial part r(t) that is a
Jacobi diffusion (a 2-d Bessel process for the plane) and a winding angle
which, given the radial path, is a centred Gaussian with variance

    V = mu^2 t + int_0^t c(r(s)) ds,

c = 4/sin^2(2r) (cp1), 4/sinh^2(2r) (ch1), tan^2 r (sphere), tanh^2 r (ads,
sl2), 1/r^2 (plane). For cp1/ch1/plane this is the time change
theta = beta(clock). For sphere/ads it is the polar form of the fiber drift:
with w = tan(r)e^{i phi} (resp. tanh), d phi = 2 dW / sin(2r) (resp. sinh)
and the fiber integrand reduces to -sin^2(r) d phi = -tan(r) dW on the
sphere and +sinh^2(r) d phi = +tanh(r) dW on ads. The signs are the ones
simulated; every validated quantity is even in theta so a global flip is
invisible.

Radial stepping is a splitting scheme: the singular part (delta-1)/(2 rho) of
the drift near a boundary, rho the distance to it, is advanced with the exact
Bessel(delta) transition, the bounded remainder with an Euler step. The step
is h = min(dt, kappa rho^2) so that the clock integrand is resolved. A step
that leaves the open domain is rejected and retried at a quarter of the size.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientStatisticsError, SimulationError, UnsupportedGeometryError
from .geometry import BridgeSpec, Geometry

__all__ = [
    "SimConfig",
    "PathSample",
    "EmpiricalIndexDistribution",
    "simulate_radial",
    "simulate_winding_pair",
    "estimate_conditional_cf",
    "estimate_index_distribution",
    "wilson_interval",
]

CHUNK = 8192          # paths per seed substream; fixes the reduction order
MIN_ACCEPTED = 100
_MAX_RETRY = 12


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings. ``angle_halfwidth`` is only used by bin-mode index estimates."""

    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 0
    bin_halfwidth: float = 0.02
    angle_halfwidth: float = 0.05
    kappa: float = 0.04
    threads: int | None = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt must be > 0")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise DomainError("n_paths must be an integer >= 1")
        if not self.bin_halfwidth > 0 or not self.angle_halfwidth > 0:
            raise DomainError("bin half-widths must be > 0")
        if not 0 < self.kappa <= 1:
            raise DomainError("kappa must lie in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def check_horizon(self, t: float) -> None:
        if not t > 0:
            raise DomainError("t must be > 0")
        if self.dt > t / 100 * (1 + 1e-12):
            raise DomainError(f"dt = {self.dt} exceeds t/100 = {t / 100}")


@dataclass(frozen=True)
class PathSample:
    """Endpoints of simulated paths.

    ``variance`` is the conditional variance of the winding angle given the
    radial path; ``accepted`` marks endpoints inside the radial bin.
    """

    r_end: np.ndarray
    theta_end: np.ndarray
    variance: np.ndarray
    accepted: np.ndarray

    @property
    def n_accepted(self) -> int:
        return int(np.count_nonzero(self.accepted))


# ---------------------------------------------------------------------------
# radial models


def _cotm(r):
    # cot r - 1/r, stable at 0
    r = np.asarray(r, dtype=float)
    small = r < 1e-4
    safe = np.where(small, 1.0, r)
    return np.where(small, -r / 3 - r**3 / 45, 1 / np.tan(safe) - 1 / safe)


def _cothm(r):
    # coth r - 1/r, stable at 0
    r = np.asarray(r, dtype=float)
    small = r < 1e-4
    safe = np.where(small, 1.0, r)
    return np.where(small, r / 3 - r**3 / 45, 1 / np.tanh(safe) - 1 / safe)


@dataclass(frozen=True)
class _Model:
    family: str             # compact, hyperbolic or plane
    a: float = 0.0          # Jacobi parameters of the radial generator
    b: float = 0.0
    clock: object = None    # winding variance rate c(r), or None
    polar: object = None    # fiber volatility sigma(r) of the polar form
    mu: float = 0.0
    sing0: bool = False     # c(r) ~ 1/r^2 at r = 0
    sing1: bool = False     # c(r) ~ 1/(pi/2 - r)^2 at r = pi/2

    @property
    def upper(self) -> float:
        return math.pi / 2 if self.family == "compact" else math.inf

    @property
    def d0(self) -> float:
        return 2 * self.a + 2

    @property
    def d1(self) -> float:
        return 2 * self.b + 2

    def rem0(self, r):
        # drift minus its Bessel part (a + 1/2)/r
        if self.family == "plane":
            return np.zeros_like(r)
        if self.family == "compact":
            return (self.a + 0.5) * _cotm(r) - (self.b + 0.5) * np.tan(r)
        return (self.a + 0.5) * _cothm(r) + (self.b + 0.5) * np.tanh(r)

    def rem1(self, u):
        # drift of u = pi/2 - r minus its Bessel part (b + 1/2)/u
        return (self.b + 0.5) * _cotm(u) - (self.a + 0.5) * np.tan(u)

    def rho_clock(self, r):
        """Distance to the nearest boundary where the clock rate blows up."""
        d = np.full_like(r, np.inf)
        if self.sing0:
            d = np.minimum(d, r)
        if self.sing1:
            d = np.minimum(d, self.upper - r)
        return d


def _radial_model(geom: Geometry, with_fiber: bool = True) -> _Model:
    g = geom.dispatch
    if g.kind == "plane":
        return _Model("plane", clock=lambda r: 1.0 / r**2, polar=lambda r: 1.0 / r, sing0=True)
    fam = "compact" if g.kind in ("cp1", "sphere") else "hyperbolic"
    a = g.n - 1 if g.kind in ("sphere", "ads") else 0
    if not with_fiber or g.n != 1:
        return _Model(fam, a, 0.0)
    return {
        "cp1": _Model(fam, clock=lambda r: 4 / np.sin(2 * r) ** 2, polar=lambda r: 2 / np.sin(2 * r),
                      sing0=True, sing1=True),
        "ch1": _Model(fam, clock=lambda r: 4 / np.sinh(2 * r) ** 2, polar=lambda r: 2 / np.sinh(2 * r),
                      sing0=True),
        "sphere": _Model(fam, clock=lambda r: np.tan(r) ** 2, polar=lambda r: -np.tan(r), mu=g.mu,
                         sing1=True),
        "ads": _Model(fam, clock=lambda r: np.tanh(r) ** 2, polar=lambda r: np.tanh(r), mu=g.mu),
    }[g.kind]


def _bessel_step(rng, rho, h, delta):
    """Exact Bessel(delta) transition from rho over time h (delta >= 1)."""
    z = rho + np.sqrt(h) * rng.standard_normal(rho.size)
    chi = rng.chisquare(delta - 1, rho.size) if delta > 1 else 0.0
    return np.sqrt(z * z + h * chi)


def _propose(model: _Model, rng, r, h):
    if math.isinf(model.upper):
        return _bessel_step(rng, r, h, model.d0) + h * model.rem0(r)
    near0 = r < model.upper / 2
    out = np.empty_like(r)
    if near0.any():
        rr, hh = r[near0], h[near0]
        out[near0] = _bessel_step(rng, rr, hh, model.d0) + hh * model.rem0(rr)
    far = ~near0
    if far.any():
        u, hh = model.upper - r[far], h[far]
        out[far] = model.upper - (_bessel_step(rng, u, hh, model.d1) + hh * model.rem1(u))
    return out


EPS_DEEP = 1e-2


def _simulate_chunk(model: _Model, r0: float, t: float, dt: float, kappa: float, n: int,
                    seed_seq, fiber: str):
    """Simulate n paths; returns (r_end, theta_end, variance).

    Steps are h = min(dt, kappa rho^2) with rho the distance to a boundary
    where the clock rate is singular (c ~ 1/rho^2 there, so each step adds
    about kappa to the clock). Once a path comes within EPS_DEEP of such a
    boundary the process is a 2-d Bessel process to O(rho^2), log rho is a
    Brownian motion in clock time, and the clock spent before returning to
    EPS_DEEP is drawn exactly as a Brownian first-passage time; the real time
    of that excursion is set to its mean (EPS_DEEP^2 - rho^2)/2.
    """
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    r = np.full(n, float(r0))
    tau = np.zeros(n)
    var = np.zeros(n)
    theta = np.zeros(n)
    want_clock = model.clock is not None
    alive = np.arange(n)
    while alive.size:
        ra, ta = r[alive], tau[alive]
        rc = model.rho_clock(ra)
        h = np.minimum(np.minimum(dt, kappa * rc * rc), t - ta)
        new = _propose(model, rng, ra, h)
        bad = ~((new > 0) & (new < model.upper) & np.isfinite(new))
        tries = 0
        while bad.any():
            tries += 1
            if tries > _MAX_RETRY:
                raise SimulationError("step-size rejection cascade exhausted")
            h[bad] *= 0.25
            new[bad] = _propose(model, rng, ra[bad], h[bad])
            bad = ~((new > 0) & (new < model.upper) & np.isfinite(new))
        step = h
        if want_clock:
            rc_new = model.rho_clock(new)
            deep = rc_new < EPS_DEEP
            c_left = model.clock(ra)
            if fiber == "clock":
                c_right = model.clock(np.where(deep, ra, new))
                inc = np.where(deep, c_left, 0.5 * (c_left + c_right)) * h
            else:
                # Ito left-point increments of the polar form; the variance
                # tracks the same left-point sum
                sig = model.polar(ra)
                theta[alive] += sig * np.sqrt(h) * rng.standard_normal(ra.size)
                inc = sig * sig * h
            if deep.any():
                idx = np.flatnonzero(deep)
                x = np.log(EPS_DEEP / rc_new[idx])
                tc = (x / rng.standard_normal(idx.size)) ** 2
                inc[idx] += tc
                if fiber == "polar":
                    theta[alive[idx]] += np.sqrt(tc) * rng.standard_normal(idx.size)
                step = h.copy()
                step[idx] += 0.5 * (EPS_DEEP**2 - rc_new[idx] ** 2)
                nd = new[idx]
                new[idx] = np.where(nd < model.upper / 2, EPS_DEEP, model.upper - EPS_DEEP)
            var[alive] += inc
        r[alive] = new
        tau[alive] = ta + step
        alive = alive[tau[alive] < t * (1 - 1e-13)]
    if want_clock:
        if fiber == "clock":
            theta = np.sqrt(var) * rng.standard_normal(n)
        if model.mu:
            theta = theta + model.mu * math.sqrt(t) * rng.standard_normal(n)
            var = var + model.mu**2 * t
    return r, theta, var


def _threads(cfg: SimConfig) -> int:
    if cfg.threads is not None:
        return max(1, int(cfg.threads))
    try:
        return max(1, int(os.environ.get("LOOPWIND_THREADS", "1")))
    except ValueError:
        return 1


def _run(model: _Model, r0: float, t: float, cfg: SimConfig, fiber: str):
    sizes = [CHUNK] * (cfg.n_paths // CHUNK)
    if cfg.n_paths % CHUNK:
        sizes.append(cfg.n_paths % CHUNK)
    seqs = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = list(zip(sizes, seqs))
    go = lambda job: _simulate_chunk(model, r0, t, cfg.dt, cfg.kappa, job[0], job[1], fiber)
    nt = _threads(cfg)
    if nt > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(nt) as ex:
            parts = list(ex.map(go, jobs))
    else:
        parts = [go(j) for j in jobs]
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def _check_start(geom: Geometry, r0: float, t: float, cfg: SimConfig):
    cfg.check_horizon(t)
    g = geom.dispatch
    if g.kind in ("cp1", "ch1", "plane") and not r0 > 0:
        raise DomainError(f"r0 must be interior for {geom.kind}")
    geom.check_radius(r0, "r0")


def simulate_radial(geom: Geometry, r0: float, t: float, cfg: SimConfig) -> np.ndarray:
    """Endpoints r(t) of the radial diffusion of ``geom`` (any n) started at r0."""
    _check_start(geom, r0, t, cfg)
    model = _radial_model(geom, with_fiber=False)
    return _run(model, r0, t, cfg, "clock")[0]


def simulate_winding_pair(geom: Geometry, r0: float, t: float, cfg: SimConfig,
                          r_target: float | None = None, fiber: str = "default") -> PathSample:
    """Joint endpoints (r(t), theta(t)) for n = 1 geometries and the plane.

    ``fiber`` selects the representation of the winding angle: "clock"
    draws beta(clock) at the end of the radial path, "polar" integrates the
    stochastic fiber increments step by step. The default is the time change
    for cp1/ch1/plane and the polar form for sphere/ads/sl2.
    """
    g = geom.dispatch
    if g.kind in ("sphere", "ads") and g.n != 1:
        raise UnsupportedGeometryError("Monte Carlo winding is available for n = 1 only")
    _check_start(geom, r0, t, cfg)
    if fiber == "default":
        fiber = "clock" if g.kind in ("cp1", "ch1", "plane") else "polar"
    if fiber not in ("clock", "polar"):
        raise DomainError("fiber must be 'clock' or 'polar'")
    r_end, theta, var = _run(_radial_model(geom), r0, t, cfg, fiber)
    if r_target is None:
        acc = np.ones(r_end.size, dtype=bool)
    else:
        acc = np.abs(r_end - r_target) <= cfg.bin_halfwidth
    return PathSample(r_end, theta, var, acc)


# ---------------------------------------------------------------------------
# estimators


def estimate_conditional_cf(geom: Geometry, lam: float, r0: float, r: float, t: float,
                            cfg: SimConfig, conditional: bool = False,
                            sample: PathSample | None = None) -> tuple[complex, float]:
    """Ratio estimate of E[e^{i lam theta(t)} | r(t) = r] with its standard error.

    The estimate is sum e^{i lam theta_j} 1{bin} / sum 1{bin}; the error is
    the delta-method standard error of that ratio, as the modulus of the
    complex error. ``conditional=True`` replaces e^{i lam theta_j} by its
    conditional mean e^{-lam^2 V_j / 2} given the radial path.
    """
    if sample is None:
        sample = simulate_winding_pair(geom, r0, t, cfg, r_target=r)
    acc = sample.accepted
    n_acc = int(np.count_nonzero(acc))
    if n_acc < MIN_ACCEPTED:
        raise InsufficientStatisticsError(f"only {n_acc} accepted paths (< {MIN_ACCEPTED})")
    if lam == 0:
        return complex(1.0), 0.0
    if conditional:
        x = np.exp(-0.5 * lam * lam * sample.variance[acc]).astype(complex)
    else:
        x = np.exp(1j * lam * sample.theta_end[acc])
    est = complex(np.mean(x))
    se = math.sqrt(float(np.sum(np.abs(x - est) ** 2)) / (n_acc * max(n_acc - 1, 1)))
    return est, se


def wilson_interval(count, n, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    count = np.asarray(count, dtype=float)
    p = count / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the bounds are exact at the extremes
    lo = np.where(count == 0, 0.0, np.maximum(mid - half, 0.0))
    hi = np.where(count == n, 1.0, np.minimum(mid + half, 1.0))
    return lo, hi


@dataclass(frozen=True)
class EmpiricalIndexDistribution:
    """Window-normalized empirical index law with per-k standard errors and 95% intervals."""

    k_min: int
    k_max: int
    probs: np.ndarray
    stderr: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_accepted: int
    n_paths: int
    method: str
    geometry: str
    params: dict = field(default_factory=dict)

    @property
    def k(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def prob(self, k: int) -> float:
        if not self.k_min <= k <= self.k_max:
            return 0.0
        return float(self.probs[k - self.k_min])

    def z_scores(self, reference) -> np.ndarray:
        ref = np.asarray(reference, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (self.probs - ref) / self.stderr
        return np.where(self.stderr > 0, z, np.where(self.probs == ref, 0.0, np.inf))


def estimate_index_distribution(geom: Geometry, bridge: BridgeSpec, cfg: SimConfig,
                                k_min: int, k_max: int, method: str = "conditional",
                                sample: PathSample | None = None) -> EmpiricalIndexDistribution:
    """Empirical law of the winding index of the bridge.

    method="bin": accept when r(t) is in the radial bin and the angle is
    within ``cfg.angle_halfwidth`` of bridge.theta modulo 2 pi; k is the
    rounded number of turns; Wilson intervals.
    method="conditional": radial bin only; the angle is integrated exactly
    through its Gaussian conditional density at theta + 2 pi k given the
    radial path, and the ratio is reported with delta-method errors and
    normal intervals. This is the only practical choice when the endpoint
    density is small, e.g. loops based at the origin of sl2.
    """
    if k_max < k_min:
        raise DomainError("k_max must be >= k_min")
    if sample is None:
        sample = simulate_winding_pair(geom, bridge.r0, bridge.t, cfg, r_target=bridge.r)
    acc = sample.accepted
    ks = np.arange(k_min, k_max + 1)
    params = dict(r0=bridge.r0, r=bridge.r, theta=bridge.theta, t=bridge.t,
                  dt=cfg.dt, n_paths=cfg.n_paths, seed=cfg.seed,
                  bin_halfwidth=cfg.bin_halfwidth)
    if method == "bin":
        d = sample.theta_end[acc] - bridge.theta
        off = d - 2 * np.pi * np.round(d / (2 * np.pi))
        kk = np.round(d / (2 * np.pi)).astype(np.int64)
        sel = (np.abs(off) <= cfg.angle_halfwidth) & (kk >= k_min) & (kk <= k_max)
        n_acc = int(np.count_nonzero(sel))
        if n_acc < MIN_ACCEPTED:
            raise InsufficientStatisticsError(f"only {n_acc} accepted paths (< {MIN_ACCEPTED})")
        counts = np.bincount(kk[sel] - k_min, minlength=ks.size).astype(float)
        probs = counts / n_acc
        lo, hi = wilson_interval(counts, n_acc)
        se = np.sqrt(np.maximum(probs * (1 - probs), 1.0 / n_acc) / n_acc)
        params["angle_halfwidth"] = cfg.angle_halfwidth
        return EmpiricalIndexDistribution(k_min, k_max, probs, se, lo, hi, n_acc, cfg.n_paths,
                                          method, geom.label(), params)
    if method != "conditional":
        raise DomainError("method must be 'bin' or 'conditional'")
    n_acc = int(np.count_nonzero(acc))
    if n_acc < MIN_ACCEPTED:
        raise InsufficientStatisticsError(f"only {n_acc} accepted paths (< {MIN_ACCEPTED})")
    v = sample.variance[acc][:, None]
    x = bridge.theta + 2 * np.pi * ks[None, :]
    w = np.exp(-x * x / (2 * v)) / np.sqrt(2 * np.pi * v)
    wsum = w.sum(axis=1)
    mw = wsum.mean()
    if not mw > 0:
        raise InsufficientStatisticsError("conditional weights vanish on the window")
    probs = w.mean(axis=0) / mw
    resid = w - probs[None, :] * wsum[:, None]
    se = np.sqrt(np.sum(resid**2, axis=0) / (n_acc * (n_acc - 1))) / mw
    lo = np.maximum(probs - 1.959963984540054 * se, 0.0)
    hi = np.minimum(probs + 1.959963984540054 * se, 1.0)
    return EmpiricalIndexDistribution(k_min, k_max, probs, se, lo, hi, n_acc, cfg.n_paths,
                                      method, geom.label(), params)
