"""Command-line interface.

    loopwind dist     --geometry cp1 --r0 0.6 --r 0.9 --theta 0 --t 0.8 --k 20 --out d.json
    loopwind cf       --geometry ads --n 1 --mu 0.5 --lambda 0
    loopwind density  --geometry ch1 --r0 0.7 --r 1.1 --t 1 --theta-grid 0:6.28:0.1
    loopwind kernel   --family hyperbolic --alpha 0 --beta 0 --t 1 --r0 0.5 --r-grid 0.1:3:0.1
    loopwind simulate --geometry cp1 --r0 0.6 --r 0.9 --t 0.8 --paths 100000 --seed 7
    loopwind compare  --geometry sl2 --mu 1 --t 4 --paths 200000 --seed 7
    loopwind limits   --geometry sphere --n 2 --lambda-grid 0:3:0.5
    loopwind replay   d.json

Exit status: 0 on success, 2 on usage or domain errors, 1 on numeric or
simulation failures. Every output file embeds the run manifest (JSON key
"manifest", or leading "# manifest:" comment line in CSV); ``replay``
re-runs it. Wall-clock time is kept out of the embedded manifest, so that
analytic outputs are byte-reproducible, and written to a sidecar
``<out>.manifest.json`` instead.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings

import numpy as np

from . import __version__
from .closed_forms import ch1_longtime_index, planar_index_distribution, sl2_loop_index
from .errors import DomainError, LoopwindError, NumericError, SimulationError, UnsupportedGeometryError
from .geometry import KINDS, BridgeSpec, Geometry
from .kernels import compact_jacobi_kernel, hyperbolic_jacobi_kernel, hyperbolic_reduced_kernel, hyperbolic_weight
from .laws import CF_TOL, bridge_cf, conditional_cf, fiber_density, index_distribution, limit_cf
from .montecarlo import SimConfig, estimate_conditional_cf, estimate_index_distribution, simulate_winding_pair
from .quadrature import Tolerance

__all__ = ["main", "run", "emit_table", "build_parser"]

TWO_PI = 2 * math.pi


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing


def _grid(spec: str) -> np.ndarray:
    try:
        a, b, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"grid {spec!r} must look like a:b:step")
    if not step > 0 or b < a:
        raise UsageError(f"grid {spec!r} needs step > 0 and b >= a")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(n)


def _common(p: argparse.ArgumentParser, geometry=True, bridge=True, t_default=None):
    if geometry:
        p.add_argument("--geometry", required=True, choices=KINDS)
        p.add_argument("--n", type=int, default=1)
        p.add_argument("--mu", type=float, default=0.0)
    if bridge:
        p.add_argument("--r0", type=float, default=None)
        p.add_argument("--r", type=float, default=None)
        p.add_argument("--theta", type=float, default=0.0)
        if t_default is None:
            p.add_argument("--t", type=float, required=True)
        else:
            p.add_argument("--t", type=float, default=t_default)
    p.add_argument("--tol-rel", type=float, default=None)
    p.add_argument("--tol-abs", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=None)


def _sim(p: argparse.ArgumentParser):
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=None, help="step size (default t/200)")
    p.add_argument("--bin", type=float, default=None,
                   help="radial bin half-width (default 0.02, or 0.3 for a loop at r = 0)")
    p.add_argument("--method", choices=("conditional", "bin"), default="conditional")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loopwind", description="Winding index laws of Brownian loops and bridges.")
    ap.add_argument("--version", action="version", version=f"loopwind {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="index distribution of a bridge")
    _common(p)
    p.add_argument("--k", type=int, default=20, help="symmetric window half-width")

    p = sub.add_parser("cf", help="conditional (or bridge) characteristic function")
    _common(p, t_default=1.0)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--lambda-grid", dest="lam_grid")
    p.add_argument("--bridge", action="store_true", help="condition on theta(t) as well")

    p = sub.add_parser("density", help="fiber density of the winding angle")
    _common(p)
    p.add_argument("--theta-grid", default=None)
    p.add_argument("--oracle", action="store_true", help="use the explicit integral (ch1, ads)")

    p = sub.add_parser("kernel", help="radial Jacobi heat kernel")
    _common(p, geometry=False, bridge=False)
    p.add_argument("--family", choices=("compact", "hyperbolic"), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--r0", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--r", type=float)
    g.add_argument("--r-grid")

    p = sub.add_parser("simulate", help="Monte Carlo index distribution (and CF)")
    _common(p)
    _sim(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--lambda", dest="lam", type=float, default=None)

    p = sub.add_parser("compare", help="analytic vs Monte Carlo z-scores")
    _common(p)
    _sim(p)
    p.add_argument("--k", type=int, default=2, help="compare |k| <= K")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)

    p = sub.add_parser("limits", help="long-time limit laws")
    _common(p, bridge=False)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--lambda-grid", dest="lam_grid")
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--k", type=int, default=5)

    p = sub.add_parser("replay", help="re-run the manifest embedded in an output file")
    p.add_argument("file")
    p.add_argument("--out", default=None, help="write to this path instead of the recorded one")
    return ap


# ---------------------------------------------------------------------------
# helpers


def _geometry(a) -> Geometry:
    return Geometry.from_name(a.geometry, a.n, a.mu)


def _bridge(a, geom: Geometry) -> BridgeSpec:
    theta = a.theta
    if not 0 <= theta < TWO_PI:
        warnings.warn(f"theta = {theta} reduced modulo 2 pi", stacklevel=2)
    r0, r = a.r0, a.r
    if r0 is None:
        # the pole is a valid start only where the radial domain contains 0
        if geom.dispatch.kind not in ("sphere", "ads"):
            raise UsageError(f"--r0 is required for {geom.kind}")
        r0 = 0.0
    if r is None:
        r = r0
    return BridgeSpec(r0, r, theta, a.t)


def _tol(a, default: Tolerance) -> Tolerance:
    return Tolerance(a.tol_rel if a.tol_rel is not None else default.rel,
                     a.tol_abs if a.tol_abs is not None else default.abs, default.max_evals)


def _fmt(a) -> str:
    if a.format:
        return a.format
    if a.out and a.out.lower().endswith(".csv"):
        return "csv"
    return "json"


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _manifest(command: str, argv: list[str], a) -> dict:
    params = {k: v for k, v in sorted(vars(a).items()) if k not in ("command",)}
    return {
        "command": command,
        "argv": list(argv),
        "params": params,
        "seed": getattr(a, "seed", None),
        "tolerance": {"rel": getattr(a, "tol_rel", None), "abs": getattr(a, "tol_abs", None)},
        "artifacts": [a.out] if getattr(a, "out", None) else [],
        "version": __version__,
    }


def _check_out(path):
    if path is None:
        return
    d = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(d) or not os.access(d, os.W_OK):
        raise UsageError(f"cannot write to {path}: directory {d} is missing or not writable")


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".loopwind-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_table(payload: dict, fmt: str, path: str | None, columns: list[str] | None = None,
               rows: list[list] | None = None) -> str:
    """Serialize a result; JSON carries ``payload``, CSV carries ``rows`` under ``columns``.

    The manifest (payload["manifest"]) is the leading comment line of a CSV.
    Returns the text and writes it atomically when ``path`` is given.
    """
    for v in payload.values():
        if isinstance(v, float) and not math.isfinite(v):
            raise NumericError("refusing to emit a non-finite result")
    if fmt == "json":
        text = json.dumps(payload, indent=1, sort_keys=False, allow_nan=False) + "\n"
    else:
        buf = io.StringIO()
        buf.write("# manifest: " + json.dumps(payload.get("manifest", {}), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                        for v in row])
        text = buf.getvalue()
    if path:
        _atomic_write(path, text)
    return text


def _finish(a, payload, columns, rows, started, quiet_value=None):
    text = emit_table(payload, _fmt(a), a.out, columns, rows)
    if a.out:
        side = dict(payload["manifest"], wall_clock_seconds=round(time.time() - started, 3))
        _atomic_write(a.out + ".manifest.json", json.dumps(side, indent=1) + "\n")
    elif quiet_value is not None:
        print(quiet_value)
    else:
        sys.stdout.write(text)


def _dist_rows(k, probs, lo=None, hi=None):
    lo = [None] * len(k) if lo is None else lo
    hi = [None] * len(k) if hi is None else hi
    return [[int(kk), float(p), l, h] for kk, p, l, h in zip(k, probs, lo, hi)]


# ---------------------------------------------------------------------------
# commands


def _cmd_dist(a, man, started):
    geom = _geometry(a)
    br = _bridge(a, geom)
    if a.k < 2:
        raise UsageError("--k must be >= 2")
    d = index_distribution(geom, br, -a.k, a.k, tol=_tol(a, CF_TOL))
    payload = {"manifest": man, "geometry": d.geometry,
               "params": dict(d.params, n=geom.n, mu=geom.mu),
               "k": [int(x) for x in d.k], "probs": [float(x) for x in d.probs],
               "norm_defect": float(d.norm_defect), "tail_constant": _num(d.tail_constant),
               "tail_mass": float(d.tail_mass)}
    _finish(a, payload, ["k", "prob", "ci_lo", "ci_hi"], _dist_rows(d.k, d.probs), started)


def _cmd_cf(a, man, started):
    geom = _geometry(a)
    br = _bridge(a, geom)
    lams = np.array([a.lam]) if a.lam is not None else _grid(a.lam_grid)
    imag = None
    if a.bridge:
        cvals = np.array([bridge_cf(geom, float(x), br) for x in lams])
        vals, imag = cvals.real, cvals.imag
    else:
        vals = np.atleast_1d(conditional_cf(geom, lams, br.r0, br.r, br.t, threads=a.threads))
    tol = _tol(a, Tolerance(1e-6, 1e-13))
    err = np.maximum(tol.abs, tol.rel * np.abs(vals))
    payload = {"manifest": man, "geometry": geom.label(),
               "params": dict(r0=br.r0, r=br.r, theta=br.theta, t=br.t, n=geom.n, mu=geom.mu,
                              bridge=bool(a.bridge)),
               "x": [float(x) for x in lams], "value": [float(v) for v in vals],
               "abs_error_estimate": [float(e) for e in err]}
    if imag is not None:
        # the CSV carries the real part; JSON has both
        payload["value_imag"] = [float(v) for v in imag]
    quiet = repr(float(vals[0])) if a.lam is not None and not a.out else None
    _finish(a, payload, ["x", "value", "abs_error_estimate"],
            [[float(x), float(v), float(e)] for x, v, e in zip(lams, vals, err)], started, quiet)


def _cmd_density(a, man, started):
    geom = _geometry(a)
    br = _bridge(a, geom)
    th = np.array([a.theta]) if a.theta_grid is None else _grid(a.theta_grid)
    res = fiber_density(geom, br.r0, br.r, br.t, th, method="oracle" if a.oracle else "inversion",
                        tol=_tol(a, CF_TOL))
    val = np.atleast_1d(np.asarray(res.value, dtype=float))
    err = np.broadcast_to(np.asarray(res.abs_error_estimate, dtype=float), val.shape)
    payload = {"manifest": man, "geometry": geom.label(),
               "params": dict(r0=br.r0, r=br.r, t=br.t, n=geom.n, mu=geom.mu),
               "x": [float(x) for x in th], "value": [float(v) for v in val],
               "abs_error_estimate": [float(e) for e in err]}
    _finish(a, payload, ["x", "value", "abs_error_estimate"],
            [[float(x), float(v), float(e)] for x, v, e in zip(th, val, err)], started)


def _cmd_kernel(a, man, started):
    rs = np.array([a.r]) if a.r is not None else _grid(a.r_grid)
    if a.family == "compact":
        val = np.atleast_1d(compact_jacobi_kernel(a.alpha, a.beta, a.t, a.r0, rs))
        err = np.maximum(1e-13, 1e-12 * np.abs(val))
    else:
        val = np.atleast_1d(hyperbolic_jacobi_kernel(a.alpha, a.beta, a.t, a.r0, rs))
        k, kerr = hyperbolic_reduced_kernel(a.alpha, a.beta, a.t, a.r0, rs, with_error=True)
        err = np.atleast_1d(np.abs(kerr) * hyperbolic_weight(a.alpha, a.beta, rs))
    payload = {"manifest": man, "family": a.family,
               "params": dict(alpha=a.alpha, beta=a.beta, t=a.t, r0=a.r0),
               "x": [float(x) for x in rs], "value": [float(v) for v in val],
               "abs_error_estimate": [float(e) for e in np.broadcast_to(err, val.shape)]}
    _finish(a, payload, ["x", "value", "abs_error_estimate"],
            [[float(x), float(v), float(e)] for x, v, e in zip(rs, val, np.broadcast_to(err, val.shape))],
            started)


def _sim_config(a, br: BridgeSpec) -> SimConfig:
    dt = a.dt if a.dt is not None else br.t / 200
    binw = a.bin if a.bin is not None else (0.3 if br.r == 0 else 0.02)
    return SimConfig(dt=dt, n_paths=a.paths, seed=a.seed, bin_halfwidth=binw, threads=a.threads)


def _cmd_simulate(a, man, started):
    geom = _geometry(a)
    br = _bridge(a, geom)
    cfg = _sim_config(a, br)
    sample = simulate_winding_pair(geom, br.r0, br.t, cfg, r_target=br.r)
    e = estimate_index_distribution(geom, br, cfg, -a.k, a.k, method=a.method, sample=sample)
    payload = {"manifest": man, "geometry": e.geometry, "params": e.params,
               "k": [int(x) for x in e.k], "probs": [float(x) for x in e.probs],
               "stderr": [float(x) for x in e.stderr],
               "ci_lo": [float(x) for x in e.ci_lo], "ci_hi": [float(x) for x in e.ci_hi],
               "n_accepted": e.n_accepted, "n_paths": e.n_paths, "method": e.method,
               "norm_defect": 0.0, "tail_constant": None}
    if a.lam is not None:
        est, se = estimate_conditional_cf(geom, a.lam, br.r0, br.r, br.t, cfg, sample=sample)
        payload["cf"] = {"lambda": a.lam, "re": est.real, "im": est.imag, "stderr": se}
    _finish(a, payload, ["k", "prob", "ci_lo", "ci_hi"], _dist_rows(e.k, e.probs, e.ci_lo, e.ci_hi),
            started)


def _cmd_compare(a, man, started):
    geom = _geometry(a)
    br = _bridge(a, geom)
    cfg = _sim_config(a, br)
    kk = a.k
    # the analytic window must be wide enough to close the normalization
    wide = max(kk, 40)
    if geom.kind == "sl2" and br.r0 == 0 and br.r == 0 and br.theta == 0:
        ref = sl2_loop_index(br.t, geom.mu, -wide, wide)
    elif geom.kind == "plane" and br.is_loop:
        ref = planar_index_distribution(br.r0 ** 2 / br.t, -wide, wide)
    else:
        ref = index_distribution(geom, br, -wide, wide)
    sample = simulate_winding_pair(geom, br.r0, br.t, cfg, r_target=br.r)
    emp = estimate_index_distribution(geom, br, cfg, -wide, wide, method=a.method, sample=sample)
    rows = []
    for k in range(-kk, kk + 1):
        pa, pe = ref.prob(k), emp.prob(k)
        se = float(emp.stderr[k + wide])
        z = (pe - pa) / se if se > 0 else (0.0 if pe == pa else math.inf)
        rows.append({"quantity": f"P(k={k})", "analytic": pa, "empirical": pe, "stderr": se, "z": z})
    if a.lam is not None:
        ca = float(conditional_cf(geom, a.lam, br.r0, br.r, br.t))
        est, se = estimate_conditional_cf(geom, a.lam, br.r0, br.r, br.t, cfg, sample=sample)
        rows.append({"quantity": f"cf(lambda={a.lam:g})", "analytic": ca, "empirical": est.real,
                     "stderr": se, "z": (est.real - ca) / se if se > 0 else 0.0})
    ok = all(abs(r["z"]) <= 3 for r in rows)
    payload = {"manifest": man, "geometry": geom.label(), "params": emp.params,
               "n_accepted": emp.n_accepted, "rows": rows, "all_within_3_sigma": ok}
    table = [[r["quantity"], r["analytic"], r["empirical"], r["stderr"], r["z"]] for r in rows]
    _finish(a, payload, ["quantity", "analytic", "empirical", "stderr", "z"], table, started)


def _cmd_limits(a, man, started):
    geom = _geometry(a)
    if geom.dispatch.kind == "ch1":
        if a.r0 is None or a.r is None:
            raise UsageError("ch1 limits need --r0 and --r (the long-time index law)")
        ks = np.arange(-a.k, a.k + 1)
        p = ch1_longtime_index(a.r0, a.r, a.theta % TWO_PI, ks)
        payload = {"manifest": man, "geometry": geom.label(),
                   "params": dict(r0=a.r0, r=a.r, theta=a.theta % TWO_PI),
                   "k": [int(x) for x in ks], "probs": [float(x) for x in p],
                   "norm_defect": None, "tail_constant": None}
        _finish(a, payload, ["k", "prob", "ci_lo", "ci_hi"], _dist_rows(ks, p), started)
        return
    lams = (np.array([a.lam]) if a.lam is not None else
            _grid(a.lam_grid) if a.lam_grid else np.linspace(0, 3, 7))
    vals = np.atleast_1d(limit_cf(geom, lams))
    payload = {"manifest": man, "geometry": geom.label(), "params": dict(n=geom.n, mu=geom.mu),
               "x": [float(x) for x in lams], "value": [float(v) for v in vals],
               "abs_error_estimate": [0.0] * len(vals)}
    _finish(a, payload, ["x", "value", "abs_error_estimate"],
            [[float(x), float(v), 0.0] for x, v in zip(lams, vals)], started)


def _read_manifest(path: str) -> dict:
    with open(path) as fh:
        head = fh.read()
    if head.startswith("# manifest: "):
        return json.loads(head.splitlines()[0][len("# manifest: "):])
    return json.loads(head)["manifest"]


_COMMANDS = {"dist": _cmd_dist, "cf": _cmd_cf, "density": _cmd_density, "kernel": _cmd_kernel,
             "simulate": _cmd_simulate, "compare": _cmd_compare, "limits": _cmd_limits}


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if a.command == "replay":
            try:
                man = _read_manifest(a.file)
            except (OSError, ValueError, KeyError) as e:
                raise UsageError(f"no manifest readable in {a.file}: {e}")
            argv2 = list(man["argv"])
            if a.out is not None:
                if "--out" in argv2:
                    argv2[argv2.index("--out") + 1] = a.out
                else:
                    argv2 += ["--out", a.out]
            return run(argv2)
        _check_out(getattr(a, "out", None))
        man = _manifest(a.command, argv, a)
        started = time.time()
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda m, *args, **kw: print(f"loopwind: warning: {m}", file=sys.stderr)
            _COMMANDS[a.command](a, man, started)
        return 0
    except (UsageError, DomainError, UnsupportedGeometryError) as e:
        print(f"loopwind: error: {e}", file=sys.stderr)
        return 2
    except (NumericError, SimulationError) as e:
        print(f"loopwind: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except LoopwindError as e:  # pragma: no cover
        print(f"loopwind: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
