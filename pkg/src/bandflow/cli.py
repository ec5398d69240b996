"""Command-line surface: simulate, band-report, verify, match.

Configs are JSON; trajectories are CSV with one header row and full
double precision; reports are JSON with sorted keys.  Identical configs
produce byte-identical outputs (no timestamps or environment data are
written), and every number in a report is reproducible by direct library
calls.

Exit codes: 0 success, 1 failed verification, 2 invalid configuration,
3 integration halt.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import hill
from .benenti import IntegralValues, SeparableProfile, integrals_at, product_polynomial
from .checks import run_default_suite
from .defaults import DEFAULTS
from .errors import BandflowError, CollisionError, StepSizeError
from .kdv import (SpectralPolynomial, kdv_trace, spectral_from_neumann)
from .poly import RealPolynomial
from .separation import SeparationState, integrate, trace_series
from .systems import (NeumannSpec, CartesianState, cartesian_separation_samples,
                      equiv_metric_profile, integrate_cartesian, kdv_profile,
                      match_profiles, neumann_profile, normalize_to_kdv,
                      reduced_integrals)

__all__ = ["main"]

PROFILE_REFS = {
    "simulate": ["separated-ode", "conserved-integrals"],
    "band-report": ["band-structure", "root-interlacing", "spectral-classification"],
    "match": ["shared-solutions", "normal-form"],
    "verify": ["invariant-suite"],
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    system: str
    a: np.ndarray | None
    N: int
    c: np.ndarray | None
    m0: float
    initial: dict
    x_span: tuple
    dx: float
    tolerances: dict
    lambda_grid: dict
    edge_tol: float
    seed: int
    h_perturbation: float
    match: dict | None
    raw: dict = field(repr=False, default_factory=dict)


def load_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    system = raw.get("system", "neumann")
    if system not in ("neumann", "ellipsoid-equiv", "kdv"):
        raise ConfigError(f"unknown system {system!r}")
    a = None
    c = None
    m0 = float(raw.get("m0", 1.0))
    if system in ("neumann", "ellipsoid-equiv"):
        if "a" not in raw:
            raise ConfigError(f"system {system!r} requires parameters 'a'")
        a = np.asarray(raw["a"], dtype=float)
        if a.ndim != 1 or len(a) < 2 or a[0] <= 0 or np.any(np.diff(a) <= 0):
            raise ConfigError("'a' must be strictly increasing and positive")
        N = len(a) - 1
    else:
        if "c" not in raw:
            raise ConfigError("system 'kdv' requires coefficients 'c' (c_2..c_{2N+1})")
        c = np.asarray(raw["c"], dtype=float)
        if c.ndim != 1 or len(c) % 2 != 0 or len(c) == 0:
            raise ConfigError("'c' must list c_2..c_{2N+1} (even length)")
        if m0 == 0.0:
            raise ConfigError("'m0' must be nonzero")
        N = len(c) // 2

    initial = raw.get("initial", {})
    has_q = "q" in initial
    has_X = "X" in initial
    if has_q == has_X:
        raise ConfigError("initial data must supply exactly one of 'q' or 'X'/'V'")
    if has_q:
        q = np.asarray(initial["q"], dtype=float)
        if q.size != N:
            raise ConfigError(f"'initial.q' must have length {N}")
        if "sigma" not in initial:
            raise ConfigError("'initial.sigma' required with 'initial.q'")
        sigma = np.asarray(initial["sigma"], dtype=float)
        if sigma.size != N or not np.all(np.abs(sigma) == 1):
            raise ConfigError("'initial.sigma' must be +-1 entries of length N")
        if system == "kdv":
            if "H" in initial or "p" in initial:
                raise ConfigError("for system 'kdv' the integrals come from 'c'")
        elif ("H" in initial) == ("p" in initial):
            raise ConfigError("supply exactly one of 'initial.H' or 'initial.p'")
    else:
        if system != "neumann":
            raise ConfigError("Cartesian initial data requires system 'neumann'")
        if "V" not in initial:
            raise ConfigError("'initial.V' required with 'initial.X'")
        X = np.asarray(initial["X"], dtype=float)
        V = np.asarray(initial["V"], dtype=float)
        if X.size != N + 1 or V.size != N + 1:
            raise ConfigError(f"'initial.X'/'initial.V' must have length {N + 1}")

    x_span = tuple(raw.get("x_span", (0.0, 20.0)))
    if len(x_span) != 2 or not x_span[1] > x_span[0]:
        raise ConfigError("'x_span' must be an increasing pair")
    dx = float(raw.get("dx", DEFAULTS["trajectory_dx"]))
    if dx <= 0:
        raise ConfigError("'dx' must be positive")
    tolerances = {"rtol": DEFAULTS["ode_rtol"], "atol": DEFAULTS["ode_atol"]}
    tolerances.update(raw.get("tolerances", {}))
    if any(v <= 0 for v in tolerances.values()):
        raise ConfigError("tolerances must be positive")
    lambda_grid = {"count": 200}
    lambda_grid.update(raw.get("lambda_grid", {}))
    if lambda_grid["count"] < 0:
        raise ConfigError("'lambda_grid.count' must be nonnegative")
    edge_tol = float(raw.get("edge_tol", DEFAULTS["edge_tol"]))
    if edge_tol <= 0:
        raise ConfigError("'edge_tol' must be positive")
    return RunConfig(system, a, N, c, m0, initial, x_span, dx, tolerances,
                     lambda_grid, edge_tol, int(raw.get("seed", 0)),
                     float(raw.get("h_perturbation", 0.0)),
                     raw.get("match"), raw)


def build_profile(cfg: RunConfig) -> SeparableProfile:
    if cfg.system == "neumann":
        return neumann_profile(NeumannSpec(cfg.a))
    if cfg.system == "ellipsoid-equiv":
        return equiv_metric_profile(NeumannSpec(cfg.a))
    return kdv_profile(cfg.c[: cfg.N], cfg.m0, cfg.N)


def initial_state(cfg: RunConfig, profile: SeparableProfile) -> SeparationState:
    init = cfg.initial
    if "q" not in init:
        raise ConfigError("separated initial data required here")
    q = np.asarray(init["q"], dtype=float)
    sigma = np.asarray(init["sigma"], dtype=float)
    if cfg.system == "kdv":
        H = IntegralValues(-np.asarray(cfg.c[cfg.N:], dtype=float) / cfg.m0)
    elif "H" in init:
        H = IntegralValues(np.asarray(init["H"], dtype=float))
    else:
        H = integrals_at(profile, q, np.asarray(init["p"], dtype=float))
    return SeparationState(q, sigma, H)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(path, header, columns):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        M = len(columns[0])
        for k in range(M):
            fh.write(",".join(_fmt(col[k]) for col in columns) + "\n")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _poly_coeffs(p: RealPolynomial):
    return [float(v) for v in p.coeffs]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out_dir: str) -> int:
    profile = build_profile(cfg)
    if "X" in cfg.initial:
        from .systems import cartesian_integral_series

        spec = NeumannSpec(cfg.a)
        X = np.asarray(cfg.initial["X"], dtype=float)
        V = np.asarray(cfg.initial["V"], dtype=float)
        state = CartesianState(X, V)
        ct = integrate_cartesian(spec, state, cfg.x_span, cfg.dx)
        qs, _ = cartesian_separation_samples(spec, ct)
        x = ct.x
        Hs, keep = cartesian_integral_series(spec, profile, ct)
        H0 = Hs[keep][0]
        drift = np.abs(Hs - H0[None, :]).T
        H_meta = [float(v) for v in H0]
        brackets = None
    else:
        state = initial_state(cfg, profile)
        traj = integrate(profile, state, cfg.x_span, cfg.dx,
                         rtol=cfg.tolerances["rtol"], atol=cfg.tolerances["atol"])
        x, qs = traj.x, traj.q
        drift = _roundtrip_drift_samples(traj)
        H_meta = [float(v) for v in state.H.H]
        brackets = traj.brackets
    u = -2.0 * np.sum(qs, axis=0)
    header = ["x"] + [f"q{i + 1}" for i in range(cfg.N)] + ["u"] \
        + [f"H{k}_drift" for k in range(cfg.N)]
    cols = [x] + [qs[i] for i in range(cfg.N)] + [u] + [drift[k] for k in range(cfg.N)]
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "trajectory.csv")
    write_csv(csv_path, header, cols)
    meta = {
        "config": cfg.raw,
        "profile": profile.label,
        "H": H_meta,
        "brackets": [[float(b[0]), float(b[1])] for b in brackets] if brackets else None,
        "samples": int(len(x)),
        "paper_refs": PROFILE_REFS["simulate"],
    }
    write_json(os.path.join(out_dir, "run.json"), meta)
    print(f"wrote {csv_path} ({len(x)} samples)")
    return 0


def _chart_momenta(spec, profile, q, qd, qs):
    from .separation import _pairwise_prod
    p = np.empty(len(q))
    for i in range(len(q)):
        p[i] = qd[i] * _pairwise_prod(qs, i) / profile.f(q[i])
    return p


def _roundtrip_drift_samples(traj):
    """Per-sample |H(x) - H| with momenta recovered from the integral values."""
    from .benenti import rhs_polynomial
    from .poly import stackel_solve_batch

    N, M = traj.q.shape
    R = rhs_polynomial(traj.profile, traj.H)
    fv = np.empty((N, M))
    Uv = np.empty((N, M))
    Rv = np.empty((N, M))
    for i in range(N):
        fv[i] = traj.profile.f(traj.q[i])
        Uv[i] = traj.profile.U(traj.q[i])
        Rv[i] = R(traj.q[i])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(2.0 * Rv / fv, 0.0)
        rhs = 0.5 * fv * ratio + Uv
    Hs = stackel_solve_batch(traj.q.T, rhs.T)
    return np.abs(Hs - traj.H.H[None, :]).T


def _neumann_reduction(cfg: RunConfig):
    spec = NeumannSpec(cfg.a)
    profile = neumann_profile(spec)
    if "X" in cfg.initial:
        X = np.asarray(cfg.initial["X"], dtype=float)
        V = np.asarray(cfg.initial["V"], dtype=float)
        ct = integrate_cartesian(spec, CartesianState(X, V), (0.0, 2 * cfg.dx), cfg.dx)
        qs, qds = cartesian_separation_samples(spec, ct)
        q0 = qs[:, 0]
        p0 = _chart_momenta(spec, profile, q0, qds[:, 0], q0)
        H_full = integrals_at(profile, q0, p0)
        sigma = np.sign(p0 + (p0 == 0))
    else:
        st = initial_state(cfg, profile)
        q0, sigma, H_full = st.q, st.sigma, st.H
    H_red = reduced_integrals(spec, H_full)
    return spec, profile, q0, sigma, H_full, H_red


def cmd_band_report(cfg: RunConfig, out_dir: str, threads: int) -> int:
    if cfg.system != "neumann":
        raise ConfigError("band-report requires a sphere-system config")
    spec, profile, q0, sigma, H_full, H_red = _neumann_reduction(cfg)
    Cspec = spectral_from_neumann(spec, H_red)
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "band_report.json")
    report = {
        "spectral_coeffs": _poly_coeffs(Cspec.C),
        "paper_refs": PROFILE_REFS["band-report"],
        "edge_tol": cfg.edge_tol,
    }
    if not Cspec.all_real:
        report["status"] = "not-neumann-compatible"
        report["complex_root_count"] = int(Cspec.roots.complex_count)
        report["bands"] = None
        write_json(report_path, report)
        print(f"wrote {report_path} (status: not-neumann-compatible)")
        return 0

    P = product_polynomial(profile, H_full)
    norm = normalize_to_kdv(P.num)
    C = SpectralPolynomial.from_poly(norm.C)
    bands = hill.band_structure(C)
    report.update({
        "status": "ok",
        "normalization": {"scale": norm.scale, "shift": norm.shift,
                          "C": _poly_coeffs(norm.C),
                          "H": [float(v) for v in norm.H.H]},
        "roots": [float(v) for v in C.roots.values],
        "multiplicities": [int(m) for m in C.roots.multiplicities],
        "bands": [[b[0], b[1] if np.isfinite(b[1]) else None] for b in bands.bands],
    })

    count = int(cfg.lambda_grid["count"])
    if count > 0:
        e = C.roots.expanded()
        lo = float(cfg.lambda_grid.get("lo", e[0] - 1.0))
        hi = float(cfg.lambda_grid.get("hi", e[-1] + 2.0))
        lams = np.linspace(lo, hi, count)
        st = SeparationState(q0 - norm.shift, sigma, norm.H)
        traj = integrate(norm.profile, st, cfg.x_span, cfg.dx,
                         rtol=cfg.tolerances["rtol"], atol=cfg.tolerances["atol"])
        trace = kdv_trace(traj, 1.0, C)
        if cfg.N == 1:
            cls = hill.classify_spectrum(trace, lams, cfg.edge_tol)
            disc = [float(d) for d in cls.discriminants]
        else:
            cls = _classify_growth_parallel(trace, lams, cfg.edge_tol, threads)
            disc = None
        report["classification"] = [
            {"lambda": float(l), "status": s, "predicted": p}
            for l, s, p in zip(lams, cls.status, cls.predicted)]
        if disc is not None:
            report["discriminants"] = disc
        report["agreement"] = float(cls.agreement)
    write_json(report_path, report)
    print(f"wrote {report_path} (agreement: {report.get('agreement', 'n/a')})")
    return 0


def _classify_growth_parallel(trace, lams, edge_tol, threads):
    roots = trace.C.roots.expanded()
    bands = hill.band_structure(trace.C)
    predicted = ["in" if bands.membership(l) else "out" for l in lams]

    def one(lam):
        if np.min(np.abs(roots - lam)) <= edge_tol:
            return "edge-indeterminate"
        est = hill.growth_exponent(trace, float(lam))
        return "in" if est.in_band else "out"

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        status = list(pool.map(one, lams))
    pairs = [(s, p) for s, p in zip(status, predicted) if s != "edge-indeterminate"]
    agree = (sum(1 for s, p in pairs if s == p) / len(pairs)) if pairs else 1.0
    return hill.SpectrumClassification(np.asarray(lams), status, predicted,
                                       None, agree)


def cmd_verify(cfg: RunConfig | None, out_dir: str) -> int:
    seed = cfg.seed if cfg else 0
    h_pert = cfg.h_perturbation if cfg else 0.0
    results = run_default_suite(seed=seed, h_perturbation=h_pert)
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "checks": [r.as_dict() for r in results],
        "passed": int(sum(r.passed for r in results)),
        "total": len(results),
        "paper_refs": PROFILE_REFS["verify"],
    }
    write_json(os.path.join(out_dir, "verify.json"), payload)
    failed = [r for r in results if not r.passed]
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.name} measured={r.measured:.3e} budget={r.budget:.1e}")
    if failed:
        print(f"{len(failed)} invariant(s) failed: "
              + ", ".join(r.name for r in failed))
        return 1
    print(f"all {len(results)} invariants passed")
    return 0


def _profile_from_spec(d: dict):
    system = d.get("system")
    if system == "neumann":
        return neumann_profile(NeumannSpec(np.asarray(d["a"], dtype=float)))
    if system == "ellipsoid-equiv":
        return equiv_metric_profile(NeumannSpec(np.asarray(d["a"], dtype=float)))
    if system == "kdv":
        c = np.asarray(d["c"], dtype=float)
        N = int(d.get("N", len(c)))
        return kdv_profile(c[:N], float(d.get("m0", 1.0)), N)
    raise ConfigError(f"unknown system in match spec: {system!r}")


def cmd_match(cfg: RunConfig, out_dir: str) -> int:
    if not cfg.match:
        raise ConfigError("match command requires a 'match' section")
    src = cfg.match.get("source")
    tgt = cfg.match.get("target")
    if not src or not tgt:
        raise ConfigError("'match' must contain 'source' and 'target'")
    p1 = _profile_from_spec(src)
    H1 = IntegralValues(np.asarray(src["H"], dtype=float))
    if len(H1) != p1.N:
        raise ConfigError("source H has wrong length")
    P = product_polynomial(p1, H1)
    report = {
        "source": p1.label,
        "product": _poly_coeffs(P.num) if P.is_polynomial else None,
        "paper_refs": PROFILE_REFS["match"],
    }
    if tgt.get("system") == "kdv" and "c" not in tgt:
        if not P.is_polynomial:
            raise ConfigError("source product is not polynomial; cannot normalise")
        norm = normalize_to_kdv(P.num)
        report["normalization"] = {
            "scale": norm.scale, "shift": norm.shift,
            "C": _poly_coeffs(norm.C), "H": [float(v) for v in norm.H.H],
            "target": norm.profile.label,
        }
        report["matched"] = True
    else:
        p2 = _profile_from_spec(tgt)
        if p2.N != p1.N:
            raise ConfigError("profiles have different dimension")
        res = match_profiles(p1, H1, p2)
        report["matched"] = bool(res.matched)
        report["target"] = p2.label
        if res.matched:
            report["H2"] = [float(v) for v in res.H.H]
        else:
            report["remainder_norm"] = float(res.remainder_norm)
            report["degree_excess"] = int(res.degree_excess)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "match_report.json")
    write_json(path, report)
    print(f"wrote {path} (matched: {report['matched']})")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bandflow",
        description="separable sphere systems, polynomial reductions, band spectra")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_cfg in (("simulate", True), ("band-report", True),
                            ("verify", False), ("match", True)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_cfg,
                       help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("BANDFLOW_THREADS", "1")),
                       help="worker threads for grid classification")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config) if args.config else None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out)
        if args.command == "band-report":
            return cmd_band_report(cfg, args.out, args.threads)
        if args.command == "verify":
            return cmd_verify(cfg, args.out)
        if args.command == "match":
            return cmd_match(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CollisionError, StepSizeError) as exc:
        print(f"integration halted: {exc}", file=sys.stderr)
        return 3
    return 2


if __name__ == "__main__":
    sys.exit(main())
