"""Spectral layer: explicit eigenfunctions, bands, Floquet and growth verifiers.

For a trace (w, u, m0, C) the second-order equation under study is

    psi'' + (lambda - u)/(2 m0) psi = 0,

which for the centred m0 = 1 frame is the classical form
psi'' + (1/2)(lambda - u) psi = 0.  Wherever w(x; lambda) keeps one sign,

    psi_1 = sqrt(|w|) e^{ k phi~ },   psi_2 = sign(w) sqrt(|w|) e^{ -k phi~ },

with k = sqrt(-2 C(lambda)/m0) and phi~ the primitive of 1/(2|w|), solve
the equation exactly; for C(lambda) > 0 the exponent is imaginary and the
real pair sqrt(|w|) cos(k phi~), sqrt(|w|) sin(k phi~) is returned
instead.  At a root of C both formulas collapse onto sqrt(|w|).

Spectrum semantics are the bounded-solution ones: lambda belongs to the
spectrum iff a nonzero bounded solution exists, which happens exactly on
{C >= 0}.  Two independent numerical verifiers are provided: the Floquet
discriminant of the one-period monodromy matrix (periodic traces), and a
renormalised growth-exponent estimator (any trace).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp
from scipy.interpolate import CubicSpline

from .defaults import DEFAULTS
from .errors import DomainError, PeriodDetectionError
from .kdv import KdvTrace, SpectralPolynomial
from .poly import RootList

__all__ = [
    "BandStructure",
    "HillSolution",
    "band_structure",
    "phi_primitive",
    "explicit_pair",
    "hill_residual",
    "n1_period",
    "floquet_discriminant",
    "floquet_grid",
    "growth_exponent",
    "growth_prediction_below_spectrum",
    "GrowthEstimate",
    "classify_spectrum",
    "SpectrumClassification",
]


@dataclass(frozen=True)
class BandStructure:
    """Closed intervals [r_1,r_2], [r_3,r_4], ..., plus [r_{2N+1}, inf)."""

    roots: RootList
    bands: tuple          # ((lo, hi), ..., (r_last, inf))

    def __contains__(self, lam: float) -> bool:
        return self.membership(lam)

    def membership(self, lam: float) -> bool:
        for lo, hi in self.bands:
            if lo <= lam <= hi:
                return True
        return False


def band_structure(C: SpectralPolynomial) -> BandStructure:
    """Bands from the roots; degenerate double roots give zero-length bands.

    The band set is the closure of {C > 0}: with expanded roots
    e_1 <= ... <= e_{2N+1} the intervals are [e_1, e_2], [e_3, e_4], ...,
    [e_{2N+1}, inf).
    """
    if not C.all_real:
        raise DomainError("spectral polynomial has non-real roots")
    e = C.roots.expanded()
    bands = []
    for i in range(0, len(e) - 1, 2):
        bands.append((float(e[i]), float(e[i + 1])))
    bands.append((float(e[-1]), np.inf))
    return BandStructure(C.roots, tuple(bands))


@dataclass(frozen=True)
class HillSolution:
    """Sampled solution of the second-order equation at one lambda."""

    x: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    lam: float
    construction: str      # "explicit" | "numeric-ivp"
    nodes: tuple = ()      # zeros of psi (band-edge solutions only)


# ---------------------------------------------------------------------------
# explicit construction
# ---------------------------------------------------------------------------

def _slice_indices(trace: KdvTrace, interval):
    if interval is None:
        return 0, len(trace.x)
    xa, xb = interval
    i0 = int(np.searchsorted(trace.x, xa - 1e-12))
    i1 = int(np.searchsorted(trace.x, xb + 1e-12))
    if i1 - i0 < 9:
        raise ValueError("interval contains too few samples")
    return i0, i1


def phi_primitive(trace: KdvTrace, lam: float, interval=None) -> np.ndarray:
    """Primitive of 1/(2 w(x; lam)) on the interval, zero at its left end.

    Requires w to keep one sign there (it does on bands and beyond the
    last root); composite Simpson on the uniform grid.
    """
    i0, i1 = _slice_indices(trace, interval)
    w = trace.w_at(lam)[i0:i1]
    if np.min(w) <= 0.0 <= np.max(w):
        raise DomainError(f"w(x; {lam}) changes sign on the interval")
    return cumulative_simpson(1.0 / (2.0 * w), dx=trace.dx, initial=0.0)


def _centered_u(trace: KdvTrace) -> np.ndarray:
    c1 = trace.C.C.coefficient(trace.C.C.degree - 1)
    return trace.u - c1


def sl_coefficient(trace: KdvTrace, lam: float) -> np.ndarray:
    """Coefficient (lambda - u)/(2 m0) of psi in the Hill equation."""
    return (lam - _centered_u(trace)) / (2.0 * trace.m0)


def explicit_pair(trace: KdvTrace, lam: float, m: float | None = None,
                  interval=None, edge_tol: float = 1e-12) -> list[HillSolution]:
    """Eigenfunctions built from w and phi; one solution at roots of C.

    For C(lam)/m < 0 the pair is exponential with product psi1*psi2 = w;
    for C(lam)/m > 0 the bounded real pair (cos, sin) is returned and
    satisfies psi1^2 + psi2^2 = |w| instead.
    """
    if m is None:
        m = trace.m0
    i0, i1 = _slice_indices(trace, interval)
    x = trace.x[i0:i1]
    w = trace.w_at(lam)[i0:i1]
    if np.min(w) <= 0.0 <= np.max(w):
        raise DomainError(f"w(x; {lam}) changes sign on the interval")
    s = 1.0 if w[0] > 0 else -1.0
    wt = s * w                                     # |w|, positive
    phi_t = cumulative_simpson(1.0 / (2.0 * wt), dx=trace.dx, initial=0.0)
    wt_x = np.gradient(wt, trace.dx, edge_order=2)
    sq = np.sqrt(wt)
    Cval = float(trace.C(lam))
    k2 = -2.0 * Cval / m

    scale = max(1.0, trace.C.C.norm_inf())
    if abs(Cval) <= edge_tol * scale:
        return [_edge_solution(x, wt, wt_x, sq, trace.dx, lam)]

    if k2 > 0.0:                                   # C/m < 0: exponential pair
        k = np.sqrt(k2)
        e_plus = np.exp(k * phi_t)
        e_minus = np.exp(-k * phi_t)
        psi1 = sq * e_plus
        psi2 = s * sq * e_minus
        psi1_p = (wt_x + k) / (2.0 * sq) * e_plus
        psi2_p = s * (wt_x - k) / (2.0 * sq) * e_minus
        return [HillSolution(x, psi1, psi1_p, lam, "explicit"),
                HillSolution(x, psi2, psi2_p, lam, "explicit")]

    om = np.sqrt(-k2)                              # C/m > 0: trigonometric pair
    cosp, sinp = np.cos(om * phi_t), np.sin(om * phi_t)
    psi1 = sq * cosp
    psi2 = sq * sinp
    psi1_p = (wt_x * cosp - om * sinp) / (2.0 * sq)
    psi2_p = (wt_x * sinp + om * cosp) / (2.0 * sq)
    return [HillSolution(x, psi1, psi1_p, lam, "explicit"),
            HillSolution(x, psi2, psi2_p, lam, "explicit")]


def _edge_solution(x, wt, wt_x, sq, dx, lam) -> HillSolution:
    """Band-edge solution: sqrt(|w|) continued through its double zeros.

    Where w touches zero the magnitude sqrt(|w|) has a corner; the
    classical solution crosses zero linearly there, so the sign flips at
    each node.  Node positions come from a three-point parabola fit of
    |w| around its near-zero minima.
    """
    node_tol = 1e3 * dx * dx * float(np.max(wt))
    interior = np.arange(1, len(wt) - 1)
    is_min = (wt[interior] <= wt[interior - 1]) & (wt[interior] <= wt[interior + 1])
    small = wt[interior] < node_tol
    nodes = []
    for k in interior[is_min & small]:
        denom = wt[k - 1] - 2.0 * wt[k] + wt[k + 1]
        off = 0.5 * (wt[k - 1] - wt[k + 1]) / denom if denom != 0 else 0.0
        nodes.append(float(x[k] + off * dx))
    S = np.ones(len(x))
    for xn in nodes:
        S[x > xn] *= -1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        psi_p = np.where(sq > 0, S * wt_x / (2.0 * np.where(sq > 0, sq, 1.0)), 0.0)
    return HillSolution(x, S * sq, psi_p, lam, "explicit", nodes=tuple(nodes))


def hill_residual(sol: HillSolution, trace: KdvTrace, lam: float | None = None,
                  node_collar: int = 0) -> float:
    """Max |psi'' + (lambda - u)/(2 m0) psi| / (1 + max|psi|), interior samples.

    ``node_collar`` > 0 skips that many samples on each side of the
    solution's recorded nodes; used for band-edge solutions, whose nodes
    sit between grid points so the sampled sign flip carries an O(dx)
    placement uncertainty that the second-difference stencil would
    amplify.
    """
    from .separation import fd_second_derivative

    lam = sol.lam if lam is None else lam
    i0 = int(round((sol.x[0] - trace.x[0]) / trace.dx))
    coeff = sl_coefficient(trace, lam)[i0:i0 + len(sol.x)]
    psi_xx = fd_second_derivative(sol.psi, trace.dx)
    res = np.abs(psi_xx + coeff[2:-2] * sol.psi[2:-2])
    if node_collar > 0 and sol.nodes:
        xi = sol.x[2:-2]
        keep = np.ones(len(xi), dtype=bool)
        for xn in sol.nodes:
            keep &= np.abs(xi - xn) > node_collar * trace.dx
        res = res[keep]
    return float(np.max(res) / (1.0 + np.max(np.abs(sol.psi))))


# ---------------------------------------------------------------------------
# periodic verifier
# ---------------------------------------------------------------------------

def n1_period(C: SpectralPolynomial, m0: float = 1.0, nodes: int = 96) -> float:
    """Oscillation period of the single coordinate in its interval.

    T = 2 int_lo^hi dq / sqrt(2 P(q)) with P = -C/m0, computed with the
    angle substitution so the end-point square roots cancel; Gauss
    quadrature on the smooth integrand.
    """
    if C.N != 1:
        raise PeriodDetectionError("closed-form period only for N = 1")
    if not C.all_real:
        raise PeriodDetectionError("non-real spectral roots")
    e = C.roots.expanded()
    lo, hi = float(e[1]), float(e[2])
    if hi - lo <= DEFAULTS["root_cluster_tol"]:
        raise PeriodDetectionError("degenerate interval: equilibrium trace")
    P = (-1.0 / m0) * C.C
    G = P.deflate(lo).deflate(hi) * (-1.0)
    mid, amp = 0.5 * (lo + hi), 0.5 * (hi - lo)
    t_nodes, weights = np.polynomial.legendre.leggauss(nodes)
    theta = 0.5 * np.pi * t_nodes
    q = mid + amp * np.sin(theta)
    vals = 1.0 / np.sqrt(2.0 * G(q))
    return float(2.0 * (0.5 * np.pi) * np.sum(weights * vals))


def _u_callable(trace: KdvTrace, periodic_T: float | None):
    """Cubic-spline interpolant of the centred potential, optionally tiled."""
    u = _centered_u(trace)
    if periodic_T is None:
        return CubicSpline(trace.x, u), trace.x[0], trace.x[-1]
    T = periodic_T
    if trace.x[-1] - trace.x[0] < T:
        raise PeriodDetectionError("trace is shorter than one period")
    base = CubicSpline(trace.x, u)
    m = int(np.floor(T / trace.dx))
    xs = trace.x[0] + np.linspace(0.0, T, m + 1)
    vals = base(xs)
    vals[-1] = vals[0]           # enforce exact wrap for the periodic spline
    per = CubicSpline(xs, vals, bc_type="periodic")
    x0 = trace.x[0]

    def u_per(x):
        return per(x0 + np.mod(x - x0, T))

    return u_per, trace.x[0], np.inf


def floquet_grid(trace: KdvTrace, lams, T: float | None = None,
                 rtol=None, atol=None) -> np.ndarray:
    """Discriminants Delta(lambda) = tr M(lambda) for all lambdas at once.

    Integrates the canonical solutions over one period; |Delta| <= 2
    signals bounded (Bloch) solutions.  The lambda systems ride in one
    vectorised IVP so the step control serves the whole grid.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if T is None:
        T = n1_period(trace.C, trace.m0)
    rtol = DEFAULTS["monodromy_rtol"] if rtol is None else rtol
    atol = DEFAULTS["monodromy_atol"] if atol is None else atol
    u_fun, x0, x_hi = _u_callable(trace, periodic_T=T)
    if x0 + T > x_hi:
        raise PeriodDetectionError("trace is shorter than one period")
    L = len(lams)
    inv2m = 1.0 / (2.0 * trace.m0)

    def rhs(x, y):
        Y = y.reshape(4, L)      # rows: psi1, psi1', psi2, psi2'
        uu = u_fun(x)
        coef = (lams - uu) * inv2m
        out = np.empty_like(Y)
        out[0] = Y[1]
        out[1] = -coef * Y[0]
        out[2] = Y[3]
        out[3] = -coef * Y[2]
        return out.ravel()

    y0 = np.zeros((4, L))
    y0[0] = 1.0
    y0[3] = 1.0
    sol = solve_ivp(rhs, (x0, x0 + T), y0.ravel(), rtol=rtol, atol=atol,
                    method="RK45", dense_output=False)
    YT = sol.y[:, -1].reshape(4, L)
    return YT[0] + YT[3]


def floquet_discriminant(trace: KdvTrace, lam: float, T: float | None = None) -> float:
    return float(floquet_grid(trace, [lam], T=T)[0])


# ---------------------------------------------------------------------------
# growth verifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthEstimate:
    exponent: float
    in_band: bool           # flagged: no growth detected
    window: float


def growth_exponent(trace: KdvTrace, lam: float, window: float | None = None,
                    rtol: float = 1e-10) -> GrowthEstimate:
    """Empirical growth exponent of the fundamental solution at lambda.

    Propagates one solution vector with log-norm renormalisation every
    unit of x and least-squares fits the slope of log|Y|; periodic
    (N = 1) potentials are tiled so the window is not capped by the
    trace length.
    """
    if window is None:
        window = DEFAULTS["growth_window"]
    T = None
    if trace.N == 1:
        try:
            T = n1_period(trace.C, trace.m0)
        except PeriodDetectionError:
            T = None
    u_fun, x0, x_hi = _u_callable(trace, periodic_T=T)
    if np.isfinite(x_hi):
        window = min(window, x_hi - x0)
    inv2m = 1.0 / (2.0 * trace.m0)

    def rhs(x, y):
        return [y[1], -(lam - u_fun(x)) * inv2m * y[0]]

    step = DEFAULTS["growth_renorm_dx"]
    n_chunk = max(1, int(round(window / step)))
    y = np.array([1.0, 1.0]) / np.sqrt(2.0)
    logs = np.zeros(n_chunk + 1)
    xs = x0 + step * np.arange(n_chunk + 1)
    acc = 0.0
    for k in range(n_chunk):
        sol = solve_ivp(rhs, (xs[k], xs[k + 1]), y, rtol=rtol, atol=1e-12,
                        method="RK45")
        y = sol.y[:, -1]
        nrm = float(np.linalg.norm(y))
        acc += np.log(nrm)
        logs[k + 1] = acc
        y = y / nrm
    t_rel = xs - x0
    slope = float(np.polyfit(t_rel, logs, 1)[0])
    flag = slope < DEFAULTS["growth_band_threshold"]
    return GrowthEstimate(slope, flag, window)


def growth_prediction_below_spectrum(trace: KdvTrace, lam: float) -> float:
    """sqrt(-2 C(lam)/m0) times the x-average of 1/(2|w|) from the trace.

    Valid below the lowest root, where w is sign-definite; this is the
    exact exponent of the explicit exponential solution.
    """
    Cval = float(trace.C(lam))
    if Cval >= 0.0:
        raise DomainError("prediction applies where C(lambda) < 0")
    w = trace.w_at(lam)
    if np.min(w) <= 0.0 <= np.max(w):
        raise DomainError("w changes sign; closed-form prediction unavailable")
    return float(np.sqrt(-2.0 * Cval / trace.m0) * np.mean(1.0 / (2.0 * np.abs(w))))


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumClassification:
    lams: np.ndarray
    status: list            # "in" | "out" | "edge-indeterminate"
    predicted: list         # band_structure membership, same coding
    discriminants: np.ndarray | None
    agreement: float        # fraction agreeing among determinate points

    def disagreements(self):
        return [(float(l), s, p) for l, s, p in
                zip(self.lams, self.status, self.predicted)
                if s != "edge-indeterminate" and s != p]


def classify_spectrum(trace: KdvTrace, lambda_grid, edge_tol: float | None = None,
                      method: str = "auto") -> SpectrumClassification:
    """Classify each lambda as in/out of spectrum and compare with {C >= 0}.

    Points within edge_tol of a root of C are marked indeterminate.  The
    verifier is the Floquet discriminant for periodic (N = 1) traces and
    the growth exponent otherwise.
    """
    lams = np.atleast_1d(np.asarray(lambda_grid, dtype=float))
    if edge_tol is None:
        edge_tol = DEFAULTS["edge_tol"]
    if lams.size == 0:
        return SpectrumClassification(lams, [], [], None, 1.0)
    bands = band_structure(trace.C)
    roots = trace.C.roots.expanded()
    use_floquet = method == "floquet" or (method == "auto" and trace.N == 1)
    disc = floquet_grid(trace, lams) if use_floquet else None
    status, predicted = [], []
    for i, lam in enumerate(lams):
        predicted.append("in" if bands.membership(lam) else "out")
        if np.min(np.abs(roots - lam)) <= edge_tol:
            status.append("edge-indeterminate")
            continue
        if use_floquet:
            status.append("in" if abs(disc[i]) <= 2.0 else "out")
        else:
            est = growth_exponent(trace, lam)
            status.append("in" if est.in_band else "out")
    pairs = [(s, p) for s, p in zip(status, predicted) if s != "edge-indeterminate"]
    agree = (sum(1 for s, p in pairs if s == p) / len(pairs)) if pairs else 1.0
    return SpectrumClassification(lams, status, predicted, disc, agree)
