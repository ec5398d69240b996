"""Named separable systems, coordinate maps, and the Cartesian oracle.

Systems constructed here:

* the particle on the N-sphere in the diagonal quadratic potential
  (parameters 0 < a_1 < ... < a_{N+1}): metric profile
  f(t) = -4 prod(t - a_j), potential profile U(t) = -t^N + t^{N-1} sum(a);
* the geodesic flow of the ellipsoid sum X_i^2/a_i = 1:
  f(t) = -(4/t) prod(t - a_j), U = 0;
* the geodesic flow of the metric projectively equivalent to the
  ellipsoid's: f(t) = -4 t prod(t - 1/a_s) * prod(1/a_s), U = 0;
* the polynomial reduction family: f = 1,
  U(t) = (1/m0)(t^(2N+1) + sum_{i=2}^{N+1} c_i t^(2N-i+1)).

The Cartesian integrator is an independent oracle for the sphere case:
it never sees the separated formalism, just Newton's equations with a
Lagrange multiplier and per-step projection back to the sphere.  KAPPA
fixes the potential normalisation V = KAPPA * sum a_i X_i^2; its value is
pinned by the oracle-vs-separation agreement test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benenti import IntegralValues, SeparableProfile, product_polynomial
from .defaults import DEFAULTS
from .errors import DomainError, InterlacingError, NormalizationError
from .poly import (RationalFunction, RealPolynomial, as_rational, from_roots,
                   real_roots)

__all__ = [
    "NeumannSpec",
    "CartesianState",
    "CartesianTrajectory",
    "KAPPA",
    "neumann_profile",
    "ellipsoid_profile",
    "equiv_metric_profile",
    "kdv_profile",
    "reduced_integrals",
    "full_integrals",
    "sphero_conical_to_cartesian",
    "cartesian_to_sphero_conical",
    "separation_to_cartesian",
    "integrate_cartesian",
    "cartesian_separation_samples",
    "cartesian_integral_drift",
    "match_profiles",
    "MatchResult",
    "normalize_to_kdv",
    "KdvNormalization",
]

# Potential normalisation of the Cartesian oracle, V = KAPPA * X.A.X.
# Calibrated once by requiring oracle/separation trajectory agreement
# (tests/test_systems.py::test_kappa_calibration); the quadratic-form
# identity sum a_i X_i^2 = sum a_i - sum q_i holds without any 1/2 factor.
KAPPA = DEFAULTS["kappa"]


@dataclass(frozen=True)
class NeumannSpec:
    """Strictly increasing positive parameters a_1 < ... < a_{N+1}."""

    a: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if a.size < 2:
            raise ValueError("need at least two parameters")
        if a[0] <= 0.0 or np.any(np.diff(a) <= 0.0):
            raise ValueError("parameters must satisfy 0 < a_1 < ... < a_{N+1}")
        object.__setattr__(self, "a", a)
        a.setflags(write=False)

    @property
    def N(self) -> int:
        return len(self.a) - 1


@dataclass(frozen=True)
class CartesianState:
    """Point on the unit sphere with a tangent velocity."""

    X: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if abs(X @ X - 1.0) > 1e-10:
            raise DomainError(f"|X|^2 = {X @ X} is not 1")
        if abs(X @ V) > 1e-10:
            raise DomainError(f"X.V = {X @ V} is not 0")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "V", V)
        X.setflags(write=False)
        V.setflags(write=False)


@dataclass(frozen=True)
class CartesianTrajectory:
    x: np.ndarray       # (M,)
    X: np.ndarray       # (N+1, M)
    V: np.ndarray       # (N+1, M)
    kappa: float

    def energy(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        return 0.5 * np.sum(self.V**2, axis=0) + self.kappa * np.sum(a[:, None] * self.X**2, axis=0)


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def neumann_profile(spec: NeumannSpec) -> SeparableProfile:
    """Sphere metric and quadratic potential in sphero-conical coordinates."""
    a = spec.a
    f = from_roots(a, -4.0)
    U = RealPolynomial(np.concatenate([[-1.0, float(np.sum(a))], np.zeros(spec.N - 1)]))
    return SeparableProfile(spec.N, as_rational(f), as_rational(U),
                            label=f"neumann{tuple(round(x, 12) for x in a)}")


def ellipsoid_profile(spec: NeumannSpec) -> SeparableProfile:
    """Ellipsoid metric profile: f(t) = -(4/t) prod(t - a_j), U = 0."""
    f = RationalFunction(from_roots(spec.a, -4.0), RealPolynomial(np.array([1.0, 0.0])))
    return SeparableProfile(spec.N, f, as_rational(0.0),
                            label=f"ellipsoid{tuple(round(x, 12) for x in spec.a)}")


def equiv_metric_profile(spec: NeumannSpec) -> SeparableProfile:
    """Profile of the metric projectively equivalent to the ellipsoid's.

    f(t) = -4 t prod_s(t - 1/a_s) * prod_s(1/a_s), U = 0, in the inverted
    coordinates y = 1/q with parameters 1/a_s.
    """
    abar = 1.0 / spec.a
    scale = -4.0 * float(np.prod(abar))
    f = from_roots(np.concatenate([[0.0], abar]), scale)
    return SeparableProfile(spec.N, as_rational(f), as_rational(0.0),
                            label=f"equiv-ellipsoid{tuple(round(x, 12) for x in spec.a)}")


def kdv_profile(c, m0: float, N: int) -> SeparableProfile:
    """Flat profile with U(t) = (1/m0)(t^(2N+1) + sum_{i=2}^{N+1} c_i t^(2N-i+1)).

    c lists (c_2, ..., c_{N+1}); the coefficient of t^(2N) is zero.
    """
    if m0 == 0.0:
        raise ValueError("m0 must be nonzero")
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.size != N:
        raise ValueError(f"expected {N} coefficients c_2..c_{N + 1}")
    coeffs = np.zeros(2 * N + 2)
    coeffs[0] = 1.0
    for k, ci in enumerate(c):          # c_{k+2} multiplies t^(2N-k-1)
        coeffs[k + 2] = ci
    U = RealPolynomial(coeffs / m0)
    return SeparableProfile(N, as_rational(1.0), as_rational(U), label=f"kdv(m0={m0})")


def reduced_integrals(spec: NeumannSpec, H: IntegralValues) -> IntegralValues:
    """Integral values in the constant-free potential convention (U = -t^N).

    The full sphere potential differs from -t^N by t^(N-1) sum(a), a
    constant on configuration space, so only the leading value shifts:
    H0_red = H0 - sum(a).  The spectral polynomial reads its values in
    this frame.
    """
    out = np.array(H.H, dtype=float)
    out[0] -= float(np.sum(spec.a))
    return IntegralValues(out)


def full_integrals(spec: NeumannSpec, H_red: IntegralValues) -> IntegralValues:
    out = np.array(H_red.H, dtype=float)
    out[0] += float(np.sum(spec.a))
    return IntegralValues(out)


# ---------------------------------------------------------------------------
# coordinate maps
# ---------------------------------------------------------------------------

def sphero_conical_to_cartesian(spec: NeumannSpec, q, eps=None) -> np.ndarray:
    """X_i = eps_i sqrt( prod_j (a_i - q_j) / prod_{j!=i} (a_i - a_j) ).

    Requires the interlacing a_1 <= q_1 <= a_2 <= ... <= q_N <= a_{N+1};
    the output satisfies sum X_i^2 = 1 identically.
    """
    a = spec.a
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if eps is None:
        eps = np.ones(len(a))
    eps = np.asarray(eps, dtype=float)
    slack = 1e-12 * max(1.0, float(np.max(np.abs(a))))
    for i, qi in enumerate(q):
        if not (a[i] - slack <= qi <= a[i + 1] + slack):
            raise InterlacingError(
                f"q_{i} = {qi} violates a_{i} <= q_{i} <= a_{i + 1}")
    X = np.empty(len(a))
    for i, ai in enumerate(a):
        num = np.prod(ai - q)
        den = np.prod([ai - aj for j, aj in enumerate(a) if j != i])
        rad = num / den
        if rad < 0.0:
            if rad < -1e-12:
                raise InterlacingError(f"negative radicand at i={i}: {rad}")
            rad = 0.0
        X[i] = eps[i] * np.sqrt(rad)
    return X


def cartesian_to_sphero_conical(spec: NeumannSpec, X) -> np.ndarray:
    """Sorted roots of sum_j X_j^2 prod_{k!=j}(t - a_k); inverse of the map above."""
    a = spec.a
    X = np.asarray(X, dtype=float)
    n = len(a)
    coeffs = np.zeros(n)
    for j in range(n):
        pj = from_roots(np.delete(a, j), 1.0).coeffs
        coeffs = coeffs + X[j] ** 2 * pj
    r = np.roots(coeffs)
    real = np.abs(r.imag) <= 1e-9 * max(1.0, float(np.max(np.abs(r))))
    q = np.sort(r[real].real)
    if q.size != spec.N:
        raise DomainError(
            f"expected {spec.N} real separation coordinates, found {q.size}")
    return q


def separation_to_cartesian(spec: NeumannSpec, state, profile=None,
                            eps=None) -> CartesianState:
    """Map a separated phase point to a Cartesian state on the sphere.

    Velocities come from the chain rule with
    d(log X_j)/d(q_i) = -1/(2 (a_j - q_i)).
    """
    from .separation import SeparationState, velocity_field

    profile = profile or neumann_profile(spec)
    X = sphero_conical_to_cartesian(spec, state.q, eps)
    qdot = velocity_field(profile, state)
    a = spec.a
    V = np.zeros(len(a))
    for j in range(len(a)):
        V[j] = -0.5 * X[j] * np.sum(qdot / (a[j] - state.q))
    return CartesianState(X, V)


# ---------------------------------------------------------------------------
# Cartesian oracle
# ---------------------------------------------------------------------------

def integrate_cartesian(spec: NeumannSpec, state0: CartesianState, x_span, dx,
                        kappa: float = KAPPA, step: float | None = None) -> CartesianTrajectory:
    """Integrate Xdd = -2 kappa A X + lambda X with lambda = 2 kappa X.A.X - |V|^2.

    Fixed-step RK4 on the unconstrained field with per-step projection of
    X to the sphere and V to the tangent space (explicit symmetric
    projection).  The step divides dx exactly so samples land on the grid.
    """
    a = spec.a
    if step is None:
        step = DEFAULTS["cartesian_step"]
    x0, x1 = float(x_span[0]), float(x_span[1])
    n_out = int(np.floor((x1 - x0) / dx + 1e-9)) + 1
    sub = max(1, int(np.ceil(dx / step - 1e-12)))
    h = dx / sub

    def rhs(y):
        X, V = y[: len(a)], y[len(a):]
        lam = 2.0 * kappa * (X @ (a * X)) - V @ V
        return np.concatenate([V, -2.0 * kappa * a * X + lam * X])

    y = np.concatenate([state0.X, state0.V])
    Xs = np.empty((len(a), n_out))
    Vs = np.empty((len(a), n_out))
    Xs[:, 0], Vs[:, 0] = state0.X, state0.V
    for k in range(1, n_out):
        for _ in range(sub):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            X, V = y[: len(a)], y[len(a):]
            X = X / np.linalg.norm(X)
            V = V - (X @ V) * X
            y = np.concatenate([X, V])
        Xs[:, k], Vs[:, k] = y[: len(a)], y[len(a):]
    x = x0 + dx * np.arange(n_out)
    return CartesianTrajectory(x, Xs, Vs, kappa)


def cartesian_separation_samples(spec: NeumannSpec, traj: CartesianTrajectory):
    """Separation coordinates and their x-derivatives along a Cartesian path.

    q_i(x) are the roots of W(t; x) = sum_j X_j(x)^2 prod_{k!=j}(t - a_k)
    and the velocities follow by implicit differentiation,
    dq_i/dx = -(dW/dx)/(dW/dt) at t = q_i.  Everything is analytic in the
    sampled (X, V); no finite differences enter.
    """
    a = spec.a
    n = len(a)
    N = spec.N
    pj = [from_roots(np.delete(a, j), 1.0) for j in range(n)]
    M = traj.X.shape[1]
    qs = np.empty((N, M))
    qds = np.empty((N, M))
    for k in range(M):
        X, V = traj.X[:, k], traj.V[:, k]
        coeffs = np.zeros(n)
        for j in range(n):
            coeffs = coeffs + X[j] ** 2 * pj[j].coeffs
        q = np.sort(np.roots(coeffs).real)
        dcoeffs = np.polyder(coeffs)
        for i in range(N):
            dWdx = sum(2.0 * X[j] * V[j] * pj[j](q[i]) for j in range(n))
            dWdt = np.polyval(dcoeffs, q[i])
            qds[i, k] = -dWdx / dWdt
        qs[:, k] = q
    return qs, qds


def cartesian_integral_series(spec: NeumannSpec, profile: SeparableProfile,
                              traj: CartesianTrajectory, margin: float = 0.02):
    """Per-sample integral values along a Cartesian trajectory.

    Returns (H_samples, keep): an (M, N) array of integral values from
    the chart momenta p_i = q'_i prod_i / f(q_i), and a mask of samples
    where every coordinate sits further than ``margin`` from all
    parameters a_j (the chart momentum diverges at the a_j).  Masked
    samples carry NaN.
    """
    from .poly import stackel_solve_batch
    from .separation import _prods

    qs, qds = cartesian_separation_samples(spec, traj)
    prods = _prods(qs)
    fv = np.empty_like(qs)
    Uv = np.empty_like(qs)
    for i in range(spec.N):
        fv[i] = profile.f(qs[i])
        Uv[i] = profile.U(qs[i])
    keep = np.ones(qs.shape[1], dtype=bool)
    for aj in spec.a:
        keep &= np.all(np.abs(qs - aj) > margin, axis=0)
    Hs = np.full((qs.shape[1], spec.N), np.nan)
    p = qds[:, keep] * prods[:, keep] / fv[:, keep]
    rhs = 0.5 * fv[:, keep] * p**2 + Uv[:, keep]
    Hs[keep] = stackel_solve_batch(qs[:, keep].T, rhs.T)
    return Hs, keep


def cartesian_integral_drift(spec: NeumannSpec, profile: SeparableProfile,
                             traj: CartesianTrajectory, H: IntegralValues,
                             margin: float = 0.02) -> np.ndarray:
    """Max drift of the commuting integrals along a Cartesian trajectory.

    Samples where any coordinate sits within ``margin`` of a parameter
    a_j are skipped (the chart momentum diverges there); the retained
    samples still span the whole window.
    """
    Hs, keep = cartesian_integral_series(spec, profile, traj, margin)
    return np.max(np.abs(Hs[keep] - H.H[None, :]), axis=0)


# ---------------------------------------------------------------------------
# profile matching and normal form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one system's trajectories into another profile."""

    matched: bool
    H: IntegralValues | None
    remainder_norm: float
    degree_excess: int

    def __bool__(self):
        return self.matched


def match_profiles(p1: SeparableProfile, H1: IntegralValues,
                   p2: SeparableProfile, tol: float = 1e-9) -> MatchResult:
    """Find integral values H2 with f1*(-U1 + H1-poly) = f2*(-U2 + H2-poly).

    Divides the product P = f1*R1 by f2 and checks that P/f2 + U2 is a
    polynomial of degree <= N-1; its coefficients are H2.  Failure is
    reported as a structured mismatch, not an exception.
    """
    if p1.N != p2.N:
        raise ValueError("profiles must share the dimension N")
    P = product_polynomial(p1, H1)
    f2 = as_rational(p2.f)
    # (P/f2 + U2) as one rational function
    cand = RationalFunction(P.num * f2.den, P.den * f2.num) + p2.U
    num, den = cand.num, cand.den
    if den.degree > 0:
        # exact division failed structurally
        return MatchResult(False, None, float("inf"), den.degree)
    num = num * (1.0 / den.coeffs[0])
    scale = max(1.0, num.norm_inf())
    excess = 0
    rem = 0.0
    coeffs = num.coeffs.copy()
    if num.degree > p1.N - 1:
        head = coeffs[: num.degree - (p1.N - 1)]
        rem = float(np.max(np.abs(head)))
        excess = num.degree - (p1.N - 1)
        if rem > tol * scale:
            return MatchResult(False, None, rem, excess)
        coeffs = coeffs[num.degree - (p1.N - 1):]
    H2 = np.zeros(p1.N)
    H2[p1.N - len(coeffs):] = coeffs
    return MatchResult(True, IntegralValues(H2), rem, 0)


@dataclass(frozen=True)
class KdvNormalization:
    """Normal form of a degree-(2N+1) product polynomial.

    C(t) = scale * P(t + shift) is monic with zero second-highest
    coefficient.  Trajectory correspondence: q_new(x) = q_old(beta*x) - shift
    with beta = sqrt(-scale) (real whenever the product's leading
    coefficient is negative, as for every sphere-derived system).
    """

    profile: SeparableProfile
    H: IntegralValues
    C: RealPolynomial
    scale: float
    shift: float

    @property
    def time_scale(self) -> float:
        """beta with x_old = beta * x_new."""
        if self.scale >= 0:
            raise NormalizationError("positive leading product: no real time rescale")
        return float(np.sqrt(-self.scale))


def normalize_to_kdv(product: RealPolynomial) -> KdvNormalization:
    """Bring f*R to the monic centred form and read off the reduced system.

    Returns the flat profile (f = 1, m0 = 1) whose right-hand polynomial
    is -C, together with the integral values H_k = -c_{N+2+k} hidden in
    C's tail, and the recorded (scale, shift).
    """
    product = product if isinstance(product, RealPolynomial) else RealPolynomial(product)
    deg = product.degree
    if deg < 3 or deg % 2 == 0:
        raise NormalizationError(f"product degree {deg} is not of the form 2N+1")
    N = (deg - 1) // 2
    lead = float(product.coeffs[0])
    scale = 1.0 / lead
    monic = product * scale
    shift = -float(monic.coeffs[1]) / deg  # centroid of the roots
    C = monic.compose_affine(1.0, shift)
    # the composed second coefficient is zero up to rounding; pin it
    coeffs = C.coeffs.copy()
    coeffs[1] = 0.0
    C = RealPolynomial(coeffs)
    c_tail = np.array([C.coefficient(N - 1 - k) for k in range(N)])
    H = IntegralValues(-c_tail)
    c_params = np.array([C.coefficient(2 * N - 1 - k) for k in range(N)])
    profile = kdv_profile(c_params, 1.0, N)
    return KdvNormalization(profile, H, C, scale, shift)
