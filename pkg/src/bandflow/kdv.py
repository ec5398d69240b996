"""The reduction layer: spectral polynomial, w-coefficients, and identities.

A trajectory q_1(x)..q_N(x) of a sphere system packs into the monic
polynomial w(x; mu) = prod_i (mu - q_i(x)) whose coefficients w_1..w_N
are (signed) elementary symmetric functions.  The scalar profile the
spectral layer reads is u = 2 w_1 = -2 sum q_i.

Along such a trajectory the coefficients satisfy, identically in mu,

    C(mu) = m0 (w_xx w - 1/2 w_x^2) + (mu - u) w^2,

where C is the monic spectral polynomial with zero second-highest
coefficient produced by the normal form; for an uncentred monic C the
potential in the last factor is u - c1 with c1 the second coefficient.
Everything here verifies that chain numerically: reality and interlacing
of C's roots, the identity residual on a mu-grid, and the single
stationarity ODE satisfied by u when N = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benenti import IntegralValues
from .defaults import DEFAULTS
from .poly import RealPolynomial, RootList, from_roots, real_roots
from .separation import Trajectory, fd_derivative, fd_second_derivative
from .systems import NeumannSpec

__all__ = [
    "SpectralPolynomial",
    "KdvTrace",
    "spectral_from_neumann",
    "interlacing_check",
    "InterlacingReport",
    "kdv_trace",
    "default_mu_grid",
    "spectral_identity_residual",
    "stationarity_check_n1",
]


@dataclass(frozen=True)
class SpectralPolynomial:
    """Degree-(2N+1) polynomial with positive leading coefficient, plus roots."""

    C: RealPolynomial
    roots: RootList

    def __post_init__(self):
        if self.C.degree < 3 or self.C.degree % 2 == 0:
            raise ValueError("spectral polynomial must have odd degree >= 3")
        if self.C.coeffs[0] <= 0:
            raise ValueError("leading coefficient must be positive")

    @property
    def N(self) -> int:
        return (self.C.degree - 1) // 2

    @property
    def all_real(self) -> bool:
        return self.roots.all_real

    @classmethod
    def from_poly(cls, C: RealPolynomial) -> "SpectralPolynomial":
        return cls(C, real_roots(C))

    def __call__(self, t):
        return self.C(t)


def spectral_from_neumann(spec: NeumannSpec, H: IntegralValues) -> SpectralPolynomial:
    """C(t) = 1/2 (t^N + H_0 t^{N-1} + ... + H_{N-1}) prod_s (t - a_s).

    H are integral values in the constant-free potential convention
    (systems.reduced_integrals of the full-profile values).  For values
    coming from a real trajectory all roots are real; otherwise the root
    list records the non-real count and downstream checks refuse it.
    """
    hfactor = RealPolynomial(np.concatenate([[1.0], np.asarray(H.H, dtype=float)]))
    C = 0.5 * (hfactor * from_roots(spec.a, 1.0))
    return SpectralPolynomial.from_poly(C)


@dataclass(frozen=True)
class InterlacingReport:
    ok: bool
    margins: np.ndarray   # (N, 2) distances into [r_2i, r_2i+1]; negative = violated

    def __bool__(self):
        return self.ok


def interlacing_check(C: SpectralPolynomial, q) -> InterlacingReport:
    """Check r_{2i} <= q_i <= r_{2i+1} against roots counted with multiplicity."""
    if not C.all_real:
        raise ValueError("spectral polynomial has non-real roots")
    e = C.roots.expanded()
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n = (len(e) - 1) // 2
    if q.size != n:
        raise ValueError(f"expected {n} coordinates, got {q.size}")
    margins = np.empty((n, 2))
    for i in range(n):
        lo, hi = e[2 * i + 1], e[2 * i + 2]
        margins[i] = (q[i] - lo, hi - q[i])
    return InterlacingReport(bool(np.all(margins >= 0.0)), margins)


@dataclass(frozen=True)
class KdvTrace:
    """w-coefficients and the scalar profile u = 2 w_1 along a trajectory."""

    x: np.ndarray            # (M,)
    w: np.ndarray            # (N, M): w_1..w_N per sample
    u: np.ndarray            # (M,)
    m0: float
    C: SpectralPolynomial

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def N(self) -> int:
        return self.w.shape[0]

    def w_at(self, lam: float) -> np.ndarray:
        """w(x; lam) = lam^N + w_1 lam^(N-1) + ... + w_N per sample."""
        n = self.N
        out = np.full(self.x.shape, float(lam) ** n)
        for k in range(n):
            out += self.w[k] * float(lam) ** (n - 1 - k)
        return out

    def w_roots_at(self, m: int) -> np.ndarray:
        """Roots of w(x_m; .), i.e. the coordinates back from the coefficients."""
        return np.sort(np.roots(np.concatenate([[1.0], self.w[:, m]])).real)


def kdv_trace(traj: Trajectory, m0: float, C: SpectralPolynomial) -> KdvTrace:
    """Pack a trajectory into w-coefficients; u = 2 w_1 at every sample."""
    n, M = traj.q.shape
    w = np.empty((n, M))
    if n == 1:
        w[0] = -traj.q[0]
    else:
        for m in range(M):
            w[:, m] = from_roots(traj.q[:, m], 1.0).coeffs[1:]
    u = 2.0 * w[0]
    return KdvTrace(traj.x, w, u, float(m0), C)


def default_mu_grid(C: SpectralPolynomial) -> np.ndarray:
    """2N+4 Chebyshev points on [r_1 - 1, r_{2N+1} + 1].

    Both sides of the identity are degree-(2N+1) polynomials in mu, so
    any 2N+2 distinct points certify it; two extra for slack.
    """
    e = C.roots.expanded()
    lo, hi = e[0] - 1.0, e[-1] + 1.0
    n = 2 * C.N + 4
    k = np.arange(n)
    nodes = np.cos((2 * k + 1) * np.pi / (2 * n))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes[::-1]


def _centered_potential(trace: KdvTrace) -> np.ndarray:
    """Potential entering the identity: u for centred C, u - c1 in general."""
    c1 = trace.C.C.coefficient(trace.C.C.degree - 1)
    return trace.u - c1


def spectral_identity_residual(trace: KdvTrace, mu_grid=None) -> float:
    """Max over the mu-grid and interior samples of the identity residual.

    Evaluates |C(mu) - m0 (w_xx w - 1/2 w_x^2) - (mu - u) w^2| normalised
    by max(1, |C(mu)|); derivatives by fourth-order stencils in x.
    """
    if mu_grid is None:
        mu_grid = default_mu_grid(trace.C)
    mu_grid = np.atleast_1d(np.asarray(mu_grid, dtype=float))
    if len(trace.x) < 5:
        raise ValueError("trace too short for fourth-order stencils")
    ueff = _centered_potential(trace)[2:-2]
    n = trace.N
    worst = 0.0
    for mu in mu_grid:
        w = trace.w_at(mu)
        wx = fd_derivative(w, trace.dx)
        wxx = fd_second_derivative(w, trace.dx)
        wi = w[2:-2]
        lhs = float(trace.C(mu))
        rhs = trace.m0 * (wxx * wi - 0.5 * wx**2) + (mu - ueff) * wi**2
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / max(1.0, abs(lhs))))
    return worst


def stationarity_check_n1(trace: KdvTrace):
    """Least-squares fit of c in -1/2 u''' + 3/2 u u' + c u' = 0.

    Returns (c, post-fit max residual).  For constant u the coefficient
    is undefined and c is None; the residual is then that of the first
    two terms alone.
    """
    if trace.N != 1:
        raise ValueError("stationarity check applies to N = 1 traces")
    u = trace.u
    dx = trace.dx
    up = fd_derivative(u, dx)                       # len M-4
    uppp = fd_derivative(fd_second_derivative(u, dx), dx)  # len M-8
    um = u[4:-4]
    up2 = up[2:-2]
    base = -0.5 * uppp + 1.5 * um * up2
    if np.max(np.abs(up2)) <= 1e-12 * max(1.0, np.max(np.abs(u))):
        return None, float(np.max(np.abs(base)))
    denom = float(np.dot(up2, up2))
    c = -float(np.dot(base, up2)) / denom
    return c, float(np.max(np.abs(base + c * up2)))
