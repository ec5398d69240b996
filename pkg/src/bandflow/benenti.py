"""Separable systems described by a metric profile f and a potential profile U.

A system with N degrees of freedom is determined by two functions of one
variable.  In the diagonal coordinates q_1..q_N the kinetic metric is
g_ii = prod_{s!=i}(q_i - q_s) / f(q_i) and the commuting integrals
I_0..I_{N-1} come from Vandermonde solves against the per-coordinate
energies

    (1/2) f(q_i) p_i^2 + U(q_i)  =  I_0 q_i^{N-1} + ... + I_{N-1}.

Equivalently each coordinate obeys the separated relation
(1/2) f(q_i) p_i^2 = R(q_i) with R(t) = -U(t) + I_0 t^{N-1} + ... + I_{N-1},
so a state is classically allowed iff f(q_i) R(q_i) >= 0 for every i.

The sign pairing above (+ in the solve, - in R) is the one under which
recovering momenta from integral values inverts the integral map and the
integrals are conserved along the flow; see the repository notes for the
alternative pairings that appear in the literature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import poly
from .defaults import DEFAULTS
from .errors import ForbiddenPointError
from .poly import RationalFunction, RealPolynomial, as_rational, stackel_solve

__all__ = [
    "SeparableProfile",
    "IntegralValues",
    "integrals_at",
    "rhs_polynomial",
    "momentum_from_energy",
    "potential_coefficients",
    "poisson_residual",
    "affine_reparam",
    "product_polynomial",
]


@dataclass(frozen=True)
class SeparableProfile:
    """A separable system as data: dimension, metric profile, potential profile."""

    N: int
    f: RationalFunction
    U: RationalFunction
    label: str = ""

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        f = as_rational(self.f)
        U = as_rational(self.U)
        if f.num.is_zero:
            raise ValueError("metric profile f must not be identically zero")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "U", U)


@dataclass(frozen=True)
class IntegralValues:
    """Values H_0..H_{N-1} of the commuting integrals on a trajectory."""

    H: np.ndarray

    def __post_init__(self):
        H = np.atleast_1d(np.asarray(self.H, dtype=float))
        if not np.all(np.isfinite(H)):
            raise ValueError("integral values must be finite")
        object.__setattr__(self, "H", H)
        self.H.setflags(write=False)

    def __len__(self):
        return len(self.H)

    def __getitem__(self, k):
        return self.H[k]


def integrals_at(profile: SeparableProfile, q, p) -> IntegralValues:
    """Integral values of the state (q, p).

    Solves the Vandermonde system S(q) H = rhs with
    rhs_i = (1/2) f(q_i) p_i^2 + U(q_i).
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape or q.ndim != 1 or q.size != profile.N:
        raise ValueError("q and p must be length-N vectors")
    rhs = 0.5 * np.array([profile.f(qi) for qi in q]) * p**2 \
        + np.array([profile.U(qi) for qi in q])
    return IntegralValues(stackel_solve(q, rhs))


def rhs_polynomial(profile: SeparableProfile, H: IntegralValues) -> RationalFunction:
    """R(t) = -U(t) + H_0 t^{N-1} + ... + H_{N-2} t + H_{N-1}."""
    hpoly = RealPolynomial(np.asarray(H.H, dtype=float))
    return as_rational(hpoly) - profile.U


def momentum_from_energy(profile: SeparableProfile, H: IntegralValues, q,
                         signs) -> np.ndarray:
    """Momenta p_i = signs_i * sqrt(2 R(q_i) / f(q_i)).

    Exact inverse of integrals_at for admissible states: feeding the result
    back recovers H.  A negative ratio means the point is classically
    forbidden at these integral values, reported with the offending index.
    """
    q = np.asarray(q, dtype=float)
    signs = np.asarray(signs, dtype=float)
    R = rhs_polynomial(profile, H)
    out = np.empty(profile.N)
    for i, qi in enumerate(q):
        fi = profile.f(qi)
        ri = R(qi)
        if fi == 0.0:
            # metric-degenerate turning point: finite velocity, diverging p
            raise ForbiddenPointError(i, 0.0, f"f vanishes at q_{i} = {qi}")
        ratio = 2.0 * ri / fi
        if ratio < 0.0:
            if ratio > -1e-14 * max(1.0, abs(ri)):
                ratio = 0.0
            else:
                raise ForbiddenPointError(i, ratio)
        out[i] = signs[i] * np.sqrt(ratio)
    return out


def potential_coefficients(U, q) -> np.ndarray:
    """Coefficients (U_0..U_{N-1}) with sum_k U_k q_i^{N-1-k} = U(q_i) for all i.

    The degree-(N-1) interpolant of U on the coordinate nodes, i.e. the
    expansion of U(L) in powers of the diagonal tensor L.
    """
    U = as_rational(U)
    q = np.asarray(q, dtype=float)
    vals = np.array([U(qi) for qi in q])
    return stackel_solve(q, vals)


def _integral_value(profile, q, p, k):
    return integrals_at(profile, q, p).H[k]


def poisson_residual(profile: SeparableProfile, q, p, k: int, l: int,
                     h: float | None = None) -> float:
    """|{H_k, H_l}| by central differences with step h.

    The integrals commute in exact arithmetic; the returned value is the
    finite-difference truncation/rounding level.
    """
    if h is None:
        h = DEFAULTS["poisson_step"]
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if k == l:
        return 0.0
    n = profile.N

    def grad(kk):
        dq = np.empty(n)
        dp = np.empty(n)
        for i in range(n):
            eq = np.zeros(n)
            eq[i] = h
            dq[i] = (_integral_value(profile, q + eq, p, kk)
                     - _integral_value(profile, q - eq, p, kk)) / (2 * h)
            dp[i] = (_integral_value(profile, q, p + eq, kk)
                     - _integral_value(profile, q, p - eq, kk)) / (2 * h)
        return dq, dp

    dqk, dpk = grad(k)
    dql, dpl = grad(l)
    return float(abs(np.dot(dqk, dpl) - np.dot(dpk, dql)))


def affine_reparam(profile: SeparableProfile, c1: float, c2: float) -> SeparableProfile:
    """Profile describing the rescaled tensor c1*L + c2*Id.

    f_new(s) = c1^(1+N) f((s - c2)/c1),  U_new(s) = U((s - c2)/c1),
    so that composing twice with (c1, c2) and (1/c1, -c2/c1) is the identity.
    """
    if c1 == 0.0:
        raise ValueError("c1 must be nonzero")
    a, b = 1.0 / c1, -c2 / c1
    f_new = as_rational(profile.f).compose_affine(a, b) * (c1 ** (1 + profile.N))
    u_new = as_rational(profile.U).compose_affine(a, b)
    return SeparableProfile(profile.N, f_new, u_new,
                            label=f"{profile.label}|affine({c1},{c2})")


def product_polynomial(profile: SeparableProfile, H: IntegralValues) -> RationalFunction:
    """P(t) = f(t) R(t): the single function the separated flow depends on.

    Two profiles sharing P (at matched integral values) share their
    trajectories; P is the object the matcher and the spectral layer read.
    """
    return as_rational(profile.f) * rhs_polynomial(profile, H)
