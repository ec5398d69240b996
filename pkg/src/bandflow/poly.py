"""Real polynomial and rational-function arithmetic.

Coefficients are stored in descending degree order (``coeffs[0]`` is the
leading coefficient), matching how the characteristic and spectral
polynomials are written throughout the package.  The zero polynomial is
the empty coefficient array.

Root extraction goes through the companion matrix (``numpy.roots``) of
the monic rescaled polynomial followed by one Newton polish per root;
nearby roots are merged into multiple roots so that double band edges
coming out of floating point are recognised as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .defaults import DEFAULTS
from .errors import IllConditionedError, PoleError

__all__ = [
    "RealPolynomial",
    "RationalFunction",
    "RootList",
    "from_roots",
    "real_roots",
    "elementary_symmetric",
    "stackel_solve",
]


def _trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(np.abs(c) > 0.0)
    if nz.size == 0:
        return np.zeros(0)
    return c[nz[0]:].copy()


@dataclass(frozen=True)
class RealPolynomial:
    """Dense real polynomial, descending coefficient order."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))
        self.coeffs.setflags(write=False)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    @property
    def is_zero(self) -> bool:
        return len(self.coeffs) == 0

    def __call__(self, t):
        if self.is_zero:
            return np.zeros_like(np.asarray(t, dtype=float)) + 0.0
        return np.polyval(self.coeffs, t)

    def coefficient(self, power: int) -> float:
        """Coefficient of t**power (0 outside the stored range)."""
        if power < 0 or power > self.degree:
            return 0.0
        return float(self.coeffs[self.degree - power])

    def derivative(self) -> "RealPolynomial":
        if self.degree < 1:
            return RealPolynomial(np.zeros(0))
        return RealPolynomial(np.polyder(self.coeffs))

    def __add__(self, other) -> "RealPolynomial":
        other = _as_poly(other)
        return RealPolynomial(np.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other) -> "RealPolynomial":
        other = _as_poly(other)
        return RealPolynomial(np.polysub(self.coeffs, other.coeffs))

    def __mul__(self, other) -> "RealPolynomial":
        if np.isscalar(other):
            return RealPolynomial(self.coeffs * float(other))
        other = _as_poly(other)
        if self.is_zero or other.is_zero:
            return RealPolynomial(np.zeros(0))
        return RealPolynomial(np.polymul(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __neg__(self) -> "RealPolynomial":
        return RealPolynomial(-self.coeffs)

    def divmod(self, other) -> tuple["RealPolynomial", "RealPolynomial"]:
        other = _as_poly(other)
        if other.is_zero:
            raise ZeroDivisionError("polynomial division by zero")
        if self.is_zero:
            return RealPolynomial(np.zeros(0)), RealPolynomial(np.zeros(0))
        quo, rem = np.polydiv(self.coeffs, other.coeffs)
        return RealPolynomial(quo), RealPolynomial(rem)

    def deflate(self, root: float) -> "RealPolynomial":
        """Synthetic division by (t - root); the remainder is dropped."""
        n = self.degree
        out = np.empty(n, dtype=float)
        acc = 0.0
        for k in range(n):
            acc = self.coeffs[k] + root * acc
            out[k] = acc
        return RealPolynomial(out)

    def compose_affine(self, a: float, b: float) -> "RealPolynomial":
        """Coefficients of p(a*t + b)."""
        if self.is_zero:
            return self
        out = np.zeros(1)
        lin = np.array([float(a), float(b)])
        for c in self.coeffs:
            out = np.polyadd(np.polymul(out, lin), [c])
        return RealPolynomial(out)

    def norm_inf(self) -> float:
        return 0.0 if self.is_zero else float(np.max(np.abs(self.coeffs)))

    def __repr__(self):
        return f"RealPolynomial({np.array2string(self.coeffs, precision=6)})"


def _as_poly(p) -> RealPolynomial:
    if isinstance(p, RealPolynomial):
        return p
    if np.isscalar(p):
        return RealPolynomial(np.array([float(p)]))
    return RealPolynomial(np.asarray(p, dtype=float))


def constant(c: float) -> RealPolynomial:
    return RealPolynomial(np.array([float(c)]))


ONE = constant(1.0)


def from_roots(roots, scale: float = 1.0) -> RealPolynomial:
    """scale * prod (t - r_i);  an empty root list gives the constant scale."""
    if scale == 0.0:
        raise ValueError("scale must be nonzero")
    roots = np.asarray(roots, dtype=float)
    if roots.size == 0:
        return constant(scale)
    return RealPolynomial(float(scale) * np.poly(roots))


@dataclass(frozen=True)
class RootList:
    """Sorted real roots with multiplicities, plus the non-real count."""

    values: np.ndarray
    multiplicities: np.ndarray
    complex_count: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = np.asarray(self.multiplicities, dtype=int)
        order = np.argsort(v)
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "multiplicities", m[order])
        self.values.setflags(write=False)
        self.multiplicities.setflags(write=False)

    @property
    def total(self) -> int:
        return int(np.sum(self.multiplicities))

    @property
    def all_real(self) -> bool:
        return self.complex_count == 0

    def expanded(self) -> np.ndarray:
        """Roots repeated by multiplicity, ascending."""
        return np.repeat(self.values, self.multiplicities)

    def pairs(self):
        return list(zip(self.values.tolist(), self.multiplicities.tolist()))


def real_roots(p, cluster_tol: float | None = None) -> RootList:
    """All real roots of p with multiplicities.

    Companion-matrix eigenvalues of the monic rescale, one Newton polish
    per root, then clustering: roots closer than ``cluster_tol`` merge
    into one root with summed multiplicity.  Non-real roots are counted,
    never propagated.
    """
    p = _as_poly(p)
    if p.degree < 1:
        raise ValueError("real_roots requires degree >= 1")
    if cluster_tol is None:
        cluster_tol = DEFAULTS["root_cluster_tol"]
    scale = max(1.0, float(np.max(np.abs(p.coeffs))))
    raw = np.roots(p.coeffs / scale)
    im_tol = DEFAULTS["complex_root_tol"] * max(1.0, float(np.max(np.abs(raw))))
    real_mask = np.abs(raw.imag) <= max(im_tol, cluster_tol)
    complex_count = int(np.sum(~real_mask))
    vals = np.sort(raw[real_mask].real)

    dp = p.derivative()
    polished = []
    for r in vals:
        x = r
        for _ in range(2):
            d = dp(x)
            if abs(d) < 1e-300:
                break
            step = p(x) / d
            if not np.isfinite(step) or abs(step) > cluster_tol:
                break  # multiple root or polish diverging; keep eigenvalue
            x = x - step
        polished.append(x)
    vals = np.sort(np.asarray(polished))

    clustered_vals, mults = [], []
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[j] - vals[j - 1] <= cluster_tol:
            j += 1
        clustered_vals.append(float(np.mean(vals[i:j])))
        mults.append(j - i)
        i = j
    return RootList(np.asarray(clustered_vals), np.asarray(mults, dtype=int),
                    complex_count=complex_count)


@dataclass(frozen=True)
class RationalFunction:
    """num/den with a nonzero denominator, reduced across shared real roots."""

    num: RealPolynomial
    den: RealPolynomial = field(default_factory=lambda: ONE)

    def __post_init__(self):
        num = _as_poly(self.num)
        den = _as_poly(self.den)
        if den.is_zero:
            raise ZeroDivisionError("rational function with zero denominator")
        num, den = _reduce(num, den)
        if abs(den.coeffs[0] - 1.0) > 0.0 and den.degree == 0:
            # constant denominators fold into the numerator
            num = num * (1.0 / den.coeffs[0])
            den = ONE
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def __call__(self, t):
        d = self.den(t)
        if np.isscalar(d) or d.ndim == 0:
            if abs(d) < 1e-300:
                raise PoleError(t)
            return self.num(t) / d
        if np.any(np.abs(d) < 1e-300):
            bad = np.asarray(t)[np.abs(d) < 1e-300]
            raise PoleError(bad.flat[0])
        return self.num(t) / d

    def __mul__(self, other) -> "RationalFunction":
        other = as_rational(other)
        return RationalFunction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __add__(self, other) -> "RationalFunction":
        other = as_rational(other)
        return RationalFunction(self.num * other.den + other.num * self.den,
                                self.den * other.den)

    def __sub__(self, other) -> "RationalFunction":
        other = as_rational(other)
        return RationalFunction(self.num * other.den - other.num * self.den,
                                self.den * other.den)

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def compose_affine(self, a: float, b: float) -> "RationalFunction":
        return RationalFunction(self.num.compose_affine(a, b),
                                self.den.compose_affine(a, b))

    def __repr__(self):
        if self.is_polynomial:
            return f"RationalFunction({self.num!r})"
        return f"RationalFunction({self.num!r} / {self.den!r})"


def as_rational(p) -> RationalFunction:
    if isinstance(p, RationalFunction):
        return p
    return RationalFunction(_as_poly(p))


def _reduce(num: RealPolynomial, den: RealPolynomial):
    """Cancel real roots the numerator and denominator share."""
    if den.degree < 1 or num.is_zero:
        return num, den
    tol = DEFAULTS["root_cluster_tol"]
    for r in real_roots(den, tol).values:
        while (den.degree >= 1 and abs(den(r)) <= tol * max(1.0, den.norm_inf())
               and not num.is_zero
               and abs(num(r)) <= tol * max(1.0, num.norm_inf())
               and num.degree >= 1):
            num = num.deflate(r)
            den = den.deflate(r)
    return num, den


def elementary_symmetric(q) -> np.ndarray:
    """Coefficients w_1..w_N with prod(t - q_i) = t^N + w_1 t^{N-1} + ... + w_N.

    Exactly the coefficient tail of from_roots(q, 1).
    """
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        return np.zeros(0)
    return from_roots(q, 1.0).coeffs[1:].copy()


def stackel_solve(q, rhs, *, node_gap_tol: float | None = None,
                  condition_limit: float | None = None) -> np.ndarray:
    """Solve the Vandermonde system S I = rhs with S_ij = q_i^(N-j).

    Raises IllConditionedError (carrying the condition estimate) when the
    nodes are too close to coincident for the solve to be trusted.
    """
    q = np.asarray(q, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = q.size
    if rhs.shape[-1] != n:
        raise ValueError("q and rhs must have matching length")
    if node_gap_tol is None:
        node_gap_tol = DEFAULTS["node_gap_tol"]
    if condition_limit is None:
        condition_limit = DEFAULTS["condition_limit"]
    if n == 1:
        return rhs.copy().reshape(rhs.shape)
    gaps = np.abs(q[:, None] - q[None, :])[np.triu_indices(n, 1)]
    if np.min(gaps) < node_gap_tol:
        raise IllConditionedError(np.inf, "coincident separation coordinates")
    S = np.vander(q, n, increasing=False)
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > condition_limit:
        raise IllConditionedError(cond)
    return np.linalg.solve(S, rhs)


def stackel_solve_batch(q_samples: np.ndarray, rhs_samples: np.ndarray) -> np.ndarray:
    """Vectorised stackel_solve over trailing sample axes.

    q_samples, rhs_samples: shape (M, N).  No conditioning guard; intended
    for trajectory post-processing where the states were already admitted.
    """
    M, n = q_samples.shape
    if n == 1:
        return rhs_samples.copy()
    powers = np.arange(n - 1, -1, -1)
    S = q_samples[:, :, None] ** powers[None, None, :]
    return np.linalg.solve(S, rhs_samples[:, :, None])[:, :, 0]
