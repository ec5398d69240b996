"""Integration of the separated one-dimensional ODE system.

Each coordinate obeys

    dq_i/dx = sigma_i * sign(f(q_i)) * sqrt(2 f(q_i) R(q_i)) / prod_{s!=i}(q_i - q_s),

with sigma_i = sign(p_i) the momentum branch sign and R the right-hand
polynomial of the profile at the trajectory's integral values.  The flow
only sees the product P = f*R, which vanishes at turning points with a
square-root degeneracy.

Two integration strategies:

* When P is a polynomial with real roots bracketing each coordinate
  (every system derived from a real-rooted spectral polynomial), each
  confined coordinate is substituted as q_i = mid_i + amp_i*sin(theta_i)
  over its bracketing interval.  The square root of P cancels against
  cos(theta_i), the field is smooth through turning points, and the
  branch bookkeeping becomes implicit.  Double-ended intervals of zero
  length freeze the coordinate (it is an equilibrium of the reduced
  flow); single double roots at an endpoint are approached
  asymptotically by the substituted field on its own.

* Otherwise (rational P, e.g. the ellipsoid metric profile), plain
  event-detected reflection: integrate the raw field towards the nearest
  turning root, flip the branch sign there, step off the root on the
  local parabola and continue.

Output is resampled on a uniform grid via the integrator's own dense
interpolant so that downstream fourth-order finite differences see
smooth samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .benenti import IntegralValues, SeparableProfile, product_polynomial, rhs_polynomial
from .defaults import DEFAULTS
from .errors import CollisionError, DomainError, ForbiddenPointError, StepSizeError
from .poly import RealPolynomial, real_roots

__all__ = [
    "SeparationState",
    "Trajectory",
    "velocity_field",
    "integrate",
    "trace_series",
    "separated_ode_residual",
    "integral_drift_fd",
    "integral_roundtrip_drift",
    "confinement_brackets",
]


@dataclass(frozen=True)
class SeparationState:
    """Phase point of the separated dynamics: positions, branch signs, integrals."""

    q: np.ndarray
    sigma: np.ndarray
    H: IntegralValues

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if q.shape != sigma.shape:
            raise ValueError("q and sigma must have the same length")
        if not np.all(np.abs(sigma) == 1.0):
            raise ValueError("sigma entries must be +1 or -1")
        if np.any(np.diff(q) <= 0) and q.size > 1:
            raise ValueError("coordinates must be strictly increasing")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "sigma", sigma)
        q.setflags(write=False)
        sigma.setflags(write=False)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled solution of the separated system."""

    x: np.ndarray                 # (M,) strictly increasing, uniform
    q: np.ndarray                 # (N, M)
    sigma: np.ndarray             # (N, M)
    H: IntegralValues
    profile: SeparableProfile
    brackets: tuple | None = None
    label: str = ""

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def N(self) -> int:
        return self.q.shape[0]


def _pairwise_prod(q, i):
    n = len(q)
    if n == 1:
        return 1.0
    out = 1.0
    for s in range(n):
        if s != i:
            out *= q[i] - q[s]
    return out


def velocity_field(profile: SeparableProfile, state: SeparationState) -> np.ndarray:
    """Coordinate velocities of the state; empty products count as 1."""
    R = rhs_polynomial(profile, state.H)
    q = state.q
    out = np.empty(profile.N)
    for i in range(profile.N):
        fi = profile.f(q[i])
        val = 2.0 * fi * R(q[i])
        if val < 0.0:
            if val > -1e-12 * max(1.0, abs(fi)):
                val = 0.0
            else:
                raise ForbiddenPointError(i, val)
        sgn_f = 1.0 if fi >= 0 else -1.0
        out[i] = state.sigma[i] * sgn_f * np.sqrt(val) / _pairwise_prod(q, i)
    return out


def confinement_brackets(P: RealPolynomial, q0) -> list[tuple[float, float]]:
    """Bracketing intervals [r_{2i}, r_{2i+1}] of the product polynomial.

    The bounded intervals on which P >= 0 are, in ascending root order,
    [e_1, e_2], [e_3, e_4], ...; coordinate i must start inside the i-th.
    """
    rl = real_roots(P)
    if not rl.all_real:
        raise DomainError("product polynomial has non-real roots; no brackets")
    e = rl.expanded()
    q0 = np.asarray(q0, dtype=float)
    n = q0.size
    if e.size != 2 * n + 1:
        raise DomainError(
            f"expected {2 * n + 1} real roots for {n} coordinates, found {e.size}")
    slack = 1e-9 * max(1.0, float(np.max(np.abs(e))))
    out = []
    for i in range(n):
        lo, hi = float(e[2 * i + 1]), float(e[2 * i + 2])
        if not (lo - slack <= q0[i] <= hi + slack):
            raise DomainError(
                f"coordinate {i} starts at {q0[i]} outside its interval [{lo}, {hi}]")
        out.append((lo, hi))
    return out


def integrate(profile: SeparableProfile, state0: SeparationState, x_span, dx,
              *, method="auto", rtol=None, atol=None, collision_tol=None,
              label="") -> Trajectory:
    """Integrate the separated flow over x_span and sample every dx.

    method "auto" chooses the angle substitution when the product
    polynomial has the full set of real roots bracketing the initial
    coordinates, and the reflection fallback otherwise; "angle" and
    "reflect" force one strategy.
    """
    rtol = DEFAULTS["ode_rtol"] if rtol is None else rtol
    atol = DEFAULTS["ode_atol"] if atol is None else atol
    collision_tol = DEFAULTS["collision_tol"] if collision_tol is None else collision_tol
    x0, x1 = float(x_span[0]), float(x_span[1])
    if not x1 > x0:
        raise ValueError("x_span must be increasing")
    grid = x0 + dx * np.arange(int(np.floor((x1 - x0) / dx + 1e-9)) + 1)

    P = product_polynomial(profile, state0.H)
    brackets = None
    if method != "reflect" and P.is_polynomial:
        try:
            brackets = confinement_brackets(P.num, state0.q)
        except DomainError:
            if method == "angle":
                raise
            brackets = None
    if method == "angle" and brackets is None:
        raise DomainError("angle integration requires a bracketed polynomial product")
    if brackets is not None:
        q, sigma = _integrate_angle(profile, P.num, brackets, state0, grid,
                                    rtol, atol, collision_tol)
    else:
        q, sigma = _integrate_reflect(profile, P, state0, grid, rtol, atol,
                                      collision_tol)
    return Trajectory(grid, q, sigma, state0.H, profile,
                      brackets=tuple(brackets) if brackets else None, label=label)


# ---------------------------------------------------------------------------
# angle-substitution integrator
# ---------------------------------------------------------------------------

def _integrate_angle(profile, P, brackets, state0, grid, rtol, atol, ctol):
    n = profile.N
    lo = np.array([b[0] for b in brackets])
    hi = np.array([b[1] for b in brackets])
    mid = 0.5 * (lo + hi)
    amp = 0.5 * (hi - lo)
    freeze = amp <= DEFAULTS["root_cluster_tol"]

    # Gt_i = P / ((t - lo_i)(hi_i - t)), evaluated through deflation so the
    # endpoint zeros cancel exactly.
    Gt = []
    for i in range(n):
        if freeze[i]:
            Gt.append(None)
            continue
        Q = P.deflate(lo[i]).deflate(hi[i])
        Gt.append(-Q)

    # sign of f strictly inside each interval (constant there)
    sgn_f = np.ones(n)
    for i in range(n):
        if not freeze[i]:
            fi = profile.f(mid[i])
            sgn_f[i] = 1.0 if fi >= 0 else -1.0

    s0 = np.clip((state0.q - mid) / np.where(freeze, 1.0, amp), -1.0, 1.0)
    theta0 = np.arcsin(s0)                     # cos(theta0) >= 0
    tau = state0.sigma * sgn_f

    active = ~freeze

    def rhs(x, theta):
        q = mid + amp * np.sin(theta)
        dth = np.zeros(n)
        for i in range(n):
            if freeze[i]:
                continue
            g = Gt[i](q[i])
            if g < 0.0:
                g = 0.0
            dth[i] = tau[i] * np.sqrt(2.0 * g) / _pairwise_prod(q, i)
        return dth

    events = []
    if n > 1:
        def collision(x, theta):
            q = mid + amp * np.sin(theta)
            return float(np.min(np.diff(np.sort(q)))) - ctol
        collision.terminal = True
        collision.direction = -1
        events.append(collision)

    sol = solve_ivp(rhs, (grid[0], grid[-1]), theta0, t_eval=grid,
                    rtol=rtol, atol=atol, max_step=DEFAULTS["ode_max_step"],
                    events=events, method="RK45")
    if sol.status == 1:  # collision event fired
        x_ev = sol.t_events[0][0]
        q_ev = mid + amp * np.sin(sol.y_events[0][0])
        raise CollisionError(x_ev, q_ev)
    if not sol.success:
        raise StepSizeError(sol.message)
    theta = sol.y
    q = mid[:, None] + amp[:, None] * np.sin(theta)
    sigma = np.where(np.cos(theta) >= 0, 1.0, -1.0) * (tau * sgn_f)[:, None]
    if np.any(freeze):
        sigma[freeze, :] = state0.sigma[freeze, None]
    return q, sigma


# ---------------------------------------------------------------------------
# reflection fallback
# ---------------------------------------------------------------------------

def _rational_value_and_derivative(P, t):
    num = P.num if hasattr(P, "num") else P
    den = P.den if hasattr(P, "num") else None
    if den is None or den.degree == 0:
        scale = 1.0 if den is None else den.coeffs[0]
        return num(t) / scale, num.derivative()(t) / scale
    d = den(t)
    v = num(t) / d
    dv = (num.derivative()(t) * d - num(t) * den.derivative()(t)) / d**2
    return v, dv


def _integrate_reflect(profile, P, state0, grid, rtol, atol, ctol):
    """Event-detected reflection for products without usable brackets.

    Each coordinate integrates the raw square-root field toward its next
    turning root; a threshold event fires just before the root (where
    the field degenerates), the remaining approach and departure are
    stepped analytically on the local parabola, and the branch sign
    flips.  Grid points inside the (sub-step-sized) analytic hop are
    filled with the turning value.
    """
    n = profile.N
    R = rhs_polynomial(profile, state0.H)
    num = P.num if hasattr(P, "num") else P
    eps = 1e-9 * max(1.0, num.norm_inf())

    def Pval(t):
        return _rational_value_and_derivative(P, t)[0]

    def field(q, sig):
        dq = np.zeros(n)
        for i in range(n):
            fi = profile.f(q[i])
            sgn = 1.0 if fi >= 0 else -1.0
            val = 2.0 * fi * R(q[i])
            dq[i] = sig[i] * sgn * np.sqrt(max(val, 0.0)) / _pairwise_prod(q, i)
        return dq

    def hop(i, q, sig, only_out=False):
        """Analytic step through (or away from) the turning point of q_i."""
        r_near = q[i]
        for _ in range(60):  # Newton onto the adjacent root of P
            v, dv = _rational_value_and_derivative(P, r_near)
            if dv == 0.0 or abs(v) < 1e-300:
                break
            step = v / dv
            r_near -= step
            if abs(step) < 1e-14 * max(1.0, abs(r_near)):
                break
        _, dP = _rational_value_and_derivative(P, r_near)
        prod2 = _pairwise_prod(q, i) ** 2
        qdd = dP / prod2
        if qdd == 0.0:
            return None  # multiple root: asymptotic approach, no reflection
        delta_in = abs(q[i] - r_near)
        delta_out = max(3.0 * delta_in, 3.0 * eps / max(abs(dP), 1e-300))
        dt = 0.0 if only_out else np.sqrt(max(2.0 * delta_in / abs(qdd), 0.0))
        dt += np.sqrt(2.0 * delta_out / abs(qdd))
        q_new = q.copy()
        q_new[i] = r_near + np.sign(qdd) * delta_out
        sig_new = sig.copy()
        prod_i = _pairwise_prod(q_new, i)
        fi = profile.f(q_new[i])
        direction = np.sign(qdd)
        sig_new[i] = np.sign(direction * prod_i) * (1.0 if fi >= 0 else -1.0)
        return q_new, sig_new, dt, r_near

    x_cur = grid[0]
    q_cur = np.array(state0.q, dtype=float)
    sig = np.array(state0.sigma, dtype=float)
    out_q = np.empty((n, len(grid)))
    out_s = np.empty((n, len(grid)))
    done = np.zeros(len(grid), dtype=bool)

    # leave any coordinate that starts at (or numerically inside) a turning
    for i in range(n):
        if Pval(q_cur[i]) <= eps:
            res = hop(i, q_cur, sig, only_out=True)
            if res is not None:
                q_cur, sig, dt, _ = res[0], res[1], res[2], res[3]
                x_cur += dt

    flips = 0
    while x_cur < grid[-1] - 1e-15:
        def make_event(i):
            def ev(x, q):
                return Pval(q[i]) - eps
            ev.terminal = True
            ev.direction = -1
            return ev

        events = [make_event(i) for i in range(n)]
        if n > 1:
            def collision(x, q):
                return float(np.min(np.diff(np.sort(q)))) - ctol
            collision.terminal = True
            collision.direction = -1
            events.append(collision)

        seg = solve_ivp(lambda x, q: field(q, sig), (x_cur, grid[-1]), q_cur,
                        rtol=rtol, atol=atol, max_step=DEFAULTS["ode_max_step"],
                        events=events, dense_output=True, method="RK45")
        if not seg.success and seg.status != 1:
            raise StepSizeError(seg.message)
        x_end = seg.t[-1]
        mask = (~done) & (grid >= x_cur - 1e-12) & (grid <= x_end + 1e-12)
        if np.any(mask):
            out_q[:, mask] = seg.sol(grid[mask])
            out_s[:, mask] = sig[:, None]
            done |= mask
        if seg.status != 1:
            break
        fired = [k for k, te in enumerate(seg.t_events) if te.size > 0]
        k = min(fired, key=lambda kk: float(seg.t_events[kk][0]))
        if n > 1 and k == n:
            raise CollisionError(float(seg.t_events[k][0]), seg.y_events[k][0])
        x_ev = float(seg.t_events[k][0])
        q_ev = seg.y_events[k][0].copy()
        res = hop(k, q_ev, sig)
        if res is None:
            # multiple root: freeze the coordinate there and keep going
            mask = (~done) & (grid > x_ev)
            out_q[:, mask] = q_ev[:, None]
            out_s[:, mask] = sig[:, None]
            done |= mask
            break
        q_cur, sig, dt, r_star = res
        hop_mask = (~done) & (grid >= x_ev) & (grid <= x_ev + dt)
        if np.any(hop_mask):
            filler = q_ev.copy()
            filler[k] = r_star
            out_q[:, hop_mask] = filler[:, None]
            out_s[:, hop_mask] = sig[:, None]
            done |= hop_mask
        x_cur = x_ev + dt
        flips += 1
        if flips > 10000:
            raise StepSizeError("too many reflections")
    if not np.all(done):
        out_q[:, ~done] = q_cur[:, None]
        out_s[:, ~done] = sig[:, None]
    return out_q, out_s


# ---------------------------------------------------------------------------
# trajectory post-processing
# ---------------------------------------------------------------------------

def trace_series(traj: Trajectory) -> np.ndarray:
    """Sum of the coordinates per sample (minus the trace of the tensor L)."""
    return np.sum(traj.q, axis=0)


def fd_derivative(y: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order first derivative at interior points (trims 2 per side)."""
    y = np.asarray(y)
    return (-y[..., 4:] + 8 * y[..., 3:-1] - 8 * y[..., 1:-3] + y[..., :-4]) / (12 * dx)


def fd_second_derivative(y: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order second derivative at interior points (trims 2 per side)."""
    y = np.asarray(y)
    return (-y[..., 4:] + 16 * y[..., 3:-1] - 30 * y[..., 2:-2]
            + 16 * y[..., 1:-3] - y[..., :-4]) / (12 * dx * dx)


def _prods(q: np.ndarray) -> np.ndarray:
    """prod_{s!=i}(q_i - q_s) per coordinate and sample; shape like q."""
    n, m = q.shape
    out = np.ones((n, m))
    for i in range(n):
        for s in range(n):
            if s != i:
                out[i] *= q[i] - q[s]
    return out


def separated_ode_residual(traj: Trajectory, profile: SeparableProfile | None = None) -> float:
    """Max residual of (q'_i * prod)^2 = 2 f(q_i) R(q_i) at interior samples.

    Velocities by fourth-order finite differences; the residual is
    normalised by max(1, |2 f R|) so that band-edge turning points (where
    both sides vanish) do not amplify the finite-difference noise.
    """
    profile = profile or traj.profile
    R = rhs_polynomial(profile, traj.H)
    qd = fd_derivative(traj.q, traj.dx)
    qi = traj.q[:, 2:-2]
    prods = _prods(qi)
    lhs = (qd * prods) ** 2
    fv = np.empty_like(qi)
    Rv = np.empty_like(qi)
    for i in range(traj.N):
        fv[i] = profile.f(qi[i])
        Rv[i] = R(qi[i])
    rhs = 2.0 * fv * Rv
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))


def integral_drift_fd(traj: Trajectory, *, edge_margin: float = 0.02) -> np.ndarray:
    """Max drift of each integral, momenta from finite-difference velocities.

    p_i = q'_i prod_i / f(q_i) per sample with q' by the fourth-order
    stencil, then the Vandermonde solve; fully independent of the stored
    integral values.  Samples with any coordinate within ``edge_margin``
    (relative to its interval width) of a turning end are excluded: there
    f -> 0 and the division amplifies finite-difference noise without
    bound.  The channel's floor is the stencil truncation, which grows
    during close coordinate passages; the Cartesian-state channel in the
    systems module measures conservation without that limitation.
    """
    from .poly import stackel_solve_batch

    profile = traj.profile
    qd = fd_derivative(traj.q, traj.dx)
    qi = traj.q[:, 2:-2]
    prods = _prods(qi)
    fv = np.empty_like(qi)
    Uv = np.empty_like(qi)
    for i in range(traj.N):
        fv[i] = profile.f(qi[i])
        Uv[i] = profile.U(qi[i])
    keep = np.ones(qi.shape[1], dtype=bool)
    if traj.brackets is not None:
        for i, (lo, hi) in enumerate(traj.brackets):
            width = max(hi - lo, 1e-300)
            keep &= (qi[i] > lo + edge_margin * width) & (qi[i] < hi - edge_margin * width)
    keep &= np.all(np.abs(fv) > 1e-12, axis=0)
    p = qd * prods / fv
    rhs = 0.5 * fv * p**2 + Uv
    Hs = stackel_solve_batch(qi[:, keep].T, rhs[:, keep].T)
    return np.max(np.abs(Hs - traj.H.H[None, :]), axis=0)


def integral_roundtrip_drift(traj: Trajectory) -> np.ndarray:
    """Max drift of integrals_at over momenta from momentum_from_energy.

    Exercises the solve/inverse round trip on the actual samples (it is
    the identity in exact arithmetic); the measured value is the
    floating-point consistency of the Vandermonde factorisations.
    """
    from .benenti import integrals_at, momentum_from_energy

    worst = np.zeros(traj.N)
    step = max(1, len(traj.x) // 2000)
    for k in range(0, len(traj.x), step):
        q = traj.q[:, k]
        try:
            p = momentum_from_energy(traj.profile, traj.H, q, traj.sigma[:, k])
            Hk = integrals_at(traj.profile, q, p)
        except (ForbiddenPointError, ValueError):
            continue
        worst = np.maximum(worst, np.abs(Hk.H - traj.H.H))
    return worst
