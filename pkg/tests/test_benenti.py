import numpy as np
import pytest

from bandflow.benenti import (IntegralValues, SeparableProfile, affine_reparam,
                              integrals_at, momentum_from_energy,
                              poisson_residual, potential_coefficients,
                              product_polynomial, rhs_polynomial)
from bandflow.errors import ForbiddenPointError
from bandflow.poly import RealPolynomial, as_rational
from bandflow.separation import SeparationState, integrate
from bandflow.systems import NeumannSpec, neumann_profile

N1 = neumann_profile(NeumannSpec([1.0, 2.0]))
N2 = neumann_profile(NeumannSpec([1.0, 2.0, 3.0]))


def test_neumann_profile_values():
    assert N1.f(1.5) == pytest.approx(1.0)
    assert N1.U(1.5) == pytest.approx(1.5)


def test_integrals_at_single_dof():
    # energy of the state: kinetic 1/2*f*p^2 = 0.5 plus potential 1.5
    H = integrals_at(N1, [1.5], [1.0])
    assert H.H == pytest.approx([2.0])


def test_integrals_zero_potential_zero_momentum():
    prof = SeparableProfile(2, as_rational(1.0), as_rational(0.0))
    H = integrals_at(prof, [1.0, 2.0], [0.0, 0.0])
    assert H.H == pytest.approx([0.0, 0.0])


def test_integrals_flat_metric_two_dof():
    prof = SeparableProfile(2, as_rational(1.0), as_rational(0.0))
    H = integrals_at(prof, [1.0, 2.0], [np.sqrt(2.0), 2.0])
    # rhs = (+1, +2); solve [[1,1],[2,1]] H = rhs
    assert H.H == pytest.approx([1.0, 0.0])


def test_rhs_polynomial_zero():
    prof = SeparableProfile(2, as_rational(1.0), as_rational(0.0))
    R = rhs_polynomial(prof, IntegralValues([0.0, 0.0]))
    assert R.num.is_zero


@pytest.mark.parametrize("h0,expect", [(0.0, [1.0, -3.0]), (1.0, [1.0, -2.0])])
def test_rhs_polynomial_shift(h0, expect):
    R = rhs_polynomial(N1, IntegralValues([h0]))
    assert R.num.coeffs == pytest.approx(expect)


def test_momentum_turning_point():
    # R(t) = t - 1.7 at H0 = 1.3: interior turning point with p = 0
    p = momentum_from_energy(N1, IntegralValues([1.3]), [1.7], [1.0])
    assert p == pytest.approx([0.0], abs=1e-12)


def test_momentum_forbidden_point():
    with pytest.raises(ForbiddenPointError) as exc:
        momentum_from_energy(N1, IntegralValues([1.0]), [1.5], [1.0])
    assert exc.value.index == 0


def test_momentum_value():
    # f(1.9) = 0.36, R(1.9) = 0.9 at H0 = 2.0
    assert N1.f(1.9) == pytest.approx(0.36)
    p = momentum_from_energy(N1, IntegralValues([2.0]), [1.9], [1.0])
    assert p == pytest.approx([np.sqrt(5.0)])


def test_momentum_integrals_roundtrip(rng):
    for _ in range(100):
        q = np.array([rng.uniform(1.05, 1.95), rng.uniform(2.05, 2.95)])
        p = rng.normal(size=2)
        H = integrals_at(N2, q, p)
        p2 = momentum_from_energy(N2, H, q, np.sign(p + (p == 0)))
        H2 = integrals_at(N2, q, p2)
        assert H2.H == pytest.approx(H.H, abs=1e-10)


def test_potential_coefficients_single():
    out = potential_coefficients(N1.U, [1.7])
    assert out == pytest.approx([N1.U(1.7)])


def test_potential_coefficients_square():
    out = potential_coefficients(RealPolynomial([1.0, 0.0, 0.0]), [0.0, 1.0])
    assert out == pytest.approx([1.0, 0.0])


def test_potential_coefficients_constant():
    out = potential_coefficients(RealPolynomial([4.0]), [0.3, 1.7, 2.9])
    assert out == pytest.approx([0.0, 0.0, 4.0])


def test_potential_coefficients_low_degree_exact(rng):
    for _ in range(25):
        n = int(rng.integers(1, 6))
        deg = int(rng.integers(0, n))
        coeffs = rng.normal(size=deg + 1)
        q = np.sort(rng.uniform(-3, 3, size=n))
        if n > 1 and np.min(np.diff(q)) < 0.2:
            continue
        got = potential_coefficients(RealPolynomial(coeffs), q)
        assert got == pytest.approx(
            np.concatenate([np.zeros(n - deg - 1), coeffs]), abs=1e-9)


def test_poisson_diagonal_is_zero():
    assert poisson_residual(N2, [1.5, 2.5], [0.3, -0.2], 0, 0) == 0.0


def test_poisson_single_dof():
    assert poisson_residual(N1, [1.5], [0.4], 0, 0) == 0.0


def test_poisson_two_dof_example():
    res = poisson_residual(N2, [1.5, 2.5], [0.3, -0.2], 0, 1, h=1e-4)
    assert res < 1e-6


def test_poisson_random_sweep(rng):
    # strict version (100 states each) runs in the verify suite
    for _ in range(20):
        q = np.array([rng.uniform(1.1, 1.9), rng.uniform(2.1, 2.9)])
        p = rng.normal(size=2)
        assert poisson_residual(N2, q, p, 0, 1, h=1e-4) <= 1e-5


def test_affine_identity():
    out = affine_reparam(N1, 1.0, 0.0)
    assert out.f.num.coeffs == pytest.approx(N1.f.num.coeffs)
    assert out.U.num.coeffs == pytest.approx(N1.U.num.coeffs)


def test_affine_flat_metric_scaling():
    prof = SeparableProfile(1, as_rational(1.0), as_rational(0.0))
    out = affine_reparam(prof, 2.0, 0.0)
    assert out.f.num.coeffs == pytest.approx([4.0])


def test_affine_potential_shift():
    prof = SeparableProfile(1, as_rational(1.0),
                            as_rational(RealPolynomial([1.0, 0.0])))
    out = affine_reparam(prof, 1.0, 5.0)
    assert out.U.num.coeffs == pytest.approx([1.0, -5.0])


def test_affine_double_application_is_identity(rng):
    c1, c2 = 1.7, -0.4
    out = affine_reparam(affine_reparam(N2, c1, c2), 1.0 / c1, -c2 / c1)
    assert out.f.num.coeffs == pytest.approx(N2.f.num.coeffs, abs=1e-12)
    assert out.U.num.coeffs == pytest.approx(N2.U.num.coeffs, abs=1e-12)


def test_affine_trajectory_correspondence():
    """q_new(x) = c1 q(beta x) + c2 with beta = c1^((1-N)/2), H transported."""
    c1, c2 = 1.5, 0.7
    q0 = np.array([1.4, 2.6])
    p0 = np.array([0.6, -0.4])
    H = integrals_at(N2, q0, p0)
    st = SeparationState(q0, np.sign(p0), H)
    traj = integrate(N2, st, (0.0, 4.0), 1e-3)

    new_prof = affine_reparam(N2, c1, c2)
    hpoly = RealPolynomial(H.H).compose_affine(1.0 / c1, -c2 / c1)
    H_new = np.zeros(2)
    H_new[2 - len(hpoly.coeffs):] = hpoly.coeffs
    beta = c1 ** ((1 - 2) / 2.0)
    st_new = SeparationState(c1 * q0 + c2, np.sign(p0), IntegralValues(H_new))
    span_new = 4.0 / beta
    traj_new = integrate(new_prof, st_new, (0.0, span_new), 1e-3 / beta)
    # same sample count; q_new(x/beta) should equal c1 q(x) + c2
    m = min(traj.q.shape[1], traj_new.q.shape[1])
    assert traj_new.q[:, :m] == pytest.approx(c1 * traj.q[:, :m] + c2, abs=1e-7)


def test_product_polynomial_is_the_match_product():
    P = product_polynomial(N1, IntegralValues([0.0]))
    assert P.is_polynomial
    assert P.num.coeffs == pytest.approx([-4.0, 24.0, -44.0, 24.0])
