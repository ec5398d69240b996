import numpy as np
import pytest

from bandflow.errors import IllConditionedError, PoleError
from bandflow.poly import (RationalFunction, RealPolynomial, elementary_symmetric,
                           from_roots, real_roots, stackel_solve)

CUBIC = RealPolynomial([1.0, -6.0, 11.0, -6.0])  # (t-1)(t-2)(t-3)


def test_eval_at_root():
    assert CUBIC(1.0) == 0.0


def test_eval_constant_term():
    assert CUBIC(0.0) == -6.0


def test_eval_rational():
    r = RationalFunction(from_roots([1.0, 2.0], -4.0))
    assert r(1.5) == pytest.approx(1.0, abs=1e-15)


def test_eval_at_pole_raises():
    r = RationalFunction(RealPolynomial([1.0, 0.0]), RealPolynomial([1.0, -2.0]))
    with pytest.raises(PoleError) as exc:
        r(2.0)
    assert exc.value.t == 2.0


def test_real_roots_simple():
    rl = real_roots(CUBIC)
    assert rl.pairs() == [(pytest.approx(1.0), 1), (pytest.approx(2.0), 1),
                          (pytest.approx(3.0), 1)]
    assert rl.complex_count == 0


def test_real_roots_triple():
    rl = real_roots(RealPolynomial([1.0, 0.0, 0.0, 0.0]))
    assert rl.values == pytest.approx([0.0], abs=1e-7)
    assert rl.multiplicities.tolist() == [3]


def test_real_roots_half_scaled():
    p = from_roots([0.0, 1.0, 2.0], 0.5)
    assert p.coeffs == pytest.approx([0.5, -1.5, 1.0, 0.0])
    rl = real_roots(p)
    assert rl.expanded() == pytest.approx([0.0, 1.0, 2.0], abs=1e-12)


def test_real_roots_counts_nonreal():
    rl = real_roots(RealPolynomial([1.0, 0.0, 1.0]))  # t^2 + 1
    assert rl.complex_count == 2
    assert rl.total == 0


def test_real_roots_clusters_near_double():
    p = from_roots([1.0, 1.0 + 1e-9, 3.0], 1.0)
    rl = real_roots(p)
    assert rl.multiplicities.tolist() == [2, 1]


def test_from_roots_empty():
    assert from_roots([], 1.0).coeffs.tolist() == [1.0]


def test_from_roots_cubic():
    assert from_roots([1, 2, 3], 1.0).coeffs == pytest.approx([1, -6, 11, -6])


def test_elementary_symmetric_single():
    assert elementary_symmetric([2.5]).tolist() == [-2.5]


def test_elementary_symmetric_triple():
    assert elementary_symmetric([1.0, 2.0, 3.0]) == pytest.approx([-6.0, 11.0, -6.0])


def test_elementary_symmetric_pair():
    assert elementary_symmetric([1.5, 2.5]) == pytest.approx([-4.0, 3.75])


def test_elementary_symmetric_matches_from_roots_exactly(rng):
    for _ in range(50):
        q = rng.uniform(-5, 5, size=rng.integers(1, 8))
        assert np.array_equal(elementary_symmetric(q), from_roots(q, 1.0).coeffs[1:])


def test_stackel_single():
    assert stackel_solve([0.7], [4.0]) == pytest.approx([4.0])


def test_stackel_two_nodes():
    sol = stackel_solve([1.0, 2.0], [1.0, 3.0])
    assert sol == pytest.approx([2.0, -1.0])


def test_stackel_homogeneous():
    assert stackel_solve([0.0, 1.0], [0.0, 0.0]) == pytest.approx([0.0, 0.0])


def test_stackel_coincident_nodes_raise():
    with pytest.raises(IllConditionedError):
        stackel_solve([1.0, 1.0 + 1e-12], [0.0, 1.0])


def test_stackel_residual_sweep(rng):
    for _ in range(100):
        n = int(rng.integers(2, 7))
        q = np.sort(rng.uniform(-4, 4, size=n))
        if np.min(np.diff(q)) < 0.1:
            continue
        rhs = rng.normal(size=n)
        sol = stackel_solve(q, rhs)
        S = np.vander(q, n, increasing=False)
        assert np.max(np.abs(S @ sol - rhs)) <= 1e-12 * np.linalg.cond(S)


def test_roots_roundtrip_sweep(rng):
    for _ in range(100):
        deg = int(rng.integers(1, 10))
        roots = np.sort(rng.uniform(-10, 10, size=deg))
        if deg > 1 and np.min(np.diff(roots)) < 0.3:
            continue
        scale = rng.uniform(0.2, 3.0) * rng.choice([-1.0, 1.0])
        rec = real_roots(from_roots(roots, scale))
        assert rec.expanded() == pytest.approx(roots, abs=1e-10)


def test_eval_exact_on_stored_roots(rng):
    for _ in range(50):
        deg = int(rng.integers(1, 9))
        roots = np.sort(rng.uniform(-8, 8, size=deg))
        p = from_roots(roots, rng.uniform(0.5, 2.0))
        for r in roots:
            assert abs(p(r)) <= 1e-10 * p.norm_inf()


def test_rational_reduction_cancels_shared_root():
    num = from_roots([1.0, 0.0], 1.0)        # t(t-1)
    den = RealPolynomial([1.0, 0.0])          # t
    r = RationalFunction(num, den)
    assert r.is_polynomial
    assert r.num.coeffs == pytest.approx([1.0, -1.0])


def test_polynomial_affine_compose():
    p = CUBIC.compose_affine(1.0, 2.0)  # (t+2-1)(t+2-2)(t+2-3) = (t+1)t(t-1)
    assert p.coeffs == pytest.approx([1.0, 0.0, -1.0, 0.0])
