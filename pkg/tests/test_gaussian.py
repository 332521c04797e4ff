import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from caxial.gaussian import (AffineSurface, IndefiniteOnSurface,
                             QuadraticDensity, SingularOperator, kernel_basis,
                             constrained_minimize, log_partition,
                             subspace_covariance, moment_generating,
                             push_constraint, surface_min_eig)


def rng(seed=3):
    return np.random.default_rng(seed)


def random_spd(n, r, shift=0.5):
    m = r.standard_normal((n, n))
    return m @ m.T + shift * np.eye(n)


def test_kernel_basis_identity_empty():
    assert kernel_basis(np.eye(4)).shape == (4, 0)


def test_kernel_basis_orthonormal():
    r = rng()
    K = r.standard_normal((3, 8))
    B = kernel_basis(K)
    assert B.shape == (8, 5)
    assert np.allclose(B.T @ B, np.eye(5), atol=1e-12)
    assert np.abs(K @ B).max() < 1e-12 * np.abs(K).max()


def test_minimize_homogeneous_zero():
    r = rng()
    d = QuadraticDensity(random_spd(6, r))
    s = AffineSurface.from_constraints(r.standard_normal((2, 6)))
    assert np.abs(constrained_minimize(d, s)).max() < 1e-12


def test_minimize_unconstrained():
    r = rng()
    F = random_spd(5, r)
    J = r.standard_normal(5)
    d = QuadraticDensity(F, J)
    s = AffineSurface.unconstrained(5)
    assert np.allclose(constrained_minimize(d, s), np.linalg.solve(F, J),
                       atol=1e-10)


def test_minimize_first_order_optimality():
    r = rng()
    F = random_spd(7, r)
    d = QuadraticDensity(F, r.standard_normal(7))
    K = r.standard_normal((3, 7))
    b = r.standard_normal(3)
    s = AffineSurface.from_constraints(K, b)
    v = constrained_minimize(d, s)
    assert np.abs(K @ v - b).max() < 1e-10
    grad = F @ v - d.linear
    # gradient orthogonal to the surface directions
    assert np.abs(s.basis.T @ grad).max() < 1e-9


def test_minimize_independent_of_particular_point():
    r = rng()
    F = random_spd(7, r)
    d = QuadraticDensity(F, r.standard_normal(7))
    K = r.standard_normal((3, 7))
    b = r.standard_normal(3)
    s1 = AffineSurface.from_constraints(K, b)
    # different particular solution on the same surface
    shift = s1.basis @ r.standard_normal(s1.surface_dim)
    s2 = AffineSurface(K, b, s1.basis, s1.particular + shift, s1.row_rank,
                       s1.log_gram)
    assert np.allclose(constrained_minimize(d, s1),
                       constrained_minimize(d, s2), atol=1e-10)


def test_indefinite_raises():
    d = QuadraticDensity(np.diag([1.0, -1.0]))
    s = AffineSurface.unconstrained(2)
    with pytest.raises(IndefiniteOnSurface):
        constrained_minimize(d, s)
    # but a constraint removing the bad direction makes it fine
    s2 = AffineSurface.from_constraints(np.array([[0.0, 1.0]]))
    assert surface_min_eig(d, s2) > 0


def test_log_partition_1d():
    a = 2.7
    d = QuadraticDensity(np.array([[a]]))
    s = AffineSurface.unconstrained(1)
    assert abs(log_partition(d, s) - 0.5 * np.log(2 * np.pi / a)) < 1e-12


def test_log_partition_additivity():
    r = rng()
    F1, F2 = random_spd(3, r), random_spd(4, r)
    d1 = QuadraticDensity(F1, r.standard_normal(3))
    d2 = QuadraticDensity(F2, r.standard_normal(4))
    dd = QuadraticDensity(np.block([[F1, np.zeros((3, 4))],
                                    [np.zeros((4, 3)), F2]]),
                          np.concatenate([d1.linear, d2.linear]))
    lp = log_partition(dd, AffineSurface.unconstrained(7))
    assert abs(lp - log_partition(d1, AffineSurface.unconstrained(3))
               - log_partition(d2, AffineSurface.unconstrained(4))) < 1e-10


def test_log_partition_invariant_under_reorthonormalization():
    r = rng()
    d = QuadraticDensity(random_spd(8, r), r.standard_normal(8))
    K = r.standard_normal((3, 8))
    b = r.standard_normal(3)
    s1 = AffineSurface.from_constraints(K, b)
    # rotate the kernel basis: same surface, different orthonormal basis
    q, _ = np.linalg.qr(r.standard_normal((s1.surface_dim, s1.surface_dim)))
    s2 = AffineSurface(K, b, s1.basis @ q, s1.particular, s1.row_rank,
                       s1.log_gram)
    for conv in ("surface", "dirac"):
        assert abs(log_partition(d, s1, conv)
                   - log_partition(d, s2, conv)) < 1e-10


def test_log_partition_dirac_row_scaling():
    # doubling a constraint row halves the dirac integral, and leaves the
    # surface integral unchanged
    r = rng()
    d = QuadraticDensity(random_spd(5, r))
    K = r.standard_normal((2, 5))
    s1 = AffineSurface.from_constraints(K)
    s2 = AffineSurface.from_constraints(np.vstack([2 * K[0], K[1]]))
    assert abs(log_partition(d, s1) - log_partition(d, s2)) < 1e-10
    assert abs(log_partition(d, s1, "dirac") - log_partition(d, s2, "dirac")
               - np.log(2.0)) < 1e-10


def test_log_partition_dirac_needs_full_rank():
    r = rng()
    d = QuadraticDensity(random_spd(5, r))
    row = r.standard_normal(5)
    s = AffineSurface.from_constraints(np.vstack([row, row]))
    log_partition(d, s)  # surface convention fine
    with pytest.raises(SingularOperator):
        log_partition(d, s, "dirac")


def test_log_partition_matches_brute_force_eigen():
    r = rng()
    d = QuadraticDensity(random_spd(6, r), r.standard_normal(6))
    K = r.standard_normal((2, 6))
    s = AffineSurface.from_constraints(K, r.standard_normal(2))
    R = s.basis.T @ d.form @ s.basis
    w = np.linalg.eigvalsh(R)
    vstar = constrained_minimize(d, s)
    expect = (0.5 * len(w) * np.log(2 * np.pi) - 0.5 * np.sum(np.log(w))
              + d.log_value(vstar))
    assert abs(log_partition(d, s) - expect) < 1e-10


def test_subspace_covariance_support_and_pullback():
    r = rng()
    d = QuadraticDensity(random_spd(6, r))
    K = r.standard_normal((2, 6))
    s = AffineSurface.from_constraints(K)
    cov = subspace_covariance(d, s)
    assert np.abs(K @ cov).max() < 1e-10
    pulled = s.basis.T @ cov @ s.basis
    expect = np.linalg.inv(s.basis.T @ d.form @ s.basis)
    assert np.allclose(pulled, expect, atol=1e-10)


def test_covariance_identity_form():
    d = QuadraticDensity(np.eye(4))
    s = AffineSurface.unconstrained(4)
    assert np.allclose(subspace_covariance(d, s), np.eye(4), atol=1e-12)


def test_moment_generating_quadratic_consistency():
    r = rng()
    d = QuadraticDensity(random_spd(5, r), r.standard_normal(5))
    s = AffineSurface.from_constraints(r.standard_normal((2, 5)),
                                       r.standard_normal(2))
    J = r.standard_normal(5)
    m1 = moment_generating(d, s, J)
    m2 = moment_generating(d, s, 2 * J)
    mean = constrained_minimize(d, s)
    # quadratic polynomial identity in the scale of J
    assert abs((m2 - 2 * (mean @ J)) - 4 * (m1 - mean @ J)) < 1e-9
    assert moment_generating(d, s, np.zeros(5)) == 0.0


def test_moment_generating_matches_log_partition_shift():
    # log E e^<v,J> = log_partition(with linear + J) - log_partition(base)
    r = rng()
    d = QuadraticDensity(random_spd(5, r), r.standard_normal(5))
    s = AffineSurface.from_constraints(r.standard_normal((2, 5)),
                                       r.standard_normal(2))
    J = r.standard_normal(5)
    shifted = QuadraticDensity(d.form, d.linear + J, d.log_const)
    assert abs(moment_generating(d, s, J)
               - (log_partition(shifted, s) - log_partition(d, s))) < 1e-9


@pytest.mark.parametrize("convention", ["surface", "dirac"])
def test_push_constraint_matches_pointwise_partition(convention):
    # the pushed density evaluated at A equals the fiber integral at A
    r = rng()
    F = random_spd(7, r)
    l = r.standard_normal(7)
    d = QuadraticDensity(F, l, 0.3)
    K = r.standard_normal((3, 7))
    E = r.standard_normal((3, 2))
    pushed = push_constraint(d, K, E, convention=convention)
    for A in (np.zeros(2), r.standard_normal(2), r.standard_normal(2)):
        s = AffineSurface.from_constraints(K, E @ A)
        assert abs(pushed.log_value(A) - log_partition(d, s, convention)) < 1e-9


def test_push_constraint_gaussian_marginal():
    # pushing with K = [I 0] (dirac) is ordinary marginalization
    r = rng()
    F = random_spd(4, r)
    d = QuadraticDensity(F)
    K = np.hstack([np.eye(2), np.zeros((2, 2))])
    # fiber {v : v[:2] = A}: integrate out v[2:]
    pushed = push_constraint(d, K, np.eye(2), convention="dirac")
    cov = np.linalg.inv(F)
    marg_form = np.linalg.inv(cov[:2, :2])
    A = r.standard_normal(2)
    expect = (-0.5 * A @ marg_form @ A
              + 0.5 * np.linalg.slogdet(F)[1] * 0 + pushed.log_value(np.zeros(2)))
    assert abs(pushed.log_value(A) - expect) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_minimizer_feasible_property(seed):
    r = np.random.default_rng(seed)
    F = random_spd(6, r)
    d = QuadraticDensity(F, r.standard_normal(6))
    K = r.standard_normal((2, 6))
    b = r.standard_normal(2)
    s = AffineSurface.from_constraints(K, b)
    v = constrained_minimize(d, s)
    assert np.abs(K @ v - b).max() < 1e-8
