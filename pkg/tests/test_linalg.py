import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sensenoise.errors import DimensionMismatch, NotHermitian, NotPositiveDefinite
from sensenoise.linalg import batched_cholesky, cholesky_factor, hermitian, hermitian_solve

from conftest import random_spd


def test_hermitian_identity_and_conjugation():
    np.testing.assert_array_equal(hermitian(np.eye(3)), np.eye(3))
    np.testing.assert_array_equal(hermitian(np.array([[1j]])), np.array([[-1j]]))


def test_hermitian_involution(rng):
    m = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    np.testing.assert_array_equal(hermitian(hermitian(m)), m)
    assert hermitian(m).shape == (3, 2)
    assert hermitian(m)[2, 1] == np.conj(m[1, 2])


def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky_factor(np.eye(4)), np.eye(4))


def test_cholesky_two_by_two():
    sigma = np.array([[1.0, 0.2], [0.2, 1.0]])
    t = cholesky_factor(sigma)
    np.testing.assert_allclose(t, [[1, 0], [0.2, np.sqrt(0.96)]], atol=1e-15)
    np.testing.assert_allclose(t @ t.conj().T, sigma, rtol=1e-12, atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor([[1.0, 1.1], [1.1, 1.0]])


def test_cholesky_rejects_asymmetric():
    with pytest.raises(NotHermitian):
        cholesky_factor([[1.0, 0.2], [0.3, 1.0]])


def test_cholesky_tolerates_roundoff_asymmetry():
    sigma = np.array([[2.0, 0.5], [0.5 + 1e-14, 2.0]])
    t = cholesky_factor(sigma)
    np.testing.assert_allclose(t @ t.T, 0.5 * (sigma + sigma.T), rtol=1e-12)


def test_solve_examples(rng):
    b = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    np.testing.assert_allclose(hermitian_solve(np.eye(3), b), b, rtol=1e-15)
    np.testing.assert_allclose(hermitian_solve(2 * np.eye(3), b), b / 2, rtol=1e-15)


def test_solve_random_spd_residual(rng):
    a = random_spd(rng, 4)
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    x = hermitian_solve(a, b)
    assert np.linalg.norm(a @ x - b) / np.linalg.norm(b) < 1e-10
    np.testing.assert_allclose(x, np.linalg.solve(a, b), rtol=1e-10)


def test_solve_errors():
    with pytest.raises(DimensionMismatch):
        hermitian_solve(np.eye(3), np.ones(4))
    with pytest.raises(NotPositiveDefinite):
        hermitian_solve(-np.eye(2), np.ones(2))


def test_batched_cholesky_flags_only_bad_members():
    a = np.stack([np.eye(2), np.ones((2, 2)), 3 * np.eye(2)])
    t, bad = batched_cholesky(a, rel_tol=1e-12)
    np.testing.assert_array_equal(bad, [False, True, False])
    np.testing.assert_allclose(t[2], np.sqrt(3) * np.eye(2))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 32), seed=st.integers(0, 2**32 - 1))
def test_cholesky_reconstructs(n, seed):
    sigma = random_spd(np.random.default_rng(seed), n)
    t = cholesky_factor(sigma)
    assert np.allclose(np.triu(t, 1), 0)
    err = np.linalg.norm(t @ t.conj().T - sigma) / np.linalg.norm(sigma)
    assert err < 1e-10


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 32), seed=st.integers(0, 2**32 - 1))
def test_solve_recovers_solution(n, seed):
    rng = np.random.default_rng(seed)
    a = random_spd(rng, n)
    x0 = rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))
    x = hermitian_solve(a, a @ x0)
    assert np.linalg.norm(x - x0) / np.linalg.norm(x0) < 1e-9


@settings(max_examples=30, deadline=None)
@given(rows=st.integers(1, 6), cols=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_hermitian_is_frobenius_isometry(rows, cols, seed):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    assert np.linalg.norm(hermitian(m)) == pytest.approx(np.linalg.norm(m), rel=1e-15)
    np.testing.assert_array_equal(hermitian(hermitian(m)), m)
