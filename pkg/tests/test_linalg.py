import numpy as np
import pytest

from leoshare.linalg import ConvergenceError, dominant_left_singular, hermitian_max_eigvec, jacobi_eigh


def _rand_herm(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5, 12):
        m = _rand_herm(rng, n)
        w, v = jacobi_eigh(m)
        assert np.allclose(w, np.linalg.eigvalsh(m), atol=1e-11)
        assert np.linalg.norm(m @ v - v * w) < 1e-10
        assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)


def test_diagonal_indefinite():
    mu, v = hermitian_max_eigvec(np.diag([3.0, 1.0, -5.0]))
    assert mu == pytest.approx(3.0, abs=1e-12)
    assert abs(abs(v[0]) - 1.0) < 1e-9


def test_identity_residual():
    mu, v = hermitian_max_eigvec(np.eye(4))
    assert mu == pytest.approx(1.0)
    assert np.linalg.norm(np.eye(4) @ v - v) < 1e-10


def test_random_3x3_against_jacobi():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = _rand_herm(rng, 3)
        mu, v = hermitian_max_eigvec(m)
        w, _ = jacobi_eigh(m)
        assert mu == pytest.approx(w[-1], abs=1e-8)
        assert np.linalg.norm(m @ v - mu * v) <= 1e-8


def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        hermitian_max_eigvec(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        hermitian_max_eigvec(np.ones((2, 3)))


def test_non_convergence_is_reported():
    # two eigenvalues 1 and 0.999999: far too slow for a handful of iterations
    c, s = np.cos(0.3), np.sin(0.3)
    q = np.array([[c, -s], [s, c]])
    m = q @ np.diag([1.0, 0.999999]) @ q.T
    with pytest.raises(ConvergenceError):
        hermitian_max_eigvec(m, shift=0.0, max_iter=5)


def test_dominant_left_singular_rank_one():
    rng = np.random.default_rng(2)
    a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    b = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    s, u = dominant_left_singular(np.outer(a, b.conj()))
    assert s == pytest.approx(np.linalg.norm(a) * np.linalg.norm(b))
    assert abs(np.vdot(u, a)) / np.linalg.norm(a) == pytest.approx(1.0, abs=1e-9)
