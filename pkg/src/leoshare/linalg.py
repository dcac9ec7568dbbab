"""Small dense Hermitian eigen kernels.

``hermitian_max_eigvec`` (shifted power iteration) is what the beamformers
use.  ``jacobi_eigh`` is a cyclic complex Jacobi-rotation solver kept as an
independent cross-check; it is slow and only meant for n of a few dozen.
"""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
RESIDUAL_TOL = 1e-10
MAX_ITER = 10_000
_STAGNATION_WINDOW = 1_000


class ConvergenceError(RuntimeError):
    pass


def _check_hermitian(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if m.size and np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (m + m.conj().T)


def _power_iterate(m, shift, v, tol, max_iter):
    """Returns (eigenvalue, vector, residual, iterations_used, converged)."""
    best = np.inf
    best_at = 0
    for it in range(1, max_iter + 1):
        mv = m @ v
        mu = float(np.vdot(v, mv).real)
        res = float(np.linalg.norm(mv - mu * v))
        if res <= tol:
            return mu, v, res, it, True
        if res < 0.5 * best:
            best, best_at = res, it
        elif it - best_at > _STAGNATION_WINDOW:
            return mu, v, res, it, False
        y = mv + shift * v
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return mu, v, res, it, False
        v = y / norm
    return mu, v, res, max_iter, False


def hermitian_max_eigvec(m, shift: float | None = None, tol: float = RESIDUAL_TOL,
                         max_iter: int = MAX_ITER, seed: int = 0):
    """Algebraically largest eigenpair of a Hermitian matrix by shifted power iteration.

    Iterates on ``M + shift*I`` so the wanted eigenvalue dominates in
    magnitude even when ``M`` is indefinite.  The default shift is the
    infinity norm of ``M``, an upper bound on its spectral radius; callers
    that know a tighter bound on ``-lambda_min`` should pass it.

    Starts from the normalized all-ones vector and retries once from a seeded
    random vector if the residual stops improving.  Raises
    :class:`ConvergenceError` when neither start reaches the tolerance.
    """
    m = _check_hermitian(m)
    n = m.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    if shift is None:
        shift = float(np.max(np.sum(np.abs(m), axis=1)))
    # residual below a few ulps of ||M|| is not attainable in float64
    floor = 64.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(m))) * n)
    tol = max(tol, floor)

    v = np.ones(n, dtype=complex) / np.sqrt(n)
    mu, v, res, used, ok = _power_iterate(m, shift, v, tol, max_iter)
    if not ok and used < max_iter:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v /= np.linalg.norm(v)
        log.debug("power iteration stagnated at residual %.3g; restarting", res)
        mu, v, res, _, ok = _power_iterate(m, shift, v, tol, max_iter - used)
    if not ok:
        raise ConvergenceError(f"power iteration did not converge (residual {res:.3g})")
    return mu, v


def dominant_left_singular(h):
    """Largest singular value and unit left singular vector of ``h`` via power iteration on H H^H."""
    h = np.asarray(h, dtype=complex)
    gram = h @ h.conj().T
    sigma_sq, u = hermitian_max_eigvec(gram, shift=0.0)
    return float(np.sqrt(max(sigma_sq, 0.0))), u


def jacobi_eigh(m, tol: float = 1e-14, max_sweeps: int = 100):
    """All eigenpairs of a Hermitian matrix by cyclic complex Jacobi rotations.

    Returns eigenvalues in ascending order and eigenvectors as columns.
    """
    a = _check_hermitian(m).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # diag(1, conj(phase)) makes the pivot block real; then a real rotation zeroes it
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                v[:, idx] = v[:, idx] @ g
                a[p, q] = a[q, p] = 0.0
    else:
        raise ConvergenceError("Jacobi sweeps did not converge")
    w = np.diag(a).real
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
