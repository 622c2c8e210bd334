"""Small dense complex-matrix kernels.

Everything here works on numpy arrays whose last two axes are the matrix
axes, so a whole image worth of tiny systems (one per aliased pixel group)
is factored in a single vectorized pass. Matrices never exceed a few tens
of rows (coils, aliases); the loops run over that small dimension only.
"""

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotPositiveDefinite

HERMITIAN_ATOL = 1e-12


def hermitian(m):
    """Conjugate transpose over the last two axes."""
    m = np.asarray(m)
    if m.ndim < 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    return np.conj(np.swapaxes(m, -1, -2))


def _check_square(a, name="matrix"):
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def symmetrize(a, atol=HERMITIAN_ATOL):
    """Return ``(a + a^H) / 2`` after checking ``max|a - a^H| <= atol``."""
    a = _check_square(np.asarray(a, dtype=complex))
    asym = np.max(np.abs(a - hermitian(a))) if a.size else 0.0
    if asym > atol:
        raise NotHermitian(f"max |A - A^H| = {asym:.3e} exceeds {atol:g}")
    return 0.5 * (a + hermitian(a))


def batched_cholesky(a, rel_tol=0.0):
    """Lower Cholesky factors of a stack of Hermitian matrices.

    Args:
        a: array ``[..., n, n]``, assumed Hermitian (only the lower triangle
            and the real part of the diagonal are read).
        rel_tol: a pivot ``d`` is rejected when ``d <= rel_tol * max(diag)``
            of its own matrix. ``0`` rejects only non-positive pivots.

    Returns:
        ``(t, bad)``: factors ``[..., n, n]`` and a boolean mask ``[...]`` of
        matrices that failed. Failed entries hold garbage-free but
        meaningless factors (rejected pivots are replaced by 1).
    """
    a = np.asarray(a, dtype=complex)
    n = a.shape[-1]
    batch = a.shape[:-2]
    t = np.zeros_like(a)
    bad = np.zeros(batch, dtype=bool)
    diag = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    thresh = rel_tol * np.max(diag, axis=-1) if n else np.zeros(batch)
    for j in range(n):
        row = t[..., j, :j]
        d = diag[..., j] - np.sum(np.abs(row) ** 2, axis=-1)
        rejected = d <= thresh
        bad |= rejected
        piv = np.sqrt(np.where(rejected, 1.0, d))
        t[..., j, j] = piv
        if j + 1 < n:
            below = a[..., j + 1:, j] - np.einsum("...ik,...k->...i", t[..., j + 1:, :j], np.conj(row))
            t[..., j + 1:, j] = below / piv[..., None]
    return t, bad


def forward_substitute(t, b):
    """Solve ``t @ y = b`` for lower-triangular ``t``; ``b`` is ``[..., n, m]``."""
    n = t.shape[-1]
    y = np.zeros(np.broadcast_shapes(t.shape[:-2], b.shape[:-2]) + b.shape[-2:], dtype=complex)
    for i in range(n):
        acc = b[..., i, :] - np.einsum("...k,...km->...m", t[..., i, :i], y[..., :i, :])
        y[..., i, :] = acc / t[..., i, i, None]
    return y


def back_substitute_adjoint(t, y):
    """Solve ``t^H @ x = y`` for lower-triangular ``t``."""
    n = t.shape[-1]
    x = np.zeros_like(y)
    for i in range(n - 1, -1, -1):
        # row i of t^H beyond the diagonal is conj(t[i+1:, i])
        acc = y[..., i, :] - np.einsum("...k,...km->...m", np.conj(t[..., i + 1:, i]), x[..., i + 1:, :])
        x[..., i, :] = acc / np.conj(t[..., i, i])[..., None]
    return x


def cholesky_factor(sigma):
    """Lower-triangular ``T`` with ``T @ T^H == sigma``.

    The input is checked for Hermitian symmetry (absolute tolerance 1e-12 on
    the largest entry of ``sigma - sigma^H``) and symmetrized before
    factoring.

    Raises:
        NotHermitian: symmetry check failed.
        NotPositiveDefinite: a pivot was not strictly positive.
    """
    sigma = symmetrize(sigma)
    t, bad = batched_cholesky(sigma)
    if np.any(bad):
        raise NotPositiveDefinite("matrix is not positive definite")
    return t


def solve_hpd(a, b, rel_tol=0.0):
    """Batched Hermitian positive-definite solve, reporting failures.

    Returns ``(x, bad)``. Entries of ``x`` flagged in ``bad`` are zero.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    t, bad = batched_cholesky(a, rel_tol)
    x = back_substitute_adjoint(t, forward_substitute(t, b))
    if np.any(bad):
        x[bad] = 0
    return x, bad


def hermitian_solve(a, b):
    """Solve ``a @ x = b`` with ``a`` Hermitian positive definite.

    ``b`` may be a vector or a matrix with as many rows as ``a``.

    Raises:
        DimensionMismatch: shapes are incompatible.
        NotHermitian, NotPositiveDefinite: ``a`` is not a valid HPD matrix.
    """
    a = symmetrize(a)
    b = np.asarray(b, dtype=complex)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"cannot solve {a.shape} system against {b.shape}")
    x, bad = solve_hpd(a, b)
    if bad:
        raise NotPositiveDefinite("matrix is not positive definite")
    return x[:, 0] if vector else x
