"""Dense-matrix primitives shared by every other module.

Matrices are plain C-contiguous float64 numpy arrays, row-major, with columns
holding samples throughout the package. Nonnegativity is enforced per use via
:func:`check_nonneg`, not by a wrapper type.
"""

import numpy as np

from .errors import ConvergenceError, InvalidInputError
from . import kernels

POWER_ITER_CAP = 10_000
_RESTART_SEED = 0x5EED


def as_matrix(a, name="matrix"):
    """Coerce to a finite 2-d float64 C-contiguous array or raise."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got ndim={m.ndim}")
    if m.shape[0] == 0 or m.shape[1] == 0:
        raise InvalidInputError(f"{name} must be nonempty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return m


def check_nonneg(m, name="matrix"):
    """Raise unless every entry of ``m`` is >= 0."""
    if np.min(m) < 0:
        i, j = np.unravel_index(int(np.argmin(m)), m.shape)
        raise InvalidInputError(
            f"{name} must be nonnegative; entry [{i},{j}] = {m[i, j]}")
    return m


def project_nonneg(m):
    """Entrywise projection onto the nonnegative orthant: max(m, 0)."""
    m = as_matrix(m)
    return np.maximum(m, 0.0)


def frobenius_sq(m):
    """Sum of squared entries."""
    r = np.asarray(m, dtype=np.float64).ravel()
    return float(np.dot(r, r))


def ones_gram_norm(dim):
    """Spectral norm of the all-ones dim x dim matrix, which equals dim."""
    dim = int(dim)
    if dim < 1:
        raise InvalidInputError(f"dim must be >= 1, got {dim}")
    return float(dim)


def sym_spectral_norm(gram, tol=1e-9, max_iters=POWER_ITER_CAP):
    """Top eigenvalue of a symmetric PSD matrix by power iteration.

    Starts from the normalized all-ones vector for reproducibility; if that
    vector turns out to be orthogonal to the top eigenspace (flagged by a zero
    Rayleigh estimate on a nonzero matrix), restarts once from a fixed seeded
    pseudorandom vector.
    """
    gram = as_matrix(gram, "gram")
    n = gram.shape[0]
    if gram.shape[1] != n:
        raise InvalidInputError(f"gram must be square, got shape {gram.shape}")
    if tol <= 0:
        raise InvalidInputError(f"tol must be > 0, got {tol}")
    if not np.any(gram):
        return 0.0

    v0 = np.full(n, 1.0 / np.sqrt(n))
    lam, _, status = kernels.sym_top_eig(gram, v0, tol, max_iters)
    if lam <= 0.0:
        rng = np.random.default_rng(_RESTART_SEED)
        v0 = rng.standard_normal(n)
        v0 /= np.sqrt(np.dot(v0, v0))
        lam, _, status = kernels.sym_top_eig(gram, v0, tol, max_iters)
    if status != kernels.CONVERGED:
        raise ConvergenceError(
            f"power iteration did not converge within {max_iters} iterations",
            estimate=float(max(lam, 0.0)))
    return float(max(lam, 0.0))


def spectral_norm(m, tol=1e-9, max_iters=POWER_ITER_CAP):
    """Largest singular value of ``m`` via power iteration on m.T @ m.

    Args:
        m: nonempty matrix.
        tol: relative tolerance on the squared-norm estimate.
        max_iters: iteration cap; exceeding it raises ConvergenceError with
            the last estimate attached.
    """
    m = as_matrix(m)
    try:
        lam = sym_spectral_norm(m.T @ m, tol=tol, max_iters=max_iters)
    except ConvergenceError as e:
        raise ConvergenceError(str(e), estimate=float(np.sqrt(max(e.estimate, 0.0)))) from None
    return float(np.sqrt(lam))
