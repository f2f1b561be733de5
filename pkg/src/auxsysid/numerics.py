"""Small dense linear-algebra kernel.

Everything else in the package goes through these helpers so that the
tolerances live in one place. Matrices are plain 2-D ``float64`` numpy
arrays; :func:`as_matrix` is the only constructor and rejects NaN/Inf.
"""

import numpy as np
import scipy.linalg

from .exceptions import ShapeError, SingularGramError

#: elementwise symmetry tolerance, relative to the largest entry magnitude
SYMMETRY_TOL = 1e-12
#: a Gram matrix is treated as singular when lambda_min <= RANK_TOL * ||G||
RANK_TOL = 1e-10


def as_matrix(m, *, allow_empty=False):
    """Return `m` as a finite 2-D float array.

    Scalars become 1x1 and 1-D input becomes a single row.
    """
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got {a.ndim} dimensions")
    if not allow_empty and a.size == 0:
        raise ShapeError("matrix is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")
    return a


def _check_symmetric(a):
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ShapeError("matrix is not symmetric within tolerance")


def symmetrize(m):
    """Average `m` with its transpose to remove round-off asymmetry."""
    a = as_matrix(m)
    return 0.5 * (a + a.T)


def spectral_norm(m):
    """Largest singular value of `m`."""
    a = as_matrix(m)
    return float(np.linalg.norm(a, 2))


def sym_eig_extremes(m):
    """Return ``(lambda_min, lambda_max)`` of a symmetric matrix."""
    a = as_matrix(m)
    _check_symmetric(a)
    w = scipy.linalg.eigvalsh(symmetrize(a))
    return float(w[0]), float(w[-1])


def min_eig_sym(m):
    """Smallest eigenvalue of a symmetric matrix."""
    return sym_eig_extremes(m)[0]


def max_eig_sym(m):
    """Largest eigenvalue of a symmetric matrix."""
    return sym_eig_extremes(m)[1]


def sqrt_norm_psd(m):
    """``||M^(1/2)||`` for symmetric PSD `M`, computed as ``sqrt(||M||)``."""
    return float(np.sqrt(max(max_eig_sym(m), 0.0)))


def solve_spd(g, rhs, *, n_columns=None):
    """Solve ``g @ S = rhs`` for symmetric positive definite `g`.

    Parameters
    ----------
    g : array_like
        Symmetric matrix, checked to be positive definite at a relative
        tolerance of :data:`RANK_TOL`.
    rhs : array_like
        Right-hand side with ``g.shape[0]`` rows. A 1-D vector is treated
        as a single column.
    n_columns : int, optional
        Carried into :class:`SingularGramError` for diagnostics.

    Raises
    ------
    SingularGramError
        If `g` is singular or indefinite at tolerance.
    """
    ga = as_matrix(g)
    _check_symmetric(ga)
    ga = symmetrize(ga)
    b = np.array(rhs, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if b.shape[0] != ga.shape[0]:
        raise ShapeError(f"rhs has {b.shape[0]} rows, expected {ga.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise ValueError("rhs contains NaN or Inf entries")

    w = scipy.linalg.eigvalsh(ga)
    lo, hi = float(w[0]), float(w[-1])
    if not lo > RANK_TOL * max(abs(hi), abs(lo)):
        raise SingularGramError(
            f"Gram matrix is singular or indefinite: lambda_min={lo:.3e}, "
            f"||G||={max(abs(hi), abs(lo)):.3e}"
            + (f", columns={n_columns}" if n_columns is not None else ""),
            min_eig=lo,
            n_columns=n_columns,
        )
    factor = scipy.linalg.cho_factor(ga, lower=True, check_finite=False)
    return scipy.linalg.cho_solve(factor, b, check_finite=False)
