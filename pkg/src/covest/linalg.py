"""Dense small-matrix numerics used by every other module.

Matrices are plain 2-D ``numpy.ndarray`` objects.  :func:`symmetric` and
:func:`covariance` validate and normalise an array into the symmetric
(resp. positive semidefinite) form the rest of the package expects; the
remaining functions are pure and never modify their arguments.

The eigensolver is a cyclic Jacobi iteration, which is plenty for the
dimensions (d <= a few dozen) this package targets and keeps results
reproducible without relying on LAPACK driver choices.
"""

import math
from typing import NamedTuple

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    InvalidInputError,
    NotPSDError,
)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
PSD_TOL = 1e-10


class EigenSystem(NamedTuple):
    """Eigen-decomposition of a symmetric matrix.

    ``values`` are sorted in descending order and ``vectors[:, k]`` is the
    unit eigenvector belonging to ``values[k]``.
    """

    values: np.ndarray
    vectors: np.ndarray


def _as_square(a):
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    return a


def symmetric(a, rtol=1e-8):
    """Return a copy of `a` that is exactly symmetric.

    The upper triangle is kept and mirrored into the lower one.  Inputs whose
    two triangles disagree by more than ``rtol`` times the largest entry are
    rejected rather than silently repaired.
    """
    a = _as_square(a)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > rtol * max(scale, 1e-300):
        raise InvalidInputError("matrix is not symmetric")
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def covariance(a):
    """Validate `a` as a covariance matrix (symmetric PSD).

    Every eigenvalue must be >= -1e-10 * trace(a).
    """
    a = symmetric(a)
    lam = eigensystem(a).values
    tol = PSD_TOL * max(trace(a), 0.0)
    if lam[-1] < -tol:
        raise NotPSDError(f"smallest eigenvalue {lam[-1]:.3e} below -{tol:.3e}")
    return a


def trace(a):
    """Sum of diagonal entries, accumulated in index order."""
    total = 0.0
    for x in np.diagonal(a):
        total += float(x)
    return total


def eigensystem(a, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigenvalues and eigenvectors of a symmetric matrix by cyclic Jacobi.

    Sweeps over all (p, q) pairs in row order until the largest off-diagonal
    magnitude drops below ``tol * ||a||_F``.  Each eigenvector is signed so
    that its largest-magnitude component is positive.

    Raises
    ------
    ConvergenceError
        If ``max_sweeps`` sweeps do not reach the tolerance.
    """
    a = symmetric(a)
    d = a.shape[0]
    threshold = tol * float(np.linalg.norm(a))
    # Scalar loops over nested lists beat numpy slicing for d <= ~50.
    rows = a.tolist()
    vecs = np.eye(d).tolist()

    def max_off():
        return max((abs(rows[i][j]) for i in range(d) for j in range(d) if i != j), default=0.0)

    sweeps = 0
    off = max_off()
    while off > threshold:
        if sweeps == max_sweeps:
            raise ConvergenceError("Jacobi eigensolver did not converge", off)
        sweeps += 1
        for p in range(d - 1):
            row_p = rows[p]
            for q in range(p + 1, d):
                row_q = rows[q]
                apq = row_p[q]
                if apq == 0.0:
                    continue
                theta = (row_q[q] - row_p[p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for row in rows:
                    x, y = row[p], row[q]
                    row[p] = c * x - s * y
                    row[q] = s * x + c * y
                for k in range(d):
                    x, y = row_p[k], row_q[k]
                    row_p[k] = c * x - s * y
                    row_q[k] = s * x + c * y
                row_p[q] = row_q[p] = 0.0
                for row in vecs:
                    x, y = row[p], row[q]
                    row[p] = c * x - s * y
                    row[q] = s * x + c * y
        off = max_off()

    values = np.array([rows[i][i] for i in range(d)])
    v = np.array(vecs)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    lead = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[lead, np.arange(d)])
    signs[signs == 0] = 1.0
    return EigenSystem(values, v * signs)


def operator_norm(a):
    """Spectral (l2 -> l2) norm.

    Symmetric input: largest absolute eigenvalue.  General input: square
    root of the top eigenvalue of ``a.T @ a``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    if a.size == 0:
        return 0.0
    if a.shape[0] == a.shape[1] and np.array_equal(a, a.T):
        lam = eigensystem(a).values
        return float(max(abs(lam[0]), abs(lam[-1])))
    gram = a.T @ a
    gram = np.triu(gram) + np.triu(gram, 1).T
    return float(np.sqrt(max(eigensystem(gram).values[0], 0.0)))


def effective_rank(a):
    """Trace divided by operator norm of a PSD matrix."""
    norm = operator_norm(a)
    if norm == 0.0:
        raise DegenerateInputError("effective rank of the zero matrix is undefined")
    return trace(a) / norm


def cholesky(a):
    """Lower-triangular factor of a PSD matrix.

    A ridge of ``1e-12 * trace(a) / d`` is added to the diagonal first so
    that rank-deficient covariances factor cleanly.  Zero pivots (only
    possible for the zero matrix) produce zero columns.
    """
    a = symmetric(a)
    d = a.shape[0]
    a = a + np.eye(d) * (1e-12 * trace(a) / d)
    low = np.zeros_like(a)
    for j in range(d):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot < 0.0:
            raise NotPSDError(f"negative pivot {pivot:.3e} at column {j}")
        if pivot == 0.0:
            continue
        low[j, j] = np.sqrt(pivot)
        low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low
