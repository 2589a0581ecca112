"""
Dense linear algebra component.

Provides rank estimation, the LQ-type factorization A(:, perm) = L Q with orthonormal Q, the reduced factor
    Q* = Q2^-1 Q1 of the fundamental null basis, null space bases and numerical supports.
All index sets are 0-based numpy integer arrays.
"""

import dataclasses
import logging
from typing import Optional

import numpy as np
import scipy.linalg

from search_types import InputError, NumericalError

logger = logging.getLogger(__name__)

MACHINE_EPSILON = np.finfo(float).eps

# Headroom over eps * max(M, N) for rounding in planted dependencies.
RANK_TOL_SAFETY = 10.0
DEFAULT_SUPPORT_TOL = 1e-9
MAX_TRAILING_CONDITION = 1e12


@dataclasses.dataclass(frozen=True)
class Tolerances:
    rank_tol_factor: float
    support_tol_factor: float = DEFAULT_SUPPORT_TOL

    def __post_init__(self):
        for name in ('rank_tol_factor', 'support_tol_factor'):
            value = getattr(self, name)
            if not 0 < value < 1e-3:
                raise InputError('{} must lie in (0, 1e-3), got {}'.format(name, value))

    @classmethod
    def for_matrix(cls, A, rank_tol_factor=None, support_tol_factor=None):
        """Derives default tolerances from the shape of the top-level matrix.

        :param A: the matrix under investigation.
        :param rank_tol_factor: explicit rank threshold factor; defaults to 10 * eps * max(M, N).
        :param support_tol_factor: explicit support threshold factor; defaults to 1e-9.
        :return: a Tolerances instance.
        """

        shape = np.shape(A)
        if rank_tol_factor is None:
            rank_tol_factor = min(RANK_TOL_SAFETY * MACHINE_EPSILON * max(max(shape), 1), 1e-4)
        if support_tol_factor is None:
            support_tol_factor = DEFAULT_SUPPORT_TOL
        return cls(rank_tol_factor=float(rank_tol_factor), support_tol_factor=float(support_tol_factor))


@dataclasses.dataclass(frozen=True)
class Factorization:
    """A(:, perm) = L Q, where Q has orthonormal rows and Q(:, N-m:) is invertible."""
    m: int
    Q: np.ndarray
    L: np.ndarray
    perm: np.ndarray
    Qstar: Optional[np.ndarray] = None
    sigmas: Optional[np.ndarray] = None

    @property
    def n_cols(self):
        return self.Q.shape[1]

    @property
    def nullity(self):
        return self.n_cols - self.m


@dataclasses.dataclass(frozen=True)
class NullBasis:
    Z: np.ndarray
    d: int


def as_dense_matrix(A):
    """Validates and converts the input to a finite 2-D float64 array.

    :param A: array-like matrix.
    :return: float64 numpy array of shape (M, N).
    """

    try:
        A = np.array(A, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InputError('matrix entries must be real numbers: {}'.format(e))
    if A.ndim != 2:
        raise InputError('expected a 2-D matrix, got {} dimension(s)'.format(A.ndim))
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise InputError('matrix must have at least one row and one column, got {}x{}'.format(*A.shape))
    if not np.all(np.isfinite(A)):
        row, col = np.argwhere(~np.isfinite(A))[0]
        raise InputError('matrix entry ({}, {}) is not finite'.format(row + 1, col + 1))
    return A


def _svd(B, compute_uv=True, full_matrices=True):
    try:
        return scipy.linalg.svd(B, compute_uv=compute_uv, full_matrices=full_matrices, check_finite=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust.
        logger.debug('gesdd did not converge on a %dx%d matrix, retrying with gesvd', *B.shape)
        return scipy.linalg.svd(B, compute_uv=compute_uv, full_matrices=full_matrices, check_finite=False,
                                lapack_driver='gesvd')


def singular_values(B):
    """Returns the singular values of B in descending order (empty for a matrix without rows or columns)."""

    B = np.asarray(B, dtype=np.float64)
    if B.size == 0:
        return np.zeros(0)
    return _svd(B, compute_uv=False)


def _rank_from_sigmas(sigmas, tol, scale=None):
    if len(sigmas) == 0:
        return 0
    reference = max(sigmas[0], scale) if scale is not None else sigmas[0]
    if reference == 0:
        return 0
    return int(np.count_nonzero(sigmas > tol.rank_tol_factor * reference))


def estimate_rank(A, tol=None, scale=None):
    """Estimates the numerical rank of a matrix from its singular values.

    :param A: the matrix.
    :param tol: tolerances; defaults derived from the shape of A.
    :param scale: optional magnitude of a parent matrix A is drawn from; singular values are then measured
        against max(sigma_max(A), scale).
    :return: tuple of (rank, singular values in descending order).
    """

    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise InputError('matrix has non-finite entries')
    if tol is None:
        tol = Tolerances.for_matrix(A)
    sigmas = singular_values(A)
    return _rank_from_sigmas(sigmas, tol, scale), sigmas


def null_space_basis(B, tol=None, scale=None):
    """Computes an orthonormal basis of the null space of B.

    :param B: k x l matrix (may have zero rows).
    :param tol: tolerances used for the rank decision.
    :param scale: optional magnitude of the parent matrix; singular values are then measured against
        max(sigma_max(B), scale) instead of sigma_max(B) alone.
    :return: NullBasis whose Z has shape (l, d), d = l - rank(B).
    """

    B = np.asarray(B, dtype=np.float64)
    if tol is None:
        tol = Tolerances.for_matrix(B) if B.size else Tolerances.for_matrix(np.zeros((1, 1)))
    k, l = B.shape
    if l == 0:
        return NullBasis(Z=np.zeros((0, 0)), d=0)
    if k == 0:
        return NullBasis(Z=np.eye(l), d=l)

    _, sigmas, Vt = _svd(B, full_matrices=True)
    rank = _rank_from_sigmas(sigmas, tol, scale)
    Z = Vt[rank:].T.copy()
    return NullBasis(Z=Z, d=l - rank)


def orthonormal_null_basis(A, tol=None):
    """Returns the N x (N - m) matrix U with orthonormal columns spanning the null space of A."""

    return null_space_basis(A, tol).Z


def fundamental_null_basis(F):
    """Computes the reduced factor Q* = Q2^-1 Q1 of A(:, perm) = L~ (Q*, I_m).

    The fundamental null basis is C = stack(I_{N-m}, -Q*) and satisfies A(:, perm) C = 0.

    :param F: factorization whose trailing m columns of Q are invertible.
    :return: the m x (N - m) matrix Q*.
    """

    m, N = F.m, F.Q.shape[1]
    if m == 0:
        return np.zeros((0, N))
    if m == N:
        return np.zeros((m, 0))
    Q1 = F.Q[:, :N - m]
    Q2 = F.Q[:, N - m:]
    condition = np.linalg.cond(Q2)
    if not np.isfinite(condition) or condition > MAX_TRAILING_CONDITION:
        raise NumericalError('trailing {0}x{0} block of Q is numerically singular (condition {1:.3g}); '
                             'the column permutation must be recomputed'.format(m, condition))
    return scipy.linalg.solve(Q2, Q1, check_finite=False)


def fundamental_null_matrix(Qstar):
    """Returns C = stack(I_{N-m}, -Q*), the fundamental null basis in permuted column order."""

    m, free = Qstar.shape
    return np.vstack([np.eye(free), -Qstar])


def lq_factor(A, tol=None, scale=None):
    """Computes A(:, perm) = L Q with Q having orthonormal rows and an invertible trailing m x m block.

    The orthonormal factor comes from a pivoted QR factorization of A^T; the column permutation comes from a
    column-pivoted QR factorization of Q so that the m pivot columns, placed last, are well conditioned.

    :param A: M x N matrix.
    :param tol: tolerances used for the rank decision.
    :param scale: optional parent magnitude for the rank decision, see estimate_rank.
    :return: Factorization with Q* computed.
    """

    A = as_dense_matrix(A)
    if tol is None:
        tol = Tolerances.for_matrix(A)
    M, N = A.shape
    m, sigmas = estimate_rank(A, tol, scale)

    if m == 0:
        return Factorization(m=0, Q=np.zeros((0, N)), L=np.zeros((M, 0)), perm=np.arange(N),
                             Qstar=np.zeros((0, N)), sigmas=sigmas)

    Qt, Rt, row_piv = scipy.linalg.qr(A.T, mode='economic', pivoting=True, check_finite=False)
    Q0 = Qt[:, :m].T
    L = np.zeros((M, m))
    L[row_piv] = Rt[:m].T

    _, col_piv = scipy.linalg.qr(Q0, mode='r', pivoting=True, check_finite=False)
    basis = np.sort(col_piv[:m])
    free = np.setdiff1d(np.arange(N), basis)
    perm = np.concatenate([free, basis]).astype(int)

    F = Factorization(m=m, Q=Q0[:, perm], L=L, perm=perm, sigmas=sigmas)
    return dataclasses.replace(F, Qstar=fundamental_null_basis(F))


def original_columns(F):
    """Returns Q with its columns restored to the original column order of A."""

    Q = np.empty_like(F.Q)
    Q[:, F.perm] = F.Q
    return Q


def support(v, tol=None):
    """Returns the numerical support of a vector, relative to its largest entry in magnitude.

    :param v: non-zero real vector.
    :param tol: tolerances; only the support factor is used.
    :return: sorted 0-based indices i with |v_i| > support_tol_factor * max_j |v_j|.
    """

    v = np.asarray(v, dtype=np.float64).ravel()
    if not np.all(np.isfinite(v)):
        raise InputError('vector has non-finite entries')
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0:
        raise InputError('the support of the zero vector is undefined')
    factor = tol.support_tol_factor if tol is not None else DEFAULT_SUPPORT_TOL
    return np.flatnonzero(np.abs(v) > factor * scale)


def smallest_singular_value(B):
    """Smallest singular value of B, counting the implicit zeros of a wide matrix.

    :param B: M x k matrix.
    :return: sigma_min; +inf when B has no columns.
    """

    B = np.asarray(B, dtype=np.float64)
    if B.shape[1] == 0:
        return np.inf
    if B.shape[1] > B.shape[0]:
        return 0.0
    return float(singular_values(B)[-1])


def normalize_witness(w):
    """Scales a vector to unit norm with its first non-zero entry positive."""

    w = np.asarray(w, dtype=np.float64)
    w = w / np.linalg.norm(w)
    nonzero = np.flatnonzero(w)
    if nonzero.size and w[nonzero[0]] < 0:
        w = -w
    return w


def smallest_right_singular_vector(B):
    """Right singular vector of B belonging to its smallest singular value (implicit zeros included)."""

    B = np.asarray(B, dtype=np.float64)
    _, _, Vt = _svd(B, full_matrices=True)
    return Vt[-1]


def matrix_scale(A):
    """Largest singular value of A; rank decisions on column subsets of A are measured against it."""

    A = np.asarray(A, dtype=np.float64)
    sigmas = singular_values(A)
    return float(sigmas[0]) if len(sigmas) else 0.0
