"""
Circuit model component.

Defines certified circuits (minimal linearly dependent column sets), the characterizations used to recognise
    them, the pruning of columns that belong to no circuit, and the exhaustive oracle used on small instances.
"""

import dataclasses
import itertools
import logging

import numpy as np

from matrix_core import Tolerances, estimate_rank, matrix_scale, normalize_witness, null_space_basis, support
from search_types import InputError, NumericalError

logger = logging.getLogger(__name__)

# Guards against combinatorial blow-up of the exhaustive oracle.
BRUTE_FORCE_MAX_COLS = 24
BRUTE_FORCE_MAX_SIZE = 8


@dataclasses.dataclass(frozen=True)
class Circuit:
    indices: np.ndarray
    witness: np.ndarray

    @property
    def size(self):
        return len(self.indices)

    def key(self):
        return tuple(int(i) for i in self.indices)


def as_index_set(J, N):
    """Validates an index set against N columns.

    :param J: iterable of 0-based column indices.
    :param N: number of columns.
    :return: sorted, duplicate free integer array.
    """

    J = np.unique(np.asarray(list(J) if not isinstance(J, np.ndarray) else J, dtype=int))
    if J.size == 0:
        raise InputError('index set must not be empty')
    if J[0] < 0 or J[-1] >= N:
        raise InputError('index set {} out of range for {} columns'.format(J.tolist(), N))
    return J


def _tolerances(A, tol):
    return tol if tol is not None else Tolerances.for_matrix(A)


def _scale(A, scale):
    return scale if scale is not None else matrix_scale(A)


def is_circuit(A, J, tol=None, scale=None):
    """Decides whether the columns J of A form a circuit.

    J is a circuit iff A(:, J) has a one-dimensional null space spanned by a vector without zero entries.

    :param A: M x N matrix.
    :param J: 0-based column indices.
    :param tol: tolerances.
    :param scale: magnitude the rank of A(:, J) is judged against; defaults to sigma_max(A).
    :return: tuple of (flag, unit witness N-vector or None).
    """

    A = np.asarray(A, dtype=np.float64)
    tol = _tolerances(A, tol)
    J = as_index_set(J, A.shape[1])

    basis = null_space_basis(A[:, J], tol, scale=_scale(A, scale))
    if basis.d != 1:
        return False, None
    w = basis.Z[:, 0]
    if len(support(w, tol)) != len(J):
        return False, None

    witness = np.zeros(A.shape[1])
    witness[J] = w
    return True, normalize_witness(witness)


def make_circuit(A, J, tol=None, scale=None):
    """Builds a certified Circuit, raising NumericalError when J fails the circuit test."""

    J = as_index_set(J, np.shape(A)[1])
    flag, witness = is_circuit(A, J, tol, scale)
    if not flag:
        raise NumericalError('columns {} do not form a circuit'.format(J.tolist()))
    return Circuit(indices=J, witness=witness)


def is_circuit_by_definition(A, J, tol=None, scale=None):
    """Direct definition: A(:, J) is rank deficient and removing any one column leaves full column rank."""

    A = np.asarray(A, dtype=np.float64)
    tol = _tolerances(A, tol)
    J = as_index_set(J, A.shape[1])

    scale = _scale(A, scale)
    if estimate_rank(A[:, J], tol, scale)[0] == len(J):
        return False
    for k in range(len(J)):
        rest = np.delete(J, k)
        if rest.size and estimate_rank(A[:, rest], tol, scale)[0] < len(rest):
            return False
    return True


def _complement(J, N):
    return np.setdiff1d(np.arange(N), J)


def has_dependency_by_null_rows(U, J, tol=None):
    """A(:, J) has a non-trivial null vector iff U(J^c, :) does, U spanning the null space of A."""

    U = np.asarray(U, dtype=np.float64)
    tol = _tolerances(U, tol)
    if U.shape[1] == 0:
        return False
    return null_space_basis(U[_complement(J, U.shape[0])], tol, scale=1.0).d > 0


def is_circuit_by_null_rows(U, J, tol=None):
    """Characterization through the rows of U.

    U(J^c, :) has a non-zero null vector, and U(J^c + {k}, :) has full column rank for every k in J.
    """

    U = np.asarray(U, dtype=np.float64)
    tol = _tolerances(U, tol)
    J = as_index_set(J, U.shape[0])
    if not has_dependency_by_null_rows(U, J, tol):
        return False

    complement = _complement(J, U.shape[0])
    for k in J:
        rows = np.sort(np.append(complement, k))
        if null_space_basis(U[rows], tol, scale=1.0).d > 0:
            return False
    return True


def circuit_from_null_rows(U, I, tol=None):
    """Returns supp(U d) when U(I, :) has a one-dimensional null space spanned by d, otherwise None."""

    U = np.asarray(U, dtype=np.float64)
    tol = _tolerances(U, tol)
    I = np.asarray(I, dtype=int)
    basis = null_space_basis(U[I], tol, scale=1.0)
    if basis.d != 1:
        return None
    return support(U @ basis.Z[:, 0], tol)


def prunable_columns(F, tol=None):
    """Finds the columns that belong to no circuit.

    A pivot column (permuted position N - m + i) is in no circuit iff row i of Q* vanishes; every other column
    lies in some circuit.

    :param F: factorization with Q* computed.
    :param tol: tolerances; entries below support_tol_factor * max(1, max |Q*|) count as zero.
    :return: sorted original column indices.
    """

    if F.Qstar is None:
        raise InputError('factorization has no reduced factor Q*')
    m, N = F.m, F.n_cols
    if m == 0:
        return np.zeros(0, dtype=int)
    tol = tol if tol is not None else Tolerances.for_matrix(F.Q)

    Qstar = np.abs(F.Qstar)
    scale = max(1.0, float(Qstar.max())) if Qstar.size else 1.0
    if Qstar.shape[1] == 0:
        vanishing = np.arange(m)
    else:
        vanishing = np.flatnonzero(Qstar.max(axis=1) <= tol.support_tol_factor * scale)
    return np.sort(F.perm[N - m + vanishing])


def circuit_from_qstar_witness(k_set, w, Qstar, perm, tol=None):
    """Assembles a circuit from a null vector of Q*(K2c, K1).

    :param k_set: sorted positions (permuted numbering) of the sampled columns.
    :param w: vector spanning the null space of Q*(K2c, K1).
    :param Qstar: the m x (N - m) reduced factor.
    :param perm: column permutation of the factorization.
    :param tol: tolerances.
    :return: sorted original column indices of the circuit.
    """

    free = Qstar.shape[1]
    k_set = np.asarray(k_set, dtype=int)
    k1 = k_set[k_set < free]
    k2 = k_set[k_set >= free] - free

    w = np.asarray(w, dtype=np.float64)
    y = np.concatenate([w, -Qstar[np.ix_(k2, k1)] @ w])
    if not np.any(y):
        raise NumericalError('null vector of the reduced factor vanishes')
    positions = np.concatenate([k1, k2 + free])
    return np.sort(np.asarray(perm)[positions[support(y, tol)]])


def reduce_to_circuit(A, J, tol=None, scale=None):
    """Shrinks a dependent column set to a circuit by greedy column removal.

    Columns are tried in increasing order; a column is dropped whenever the rest stays dependent.

    :param A: M x N matrix.
    :param J: 0-based indices of a dependent column set.
    :param tol: tolerances.
    :param scale: magnitude the ranks are judged against; defaults to sigma_max(A).
    :return: a certified Circuit contained in J.
    """

    A = np.asarray(A, dtype=np.float64)
    tol = _tolerances(A, tol)
    scale = _scale(A, scale)
    current = list(as_index_set(J, A.shape[1]))
    if estimate_rank(A[:, current], tol, scale)[0] == len(current):
        raise InputError('columns {} are linearly independent'.format(current))

    for col in list(current):
        rest = [j for j in current if j != col]
        if rest and estimate_rank(A[:, rest], tol, scale)[0] < len(rest):
            current = rest
    return make_circuit(A, current, tol, scale)


def brute_force_circuits(A, n_max, tol=None, scale=None):
    """Enumerates every circuit of size at most n_max.

    :param A: M x N matrix with N <= 24.
    :param n_max: largest circuit size, at most 8.
    :param tol: tolerances.
    :param scale: magnitude the ranks are judged against; defaults to sigma_max(A).
    :return: list of circuits sorted lexicographically by their indices.
    """

    A = np.asarray(A, dtype=np.float64)
    tol = _tolerances(A, tol)
    N = A.shape[1]
    if N > BRUTE_FORCE_MAX_COLS or n_max > BRUTE_FORCE_MAX_SIZE:
        raise InputError('exhaustive enumeration is limited to N <= {} and n <= {}, got N={}, n={}'.format(
            BRUTE_FORCE_MAX_COLS, BRUTE_FORCE_MAX_SIZE, N, n_max))
    if n_max < 1:
        raise InputError('circuit size must be positive, got {}'.format(n_max))

    scale = _scale(A, scale)
    circuits = []
    found_sets = []
    for size in range(1, min(n_max, N) + 1):
        for J in itertools.combinations(range(N), size):
            # Proper supersets of a circuit are never circuits.
            if any(c.issubset(J) for c in found_sets):
                continue
            flag, witness = is_circuit(A, J, tol, scale)
            if flag:
                circuits.append(Circuit(indices=np.array(J), witness=witness))
                found_sets.append(frozenset(J))

    return sorted(circuits, key=Circuit.key)
