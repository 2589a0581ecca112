"""
Systematic circuit exclusion component.

Decides with certainty whether a matrix has a circuit of size at most n. The columns are cut into r blocks such
    that any n blocks together hold at most m + 1 columns; every circuit of size at most n lies in the union of
    some n blocks, so examining all C(r, n) unions (and recursing where a union has a larger null space) is
    sound and complete.
"""

import dataclasses
import logging
import math

import numpy as np

from circuit_model import is_circuit, make_circuit, reduce_to_circuit
from matrix_core import Tolerances, as_dense_matrix, lq_factor, matrix_scale, null_space_basis, original_columns, \
    support
from search_types import InfeasibleError, InputError, NumericalError

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Partition:
    blocks: list
    r: int
    k: int

    def union(self, C):
        """Sorted union of the blocks selected by the block indices C."""

        return np.sort(np.concatenate([self.blocks[c] for c in C]))


@dataclasses.dataclass
class CircuitFindStats:
    nullspace_evals: int = 0
    subsets_examined: int = 0
    recursive_calls: int = 0
    max_depth: int = 0


def choose_partition(N, m, n, rng):
    """Splits the columns into the fewest blocks r such that any n blocks hold at most m + 1 columns.

    :param N: number of columns.
    :param m: rank.
    :param n: circuit size bound.
    :param rng: numpy random generator for the column shuffle.
    :return: Partition; the N mod r blocks of size k + 1 come first.
    """

    if m >= N:
        raise InputError('rank {} leaves no null space among {} columns'.format(m, N))
    if not 1 <= n <= m + 1:
        raise InfeasibleError('circuit size {} exceeds what rank {} permits (n must be at most {})'.format(
            n, m, m + 1))

    r = next(r for r in range(1, N + 1) if n * math.ceil(N / r) <= m + 1)
    k, extra = divmod(N, r)
    sizes = [k + 1] * extra + [k] * (r - extra)
    order = rng.permutation(N)
    bounds = np.cumsum([0] + sizes)
    blocks = [np.sort(order[bounds[i]:bounds[i + 1]]) for i in range(r)]
    return Partition(blocks=blocks, r=r, k=k)


def next_combination(C, r):
    """Lexicographic successor of the n-subset C of range(r).

    :param C: sorted 0-based n-subset.
    :param r: size of the ground set.
    :return: the next subset, or None after the last one.
    """

    C = np.array(C, dtype=int)
    n = len(C)
    for i in range(n - 1, -1, -1):
        if C[i] < r - n + i:
            C[i] += 1
            C[i + 1:] = C[i] + 1 + np.arange(n - i - 1)
            return C
    return None


def partition_subset_count(r, n):
    return math.comb(r, n)


def systematic_cost_estimate(rho0, s):
    """Bounds the number of submatrices examined for instances with (m+1)/N >= rho0.

    :param rho0: lower bound on the rank ratio, 0 < rho0 < 1.
    :param s: slack in the block count r = n + s, s >= 1.
    :return: tuple of (n, C(n+s, n), base A = (1-rho0)^(rho0-1) rho0^-rho0, asymptote (2 pi rho0 s)^-1/2 A^s),
        where n = floor(s rho0 / (1 - rho0)) is the largest circuit size the bound covers.
    """

    if not 0 < rho0 < 1:
        raise InputError('rho0 must lie in (0, 1), got {}'.format(rho0))
    if s < 1:
        raise InputError('s must be at least 1, got {}'.format(s))

    n = math.floor(s * rho0 / (1 - rho0))
    base = (1 - rho0) ** (rho0 - 1) * rho0 ** -rho0
    stirling = (2 * math.pi * rho0 * s) ** -0.5 * base ** s
    return n, math.comb(n + s, n), base, stirling


def _circuitfind(B, n, tol, scale, rng, depth_guard, depth, stats):
    if depth > depth_guard:
        raise NumericalError('circuit exclusion recursion exceeded depth {}'.format(depth_guard))
    stats.max_depth = max(stats.max_depth, depth)

    F = lq_factor(B, tol, scale)
    m, N = F.m, F.n_cols
    if m >= N:
        return None
    Q = original_columns(F)

    if N - m == 1:
        basis = null_space_basis(Q, tol, scale=1.0)
        stats.nullspace_evals += 1
        J = support(basis.Z[:, 0], tol)
        return J if len(J) <= n and is_circuit(B, J, tol, scale)[0] else None

    # Every circuit has at most m + 1 columns.
    if n >= m + 1:
        return reduce_to_circuit(B, np.arange(N), tol, scale).indices

    partition = choose_partition(N, m, n, rng)
    logger.debug('depth %d: %d columns, rank %d, %d blocks, %d subsets', depth, N, m, partition.r,
                 partition_subset_count(partition.r, n))

    C = np.arange(n)
    while C is not None:
        J = partition.union(C)
        stats.subsets_examined += 1
        basis = null_space_basis(Q[:, J], tol, scale=1.0)
        stats.nullspace_evals += 1

        if basis.d == 1:
            candidate = J[support(basis.Z[:, 0], tol)]
            if len(candidate) <= n and is_circuit(B, candidate, tol, scale)[0]:
                return candidate
        elif basis.d > 1:
            stats.recursive_calls += 1
            # Q has orthonormal rows, so its column blocks are judged against 1.
            found = _circuitfind(Q[:, J], n, tol, 1.0, rng, depth_guard, depth + 1, stats)
            if found is not None:
                return J[found]

        C = next_combination(C, partition.r)

    return None


def circuitfind(A, n, tol=None, rng=None, depth_guard=None, seed=0):
    """Decides whether A has a circuit with at most n columns.

    :param A: M x N matrix.
    :param n: circuit size bound, 1 <= n <= N.
    :param tol: tolerances.
    :param rng: numpy random generator for the block shuffles; defaults to one seeded with `seed`.
    :param depth_guard: recursion limit, default 2 + N.
    :param seed: seed used when rng is not given.
    :return: tuple of (alpha, Circuit or None, CircuitFindStats).
    """

    A = as_dense_matrix(A)
    N = A.shape[1]
    if not 1 <= n <= N:
        raise InfeasibleError('circuit size n must satisfy 1 <= n <= {}, got {}'.format(N, n))
    tol = tol if tol is not None else Tolerances.for_matrix(A)
    rng = rng if rng is not None else np.random.default_rng(seed)
    depth_guard = depth_guard if depth_guard is not None else 2 + N
    if depth_guard < 1:
        raise InputError('depth_guard must be positive, got {}'.format(depth_guard))

    scale = matrix_scale(A)
    stats = CircuitFindStats()
    J = _circuitfind(A, n, tol, scale, rng, depth_guard, 0, stats)
    if J is None:
        logger.info('no circuit of size <= %d (%d null space evaluations)', n, stats.nullspace_evals)
        return False, None, stats

    circuit = make_circuit(A, J, tol, scale)
    logger.info('circuit %s of size %d found (%d null space evaluations)', circuit.indices.tolist(), circuit.size,
                stats.nullspace_evals)
    return True, circuit, stats
