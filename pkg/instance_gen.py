"""
Instance generation component.

Builds reproducible test matrices: Gaussian matrices with planted exact circuits, the orthonormal-row variant
    used to compare random and systematic search, and Gaussian matrices with a planted near dependency.
Every generator is a pure function of its seed.
"""

import dataclasses
import logging
import math

import numpy as np
import scipy.linalg
import scipy.optimize

from matrix_core import smallest_singular_value
from random_search import random_subset
from search_types import InfeasibleError, InputError

logger = logging.getLogger(__name__)

# Planted coefficients are redrawn below this magnitude.
MIN_COEFFICIENT = 1e-2
MAX_BRACKET_DOUBLINGS = 60


@dataclasses.dataclass(frozen=True)
class PlantSpec:
    N: int
    rho: float
    sizes: tuple = ()
    seed: int = 0

    @property
    def m(self):
        return int(round(self.rho * self.N))

    def validate(self):
        """Raises InfeasibleError when the planted instance cannot be realised."""

        if not 0 < self.rho < 1:
            raise InfeasibleError('rho must lie in (0, 1), got {}'.format(self.rho))
        if abs(self.rho * self.N - self.m) > 1e-9 or self.m < 1:
            raise InfeasibleError('rho * N must be a positive integer, got {} * {}'.format(self.rho, self.N))
        if any(c < 2 for c in self.sizes):
            raise InfeasibleError('planted circuit sizes must be at least 2, got {}'.format(list(self.sizes)))
        k = len(self.sizes)
        if k + sum(c - 1 for c in self.sizes) > self.N:
            raise InfeasibleError('circuits {} do not fit disjointly into {} columns'.format(list(self.sizes),
                                                                                           self.N))
        if self.m > self.N - k:
            raise InfeasibleError('rank {} exceeds the {} generated columns'.format(self.m, self.N - k))
        if any(c - 1 > self.m for c in self.sizes):
            raise InfeasibleError('a circuit of size {} needs rank at least {}, got {}'.format(
                max(self.sizes), max(self.sizes) - 1, self.m))


def _nonzero_normal(rng, size):
    coefficients = rng.standard_normal(size)
    while np.any(np.abs(coefficients) < MIN_COEFFICIENT):
        small = np.abs(coefficients) < MIN_COEFFICIENT
        coefficients[small] = rng.standard_normal(int(small.sum()))
    return coefficients


def gaussian_matrix(M, N, rng):
    if M < 1 or N < 1:
        raise InputError('matrix dimensions must be positive, got {}x{}'.format(M, N))
    return rng.standard_normal((M, N))


def planted_circuit_matrix(spec):
    """Generates an m x N Gaussian matrix with planted circuits.

    An m x (N - k) standard normal matrix is drawn; for each planted size c a random combination of c - 1 of its
    columns (disjoint across circuits) is appended, and the columns are then shuffled.

    :param spec: PlantSpec.
    :return: tuple of (A, list of sorted 0-based index arrays of the planted circuits).
    """

    spec.validate()
    rng = np.random.default_rng(spec.seed)
    m, N, k = spec.m, spec.N, len(spec.sizes)

    base = gaussian_matrix(m, N - k, rng)
    sources = rng.permutation(N - k)
    columns = [base]
    plants = []
    offset = 0
    for j, c in enumerate(spec.sizes):
        source = np.sort(sources[offset:offset + c - 1])
        offset += c - 1
        columns.append((base[:, source] @ _nonzero_normal(rng, c - 1))[:, np.newaxis])
        plants.append(np.append(source, N - k + j))

    A = np.hstack(columns)
    order = rng.permutation(N)
    position = np.argsort(order)
    return A[:, order], [np.sort(position[plant]) for plant in plants]


def orthonormal_row_instance(N, rho, c, seed=0):
    """Generates a matrix with orthonormal rows holding a single planted circuit of size c.

    The rows of a planted Gaussian matrix are orthonormalized; the row space, hence the set of circuits, is kept.

    :return: tuple of (Q with orthonormal rows, sorted 0-based plant indices).
    """

    A, plants = planted_circuit_matrix(PlantSpec(N=N, rho=rho, sizes=(c,), seed=seed))
    Q, _ = scipy.linalg.qr(A.T, mode='economic')
    return Q.T.copy(), plants[0]


def planted_near_instance(N, M, target_sigma, size, seed=0):
    """Generates an M x N Gaussian matrix with a planted near dependency.

    One column of a random `size`-set is replaced by a random combination of the others plus a random direction
    of length t; t is calibrated so that sigma_min of the planted columns equals target_sigma.

    :param N: number of columns.
    :param M: number of rows, M <= N.
    :param target_sigma: smallest singular value of the planted columns; 0 plants an exact circuit.
    :param size: number of planted columns, 2 <= size <= min(M, N).
    :param seed: random seed.
    :return: tuple of (A, sorted 0-based plant indices).
    """

    if not 2 <= size <= min(M, N):
        raise InfeasibleError('plant size must satisfy 2 <= size <= min(M, N) = {}, got {}'.format(min(M, N), size))
    if M > N:
        raise InfeasibleError('near instances need M <= N, got {}x{}'.format(M, N))
    if not target_sigma >= 0 or not math.isfinite(target_sigma):
        raise InfeasibleError('target sigma must be finite and non-negative, got {}'.format(target_sigma))

    rng = np.random.default_rng(seed)
    A = gaussian_matrix(M, N, rng)
    plant = random_subset(N, size, rng)
    replaced = plant[rng.integers(size)]
    sources = plant[plant != replaced]
    combination = A[:, sources] @ _nonzero_normal(rng, size - 1)
    direction = rng.standard_normal(M)
    direction /= np.linalg.norm(direction)

    def residual(t):
        A[:, replaced] = combination + t * direction
        return smallest_singular_value(A[:, plant]) - target_sigma

    if target_sigma == 0:
        residual(0.0)
        return A, plant

    upper = 1.0
    for _ in range(MAX_BRACKET_DOUBLINGS):
        if residual(upper) > 0:
            break
        upper *= 2
    else:
        raise InfeasibleError('target sigma {} is not reachable for the planted columns'.format(target_sigma))

    t = scipy.optimize.brentq(residual, 0.0, upper, xtol=1e-15, rtol=1e-12)
    residual(t)
    logger.debug('planted near dependency %s with perturbation %.3g', plant.tolist(), t)
    return A, plant


def baseline_sigma_stats(A, n_cols, samples, rng):
    """Mean and standard deviation of sigma_min over uniformly sampled n_cols-column submatrices.

    :param A: M x N matrix.
    :param n_cols: submatrix width.
    :param samples: number of samples, at least 30.
    :param rng: numpy random generator.
    :return: tuple of (mu, sigma_hat).
    """

    A = np.asarray(A, dtype=np.float64)
    if samples < 30:
        raise InputError('at least 30 samples are required, got {}'.format(samples))
    sigmas = np.array([smallest_singular_value(A[:, random_subset(A.shape[1], n_cols, rng)])
                       for _ in range(samples)])
    return float(sigmas.mean()), float(sigmas.std(ddof=1))


SMALL_FAMILIES = ('gaussian', 'rank_deficient', 'integer', 'planted', 'negligible_column')


def small_instance(family, rng, max_rows=6, max_cols=10):
    """Draws one small matrix with a non-trivial null space for comparisons against exhaustive enumeration.

    Families: `gaussian` (M < N standard normal), `rank_deficient` (product of two Gaussian factors of lower
    rank), `integer` (entries in {-1, 0, 1}), `planted` (one planted circuit of size at most 5) and
    `negligible_column` (Gaussian with one column scaled to 1e-17, numerically zero relative to the matrix).

    :param family: one of SMALL_FAMILIES.
    :param rng: numpy random generator.
    :param max_rows: largest M.
    :param max_cols: largest N, above max_rows.
    :return: M x N float64 array with rank below N.
    """

    if family not in SMALL_FAMILIES:
        raise InputError('unknown instance family {}, expected one of {}'.format(family, list(SMALL_FAMILIES)))
    M = int(rng.integers(2, max_rows + 1))
    N = int(rng.integers(M + 1, max_cols + 1))

    if family == 'gaussian':
        return gaussian_matrix(M, N, rng)
    if family == 'rank_deficient':
        k = int(rng.integers(1, M))
        return gaussian_matrix(M, k, rng) @ gaussian_matrix(k, N, rng)
    if family == 'integer':
        A = np.zeros((M, N))
        while not np.any(A):
            A = rng.integers(-1, 2, size=(M, N)).astype(float)
        return A
    if family == 'planted':
        m = min(M, N - 1)
        c = int(rng.integers(2, min(5, m + 1) + 1))
        A, _ = planted_circuit_matrix(PlantSpec(N=N, rho=m / N, sizes=(c,), seed=int(rng.integers(2 ** 31))))
        return A

    A = gaussian_matrix(M, N, rng)
    A[:, rng.integers(N)] *= 1e-17
    return A


def small_instances(count, seed=0, max_rows=6, max_cols=10):
    """Cycles through SMALL_FAMILIES, returning `count` reproducible small instances."""

    rng = np.random.default_rng(seed)
    return [small_instance(SMALL_FAMILIES[i % len(SMALL_FAMILIES)], rng, max_rows, max_cols) for i in range(count)]
