"""
Near circuit component.

An epsilon-near circuit of a full rank matrix is a column set I with sigma_min(A(:, I)) <= epsilon whose proper
    subsets all have smallest singular value above epsilon. The randomized search samples m + 1 columns, where
    m counts the singular values of A above epsilon, and reads a candidate off the bottom right singular vector.
"""

import dataclasses
import functools
import logging
import math
from typing import Optional

import numpy as np

from matrix_core import Tolerances, as_dense_matrix, normalize_witness, singular_values, \
    smallest_right_singular_vector, smallest_singular_value, support
from random_search import MAX_RESTARTS, SearchState, TrialResult, random_subset, run_trials, shrink_subset
from search_types import InputError, NumericalError, SpectralSplitError, Status

logger = logging.getLogger(__name__)

# Relative step used to move an epsilon off a singular value during bisection.
EPSILON_NUDGE = 1e-3
MAX_NUDGES = 200


@dataclasses.dataclass(frozen=True)
class NearCircuit:
    indices: np.ndarray
    witness: np.ndarray
    epsilon: float
    sigma_min: float
    sigma_removed_min: float

    @property
    def size(self):
        return len(self.indices)

    def key(self):
        return tuple(int(i) for i in self.indices)


@dataclasses.dataclass(frozen=True)
class SpectralSplit:
    m: int
    sigmas: np.ndarray
    epsilon: float


@dataclasses.dataclass(frozen=True)
class NearSearchOutcome:
    status: Status
    near_circuit: Optional[NearCircuit]
    state: SearchState
    rejected: list
    split: SpectralSplit


@dataclasses.dataclass(frozen=True)
class BisectionOutcome:
    epsilon: float
    near_circuit: Optional[NearCircuit]
    states: list


def spectral_split(A, epsilon, tol=None):
    """Counts the singular values of A above epsilon and checks that epsilon separates them from the rest.

    :param A: M x N matrix with M <= N.
    :param epsilon: separating value.
    :param tol: tolerances; both gaps must exceed rank_tol_factor * sigma_max.
    :return: SpectralSplit.
    """

    A = np.asarray(A, dtype=np.float64)
    tol = tol if tol is not None else Tolerances.for_matrix(A)
    if not epsilon > 0:
        raise InputError('epsilon must be positive, got {}'.format(epsilon))

    sigmas = singular_values(A)
    m = int(np.count_nonzero(sigmas > epsilon))
    margin = tol.rank_tol_factor * sigmas[0]
    above = sigmas[m - 1] if m > 0 else math.inf
    below = sigmas[m] if m < len(sigmas) else 0.0

    if above - epsilon <= margin or epsilon - below <= margin:
        raise SpectralSplitError('epsilon {:.6g} does not separate the spectrum (nearest singular values {:.6g} '
                                 'and {:.6g}); choose another epsilon or use bisection'.format(
                                     epsilon, above, below), sigmas)
    if m >= A.shape[1]:
        raise SpectralSplitError('every singular value exceeds epsilon {:.6g}; no epsilon-near circuit '
                                 'exists'.format(epsilon), sigmas)
    return SpectralSplit(m=m, sigmas=sigmas, epsilon=float(epsilon))


def _near_evidence(A, I):
    B = A[:, I]
    removed = [smallest_singular_value(np.delete(B, k, axis=1)) for k in range(len(I))]
    return smallest_singular_value(B), min(removed), smallest_right_singular_vector(B)


def verify_near_circuit(A, I, epsilon):
    """Checks that the columns I form an epsilon-near circuit.

    :param A: M x N matrix.
    :param I: non-empty 0-based column indices.
    :param epsilon: positive residual bound.
    :return: tuple of (flag, unit witness N-vector or None).
    """

    flag, near = make_near_circuit(A, I, epsilon)
    return flag, (near.witness if flag else None)


def make_near_circuit(A, I, epsilon):
    """Evaluates the near circuit conditions for I and packages the evidence.

    :return: tuple of (flag, NearCircuit carrying the singular value evidence).
    """

    A = np.asarray(A, dtype=np.float64)
    I = np.unique(np.asarray(I, dtype=int))
    if I.size == 0:
        raise InputError('index set must not be empty')
    if I[0] < 0 or I[-1] >= A.shape[1]:
        raise InputError('index set {} out of range for {} columns'.format(I.tolist(), A.shape[1]))
    if not epsilon > 0:
        raise InputError('epsilon must be positive, got {}'.format(epsilon))

    sigma_min, removed_min, v = _near_evidence(A, I)
    witness = np.zeros(A.shape[1])
    witness[I] = v
    near = NearCircuit(indices=I, witness=normalize_witness(witness), epsilon=float(epsilon),
                       sigma_min=float(sigma_min), sigma_removed_min=float(removed_min))
    return bool(sigma_min <= epsilon < removed_min), near


def witness_concentration_bound(epsilon, sigma2):
    """Upper bound eps^2 / (sigma2^2 - eps^2) on the weight of the bottom singular vector outside a near circuit."""

    if not 0 < epsilon < sigma2:
        raise InputError('bound requires 0 < epsilon < sigma2, got epsilon={}, sigma2={}'.format(epsilon, sigma2))
    return epsilon ** 2 / (sigma2 ** 2 - epsilon ** 2)


def truncation_quality_bound(sigma1, sigma_max, delta):
    """Residual bound sqrt(sigma1^2 (1 - delta^2) + sigma_max^2 delta^2) after truncating the bottom singular vector.

    :param sigma1: smallest singular value of A.
    :param sigma_max: largest singular value of A.
    :param delta: norm of the truncated part of the singular vector, 0 <= delta < 1.
    """

    if not 0 <= delta < 1:
        raise InputError('delta must lie in [0, 1), got {}'.format(delta))
    return math.sqrt(sigma1 ** 2 * (1 - delta ** 2) + sigma_max ** 2 * delta ** 2)


def _padded_sigmas(B):
    sigmas = singular_values(B)
    if B.shape[1] > len(sigmas):
        sigmas = np.concatenate([sigmas, np.zeros(B.shape[1] - len(sigmas))])
    return sigmas


def _minimal_subset(A, I, weights, epsilon):
    # Drops the weakest columns first while the rest stays epsilon-dependent.
    current = list(I[np.argsort(weights, kind='stable')])
    for col in list(current):
        rest = [j for j in current if j != col]
        if rest and smallest_singular_value(A[:, rest]) <= epsilon:
            current = rest
    return np.sort(np.asarray(current, dtype=int))


def run_near_trial(rng, A, m, n, epsilon, tol):
    """Runs one trial of the near circuit search.

    :param rng: numpy random generator dedicated to this trial.
    :param A: M x N matrix.
    :param m: number of singular values of A above epsilon.
    :param n: target near circuit size.
    :param epsilon: residual bound.
    :param tol: tolerances for the support of the singular vector.
    :return: TrialResult whose payload is the verified NearCircuit.
    """

    N = A.shape[1]
    evals = 0
    for restarts in range(MAX_RESTARTS + 1):
        K = random_subset(N, min(m + 1, N), rng)
        while True:
            l = int(np.count_nonzero(_padded_sigmas(A[:, K]) <= epsilon))
            evals += 1
            if l <= 1:
                break
            K = shrink_subset(K, l, rng)

        if l == 0:
            continue

        v = smallest_right_singular_vector(A[:, K])
        largest = np.argsort(-np.abs(v), kind='stable')[:n]
        J = np.intersect1d(largest, support(v, tol))
        if smallest_singular_value(A[:, K[J]]) > epsilon:
            return TrialResult(candidate=None, r=len(K), nullspace_evals=evals, restarts=restarts)

        I = _minimal_subset(A, K[J], np.abs(v[J]), epsilon)
        flag, near = make_near_circuit(A, I, epsilon)
        if flag:
            return TrialResult(candidate=I, r=len(K), nullspace_evals=evals, restarts=restarts, payload=near)
        logger.debug('rejected near circuit candidate %s (sigma %.3g, one-removed minimum %.3g)', I.tolist(),
                     near.sigma_min, near.sigma_removed_min)
        return TrialResult(candidate=None, r=len(K), nullspace_evals=evals, restarts=restarts, rejected=I)

    raise NumericalError('near circuit trial restarted more than {} times'.format(MAX_RESTARTS))


def near_search(A, n, epsilon, delta, seed=0, max_trials=None, threads=1, tol=None, stream_key=()):
    """Randomized search for an epsilon-near circuit with at most n columns.

    :param A: M x N matrix with M <= N.
    :param n: target size, 1 <= n <= N.
    :param epsilon: residual bound; must split the spectrum of A.
    :param delta: residual miss probability at which the search gives up, 0 < delta < 1.
    :param seed: base seed of the per-trial random streams.
    :param max_trials: optional cap on the number of trials.
    :param threads: number of worker threads.
    :param tol: tolerances.
    :param stream_key: extra integers distinguishing this search's random streams.
    :return: NearSearchOutcome.
    """

    A = as_dense_matrix(A)
    M, N = A.shape
    if M > N:
        raise InputError('near circuit search requires M <= N, got {}x{}'.format(M, N))
    if not 1 <= n <= N:
        raise InputError('circuit size n must satisfy 1 <= n <= {}, got {}'.format(N, n))
    if not 0 < delta < 1:
        raise InputError('delta must lie in (0, 1), got {}'.format(delta))
    tol = tol if tol is not None else Tolerances.for_matrix(A)

    split = spectral_split(A, epsilon, tol)
    logger.debug('epsilon %.6g splits off m = %d singular values', epsilon, split.m)

    trial_fn = functools.partial(run_near_trial, A=A, m=split.m, n=n, epsilon=epsilon, tol=tol)
    result, state, rejected = run_trials(trial_fn, N, n, delta, seed, stream_key, max_trials, threads)
    if result is None:
        return NearSearchOutcome(status=Status.NOT_FOUND, near_circuit=None, state=state, rejected=rejected,
                                 split=split)
    logger.debug('near circuit %s found after %d trials', result.candidate.tolist(), state.trials)
    return NearSearchOutcome(status=Status.FOUND, near_circuit=result.payload, state=state, rejected=rejected,
                             split=split)


def _nudge(epsilon, sigmas, tol, direction):
    """Moves epsilon geometrically in `direction` until it lies clear of every singular value."""

    margin = tol.rank_tol_factor * sigmas[0]
    for _ in range(MAX_NUDGES):
        if np.all(np.abs(sigmas - epsilon) > margin) and epsilon > margin:
            return epsilon
        epsilon *= (1 + EPSILON_NUDGE) ** direction
    raise SpectralSplitError('could not move epsilon {:.6g} off the spectrum'.format(epsilon), sigmas)


def minimal_epsilon_bisection(A, n, delta, eps_lo, eps_hi, iters=20, seed=0, max_trials=None, threads=1,
                              tol=None):
    """Bisects on epsilon for the smallest value at which a near circuit of size <= n is found.

    The bisection is geometric. Every level runs with the same seed schedule; detection is not monotone in
    epsilon for a fixed seed, so the result is the smallest epsilon at which a search succeeded.

    :param A: M x N matrix with M <= N.
    :param n: target size.
    :param delta: residual miss probability per level.
    :param eps_lo: lower end of the window, 0 < eps_lo < eps_hi.
    :param eps_hi: upper end of the window.
    :param iters: number of bisection steps.
    :return: BisectionOutcome; epsilon is eps_hi and near_circuit None when nothing is found at eps_hi.
    """

    A = as_dense_matrix(A)
    if not 0 < eps_lo < eps_hi:
        raise InputError('bisection window requires 0 < eps_lo < eps_hi, got [{}, {}]'.format(eps_lo, eps_hi))
    if iters < 0:
        raise InputError('iters must be non-negative, got {}'.format(iters))
    tol = tol if tol is not None else Tolerances.for_matrix(A)
    sigmas = singular_values(A)

    lo = _nudge(eps_lo, sigmas, tol, +1)
    hi = _nudge(eps_hi, sigmas, tol, -1)
    states = []

    def attempt(epsilon):
        try:
            outcome = near_search(A, n, epsilon, delta, seed, max_trials, threads, tol)
        except SpectralSplitError as e:
            logger.debug('epsilon %.6g skipped: %s', epsilon, e)
            return None
        states.append(outcome.state)
        return outcome.near_circuit

    best = attempt(hi)
    if best is None:
        logger.info('no near circuit of size <= %d at epsilon %.6g', n, eps_hi)
        return BisectionOutcome(epsilon=float(eps_hi), near_circuit=None, states=states)

    for level in range(iters):
        if hi / lo <= 1 + EPSILON_NUDGE:
            break
        mid = _nudge(math.sqrt(lo * hi), sigmas, tol, -1)
        if not lo < mid < hi:
            break
        found = attempt(mid)
        logger.debug('bisection level %d: epsilon %.6g %s', level, mid, 'found' if found is not None else 'missed')
        if found is not None:
            hi, best = mid, found
        else:
            lo = mid

    return BisectionOutcome(epsilon=float(hi), near_circuit=best, states=states)
