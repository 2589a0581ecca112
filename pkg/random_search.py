"""
Random circuit search component.

Implements the Monte Carlo search for circuits on the orthonormal factor Q and on the reduced factor Q*,
    the residual miss probability bookkeeping, trial planning formulas and repeated search enumeration.
A trial draws m + 1 columns, shrinks the sample while its null space has dimension above one, and inspects
    the support of the remaining null vector.
"""

import concurrent.futures
import dataclasses
import functools
import logging
import math
from typing import Optional

import numpy as np

from circuit_model import Circuit, circuit_from_qstar_witness, is_circuit, make_circuit
from matrix_core import Tolerances, lq_factor, matrix_scale, null_space_basis, original_columns, support
from search_types import InputError, NumericalError, Status, Variant

logger = logging.getLogger(__name__)

MAX_RESTARTS = 100


@dataclasses.dataclass(frozen=True)
class SearchConfig:
    n: int
    epsilon: float = 0.01
    seed: int = 0
    variant: Variant = Variant.ON_Q
    max_trials: Optional[int] = None
    threads: int = 1

    def validate(self, N):
        """Checks the configuration against a matrix with N columns."""

        if not 1 <= self.n <= N:
            raise InputError('circuit size n must satisfy 1 <= n <= {}, got {}'.format(N, self.n))
        if not 0 < self.epsilon < 1:
            raise InputError('epsilon must lie in (0, 1), got {}'.format(self.epsilon))
        if self.seed < 0:
            raise InputError('seed must be non-negative, got {}'.format(self.seed))
        if self.max_trials is not None and self.max_trials < 1:
            raise InputError('max_trials must be positive, got {}'.format(self.max_trials))
        if self.threads < 1:
            raise InputError('threads must be positive, got {}'.format(self.threads))


@dataclasses.dataclass
class SearchState:
    """Residual miss probability p and the work spent so far.

    p is the product of the per-trial miss factors (1 - q); the factors are kept as a histogram so that p is
    independent of the order in which trials complete.
    """
    seed: int
    trials: int = 0
    nullspace_evals: int = 0
    restarts: int = 0
    rejected: int = 0
    truncated: bool = False
    miss_factors: dict = dataclasses.field(default_factory=dict)

    def record_miss(self, q):
        self.miss_factors[q] = self.miss_factors.get(q, 0) + 1

    @property
    def log_p(self):
        total = 0.0
        for q, count in self.miss_factors.items():
            if q >= 1.0:
                return -math.inf
            total += count * math.log1p(-q)
        return total

    @property
    def p(self):
        return math.exp(self.log_p)


@dataclasses.dataclass(frozen=True)
class SearchOutcome:
    status: Status
    circuit: Optional[Circuit]
    state: SearchState


@dataclasses.dataclass(frozen=True)
class TrialResult:
    """Result of one trial: a verified candidate (original column indices) or the subset size it ended at."""
    candidate: Optional[np.ndarray]
    r: int
    nullspace_evals: int
    restarts: int = 0
    rejected: Optional[np.ndarray] = None
    payload: object = None


@dataclasses.dataclass(frozen=True)
class EnumerationOutcome:
    circuits: list
    states: list


def random_subset(N, r, rng):
    """Draws a size-r subset of range(N) uniformly, independent of earlier draws.

    :param N: number of elements.
    :param r: subset size, 1 <= r <= N.
    :param rng: numpy random generator.
    :return: sorted 0-based indices.
    """

    if not 1 <= r <= N:
        raise InputError('subset size r must satisfy 1 <= r <= {}, got {}'.format(N, r))
    return np.sort(rng.choice(N, size=r, replace=False))


def shrink_subset(K, l, rng):
    """Replaces K by a uniformly chosen subset with l - 1 fewer elements."""

    return np.sort(rng.choice(K, size=len(K) - l + 1, replace=False))


def subset_inclusion_probability(N, r, n):
    """Probability that a uniform r-subset of N elements contains a fixed n-set: C(N-n, r-n) / C(N, r)."""

    if r < n:
        return 0.0
    return math.comb(N - n, r - n) / math.comb(N, r)


def detection_probability(N, m, n):
    """Probability that one trial with |K| = m + 1 detects a fixed circuit of size n.

    :param N: number of columns.
    :param m: rank.
    :param n: circuit size, n <= m + 1 <= N.
    :return: C(N-n, m+1-n) / C(N, m+1) = prod_{j=1..n} (m-n+j+1) / (N-n+j).
    """

    if not (1 <= n <= m + 1 <= N):
        raise InputError('detection probability requires 1 <= n <= m + 1 <= N, got N={}, m={}, n={}'.format(
            N, m, n))
    return subset_inclusion_probability(N, m + 1, n)


def detection_lower_bound(N, m, n):
    """Lower bound (rho (rho - delta) / (1 - delta))^(n/2) with rho = (m+1)/N, delta = (n-1)/N."""

    rho = (m + 1) / N
    delta = (n - 1) / N
    return (rho * (rho - delta) / (1 - delta)) ** (n / 2)


def multi_circuit_probability(rho, sizes):
    """Approximate single-trial probability of hitting one of several disjoint circuits.

    :param rho: rank ratio, 0 < rho < 1.
    :param sizes: sizes c_1..c_k of the circuits.
    :return: 1 - prod_j (1 - rho^c_j).
    """

    if not 0 < rho < 1:
        raise InputError('rho must lie in (0, 1), got {}'.format(rho))
    if len(sizes) == 0:
        raise InputError('at least one circuit size is required')
    return 1.0 - float(np.prod([1.0 - rho ** c for c in sizes]))


def required_trials(epsilon, rho, n):
    """Number of trials K >= -log(epsilon) / rho^n that drives the miss probability below epsilon."""

    if not 0 < epsilon < 1:
        raise InputError('epsilon must lie in (0, 1), got {}'.format(epsilon))
    if not 0 < rho < 1:
        raise InputError('rho must lie in (0, 1), got {}'.format(rho))
    return math.ceil(-math.log(epsilon) / rho ** n)


def expected_trials(rho, n):
    return rho ** -n


def expected_qstar_rows(N, m):
    """Mean row count (m+1)(N-m)/N of the reduced working matrix Q*(K2c, K1) for |K| = m + 1."""

    return (m + 1) * (N - m) / N


def run_trial_q(rng, A, Q, n, tol, scale=None):
    """Runs one trial on the orthonormal factor Q (columns in original order).

    :param rng: numpy random generator dedicated to this trial.
    :param A: the original matrix, used to certify the candidate.
    :param Q: m x N factor with orthonormal rows.
    :param n: target circuit size.
    :param tol: tolerances.
    :param scale: magnitude candidates are certified against; defaults to sigma_max(A).
    :return: TrialResult.
    """

    m, N = Q.shape
    evals = 0
    for restarts in range(MAX_RESTARTS + 1):
        K = random_subset(N, min(m + 1, N), rng)
        while True:
            basis = null_space_basis(Q[:, K], tol, scale=1.0)
            evals += 1
            if basis.d <= 1:
                break
            K = shrink_subset(K, basis.d, rng)

        if basis.d == 0:
            continue

        J = K[support(basis.Z[:, 0], tol)]
        if len(J) > n:
            return TrialResult(candidate=None, r=len(K), nullspace_evals=evals, restarts=restarts)
        if is_circuit(A, J, tol, scale)[0]:
            return TrialResult(candidate=J, r=len(K), nullspace_evals=evals, restarts=restarts)
        logger.debug('rejected candidate %s that failed circuit certification', J.tolist())
        return TrialResult(candidate=None, r=len(K), nullspace_evals=evals, restarts=restarts, rejected=J)

    raise NumericalError('trial restarted more than {} times'.format(MAX_RESTARTS))


def run_trial_qstar(rng, A, Qstar, perm, n, tol, scale=None):
    """Runs one trial on the reduced factor Q* (columns in permuted order).

    :param rng: numpy random generator dedicated to this trial.
    :param A: the original matrix, used to certify the candidate.
    :param Qstar: m x (N - m) reduced factor.
    :param perm: column permutation of the factorization.
    :param n: target circuit size.
    :param tol: tolerances.
    :param scale: magnitude candidates are certified against; defaults to sigma_max(A).
    :return: TrialResult with the candidate in original column numbering.
    """

    m, free = Qstar.shape
    N = m + free
    qstar_scale = max(1.0, float(np.abs(Qstar).max())) if Qstar.size else 1.0
    evals = 0
    for restarts in range(MAX_RESTARTS + 1):
        K = random_subset(N, m + 1, rng)
        while True:
            k1 = K[K < free]
            k2c = np.setdiff1d(np.arange(m), K[K >= free] - free)
            basis = null_space_basis(Qstar[np.ix_(k2c, k1)], tol, scale=qstar_scale)
            evals += 1
            if basis.d <= 1:
                break
            K = shrink_subset(K, basis.d, rng)

        if basis.d == 0:
            continue

        J = circuit_from_qstar_witness(K, basis.Z[:, 0], Qstar, perm, tol)
        if len(J) > n:
            return TrialResult(candidate=None, r=len(K), nullspace_evals=evals, restarts=restarts)
        if is_circuit(A, J, tol, scale)[0]:
            return TrialResult(candidate=J, r=len(K), nullspace_evals=evals, restarts=restarts)
        logger.debug('rejected candidate %s that failed circuit certification', J.tolist())
        return TrialResult(candidate=None, r=len(K), nullspace_evals=evals, restarts=restarts, rejected=J)

    raise NumericalError('trial restarted more than {} times'.format(MAX_RESTARTS))


def trial_rng(seed, stream_key, trial_index):
    """Per-trial random stream derived from (seed, stream key, trial index)."""

    return np.random.default_rng([int(seed), *[int(k) for k in stream_key], int(trial_index)])


def run_trials(trial_fn, N, n, epsilon, seed, stream_key=(), max_trials=None, threads=1):
    """Runs trials until one returns a candidate or the residual miss probability drops to epsilon.

    Trials run in batches of `threads`; results are consumed in trial-index order, so the outcome and the
    state do not depend on the thread count.

    :param trial_fn: callable taking a numpy generator and returning a TrialResult.
    :param N: number of columns (for the miss factor).
    :param n: target circuit size.
    :param epsilon: residual miss probability at which the search gives up.
    :param seed: base seed.
    :param stream_key: extra integers distinguishing independent searches with the same seed.
    :param max_trials: optional cap on the number of trials.
    :param threads: number of worker threads.
    :return: tuple of (successful TrialResult or None, SearchState, list of rejected candidates).
    """

    state = SearchState(seed=seed)
    rejected = []
    log_epsilon = math.log(epsilon)
    executor = concurrent.futures.ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        next_index = 0
        while state.log_p > log_epsilon:
            batch = threads
            if max_trials is not None:
                batch = min(batch, max_trials - state.trials)
                if batch <= 0:
                    state.truncated = True
                    logger.info('search truncated after %d trials with p = %.3g', state.trials, state.p)
                    break

            rngs = [trial_rng(seed, stream_key, i) for i in range(next_index, next_index + batch)]
            next_index += batch
            results = executor.map(trial_fn, rngs) if executor is not None else map(trial_fn, rngs)

            for result in results:
                state.trials += 1
                state.nullspace_evals += result.nullspace_evals
                state.restarts += result.restarts
                if result.candidate is not None:
                    return result, state, rejected
                if result.rejected is not None:
                    state.rejected += 1
                    rejected.append(result.rejected)
                state.record_miss(subset_inclusion_probability(N, result.r, n))
                if state.log_p <= log_epsilon:
                    break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    return None, state, rejected


def _outcome(A, result, state, tol, scale):
    if result is None:
        return SearchOutcome(status=Status.NOT_FOUND, circuit=None, state=state)
    circuit = make_circuit(A, result.candidate, tol, scale)
    logger.debug('found circuit %s after %d trials', circuit.indices.tolist(), state.trials)
    return SearchOutcome(status=Status.FOUND, circuit=circuit, state=state)


def _search_scale(A, F, scale):
    if scale is not None:
        return scale
    if F.sigmas is not None and len(F.sigmas):
        return float(F.sigmas[0])
    return matrix_scale(A)


def _check_nullity(F):
    if F.m >= F.n_cols:
        raise InputError('the columns are linearly independent (rank {} = N); there is no circuit to search '
                         'for'.format(F.m))


def search_q(A, F, cfg, tol=None, stream_key=(), scale=None):
    """Random circuit search on the orthonormal factor Q.

    :param A: M x N matrix.
    :param F: factorization of A.
    :param cfg: SearchConfig.
    :param tol: tolerances.
    :param stream_key: extra integers distinguishing this search's random streams.
    :param scale: magnitude candidates are certified against; defaults to sigma_max(A).
    :return: SearchOutcome.
    """

    A = np.asarray(A, dtype=np.float64)
    tol = tol if tol is not None else Tolerances.for_matrix(A)
    cfg.validate(A.shape[1])
    _check_nullity(F)
    scale = _search_scale(A, F, scale)

    trial_fn = functools.partial(run_trial_q, A=A, Q=original_columns(F), n=cfg.n, tol=tol, scale=scale)
    result, state, _ = run_trials(trial_fn, A.shape[1], cfg.n, cfg.epsilon, cfg.seed, stream_key,
                                  cfg.max_trials, cfg.threads)
    return _outcome(A, result, state, tol, scale)


def search_qstar(A, F, cfg, tol=None, stream_key=(), scale=None):
    """Random circuit search on the reduced factor Q* of A(:, perm) = L~ (Q*, I).

    :param A: M x N matrix.
    :param F: factorization of A with Q* computed.
    :param cfg: SearchConfig.
    :param tol: tolerances.
    :param stream_key: extra integers distinguishing this search's random streams.
    :param scale: magnitude candidates are certified against; defaults to sigma_max(A).
    :return: SearchOutcome with the circuit in original column numbering.
    """

    A = np.asarray(A, dtype=np.float64)
    tol = tol if tol is not None else Tolerances.for_matrix(A)
    cfg.validate(A.shape[1])
    _check_nullity(F)
    if F.Qstar is None:
        raise InputError('factorization has no reduced factor Q*')
    scale = _search_scale(A, F, scale)

    trial_fn = functools.partial(run_trial_qstar, A=A, Qstar=F.Qstar, perm=F.perm, n=cfg.n, tol=tol,
                                 scale=scale)
    result, state, _ = run_trials(trial_fn, A.shape[1], cfg.n, cfg.epsilon, cfg.seed, stream_key,
                                  cfg.max_trials, cfg.threads)
    return _outcome(A, result, state, tol, scale)


def search(A, F, cfg, tol=None, stream_key=(), scale=None):
    """Dispatches to the Q or Q* search according to cfg.variant."""

    if Variant(cfg.variant) == Variant.ON_QSTAR:
        return search_qstar(A, F, cfg, tol, stream_key, scale)
    return search_q(A, F, cfg, tol, stream_key, scale)


def enumerate_circuits(A, cfg, tol=None, scale=None):
    """Finds circuits of size <= n by repeated search, deleting a column of each circuit found.

    After each success the lowest column index of the new circuit is removed from the working matrix, which is
    then refactorized; the search ends with the first unsuccessful round.

    :param A: M x N matrix.
    :param cfg: SearchConfig.
    :param tol: tolerances.
    :param scale: magnitude ranks are judged against; defaults to sigma_max(A).
    :return: EnumerationOutcome with circuits in original numbering and the per-round search states.
    """

    A = np.asarray(A, dtype=np.float64)
    tol = tol if tol is not None else Tolerances.for_matrix(A)
    cfg.validate(A.shape[1])
    scale = scale if scale is not None else matrix_scale(A)

    alive = np.arange(A.shape[1])
    found = {}
    states = []
    for round_index in range(A.shape[1]):
        sub = A[:, alive]
        F = lq_factor(sub, tol, scale)
        if F.m >= len(alive):
            break
        round_cfg = dataclasses.replace(cfg, n=min(cfg.n, len(alive)))
        outcome = search(sub, F, round_cfg, tol, stream_key=(round_index,), scale=scale)
        states.append(outcome.state)
        if outcome.status == Status.NOT_FOUND:
            break

        J = alive[outcome.circuit.indices]
        circuit = make_circuit(A, J, tol, scale)
        found.setdefault(circuit.key(), circuit)
        logger.info('round %d: circuit %s', round_index, J.tolist())
        alive = alive[alive != J[0]]

    return EnumerationOutcome(circuits=sorted(found.values(), key=Circuit.key), states=states)
