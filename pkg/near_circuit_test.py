"""Tests for the near circuit component."""

import os
import unittest

import numpy as np

import near_circuit
from instance_gen import baseline_sigma_stats, gaussian_matrix, planted_near_instance
from matrix_core import singular_values, smallest_right_singular_vector, smallest_singular_value
from search_types import InputError, SpectralSplitError, Status

SLOW_TESTS = os.environ.get('CIRCUITRY_SLOW_TESTS') == '1'

running_example = np.array([[1., 0., 1.], [0., 1., 1.]])


def baseline_threshold(seed=0):
    """mu - 8 sigma_hat for the sigma_min of four Gaussian columns in 100 rows."""

    A = gaussian_matrix(100, 200, np.random.default_rng(seed))
    mu, sigma_hat = baseline_sigma_stats(A, 4, 200, np.random.default_rng(seed + 1))
    assert mu - 8 * sigma_hat > 0
    return mu - 8 * sigma_hat


def detection_epsilon(scale=1e-3, seed=0):
    """Planted sigma at `scale` times the baseline threshold, and a search epsilon 5% above it."""

    target = scale * baseline_threshold(seed)
    return target, 1.05 * target


def check_bounds(test, count):
    targets = (1e-2, 1e-4, 1e-6)
    checked = 0
    for index in range(count):
        target = targets[index % len(targets)]
        A, plant = planted_near_instance(N=20, M=20, target_sigma=target, size=3, seed=index)
        sigmas = singular_values(A)
        epsilon = 1.0001 * target
        if sigmas[-2] <= epsilon:
            continue
        v = smallest_right_singular_vector(A)
        outside = np.delete(v, plant)
        weight = float(outside @ outside)
        concentration = near_circuit.witness_concentration_bound(epsilon, sigmas[-2])
        test.assertLessEqual(weight, concentration * (1 + 1e-6) + 1e-10, index)

        truncated = np.zeros_like(v)
        truncated[plant] = v[plant]
        truncated /= np.linalg.norm(truncated)
        bound = near_circuit.truncation_quality_bound(sigmas[-1], sigmas[0], np.sqrt(weight))
        test.assertLessEqual(np.linalg.norm(A @ truncated), bound * (1 + 1e-6) + 1e-10, index)
        checked += 1
    return checked


class BoundsTest(unittest.TestCase):
    def testBounds_WitnessConcentration(self):
        self.assertAlmostEqual(near_circuit.witness_concentration_bound(0.1, 1.0), 0.010101, places=6)

    def testBounds_TruncationQuality(self):
        self.assertAlmostEqual(near_circuit.truncation_quality_bound(0.0, 1.0, 0.2), 0.2)
        self.assertAlmostEqual(near_circuit.truncation_quality_bound(1.0, 1.0, 0.5), 1.0)

    def testBounds_Invalid(self):
        with self.assertRaises(InputError):
            near_circuit.witness_concentration_bound(1.0, 1.0)
        with self.assertRaises(InputError):
            near_circuit.truncation_quality_bound(0.1, 1.0, 1.0)

    def testBounds_HoldOnPlantedInstances(self):
        self.assertGreater(check_bounds(self, 30), 15)

    @unittest.skipUnless(SLOW_TESTS, 'set CIRCUITRY_SLOW_TESTS=1 to run')
    def testBounds_HoldOnThousandInstances(self):
        self.assertGreater(check_bounds(self, 1000), 500)


class VerifyNearCircuitTest(unittest.TestCase):
    def testVerifyNearCircuit_ExactCircuit(self):
        flag, witness = near_circuit.verify_near_circuit(running_example, [0, 1, 2], 0.1)
        self.assertTrue(flag)
        self.assertIsNone(np.testing.assert_allclose(witness, np.array([1, 1, -1]) / np.sqrt(3), atol=1e-12))

    def testVerifyNearCircuit_SubsetAlreadyNear(self):
        flag, witness = near_circuit.verify_near_circuit(running_example, [0, 1, 2], 0.7)
        self.assertFalse(flag)
        self.assertIsNone(witness)

    def testVerifyNearCircuit_Independent(self):
        self.assertFalse(near_circuit.verify_near_circuit(running_example, [0, 1], 0.1)[0])

    def testVerifyNearCircuit_Evidence(self):
        flag, near = near_circuit.make_near_circuit(running_example, [2, 0, 1], 0.1)
        self.assertTrue(flag)
        self.assertEqual(near.key(), (0, 1, 2))
        self.assertEqual(near.sigma_min, 0.0)
        self.assertAlmostEqual(near.sigma_removed_min, (np.sqrt(5) - 1) / 2)

    def testVerifyNearCircuit_Invalid(self):
        with self.assertRaises(InputError):
            near_circuit.verify_near_circuit(running_example, [], 0.1)
        with self.assertRaises(InputError):
            near_circuit.verify_near_circuit(running_example, [0, 1], 0.0)


class SpectralSplitTest(unittest.TestCase):
    A = np.hstack([np.diag([3., 2., 1.]), np.zeros((3, 1))])

    def testSpectralSplit_Count(self):
        split = near_circuit.spectral_split(self.A, 1.5)
        self.assertEqual(split.m, 2)
        split = near_circuit.spectral_split(self.A, 0.5)
        self.assertEqual(split.m, 3)

    def testSpectralSplit_EpsilonOnSingularValue(self):
        with self.assertRaises(SpectralSplitError) as raised:
            near_circuit.spectral_split(self.A, 2.0)
        self.assertIsNone(np.testing.assert_allclose(raised.exception.sigmas, [3, 2, 1]))

    def testSpectralSplit_Interlacing(self):
        A = gaussian_matrix(20, 40, np.random.default_rng(4))
        sigmas = singular_values(A)
        split = near_circuit.spectral_split(A, (sigmas[14] + sigmas[15]) / 2)
        self.assertEqual(split.m, 15)
        rng = np.random.default_rng(5)
        for _ in range(200):
            K = rng.choice(40, size=split.m + 1, replace=False)
            self.assertLessEqual(smallest_singular_value(A[:, K]), sigmas[split.m] * (1 + 1e-12))

    def testSpectralSplit_NoNullSpace(self):
        with self.assertRaises(SpectralSplitError):
            near_circuit.spectral_split(np.diag([3., 2., 1.]), 0.5)


class NearSearchTest(unittest.TestCase):
    def testNearSearch_FindsPlant(self):
        target, epsilon = detection_epsilon()
        A, plant = planted_near_instance(N=200, M=100, target_sigma=target, size=4, seed=3)
        outcome = near_circuit.near_search(A, 4, epsilon, 1e-4, seed=1)
        self.assertEqual(outcome.status, Status.FOUND)
        self.assertIsNone(np.testing.assert_array_equal(outcome.near_circuit.indices, plant))
        self.assertLessEqual(outcome.near_circuit.sigma_min, epsilon)
        self.assertGreater(outcome.near_circuit.sigma_removed_min, epsilon)
        self.assertEqual(outcome.split.m, 100)

    def testNearSearch_GaussianControl(self):
        _, epsilon = detection_epsilon(scale=1.0)
        A = gaussian_matrix(100, 200, np.random.default_rng(9))
        outcome = near_circuit.near_search(A, 4, epsilon, 0.01, seed=2)
        self.assertEqual(outcome.status, Status.NOT_FOUND)
        self.assertLessEqual(outcome.state.p, 0.01)

    def testNearSearch_DetectsAtBaselineThreshold(self):
        target, epsilon = detection_epsilon(scale=1.0)
        verified = 0
        for run in range(5):
            A, _ = planted_near_instance(N=200, M=100, target_sigma=target, size=4, seed=200 + run)
            outcome = near_circuit.near_search(A, 4, epsilon, 0.01, seed=run)
            if outcome.status == Status.FOUND:
                verified += near_circuit.verify_near_circuit(A, outcome.near_circuit.indices, epsilon)[0]
        self.assertGreaterEqual(verified, 3)

    def testNearSearch_ThreadCountInvariant(self):
        A, _ = planted_near_instance(N=40, M=20, target_sigma=1e-6, size=3, seed=4)
        single = near_circuit.near_search(A, 3, 2e-6, 1e-3, seed=6)
        threaded = near_circuit.near_search(A, 3, 2e-6, 1e-3, seed=6, threads=4)
        self.assertEqual(single.near_circuit.key(), threaded.near_circuit.key())
        self.assertEqual(single.state.trials, threaded.state.trials)

    def testNearSearch_TallMatrix(self):
        with self.assertRaises(InputError):
            near_circuit.near_search(np.ones((3, 2)), 2, 0.1, 0.01)

    @unittest.skipUnless(SLOW_TESTS, 'set CIRCUITRY_SLOW_TESTS=1 to run')
    def testNearSearch_DetectionRate(self):
        target, epsilon = detection_epsilon(scale=1.0)
        hits = 0
        for run in range(50):
            A, _ = planted_near_instance(N=200, M=100, target_sigma=target, size=4, seed=100 + run)
            outcome = near_circuit.near_search(A, 4, epsilon, 0.01, seed=run)
            if outcome.status == Status.FOUND:
                hits += near_circuit.verify_near_circuit(A, outcome.near_circuit.indices, epsilon)[0]
        self.assertGreaterEqual(hits, 45)


class MinimalEpsilonBisectionTest(unittest.TestCase):
    def testMinimalEpsilonBisection_ApproachesPlantedSigma(self):
        close = 0
        for run in range(5):
            A, _ = planted_near_instance(N=40, M=20, target_sigma=1e-6, size=3, seed=run)
            outcome = near_circuit.minimal_epsilon_bisection(A, 3, 1e-3, 1e-9, 1e-2, seed=run)
            self.assertIsNotNone(outcome.near_circuit)
            self.assertLessEqual(outcome.near_circuit.sigma_min, outcome.epsilon)
            close += 1e-6 / 4 <= outcome.epsilon <= 4e-6
        self.assertGreaterEqual(close, 4)

    def testMinimalEpsilonBisection_NothingAtUpperEnd(self):
        A = gaussian_matrix(20, 40, np.random.default_rng(1))
        outcome = near_circuit.minimal_epsilon_bisection(A, 2, 0.01, 1e-9, 1e-6)
        self.assertIsNone(outcome.near_circuit)
        self.assertEqual(outcome.epsilon, 1e-6)
        self.assertEqual(len(outcome.states), 1)

    def testMinimalEpsilonBisection_InvalidWindow(self):
        with self.assertRaises(InputError):
            near_circuit.minimal_epsilon_bisection(running_example, 2, 0.01, 1e-2, 1e-3)


if __name__ == '__main__':
    unittest.main()
