"""Tests for the systematic circuit exclusion component."""

import unittest

import numpy as np

import systematic_search
from circuit_model import brute_force_circuits
from instance_gen import PlantSpec, planted_circuit_matrix, small_instances
from search_types import InfeasibleError, InputError

running_example = np.array([[1., 0., 1.], [0., 1., 1.]])


class ChoosePartitionTest(unittest.TestCase):
    def testChoosePartition_BlockSizes(self):
        partition = systematic_search.choose_partition(100, 70, 5, np.random.default_rng(0))
        self.assertEqual(partition.r, 8)
        self.assertEqual(partition.k, 12)
        self.assertEqual([len(b) for b in partition.blocks], [13] * 4 + [12] * 4)
        self.assertIsNone(np.testing.assert_array_equal(np.sort(np.concatenate(partition.blocks)), np.arange(100)))

    def testChoosePartition_AnyNBlocksFit(self):
        partition = systematic_search.choose_partition(20, 10, 3, np.random.default_rng(1))
        largest = sorted(len(b) for b in partition.blocks)[-3:]
        self.assertLessEqual(sum(largest), 11)

    def testChoosePartition_FullRank(self):
        with self.assertRaises(InputError):
            systematic_search.choose_partition(5, 5, 2, np.random.default_rng(0))

    def testChoosePartition_SizeAboveRank(self):
        with self.assertRaises(InfeasibleError):
            systematic_search.choose_partition(10, 3, 5, np.random.default_rng(0))


class NextCombinationTest(unittest.TestCase):
    def testNextCombination_Successors(self):
        self.assertEqual(systematic_search.next_combination([0, 1, 2], 5).tolist(), [0, 1, 3])
        self.assertEqual(systematic_search.next_combination([0, 3, 4], 5).tolist(), [1, 2, 3])
        self.assertIsNone(systematic_search.next_combination([2, 3, 4], 5))

    def testNextCombination_VisitsEverySubsetOnce(self):
        C = np.arange(3)
        seen = []
        while C is not None:
            seen.append(tuple(C.tolist()))
            C = systematic_search.next_combination(C, 6)
        self.assertEqual(len(seen), systematic_search.partition_subset_count(6, 3))
        self.assertEqual(seen, sorted(set(seen)))


class SystematicCostEstimateTest(unittest.TestCase):
    def testSystematicCostEstimate_HalfRank(self):
        n, count, base, _ = systematic_search.systematic_cost_estimate(0.5, 3)
        self.assertEqual(n, 3)
        self.assertEqual(count, 20)
        self.assertAlmostEqual(base, 2.0)

    def testSystematicCostEstimate_Binomial(self):
        n, count, _, _ = systematic_search.systematic_cost_estimate(0.625, 3)
        self.assertEqual(n, 5)
        self.assertEqual(count, 56)

    def testSystematicCostEstimate_Invalid(self):
        with self.assertRaises(InputError):
            systematic_search.systematic_cost_estimate(1.0, 3)


class CircuitfindTest(unittest.TestCase):
    def testCircuitfind_RunningExample(self):
        found, circuit, _ = systematic_search.circuitfind(running_example, 3)
        self.assertTrue(found)
        self.assertEqual(circuit.key(), (0, 1, 2))
        found, circuit, _ = systematic_search.circuitfind(running_example, 2)
        self.assertFalse(found)
        self.assertIsNone(circuit)

    def testCircuitfind_FullColumnRank(self):
        found, _, stats = systematic_search.circuitfind(np.eye(3), 2)
        self.assertFalse(found)
        self.assertEqual(stats.nullspace_evals, 0)

    def testCircuitfind_PlantedCircuit(self):
        A, plants = planted_circuit_matrix(PlantSpec(N=20, rho=0.5, sizes=(3,), seed=4))
        found, circuit, stats = systematic_search.circuitfind(A, 3, seed=1)
        self.assertTrue(found)
        self.assertIsNone(np.testing.assert_array_equal(circuit.indices, plants[0]))
        self.assertGreater(stats.subsets_examined, 0)
        self.assertFalse(systematic_search.circuitfind(A, 2, seed=1)[0])

    def testCircuitfind_AgreesWithOracle(self):
        for A in small_instances(200, seed=2):
            oracle = {c.key(): c.size for c in brute_force_circuits(A, min(5, A.shape[1]))}
            for n in range(1, min(5, A.shape[1]) + 1):
                found, circuit, _ = systematic_search.circuitfind(A, n, seed=3)
                self.assertEqual(found, any(size <= n for size in oracle.values()), (A, n))
                if found:
                    self.assertLessEqual(circuit.size, n)
                    self.assertIn(circuit.key(), oracle, (A, n))

    def testCircuitfind_NegligibleColumn(self):
        A = np.array([[1., 0., 1e-17], [0., 1., 0.]])
        for n in (1, 3):
            found, circuit, _ = systematic_search.circuitfind(A, n)
            self.assertTrue(found)
            self.assertEqual(circuit.key(), (2,))

    def testCircuitfind_RecursesOnLargeNullSpace(self):
        # Twenty columns share a plane, so some pair of blocks has a null space of dimension two or more.
        rng = np.random.default_rng(5)
        A = np.hstack([rng.standard_normal((6, 10)), rng.standard_normal((6, 2)) @ rng.standard_normal((2, 20))])
        found, _, stats = systematic_search.circuitfind(A, 2, seed=0)
        self.assertFalse(found)
        self.assertGreater(stats.recursive_calls, 0)
        self.assertGreater(stats.max_depth, 0)

    def testCircuitfind_InvalidSize(self):
        with self.assertRaises(InfeasibleError):
            systematic_search.circuitfind(running_example, 4)

    def testCircuitfind_InvalidDepthGuard(self):
        with self.assertRaises(InputError):
            systematic_search.circuitfind(running_example, 2, depth_guard=0)


if __name__ == '__main__':
    unittest.main()
