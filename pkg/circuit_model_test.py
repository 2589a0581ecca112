"""Tests for the circuit model component."""

import itertools
import unittest

import numpy as np

import circuit_model
import matrix_core
from instance_gen import small_instances
from search_types import InputError, NumericalError

running_example = np.array([[1., 0., 1.], [0., 1., 1.]])

# Column 2 is independent of everything else; {0, 1, 3} is the only circuit.
isolated_column = np.array([[1., 0., 0., 1.],
                            [0., 1., 0., 1.],
                            [0., 0., 1., 0.]])

# Column 2 is numerically zero next to the other two, so {2} is the only circuit.
negligible_column = np.array([[1., 0., 1e-17], [0., 1., 0.]])

# The null space is spanned by (1e-17, 1, 0); row 0 of its basis is rounding-level.
negligible_null_row = np.array([[1., -1e-17, 0.], [0., 0., 1.]])


def small_integer_instances(count, seed=0):
    """Rank deficient 3 x 7 matrices with entries in {-1, 0, 1}, rich in short circuits."""

    rng = np.random.default_rng(seed)
    instances = []
    while len(instances) < count:
        A = rng.integers(-1, 2, size=(3, 7)).astype(float)
        if np.any(A):
            instances.append(A)
    return instances


class IsCircuitTest(unittest.TestCase):
    def testIsCircuit_RunningExample(self):
        flag, witness = circuit_model.is_circuit(running_example, [0, 1, 2])
        self.assertTrue(flag)
        self.assertIsNone(np.testing.assert_allclose(witness, np.array([1, 1, -1]) / np.sqrt(3), atol=1e-12))

    def testIsCircuit_IndependentSubset(self):
        flag, witness = circuit_model.is_circuit(running_example, [0, 1])
        self.assertFalse(flag)
        self.assertIsNone(witness)

    def testIsCircuit_ZeroColumn(self):
        A = np.array([[1., 0., 2.], [3., 0., 4.]])
        self.assertTrue(circuit_model.is_circuit(A, [1])[0])
        self.assertFalse(circuit_model.is_circuit(A, [0, 1])[0])

    def testIsCircuit_WitnessAnnihilates(self):
        flag, witness = circuit_model.is_circuit(isolated_column, [0, 1, 3])
        self.assertTrue(flag)
        self.assertLess(np.linalg.norm(isolated_column @ witness), 1e-12)
        self.assertIsNone(np.testing.assert_array_equal(matrix_core.support(witness), [0, 1, 3]))

    def testIsCircuit_NotMinimal(self):
        self.assertFalse(circuit_model.is_circuit(isolated_column, [0, 1, 2, 3])[0])

    def testIsCircuit_NegligibleColumn(self):
        flag, witness = circuit_model.is_circuit(negligible_column, [2])
        self.assertTrue(flag)
        self.assertIsNone(np.testing.assert_allclose(witness, [0., 0., 1.]))
        self.assertFalse(circuit_model.is_circuit(negligible_column, [0, 2])[0])
        self.assertEqual(matrix_core.lq_factor(negligible_column).m, 2)

    def testIsCircuit_ExplicitScale(self):
        self.assertFalse(circuit_model.is_circuit(negligible_column, [2], scale=1e-17)[0])
        self.assertTrue(circuit_model.is_circuit(negligible_column, [2], scale=1.0)[0])

    def testIsCircuit_OutOfRange(self):
        with self.assertRaises(InputError):
            circuit_model.is_circuit(running_example, [0, 3])


class MakeCircuitTest(unittest.TestCase):
    def testMakeCircuit_Certified(self):
        circuit = circuit_model.make_circuit(running_example, [2, 0, 1])
        self.assertEqual(circuit.key(), (0, 1, 2))
        self.assertEqual(circuit.size, 3)

    def testMakeCircuit_Rejected(self):
        with self.assertRaises(NumericalError):
            circuit_model.make_circuit(running_example, [0, 1])


class CharacterizationTest(unittest.TestCase):
    def testCharacterization_Agreement(self):
        for A in small_instances(200, seed=0):
            U = matrix_core.orthonormal_null_basis(A)
            scale = matrix_core.matrix_scale(A)
            for size in range(1, 6):
                for J in itertools.combinations(range(A.shape[1]), size):
                    by_null_vector = circuit_model.is_circuit(A, J, scale=scale)[0]
                    self.assertEqual(circuit_model.is_circuit_by_definition(A, J, scale=scale), by_null_vector,
                                     (A, J))
                    self.assertEqual(circuit_model.is_circuit_by_null_rows(U, J), by_null_vector, (A, J))

    def testCharacterization_DependencyByNullRows(self):
        U = matrix_core.orthonormal_null_basis(running_example)
        self.assertTrue(circuit_model.has_dependency_by_null_rows(U, [0, 1, 2]))
        self.assertFalse(circuit_model.has_dependency_by_null_rows(U, [0, 1]))

    def testCharacterization_RoundingLevelNullRow(self):
        U = matrix_core.orthonormal_null_basis(negligible_null_row)
        self.assertEqual(U.shape, (3, 1))
        self.assertTrue(circuit_model.is_circuit(negligible_null_row, [1])[0])
        self.assertTrue(circuit_model.is_circuit_by_definition(negligible_null_row, [1]))
        self.assertTrue(circuit_model.has_dependency_by_null_rows(U, [1]))
        self.assertTrue(circuit_model.is_circuit_by_null_rows(U, [1]))
        self.assertFalse(circuit_model.is_circuit_by_null_rows(U, [0, 1]))
        J = circuit_model.circuit_from_null_rows(U, [0])
        self.assertIsNone(np.testing.assert_array_equal(J, [1]))

    def testCharacterization_CircuitFromNullRows(self):
        U = matrix_core.orthonormal_null_basis(running_example)
        J = circuit_model.circuit_from_null_rows(U, [])
        self.assertIsNone(np.testing.assert_array_equal(J, [0, 1, 2]))
        self.assertIsNone(circuit_model.circuit_from_null_rows(U, [0]))


class PrunableColumnsTest(unittest.TestCase):
    def testPrunableColumns_IsolatedColumn(self):
        F = matrix_core.lq_factor(isolated_column)
        self.assertIsNone(np.testing.assert_array_equal(circuit_model.prunable_columns(F), [2]))

    def testPrunableColumns_RunningExample(self):
        F = matrix_core.lq_factor(running_example)
        self.assertEqual(circuit_model.prunable_columns(F).size, 0)

    def testPrunableColumns_MatchesOracle(self):
        for A in small_integer_instances(15, seed=1):
            F = matrix_core.lq_factor(A)
            circuits = circuit_model.brute_force_circuits(A, F.m + 1)
            covered = set(itertools.chain.from_iterable(c.key() for c in circuits))
            expected = sorted(set(range(A.shape[1])) - covered)
            self.assertEqual(circuit_model.prunable_columns(F).tolist(), expected, A)


class CircuitFromQstarWitnessTest(unittest.TestCase):
    def testCircuitFromQstarWitness_AllColumns(self):
        F = matrix_core.lq_factor(running_example)
        J = circuit_model.circuit_from_qstar_witness(np.arange(3), np.array([1.]), F.Qstar, F.perm)
        self.assertIsNone(np.testing.assert_array_equal(J, [0, 1, 2]))


class ReduceToCircuitTest(unittest.TestCase):
    def testReduceToCircuit_DropsIndependentColumn(self):
        circuit = circuit_model.reduce_to_circuit(isolated_column, [0, 1, 2, 3])
        self.assertEqual(circuit.key(), (0, 1, 3))

    def testReduceToCircuit_Independent(self):
        with self.assertRaises(InputError):
            circuit_model.reduce_to_circuit(isolated_column, [0, 1, 2])

    def testReduceToCircuit_RandomDependentSets(self):
        for A in small_integer_instances(10, seed=2):
            circuit = circuit_model.reduce_to_circuit(A, np.arange(A.shape[1]))
            self.assertTrue(circuit_model.is_circuit_by_definition(A, circuit.indices))


class BruteForceCircuitsTest(unittest.TestCase):
    def testBruteForceCircuits_RunningExample(self):
        circuits = circuit_model.brute_force_circuits(running_example, 3)
        self.assertEqual([c.key() for c in circuits], [(0, 1, 2)])

    def testBruteForceCircuits_SizeLimit(self):
        self.assertEqual(circuit_model.brute_force_circuits(running_example, 2), [])

    def testBruteForceCircuits_ZeroColumn(self):
        A = np.array([[1., 0., 0.], [0., 0., 1.]])
        self.assertEqual([c.key() for c in circuit_model.brute_force_circuits(A, 3)], [(1,)])

    def testBruteForceCircuits_NegligibleColumn(self):
        self.assertEqual([c.key() for c in circuit_model.brute_force_circuits(negligible_column, 3)], [(2,)])

    def testBruteForceCircuits_ParallelColumns(self):
        A = np.array([[1., 2., 0., 1.], [1., 2., 1., 0.]])
        keys = [c.key() for c in circuit_model.brute_force_circuits(A, 3)]
        self.assertEqual(keys, [(0, 1), (0, 2, 3), (1, 2, 3)])

    def testBruteForceCircuits_TooLarge(self):
        with self.assertRaises(InputError):
            circuit_model.brute_force_circuits(np.zeros((2, 30)), 3)


if __name__ == '__main__':
    unittest.main()
