"""Enumerations and exceptions shared by the circuit search components."""

import enum


class Variant(enum.Enum):
    ON_Q = 'q'
    ON_QSTAR = 'qstar'


class Status(enum.Enum):
    FOUND = 'found'
    NOT_FOUND = 'not_found'


class MatrixFormat(enum.Enum):
    MATRIX_MARKET = 'matrixmarket'
    CSV = 'csv'

    @staticmethod
    def from_path(path):
        """Guesses the matrix format from a file extension, defaulting to CSV.

        :param path: path to the matrix file.
        :return: the matrix format.
        """

        return MatrixFormat.MATRIX_MARKET if str(path).lower().endswith('.mtx') else MatrixFormat.CSV


class Mode(enum.Enum):
    FIND = 'find'
    ENUMERATE = 'enumerate'
    EXCLUDE = 'exclude'
    NEAR = 'near'
    NEAR_BISECT = 'near_bisect'


class CircuitryError(Exception):
    pass


class InputError(CircuitryError, ValueError):
    def __init__(self, message, line=None, column=None):
        """
        Initialises InputError.

        :param message: human readable description of the problem.
        :param line: 1-based line of the offending input, if known.
        :param column: 1-based column of the offending input, if known.
        """

        location = ''
        if line is not None:
            location = ' (line {}'.format(line) + (', column {})'.format(column) if column is not None else ')')
        super(InputError, self).__init__(message + location)
        self.line = line
        self.column = column


class InfeasibleError(InputError):
    pass


class SpectralSplitError(InputError):
    def __init__(self, message, sigmas):
        super(SpectralSplitError, self).__init__(message)
        self.sigmas = sigmas


class NumericalError(CircuitryError, ArithmeticError):
    pass


class UsageError(CircuitryError):
    pass
