"""
Run report component.

A Report records what was searched, with which configuration, what was found and at what cost. Reports are
    written as deterministic JSON (sorted keys) with 1-based column indices; report_schema.json documents the
    layout.
"""

import dataclasses
import json
from pathlib import Path
from typing import Optional

import numpy as np

from search_types import InputError, Mode, Status

REPORT_VERSION = 1
SCHEMA_PATH = Path(__file__).with_name('report_schema.json')

STATS_KEYS = ('trials', 'nullspace_evals', 'residual_p', 'seconds')
MATRIX_KEYS = ('rows', 'cols', 'source')


@dataclasses.dataclass(frozen=True)
class CircuitRecord:
    indices: list
    witness: list
    epsilon: Optional[float] = None

    @property
    def size(self):
        return len(self.indices)

    @classmethod
    def from_circuit(cls, circuit, epsilon=None):
        """Converts a Circuit or NearCircuit (0-based) into a 1-based record."""

        epsilon = getattr(circuit, 'epsilon', epsilon)
        return cls(indices=[int(i) + 1 for i in circuit.indices],
                   witness=[float(x) for x in np.asarray(circuit.witness)[circuit.indices]],
                   epsilon=None if epsilon is None else float(epsilon))

    def to_dict(self):
        record = {'indices': list(self.indices), 'witness': list(self.witness), 'size': self.size}
        if self.epsilon is not None:
            record['epsilon'] = self.epsilon
        return record


@dataclasses.dataclass
class Report:
    mode: Mode
    matrix: dict
    config: dict
    status: Status
    circuits: list = dataclasses.field(default_factory=list)
    stats: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    rejected: list = dataclasses.field(default_factory=list)
    version: int = REPORT_VERSION

    def to_dict(self):
        outcome = {'status': self.status.value, 'circuits': [c.to_dict() for c in self.circuits]}
        if self.rejected:
            outcome['rejected'] = [list(r) for r in self.rejected]
        return {
            'version': self.version,
            'mode': self.mode.value,
            'matrix': dict(self.matrix),
            'config': dict(self.config),
            'outcome': outcome,
            'stats': dict(self.stats),
            'seed': self.seed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data):
        validate_report(data)
        outcome = data['outcome']
        return cls(mode=Mode(data['mode']),
                   matrix=dict(data['matrix']),
                   config=dict(data['config']),
                   status=Status(outcome['status']),
                   circuits=[CircuitRecord(indices=list(c['indices']), witness=list(c['witness']),
                                           epsilon=c.get('epsilon')) for c in outcome['circuits']],
                   stats=dict(data['stats']),
                   seed=data['seed'],
                   rejected=[list(r) for r in outcome.get('rejected', [])],
                   version=data['version'])

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _require(condition, message):
    if not condition:
        raise InputError('invalid report: ' + message)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_report(data):
    """Checks a decoded report against the published layout, raising InputError on the first violation."""

    _require(isinstance(data, dict), 'report must be an object')
    for key in ('version', 'mode', 'matrix', 'config', 'outcome', 'stats', 'seed'):
        _require(key in data, 'missing key "{}"'.format(key))

    _require(data['version'] == REPORT_VERSION, 'unsupported version {}'.format(data['version']))
    _require(data['mode'] in {m.value for m in Mode}, 'unknown mode "{}"'.format(data['mode']))
    _require(isinstance(data['seed'], int) and data['seed'] >= 0, 'seed must be a non-negative integer')
    _require(isinstance(data['config'], dict), 'config must be an object')

    matrix = data['matrix']
    _require(isinstance(matrix, dict) and all(k in matrix for k in MATRIX_KEYS), 'matrix needs rows, cols, source')
    _require(isinstance(matrix['rows'], int) and isinstance(matrix['cols'], int)
             and matrix['rows'] >= 1 and matrix['cols'] >= 1, 'matrix dimensions must be positive integers')

    stats = data['stats']
    _require(isinstance(stats, dict) and all(k in stats for k in STATS_KEYS),
             'stats needs {}'.format(', '.join(STATS_KEYS)))
    _require(all(_is_number(stats[k]) and stats[k] >= 0 for k in STATS_KEYS), 'stats must be non-negative numbers')
    _require(stats['residual_p'] <= 1, 'residual_p must not exceed 1')

    outcome = data['outcome']
    _require(isinstance(outcome, dict), 'outcome must be an object')
    _require(outcome.get('status') in {s.value for s in Status}, 'unknown status "{}"'.format(outcome.get('status')))
    circuits = outcome.get('circuits')
    _require(isinstance(circuits, list), 'outcome.circuits must be a list')
    _require((len(circuits) > 0) == (outcome['status'] == Status.FOUND.value),
             'found reports carry circuits and not-found reports carry none')

    for circuit in circuits:
        indices = circuit.get('indices')
        _require(isinstance(indices, list) and len(indices) > 0, 'circuit indices must be a non-empty list')
        _require(all(isinstance(i, int) and 1 <= i <= matrix['cols'] for i in indices),
                 'circuit indices must lie in 1..{}'.format(matrix['cols']))
        _require(indices == sorted(set(indices)), 'circuit indices must be strictly increasing')
        _require(isinstance(circuit.get('witness'), list) and len(circuit['witness']) == len(indices),
                 'witness must have one entry per index')
        _require(circuit.get('size') == len(indices), 'size must equal the number of indices')
        if 'epsilon' in circuit:
            _require(_is_number(circuit['epsilon']) and circuit['epsilon'] > 0, 'epsilon must be positive')

    for rejected in outcome.get('rejected', []):
        _require(isinstance(rejected, list) and all(isinstance(i, int) for i in rejected),
                 'rejected candidates must be lists of indices')


def load_schema():
    with open(SCHEMA_PATH) as f:
        return json.load(f)
