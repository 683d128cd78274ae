"""Tabular MDP primitives: Q-tables and the transforms from Q-values to action
probabilities (Boltzmann, epsilon-greedy, greedy).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Boltzmann:
    temperature: float = 1.0

    def __post_init__(self):
        if not (self.temperature > 0 and np.isfinite(self.temperature)):
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class EpsilonGreedy:
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


@dataclass(frozen=True)
class Greedy:
    pass


DistributionModel = Union[Boltzmann, EpsilonGreedy, Greedy]


def model_to_dict(model: DistributionModel) -> dict:
    if isinstance(model, Boltzmann):
        return {"kind": "boltzmann", "temperature": model.temperature}
    if isinstance(model, EpsilonGreedy):
        return {"kind": "epsilon-greedy", "epsilon": model.epsilon}
    if isinstance(model, Greedy):
        return {"kind": "greedy"}
    raise TypeError(f"unknown distribution model {model!r}")


def model_from_dict(data: dict) -> DistributionModel:
    kind = data.get("kind")
    if kind == "boltzmann":
        return Boltzmann(float(data.get("temperature", 1.0)))
    if kind == "epsilon-greedy":
        return EpsilonGreedy(float(data.get("epsilon", 0.1)))
    if kind == "greedy":
        return Greedy()
    raise ValueError(f"unknown distribution model kind {kind!r}")


def make_model(kind: str, epsilon: float = 0.1, temperature: float = 1.0) -> DistributionModel:
    """Build a transform from its CLI name."""
    return model_from_dict({"kind": kind, "epsilon": epsilon, "temperature": temperature})


def _check_row(q_row) -> np.ndarray:
    row = np.asarray(q_row, dtype=float)
    if row.ndim != 1 or row.size == 0:
        raise ValueError("q_row must be a non-empty vector")
    if not np.all(np.isfinite(row)):
        raise ValueError("q_row contains non-finite values")
    return row


def argmax(q_row) -> int:
    """Index of the largest entry; the lowest index wins ties."""
    return int(np.argmax(q_row))


def boltzmann(q_row, temperature: float) -> np.ndarray:
    row = _check_row(q_row)
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = (row - row.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


def epsilon_greedy(q_row, epsilon: float) -> np.ndarray:
    row = _check_row(q_row)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    n = row.size
    probs = np.full(n, epsilon / n)
    probs[argmax(row)] += 1.0 - epsilon
    return probs


def distribution(model: DistributionModel, q_row) -> np.ndarray:
    """Apply a transform to a single row of Q-values."""
    if isinstance(model, Boltzmann):
        return boltzmann(q_row, model.temperature)
    if isinstance(model, EpsilonGreedy):
        return epsilon_greedy(q_row, model.epsilon)
    if isinstance(model, Greedy):
        return epsilon_greedy(q_row, 0.0)
    raise TypeError(f"unknown distribution model {model!r}")


class QTable:
    """Dense (state, action) -> value table.

    ``fingerprint`` names the environment the table was trained on so that
    tables from mismatched environments can be rejected at load time.
    """

    def __init__(self, values, fingerprint: str = ""):
        values = np.array(values, dtype=float)
        if values.ndim != 2:
            raise ValueError("Q-table values must be a 2-D array")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("Q-table needs at least one state and one action")
        self.values = values
        self.fingerprint = fingerprint

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, fingerprint: str = "") -> "QTable":
        return cls(np.zeros((n_states, n_actions)), fingerprint)

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def check_state(self, s: int) -> int:
        s = int(s)
        if not 0 <= s < self.n_states:
            raise IndexError(f"state {s} out of range [0, {self.n_states})")
        return s

    def check_action(self, a: int) -> int:
        a = int(a)
        if not 0 <= a < self.n_actions:
            raise IndexError(f"action {a} out of range [0, {self.n_actions})")
        return a

    def row(self, s: int) -> np.ndarray:
        return self.values[self.check_state(s)]

    def __getitem__(self, key):
        s, a = key
        return float(self.values[self.check_state(s), self.check_action(a)])

    def greedy_action(self, s: int) -> int:
        return argmax(self.row(s))

    def greedy_policy(self) -> np.ndarray:
        return np.argmax(self.values, axis=1)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return self.fingerprint == other.fingerprint and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"QTable({self.n_states}x{self.n_actions}, fingerprint={self.fingerprint!r})"

    # JSON Lines: a header record, then one record of action values per state.
    # json emits the shortest repr that round-trips, so finite doubles survive exactly.

    def dumps(self) -> str:
        lines = [json.dumps({"state_count": self.n_states,
                             "action_count": self.n_actions,
                             "fingerprint": self.fingerprint})]
        lines.extend(json.dumps(row) for row in self.values.tolist())
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "QTable":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise ValueError("empty Q-table document")
        header = json.loads(lines[0])
        n_states, n_actions = int(header["state_count"]), int(header["action_count"])
        rows = [json.loads(line) for line in lines[1:]]
        if len(rows) != n_states:
            raise ValueError(f"expected {n_states} state records, found {len(rows)}")
        if any(len(r) != n_actions for r in rows):
            raise ValueError(f"every state record must hold {n_actions} values")
        return cls(np.array(rows, dtype=float).reshape(n_states, n_actions),
                   header.get("fingerprint", ""))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "QTable":
        return cls.loads(Path(path).read_text())


def action_distribution(model: DistributionModel, q: QTable, s: int) -> np.ndarray:
    return distribution(model, q.row(s))
