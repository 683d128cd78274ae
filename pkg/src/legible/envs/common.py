from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Transition:
    next_state: int
    reward: float
    done: bool
    hit_obstacle: bool = False
    collected: tuple = ()
    success: bool = False


class EpisodeOverError(RuntimeError):
    """Raised when stepping an environment whose episode has already ended."""


class TabularMDP:
    """Explicit finite MDP given as ``model[s][a] = [(prob, next_state, reward, done), ...]``.

    Mostly a vehicle for small hand-built problems (bandits, chains) used to
    check the learners against closed-form answers.
    """

    def __init__(self, model, start_states: Optional[Sequence[int]] = None, fingerprint: str = "mdp"):
        if len(model) == 0 or any(len(row) == 0 for row in model):
            raise ValueError("MDP needs at least one state and one action")
        self._model = model
        self.n_states = len(model)
        self.n_actions = len(model[0])
        self.start_states = list(start_states) if start_states is not None else list(range(self.n_states))
        self.fingerprint = fingerprint
        self.state = self.start_states[0]
        self.done = False
        self._rng = np.random.default_rng(0)

    def model(self):
        return self._model

    def reset(self, seed=None) -> int:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self.state = self.start_states[int(self._rng.integers(len(self.start_states)))]
        self.done = False
        return self.state

    def step(self, action: int) -> Transition:
        if self.done:
            raise EpisodeOverError("step() called after the episode ended")
        outcomes = self._model[self.state][action]
        probs = np.array([o[0] for o in outcomes], dtype=float)
        k = int(self._rng.choice(len(outcomes), p=probs / probs.sum())) if len(outcomes) > 1 else 0
        _, nxt, reward, done = outcomes[k]
        self.state, self.done = nxt, bool(done)
        return Transition(nxt, float(reward), bool(done))

    def joint_state(self):
        return self.state
