"""Obstacle-free square gridworld with goals in the corners.

Entering the active goal pays +1 and ends the episode; every other move pays 0.
Moves are 4-connected and clamped at the walls.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .common import EpisodeOverError, Transition

UP, DOWN, LEFT, RIGHT = range(4)
ACTION_NAMES = ("up", "down", "left", "right")
MOVES = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}

DEFAULT_SIZE = 7
DEFAULT_GOALS = ((0, 0), (0, 6), (6, 6))


class GridWorld:
    n_actions = 4

    def __init__(self, size: int = DEFAULT_SIZE, goals: Sequence[tuple] = DEFAULT_GOALS,
                 goal_index: int = 0, position: Optional[tuple] = None):
        if size < 2:
            raise ValueError("grid needs at least 2 cells per side")
        goals = tuple((int(r), int(c)) for r, c in goals)
        if not goals:
            raise ValueError("at least one goal is required")
        if len(set(goals)) != len(goals):
            raise ValueError("goals must be distinct")
        for r, c in goals:
            if not (0 <= r < size and 0 <= c < size):
                raise ValueError(f"goal {(r, c)} outside the {size}x{size} grid")
        if not 0 <= goal_index < len(goals):
            raise ValueError(f"goal_index {goal_index} out of range")
        self.size = size
        self.goals = goals
        self.goal_index = goal_index
        self.done = False
        self._rng = np.random.default_rng(0)
        self.position = tuple(position) if position is not None else self.start_cells()[0]
        self._check_cell(self.position)

    @property
    def n_states(self) -> int:
        return self.size * self.size

    @property
    def goal(self) -> tuple:
        return self.goals[self.goal_index]

    @property
    def fingerprint(self) -> str:
        goals = ";".join(f"{r},{c}" for r, c in self.goals)
        return f"gridworld:{self.size}x{self.size}:goals={goals}:goal={self.goal_index}"

    def with_goal(self, goal_index: int) -> "GridWorld":
        return GridWorld(self.size, self.goals, goal_index)

    def _check_cell(self, cell):
        r, c = cell
        if not (0 <= r < self.size and 0 <= c < self.size):
            raise ValueError(f"cell {cell} outside the grid")

    def index(self, cell) -> int:
        self._check_cell(cell)
        return cell[0] * self.size + cell[1]

    def cell(self, s: int) -> tuple:
        if not 0 <= s < self.n_states:
            raise IndexError(f"state {s} out of range")
        return divmod(int(s), self.size)

    def start_cells(self) -> list:
        return [(r, c) for r in range(self.size) for c in range(self.size) if (r, c) not in self.goals]

    def move(self, cell, action: int) -> tuple:
        dr, dc = MOVES[action]
        return (min(max(cell[0] + dr, 0), self.size - 1),
                min(max(cell[1] + dc, 0), self.size - 1))

    @property
    def state(self) -> int:
        return self.index(self.position)

    def joint_state(self) -> int:
        return self.state

    def reset(self, seed=None, start=None) -> int:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        if start is None:
            cells = self.start_cells()
            start = cells[int(self._rng.integers(len(cells)))]
        self._check_cell(start)
        self.position = tuple(start)
        self.done = False
        return self.state

    def step(self, action: int) -> Transition:
        if self.done:
            raise EpisodeOverError("step() called after the episode ended")
        if action not in MOVES:
            raise IndexError(f"action {action} out of range")
        self.position = self.move(self.position, action)
        if self.position == self.goal:
            self.done = True
            return Transition(self.state, 1.0, True, success=True)
        return Transition(self.state, 0.0, False)

    def model(self):
        """Deterministic transition table for dynamic programming."""
        table = []
        for s in range(self.n_states):
            cell = self.cell(s)
            row = []
            for a in range(self.n_actions):
                if cell == self.goal:
                    row.append([(1.0, s, 0.0, True)])
                    continue
                nxt = self.move(cell, a)
                hit = nxt == self.goal
                row.append([(1.0, self.index(nxt), 1.0 if hit else 0.0, hit)])
            table.append(row)
        return table

    def to_dict(self) -> dict:
        return {"kind": "gridworld", "size": self.size, "goals": [list(g) for g in self.goals],
                "goal_index": self.goal_index, "position": list(self.position)}

    @classmethod
    def from_dict(cls, data: dict) -> "GridWorld":
        return cls(int(data["size"]), [tuple(g) for g in data["goals"]], int(data.get("goal_index", 0)),
                   tuple(data["position"]) if data.get("position") is not None else None)


def manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])
