"""Independent reference computations the tests compare the package against.

They are written from first principles in plain Python and share no code
with the package beyond its data types.
"""

import itertools
import math

import numpy as np

from legible.envs import Tunnel
from legible.mdp import Boltzmann, Greedy


def ref_action_probs(row, g):
    n = len(row)
    if isinstance(g, Boltzmann):
        top = max(row)
        w = [math.exp((x - top) / g.temperature) for x in row]
        return [x / sum(w) for x in w]
    eps = 0.0 if isinstance(g, Greedy) else g.epsilon
    best = row.index(max(row))
    return [eps / n + (1 - eps if a == best else 0.0) for a in range(n)]


def ref_posterior(tables, s, a, g, prior):
    """Bayes' rule by enumeration over the policies."""
    joint = [ref_action_probs(list(t[s]), g)[a] * p for t, p in zip(tables, prior)]
    z = sum(joint)
    return [x / z for x in joint] if z > 0 else list(prior)


def brute_force_max_reward(obstacles, layer, start_row):
    """Best own-color haul over every action sequence (prefixes if no path survives)."""
    width, length = obstacles.shape
    best_full, best_any = None, 0.0
    for actions in itertools.product((-1, 1, 0), repeat=length - 1):
        row, total, alive = start_row, 0.0, True
        for step, move in enumerate(actions):
            col = step + 1
            row = min(max(row + move, 0), width - 1)
            if obstacles[row, col]:
                alive = False
                break
            total += float(layer[row, col])
            best_any = max(best_any, total)
        if alive:
            best_full = total if best_full is None else max(best_full, total)
    return (best_full, True) if best_full is not None else (best_any, False)


def random_small_tunnel(rng, length=None, width=None, n_colors=2):
    length = length or int(rng.integers(2, 9))
    width = width or int(rng.integers(1, 5))
    start = (int(rng.integers(width)), 0)
    obstacles = rng.random((width, length)) < rng.uniform(0, 0.4)
    obstacles[:, 0] = False
    colors = (rng.random((n_colors, width, length)) < rng.uniform(0, 0.6)) & ~obstacles[None]
    colors[:, start[0], 0] = False
    return Tunnel(obstacles, colors, start, sight=3)
