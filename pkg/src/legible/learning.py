"""Tabular Q-learning plus exact dynamic-programming oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, TextIO

import numpy as np

from .envs.tunnel import Tunnel
from .mdp import QTable


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LearningConfig:
    learning_rate: float = 0.1
    discount: float = 0.98
    epsilon: float = 0.2
    episodes: int = 1000
    max_steps: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.episodes < 1 or self.max_steps < 1:
            raise ValueError("episodes and max_steps must be >= 1")


def q_learning_train(env, cfg: LearningConfig, log: Optional[TextIO] = None,
                     log_every: int = 1000) -> QTable:
    """One-step Q-learning with an epsilon-greedy behaviour policy.

    ``env`` needs ``n_states``, ``n_actions``, ``reset(seed)`` and ``step(a)``.
    Every random draw (exploration and episode seeds) comes from one generator
    seeded with ``cfg.seed``, so equal inputs give bitwise-equal tables.
    When ``log`` is given, ``episode<TAB>mean_return`` records are written to it
    every ``log_every`` episodes.
    """
    n_states, n_actions = env.n_states, env.n_actions
    if n_states < 1 or n_actions < 1:
        raise ValueError("environment has no states or no actions")
    q = np.zeros((n_states, n_actions))
    rng = np.random.default_rng(cfg.seed)
    lr, gamma, eps = cfg.learning_rate, cfg.discount, cfg.epsilon
    returns = 0.0
    for episode in range(cfg.episodes):
        s = env.reset(seed=int(rng.integers(2**63 - 1)))
        ep_return = 0.0
        for _ in range(cfg.max_steps):
            if rng.random() < eps:
                a = int(rng.integers(n_actions))
            else:
                a = int(np.argmax(q[s]))
            tr = env.step(a)
            target = tr.reward if tr.done else tr.reward + gamma * q[tr.next_state].max()
            q[s, a] += lr * (target - q[s, a])
            ep_return += tr.reward
            s = tr.next_state
            if tr.done:
                break
        returns += ep_return
        if log is not None and (episode + 1) % log_every == 0:
            log.write(f"{episode + 1}\t{returns / log_every:.6f}\n")
            returns = 0.0
    return QTable(q, getattr(env, "fingerprint", ""))


def value_iteration(env, gamma: float, tol: float = 1e-10, max_iter: int = 100_000) -> QTable:
    """Q* by repeated Bellman backups over ``env.model()``.

    ``model[s][a]`` lists ``(prob, next_state, reward, done)`` outcomes;
    ``done`` outcomes do not bootstrap.
    """
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    model = env.model()
    n_states, n_actions = len(model), len(model[0])
    probs, nexts, rewards, conts, owner = [], [], [], [], []
    for s in range(n_states):
        for a in range(n_actions):
            for p, nxt, r, done in model[s][a]:
                probs.append(p)
                nexts.append(nxt)
                rewards.append(r)
                conts.append(0.0 if done else 1.0)
                owner.append(s * n_actions + a)
    probs, rewards, conts = np.array(probs), np.array(rewards), np.array(conts)
    nexts, owner = np.array(nexts, dtype=int), np.array(owner, dtype=int)

    q = np.zeros(n_states * n_actions)
    for _ in range(max_iter):
        v = q.reshape(n_states, n_actions).max(axis=1)
        backed = probs * (rewards + gamma * conts * v[nexts])
        new_q = np.bincount(owner, weights=backed, minlength=n_states * n_actions)
        residual = np.max(np.abs(new_q - q))
        q = new_q
        if residual < tol:
            return QTable(q.reshape(n_states, n_actions), getattr(env, "fingerprint", ""))
    raise ConvergenceError(f"value iteration did not converge in {max_iter} sweeps (gamma={gamma})")


def optimal_actions(q: QTable, s: int, tol: float = 1e-9) -> set:
    row = q.row(s)
    return {int(a) for a in np.nonzero(row >= row.max() - tol)[0]}


@dataclass
class OracleResult:
    max_reward: float
    optimal_path: List[tuple] = field(default_factory=list)
    feasible: bool = True


def tunnel_max_reward(tunnel: Tunnel, color: int) -> OracleResult:
    """Most cells of ``color`` any obstacle-free path can enter.

    Column-by-column DP: from row r the next column's rows r-1, r, r+1 (clamped)
    are reachable, obstacle cells are dead. If no path reaches the last column,
    the best obstacle-free prefix is returned with ``feasible=False``.
    """
    width, length = tunnel.width, tunnel.length
    layer = tunnel.colors[color]
    neg = -np.inf
    best = np.full(width, neg)
    best[tunnel.start[0]] = 0.0
    parents = np.full((length, width), -1, dtype=int)
    top_value, top_cell = 0.0, tunnel.start
    for col in range(tunnel.start[1] + 1, length):
        new = np.full(width, neg)
        for r in range(width):
            if tunnel.obstacles[r, col]:
                continue
            lo, hi = max(r - 1, 0), min(r + 1, width - 1)
            k = lo + int(np.argmax(best[lo:hi + 1]))
            if best[k] == neg:
                continue
            new[r] = best[k] + float(layer[r, col])
            parents[col, r] = k
            if new[r] > top_value:
                top_value, top_cell = new[r], (r, col)
        best = new
        if np.all(best == neg):
            break

    feasible = bool(np.any(best > neg)) and col == length - 1
    if feasible:
        end = (int(np.argmax(best)), length - 1)
        value = float(best[end[0]])
    else:
        end, value = top_cell, float(top_value)
    path = [end]
    r, c = end
    while c > tunnel.start[1]:
        r = int(parents[c, r])
        c -= 1
        path.append((r, c))
    return OracleResult(value, path[::-1], feasible)
