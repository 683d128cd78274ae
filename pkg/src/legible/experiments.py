"""Default experiment settings and ensemble training for both environments."""

from __future__ import annotations

from dataclasses import replace
from typing import List, Optional, TextIO

from .envs.gridworld import GridWorld
from .envs.tunnel import TunnelSpec, TunnelTrainingEnv
from .learning import LearningConfig, q_learning_train
from .mdp import Boltzmann, Greedy, QTable

GRIDWORLD_LEARNING = LearningConfig(learning_rate=0.1, discount=0.95, epsilon=0.5, episodes=20000,
                                    max_steps=100, seed=0)
TUNNEL_LEARNING = LearningConfig(learning_rate=0.1, discount=0.98, epsilon=0.1, episodes=30000,
                                 max_steps=1000, seed=0)
DESK_TUNNEL = TunnelSpec()

# Observer transform used by the experiments; see README for why not epsilon-greedy.
GRIDWORLD_OBSERVER = Boltzmann(0.05)
TUNNEL_OBSERVER = Boltzmann(0.1)
AGENT_SELECTION = Greedy()

SWEEP_ALPHAS = (0.0, 0.1, 0.5, 1.0, 2.0, 5.0)
OVER_REGULARIZED_ALPHA = 50.0
EVAL_EPISODES = 200
EVAL_BASE_SEED = 1000


def train_gridworld_ensemble(world: Optional[GridWorld] = None, cfg: LearningConfig = GRIDWORLD_LEARNING,
                             log: Optional[TextIO] = None) -> List[QTable]:
    """One Q-table per goal, each trained with its own derived seed."""
    world = world or GridWorld()
    return [q_learning_train(world.with_goal(g), replace(cfg, seed=cfg.seed + g), log)
            for g in range(len(world.goals))]


def train_tunnel_policy(spec: TunnelSpec = DESK_TUNNEL, cfg: LearningConfig = TUNNEL_LEARNING,
                        log: Optional[TextIO] = None) -> QTable:
    """Q-table over the color-agnostic reduced observation, trained on fresh
    single-color tunnels every episode."""
    return q_learning_train(TunnelTrainingEnv(spec), replace(cfg, max_steps=max(cfg.max_steps, spec.length)), log)


def train_tunnel_ensemble(spec: TunnelSpec = DESK_TUNNEL, cfg: LearningConfig = TUNNEL_LEARNING,
                          log: Optional[TextIO] = None) -> List[QTable]:
    """One table per color.

    The observation only encodes the policy's own color, so every color's policy
    is the same function of its observation: one training run serves all colors.
    """
    table = train_tunnel_policy(spec, cfg, log)
    return [QTable(table.values.copy(), f"{table.fingerprint}:color={c}") for c in range(spec.colors)]
