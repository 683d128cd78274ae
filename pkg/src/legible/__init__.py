"""Legibility-regularized action selection for tabular agents.

An agent that knows which of several policies it pursues adds
``alpha * log P(pursued policy | state, action)`` to its Q-values, where the
posterior comes from a model of an observer watching it act. The package holds
the agent and observer models, tabular learners, two benchmark environments
(a corner-goal gridworld and procedurally generated tunnels), evaluation
metrics and a command-line interface.
"""

from .mdp import Boltzmann, EpsilonGreedy, Greedy, QTable, action_distribution
from .mirror import (
    AgentModel,
    LegibilityConfig,
    ObserverModel,
    PolicyEnsemble,
    legibility_cross_entropy,
    legible_action,
    legible_q,
    observer_posterior,
)

__version__ = "0.1.0"

__all__ = [
    "AgentModel",
    "Boltzmann",
    "EpsilonGreedy",
    "Greedy",
    "LegibilityConfig",
    "ObserverModel",
    "PolicyEnsemble",
    "QTable",
    "action_distribution",
    "legibility_cross_entropy",
    "legible_action",
    "legible_q",
    "observer_posterior",
]
