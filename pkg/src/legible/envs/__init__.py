from .common import EpisodeOverError, TabularMDP, Transition
from .gridworld import GridWorld
from .tunnel import (
    Tunnel,
    TunnelEnv,
    TunnelSpec,
    TunnelTrainingEnv,
    observe,
    tunnel_generate,
    tunnel_merge,
)

__all__ = [
    "EpisodeOverError",
    "GridWorld",
    "TabularMDP",
    "Transition",
    "Tunnel",
    "TunnelEnv",
    "TunnelSpec",
    "TunnelTrainingEnv",
    "observe",
    "tunnel_generate",
    "tunnel_merge",
]
