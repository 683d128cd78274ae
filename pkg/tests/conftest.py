"""Session fixtures: the trained ensembles are expensive, so each is built once."""

import time

import pytest

from legible.evaluation import alpha_sweep, make_tunnel_batch
from legible.experiments import (
    AGENT_SELECTION,
    DESK_TUNNEL,
    EVAL_BASE_SEED,
    EVAL_EPISODES,
    SWEEP_ALPHAS,
    TUNNEL_OBSERVER,
    train_gridworld_ensemble,
    train_tunnel_ensemble,
)
from legible.mirror import AgentModel, ObserverModel, PolicyEnsemble


@pytest.fixture(scope="session")
def gridworld_tables():
    return train_gridworld_ensemble()


@pytest.fixture(scope="session")
def tunnel_tables():
    return train_tunnel_ensemble()


@pytest.fixture(scope="session")
def tunnel_models(tunnel_tables):
    ens = PolicyEnsemble(tunnel_tables, 0)
    return AgentModel(ens, AGENT_SELECTION), ObserverModel(ens, None, TUNNEL_OBSERVER)


@pytest.fixture(scope="session")
def tunnel_batch():
    return make_tunnel_batch(DESK_TUNNEL, EVAL_EPISODES, EVAL_BASE_SEED, pursued=0)


@pytest.fixture(scope="session")
def tunnel_sweep(tunnel_models, tunnel_batch):
    """The evaluation sweep with its wall-clock time (batch generation included)."""
    agent, obs = tunnel_models
    start = time.perf_counter()
    batch = make_tunnel_batch(DESK_TUNNEL, EVAL_EPISODES, EVAL_BASE_SEED, pursued=0)
    result = alpha_sweep(batch, agent, obs, SWEEP_ALPHAS, selection=AGENT_SELECTION)
    return result, time.perf_counter() - start
