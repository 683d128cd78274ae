from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from legible.envs import GridWorld, TabularMDP, Tunnel, TunnelEnv, TunnelSpec, tunnel_generate
from legible.envs.gridworld import manhattan
from legible.envs.tunnel import PENALTY
from legible.learning import (
    ConvergenceError,
    LearningConfig,
    optimal_actions,
    q_learning_train,
    tunnel_max_reward,
    value_iteration,
)
from legible.experiments import GRIDWORLD_LEARNING
from legible.mdp import QTable
from oracles import brute_force_max_reward, random_small_tunnel


def bandit():
    return TabularMDP([[[(1.0, 0, 0.0, True)], [(1.0, 0, 1.0, True)]]])


def chain(n):
    """States 0..n-1 on a line; action 1 moves right, 0 stays; entering n-1 pays 1 and ends."""
    model = []
    for s in range(n):
        stay = [(1.0, s, 0.0, False)]
        nxt = min(s + 1, n - 1)
        right = [(1.0, nxt, 1.0 if nxt == n - 1 else 0.0, nxt == n - 1)]
        model.append([stay, right])
    return TabularMDP(model, start_states=[0])


def test_config_validation():
    for kwargs in ({"learning_rate": 0}, {"learning_rate": 1.5}, {"discount": 0}, {"discount": 1.1},
                   {"epsilon": -0.1}, {"episodes": 0}, {"max_steps": 0}):
        with pytest.raises(ValueError):
            LearningConfig(**kwargs)


def test_bandit_learns_the_paying_arm():
    q = q_learning_train(bandit(), LearningConfig(discount=0.9, episodes=1000, max_steps=1))
    assert q.greedy_action(0) == 1


def test_training_is_deterministic():
    cfg = LearningConfig(episodes=300, max_steps=60, seed=17)
    world = GridWorld(goal_index=1)
    a = q_learning_train(world, cfg)
    b = q_learning_train(GridWorld(goal_index=1), cfg)
    assert np.array_equal(a.values, b.values)
    assert a.dumps() == b.dumps()
    c = q_learning_train(GridWorld(goal_index=1), LearningConfig(episodes=300, max_steps=60, seed=18))
    assert not np.array_equal(a.values, c.values)


def test_training_rejects_empty_environment():
    class Empty:
        n_states, n_actions = 0, 2

    with pytest.raises(ValueError):
        q_learning_train(Empty(), LearningConfig())


def test_training_log_records(tmp_path):
    import io

    buf = io.StringIO()
    q_learning_train(GridWorld(), LearningConfig(episodes=40, max_steps=50), log=buf, log_every=10)
    lines = buf.getvalue().splitlines()
    assert [ln.split("\t")[0] for ln in lines] == ["10", "20", "30", "40"]
    assert all(0.0 <= float(ln.split("\t")[1]) <= 1.0 for ln in lines)


def test_value_iteration_chain_is_geometric():
    gamma = 0.5
    q = value_iteration(chain(2), gamma)
    assert q[0, 1] == pytest.approx(1.0, abs=1e-12)
    q = value_iteration(chain(5), gamma)
    for s in range(4):
        d = 4 - s
        assert q[s, 1] == pytest.approx(gamma ** (d - 1), abs=1e-9)
        assert q[s, 0] == pytest.approx(gamma ** d, abs=1e-9)


def test_value_iteration_myopic_limit():
    world = GridWorld(goal_index=0)
    q = value_iteration(world, 0.0)
    for s in range(world.n_states):
        for a in range(4):
            (_, _, r, _), = world.model()[s][a]
            assert q[s, a] == r


def test_value_iteration_detects_non_convergence():
    loop = TabularMDP([[[(1.0, 0, 1.0, False)]]])
    with pytest.raises(ConvergenceError):
        value_iteration(loop, 1.0, max_iter=500)


@pytest.mark.parametrize("goal", range(3))
def test_q_learning_matches_value_iteration_on_gridworld(goal):
    world = GridWorld(goal_index=goal)
    q = q_learning_train(world, replace(GRIDWORLD_LEARNING, seed=goal))
    opt = value_iteration(world, 0.95)
    for s in range(world.n_states):
        cell = world.cell(s)
        if cell == world.goal:
            continue
        assert q.greedy_action(s) in optimal_actions(opt, s)
    for start in world.start_cells():
        world.reset(start=start)
        steps, done = 0, False
        while not done and steps < 50:
            done = world.step(q.greedy_action(world.state)).done
            steps += 1
        assert steps == manhattan(start, world.goal)


def test_q_learning_matches_value_iteration_on_chain():
    env = chain(6)
    q = q_learning_train(env, LearningConfig(discount=0.9, episodes=500, max_steps=50, epsilon=0.3))
    opt = value_iteration(env, 0.9)
    for s in range(5):
        assert q.greedy_action(s) in optimal_actions(opt, s)


# --- tunnel oracle -----------------------------------------------------------

def test_oracle_empty_and_single_cell():
    t = Tunnel(np.zeros((3, 6), bool), np.zeros((1, 3, 6), bool), (1, 0), 3)
    assert tunnel_max_reward(t, 0).max_reward == 0
    colors = np.zeros((1, 3, 6), bool)
    colors[0, 2, 1] = True
    res = tunnel_max_reward(Tunnel(np.zeros((3, 6), bool), colors, (1, 0), 3), 0)
    assert res.max_reward == 1 and res.feasible
    assert res.optimal_path[:2] == [(1, 0), (2, 1)]


def test_oracle_reports_infeasible_tunnels():
    obstacles = np.zeros((2, 5), bool)
    obstacles[:, 3] = True
    colors = np.zeros((1, 2, 5), bool)
    colors[0, 0, 1] = colors[0, 1, 2] = True
    res = tunnel_max_reward(Tunnel(obstacles, colors, (0, 0), 3), 0)
    assert not res.feasible
    assert res.max_reward == 2


@pytest.mark.parametrize("length", [8])
def test_oracle_matches_brute_force_on_8_column_4_row_tunnels(length):
    rng = np.random.default_rng(8)
    for _ in range(60):
        t = random_small_tunnel(rng, length=8, width=4)
        for c in range(2):
            want, feasible = brute_force_max_reward(t.obstacles, t.colors[c], t.start[0])
            got = tunnel_max_reward(t, c)
            assert (got.max_reward, got.feasible) == (want, feasible)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_matches_brute_force_on_small_tunnels(seed):
    rng = np.random.default_rng(seed)
    t = random_small_tunnel(rng)
    for c in range(2):
        want, feasible = brute_force_max_reward(t.obstacles, t.colors[c], t.start[0])
        got = tunnel_max_reward(t, c)
        assert (got.max_reward, got.feasible) == (want, feasible)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_path_collects_its_reward(seed):
    t = random_small_tunnel(np.random.default_rng(seed))
    res = tunnel_max_reward(t, 0)
    path = res.optimal_path
    assert path[0] == t.start
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        assert c1 == c0 + 1 and abs(r1 - r0) <= 1
        assert not t.obstacles[r1, c1]
    assert sum(float(t.colors[0, r, c]) for r, c in path[1:]) == res.max_reward
    assert res.feasible == (path[-1][1] == t.length - 1)


@pytest.mark.parametrize("seed", range(20))
def test_oracle_bounds_sampled_rollouts(seed):
    t = tunnel_generate(TunnelSpec(seed=seed))
    rng = np.random.default_rng(seed)
    q = QTable(rng.normal(size=(TunnelEnv(t).n_states, 3)))
    for c in range(t.n_colors):
        bound = tunnel_max_reward(t, c).max_reward
        for k in range(10):
            env = TunnelEnv(t, c)
            env.reset()
            total, done = 0.0, False
            while not done:
                a = q.greedy_action(env.state) if k == 0 else int(rng.integers(3))
                tr = env.step(a)
                total += max(tr.reward, 0.0) if tr.reward != PENALTY else 0.0
                done = tr.done
            assert total <= bound
