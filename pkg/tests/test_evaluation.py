import numpy as np
import pytest

from legible.envs import GridWorld, Tunnel, TunnelEnv, TunnelSpec, tunnel_generate
from legible.evaluation import (
    Step,
    Trajectory,
    alpha_sweep,
    goal_distance,
    gridworld_rollouts,
    gridworld_sweep,
    legibility_gain,
    legibility_score,
    legible_policy,
    make_tunnel_batch,
    reward_ratio,
    rollout,
    run_batch,
    success_rate,
    trajectory_heatmap,
)
from legible.learning import OracleResult, tunnel_max_reward
from legible.mdp import Boltzmann, Greedy, QTable
from legible.mirror import AgentModel, LegibilityConfig, ObserverModel, PolicyEnsemble


def tunnel_models(n_colors=3, seed=0, width=8, g=Boltzmann(0.1)):
    rng = np.random.default_rng(seed)
    env = TunnelEnv(tunnel_generate(TunnelSpec(length=20, width=width, colors=n_colors, seed=0)))
    tables = [QTable(rng.normal(size=(env.n_states, 3))) for _ in range(n_colors)]
    ens = PolicyEnsemble(tables, 0)
    return AgentModel(ens), ObserverModel(ens, None, g)


def fake(collected_per_step, success=True, key="k", positions=None):
    steps = [Step(0, 0, 0.0, 0, False, collected=tuple(c)) for c in collected_per_step]
    return Trajectory(steps, positions or [], 0, success, env_key=key, grid_shape=(2, 3))


# --- rollouts ---------------------------------------------------------------------

def test_rollout_is_deterministic():
    agent, obs = tunnel_models()
    tunnel = tunnel_generate(TunnelSpec(length=20, seed=4))
    policy = legible_policy(agent, obs, LegibilityConfig(1.0), Boltzmann(0.3))
    a = rollout(TunnelEnv(tunnel), policy, tunnel.length, seed=9)
    b = rollout(TunnelEnv(tunnel), policy, tunnel.length, seed=9)
    assert a.to_dict() == b.to_dict()


def test_greedy_rollout_on_clear_single_color_tunnel_collects_its_path():
    spec = TunnelSpec(length=30, colors=1, obstacles=0, seed=2)
    tunnel = tunnel_generate(spec)
    env = TunnelEnv(tunnel)
    q = QTable(np.random.default_rng(0).normal(size=(env.n_states, 3)))
    agent = AgentModel(PolicyEnsemble([q], 0))
    traj = rollout(env, legible_policy(agent, ObserverModel(agent.ensemble), LegibilityConfig(0.0)),
                   tunnel.length, seed=0)
    on_path = sum(int(tunnel.colors[0, r, c]) for r, c in traj.positions[1:])
    assert traj.success and not traj.truncated
    assert len(traj.steps) == tunnel.length - 1
    assert traj.total_reward == on_path == traj.color_rewards[0]
    assert traj.total_reward <= tunnel_max_reward(tunnel, 0).max_reward


def test_trajectory_round_trip():
    agent, obs = tunnel_models()
    tunnel = tunnel_generate(TunnelSpec(length=20, seed=1))
    traj = rollout(TunnelEnv(tunnel), legible_policy(agent, obs, LegibilityConfig(1.0)), 20, seed=0)
    again = Trajectory.from_dict(traj.to_dict(), traj.grid_shape)
    assert again.to_dict() == traj.to_dict()


def test_rollout_marks_truncation():
    world = GridWorld(goal_index=0)
    traj = rollout(world, lambda s, rng: 1, max_steps=3, seed=0, start=(3, 3))  # always down
    assert traj.truncated and not traj.success and len(traj.steps) == 3


# --- metrics ----------------------------------------------------------------------

def test_reward_ratio_examples():
    trajs = [fake([[0], [0, 1], []]), fake([[1]]), fake([[0]])]
    oracles = [OracleResult(4, True, []), OracleResult(2, True, []), OracleResult(0, True, [])]
    # the third episode has nothing collectible and is skipped
    assert reward_ratio(trajs, 0, oracles) == pytest.approx((2 / 4 + 0 / 2) / 2)
    assert reward_ratio(trajs, 1, oracles) == pytest.approx((1 / 4 + 1 / 2) / 2)
    assert reward_ratio(trajs[2:], 0, oracles[2:]) is None
    with pytest.raises(ValueError):
        reward_ratio(trajs, 0, oracles[:2])


def test_success_rate_example():
    trajs = [fake([], success=True)] * 190 + [fake([], success=False)] * 10
    assert success_rate(trajs) == 0.95
    with pytest.raises(ValueError):
        success_rate([])


def test_legibility_score_examples():
    world = GridWorld(goal_index=1)
    q = QTable(np.random.default_rng(0).normal(size=(world.n_states, 4)))
    single = PolicyEnsemble([q], 0)
    policy = legible_policy(AgentModel(single), ObserverModel(single), LegibilityConfig(0.0))
    traj = rollout(world, policy, 20, seed=0, start=(3, 3))
    assert legibility_score([traj], ObserverModel(single)) == 1.0
    # n identical policies under a uniform prior: every posterior is 1/n
    obs = ObserverModel(PolicyEnsemble([q] * 4, 0), None, Boltzmann(0.1))
    assert legibility_score([traj], obs) == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ValueError):
        legibility_score([fake([])], obs)


def test_legibility_score_pools_transitions():
    tables = [QTable([[np.log(3.0), 0.0]]), QTable([[0.0, np.log(3.0)]])]
    obs = ObserverModel(PolicyEnsemble(tables, 0), None, Boltzmann(1.0))
    long_ = Trajectory([Step(0, 0, 0, 0, False)] * 3, [], 0, True)   # posterior 0.75 each
    short = Trajectory([Step(0, 1, 0, 0, False)], [], 0, True)       # posterior 0.25
    assert legibility_score([long_, short], obs) == pytest.approx((3 * 0.75 + 0.25) / 4)


def test_legibility_gain_examples():
    assert legibility_gain(0.48, 0.30) == pytest.approx(1.6)
    assert legibility_gain(0.51, 0.30) == pytest.approx(1.7)
    with pytest.raises(ValueError):
        legibility_gain(0.5, 0.0)


def test_heatmap_counts_visits_per_episode():
    a = fake([], positions=[(0, 0), (1, 1), (1, 2)])
    b = fake([], positions=[(0, 0), (0, 1), (1, 2)])
    grid = trajectory_heatmap([a, b])
    assert grid.tolist() == [[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]]
    assert trajectory_heatmap([a]).tolist() == [[1, 0, 0], [0, 1, 1]]
    with pytest.raises(ValueError):
        trajectory_heatmap([a, fake([], key="other", positions=[(0, 0)])])
    assert trajectory_heatmap([], (2, 2)).tolist() == [[0, 0], [0, 0]]
    with pytest.raises(ValueError):
        trajectory_heatmap([])


# --- batches and sweeps -----------------------------------------------------------

def test_batch_is_reproducible_and_nonempty_for_pursued_color():
    spec = TunnelSpec(length=20, seed=0)
    a = make_tunnel_batch(spec, 15, 100, pursued=1)
    b = make_tunnel_batch(spec, 15, 100, pursued=1)
    assert a.seeds == list(range(100, 115))
    assert [t.layout_key() for t in a.tunnels] == [t.layout_key() for t in b.tunnels]
    assert all(o[1].max_reward > 0 for o in a.oracles)


def test_sweep_over_identical_policies_has_unit_gain():
    world = GridWorld()
    q = QTable(np.random.default_rng(1).normal(size=(world.n_states, 4)))
    ens = PolicyEnsemble([q, q, q], 0)
    rows = gridworld_sweep(world, AgentModel(ens), ObserverModel(ens, None, Boltzmann(0.1)), [0.0, 1.0, 5.0],
                           selection=Greedy())
    assert [r.gain for r in rows] == [1.0] * 9
    assert all(r.legibility == pytest.approx(1 / 3, abs=1e-12) for r in rows)


def test_tunnel_sweep_baseline_has_unit_gain():
    agent, obs = tunnel_models()
    batch = make_tunnel_batch(TunnelSpec(length=20, seed=0), 10, 0)
    res = alpha_sweep(batch, agent, obs, [0.0])
    assert [r.gain for r in res.rows] == [1.0]
    with pytest.raises(ValueError):
        alpha_sweep(batch, agent, obs, [1.0])


def test_sweep_serializations():
    agent, obs = tunnel_models()
    batch = make_tunnel_batch(TunnelSpec(length=20, seed=0), 5, 0)
    res = alpha_sweep(batch, agent, obs, [0.0, 2.0])
    lines = res.to_csv().splitlines()
    assert lines[0] == "alpha,reward_ratio_own,reward_ratio_other,success_rate,legibility,gain"
    assert len(lines) == 3 and lines[1].startswith("0.0,")
    assert res.to_dict()["rows"][1]["alpha"] == 2.0


def test_parallel_batch_matches_serial():
    agent, obs = tunnel_models()
    batch = make_tunnel_batch(TunnelSpec(length=20, seed=0), 9, 0)
    cfg = LegibilityConfig(1.0)
    serial = run_batch(batch, agent, obs, cfg, jobs=1, selection=Boltzmann(0.5))
    parallel = run_batch(batch, agent, obs, cfg, jobs=3, selection=Boltzmann(0.5))
    assert [t.to_dict() for t in serial] == [t.to_dict() for t in parallel]


def test_bootstrap_standard_error_of_legibility_is_small(tunnel_models, tunnel_batch):
    agent, obs = tunnel_models
    trajs = run_batch(tunnel_batch, agent, obs, LegibilityConfig(1.0), selection=Greedy())
    rng = np.random.default_rng(0)
    scores = [legibility_score([trajs[i] for i in rng.integers(len(trajs), size=len(trajs))], obs)
              for _ in range(200)]
    assert np.std(scores) < 0.05 * legibility_score(trajs, obs)


# --- gridworld --------------------------------------------------------------------

def test_gridworld_rollouts_start_everywhere_and_succeed(gridworld_tables):
    world = GridWorld(goal_index=2)
    ens = PolicyEnsemble(gridworld_tables, 2)
    trajs = gridworld_rollouts(world, AgentModel(ens), ObserverModel(ens, None, Boltzmann(0.05)),
                               LegibilityConfig(0.0), selection=Greedy())
    assert [t.positions[0] for t in trajs] == world.start_cells()
    assert success_rate(trajs) == 1.0


def test_goal_distance_example():
    world = GridWorld(goal_index=0)  # other goals (0, 6) and (6, 6)
    traj = Trajectory([], [(3, 3), (3, 4), (2, 4)], 0, True)
    # closest approaches: (0, 6) -> 4 from (2, 4); (6, 6) -> 5 from (3, 4)
    assert goal_distance([traj], world) == 4.5
    with pytest.raises(ValueError):
        goal_distance([], world)
