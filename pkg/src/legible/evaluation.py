"""Rollouts and the metrics used to judge legible behaviour: reward ratio,
success rate, the legibility score L and its gain over the unregularized agent.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .envs.gridworld import GridWorld, manhattan
from .envs.tunnel import Tunnel, TunnelEnv, TunnelSpec, tunnel_generate
from .learning import OracleResult, tunnel_max_reward
from .mirror import AgentModel, LegibilityConfig, ObserverModel, legible_action, posterior_table

Policy = Callable[[object, np.random.Generator], int]


@dataclass(frozen=True)
class Step:
    state: object
    action: int
    reward: float
    next_state: object
    done: bool
    hit_obstacle: bool = False
    collected: tuple = ()


@dataclass
class Trajectory:
    steps: List[Step]
    positions: List[tuple]
    seed: int
    success: bool
    truncated: bool = False
    env_key: str = ""
    grid_shape: tuple = ()

    @property
    def total_reward(self) -> float:
        return float(sum(step.reward for step in self.steps))

    @property
    def color_rewards(self) -> Counter:
        """Cells entered per color, whatever color the agent was seeking."""
        counts = Counter()
        for step in self.steps:
            counts.update(step.collected)
        return counts

    def to_dict(self) -> dict:
        def plain(state):
            return list(state) if isinstance(state, tuple) else state

        return {
            "seed": self.seed,
            "success": self.success,
            "truncated": self.truncated,
            "env_key": self.env_key,
            "total_reward": self.total_reward,
            "positions": [list(p) for p in self.positions],
            "steps": [[plain(s.state), s.action, s.reward, plain(s.next_state), s.done,
                       s.hit_obstacle, list(s.collected)] for s in self.steps],
        }

    @classmethod
    def from_dict(cls, data: dict, grid_shape: tuple = ()) -> "Trajectory":
        def state(x):
            return tuple(x) if isinstance(x, list) else x

        steps = [Step(state(s), a, r, state(n), d, h, tuple(c)) for s, a, r, n, d, h, c in data["steps"]]
        return cls(steps, [tuple(p) for p in data["positions"]], data["seed"], data["success"],
                   data.get("truncated", False), data.get("env_key", ""), grid_shape)


def _env_key(env) -> str:
    if isinstance(env, TunnelEnv):
        return env.tunnel.layout_key()
    return getattr(env, "fingerprint", type(env).__name__)


def _grid_shape(env) -> tuple:
    if isinstance(env, TunnelEnv):
        return (env.tunnel.width, env.tunnel.length)
    if isinstance(env, GridWorld):
        return (env.size, env.size)
    return ()


def rollout(env, policy: Policy, max_steps: int, seed: int, start=None) -> Trajectory:
    """Run one episode. ``policy(state, rng)`` sees ``env.joint_state()``."""
    rng = np.random.default_rng(seed)
    if start is not None:
        env.reset(seed=seed, start=start)
    else:
        env.reset(seed=seed)
    steps = []
    positions = [tuple(env.position)] if hasattr(env, "position") else []
    state = env.joint_state()
    success = False
    for _ in range(max_steps):
        action = int(policy(state, rng))
        tr = env.step(action)
        nxt = env.joint_state()
        steps.append(Step(state, action, tr.reward, nxt, tr.done, tr.hit_obstacle, tr.collected))
        if hasattr(env, "position"):
            positions.append(tuple(env.position))
        state = nxt
        if tr.done:
            success = tr.success
            break
    truncated = not (steps and steps[-1].done)
    return Trajectory(steps, positions, seed, success, truncated, _env_key(env), _grid_shape(env))


def legible_policy(agent: AgentModel, obs: ObserverModel, cfg: LegibilityConfig, selection=None) -> Policy:
    def act(state, rng):
        return legible_action(agent, obs, state, cfg, selection, rng)

    return act


def reward_ratio(trajectories: Sequence[Trajectory], color: int,
                 oracles: Sequence[OracleResult]) -> Optional[float]:
    """Mean per-episode share of the collectible ``color`` reward.

    Episodes whose oracle maximum is 0 are skipped; if all are, returns None.
    """
    if len(trajectories) != len(oracles):
        raise ValueError("need one oracle result per trajectory")
    ratios = [traj.color_rewards[color] / oracle.max_reward
              for traj, oracle in zip(trajectories, oracles) if oracle.max_reward > 0]
    return float(np.mean(ratios)) if ratios else None


def success_rate(trajectories: Sequence[Trajectory]) -> float:
    if not trajectories:
        raise ValueError("empty batch")
    return sum(t.success for t in trajectories) / len(trajectories)


def legibility_score(trajectories: Sequence[Trajectory], obs: ObserverModel,
                     pursued: Optional[int] = None) -> float:
    """Mean observer posterior of the pursued policy over every transition,
    pooled across episodes so each transition weighs the same."""
    r = obs.ensemble.pursued if pursued is None else pursued
    cache: Dict[object, np.ndarray] = {}
    total, count = 0.0, 0
    for traj in trajectories:
        for step in traj.steps:
            post = cache.get(step.state)
            if post is None:
                post = cache[step.state] = posterior_table(obs, step.state)[0][:, r]
            total += post[step.action]
            count += 1
    if count == 0:
        raise ValueError("no transitions to score")
    return total / count


def legibility_gain(l_alpha: float, l_zero: float) -> float:
    if l_zero <= 0:
        raise ValueError("baseline legibility must be positive")
    return l_alpha / l_zero


def trajectory_heatmap(trajectories: Sequence[Trajectory], shape: Optional[tuple] = None) -> np.ndarray:
    """Visits per cell divided by the number of episodes."""
    if trajectories:
        keys = {t.env_key for t in trajectories}
        if len(keys) > 1:
            raise ValueError("trajectories come from different environments")
        shape = shape or trajectories[0].grid_shape
    if not shape:
        raise ValueError("grid shape unknown")
    grid = np.zeros(shape)
    for traj in trajectories:
        for r, c in traj.positions:
            grid[r, c] += 1
    return grid / max(len(trajectories), 1)


# --- tunnel alpha sweep ---------------------------------------------------------


@dataclass
class TunnelBatch:
    tunnels: List[Tunnel]
    seeds: List[int]
    oracles: List[List[OracleResult]]  # oracles[i][color]


def make_tunnel_batch(spec: TunnelSpec, episodes: int, base_seed: int, pursued: int = 0) -> TunnelBatch:
    """Episode ``i`` runs on a tunnel seeded ``base_seed + i``; tunnels with
    nothing collectible for the pursued color are redrawn from derived seeds."""
    tunnels, seeds, oracles = [], [], []
    for i in range(episodes):
        seed = base_seed + i
        attempt = 0
        while True:
            tunnel_seed = seed if attempt == 0 else int(np.random.SeedSequence((seed, attempt)).generate_state(1)[0])
            tunnel = tunnel_generate(_with_seed(spec, tunnel_seed))
            per_color = [tunnel_max_reward(tunnel, c) for c in range(tunnel.n_colors)]
            if per_color[pursued].max_reward > 0:
                break
            attempt += 1
        tunnels.append(tunnel)
        seeds.append(seed)
        oracles.append(per_color)
    return TunnelBatch(tunnels, seeds, oracles)


def _with_seed(spec: TunnelSpec, seed: int) -> TunnelSpec:
    return replace(spec, seed=seed)


@dataclass
class SweepRow:
    alpha: float
    reward_ratio_own: Optional[float]
    reward_ratio_other: Optional[float]
    success_rate: float
    legibility: float
    gain: float


@dataclass
class SweepResult:
    rows: List[SweepRow]
    pursued: int = 0
    trajectories: Dict[float, List[Trajectory]] = field(default_factory=dict, repr=False)

    COLUMNS = ("alpha", "reward_ratio_own", "reward_ratio_other", "success_rate", "legibility", "gain")

    def row(self, alpha: float) -> SweepRow:
        for r in self.rows:
            if r.alpha == alpha:
                return r
        raise KeyError(alpha)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        for r in self.rows:
            writer.writerow(["" if getattr(r, c) is None else repr(float(getattr(r, c))) for c in self.COLUMNS])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"pursued": self.pursued,
                "rows": [{c: getattr(r, c) for c in self.COLUMNS} for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _run_chunk(args) -> List[Trajectory]:
    tunnels, seeds, agent, obs, cfg, pursued, selection = args
    policy = legible_policy(agent, obs, cfg, selection)
    return [rollout(TunnelEnv(t, pursued), policy, t.length, seed) for t, seed in zip(tunnels, seeds)]


def run_batch(batch: TunnelBatch, agent: AgentModel, obs: ObserverModel, cfg: LegibilityConfig,
              jobs: int = 1, selection=None) -> List[Trajectory]:
    pursued = agent.pursued
    if jobs <= 1:
        return _run_chunk((batch.tunnels, batch.seeds, agent, obs, cfg, pursued, selection))
    n = len(batch.tunnels)
    bounds = np.linspace(0, n, jobs + 1).astype(int)
    chunks = [(batch.tunnels[a:b], batch.seeds[a:b], agent, obs, cfg, pursued, selection)
              for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map keeps chunk order, so results do not depend on scheduling
        return [t for part in pool.map(_run_chunk, chunks) for t in part]


def alpha_sweep(batch: TunnelBatch, agent: AgentModel, obs: ObserverModel, alphas: Sequence[float],
                log_floor: float = LegibilityConfig.log_floor, jobs: int = 1,
                keep_trajectories: bool = False, selection=None) -> SweepResult:
    alphas = [float(a) for a in alphas]
    if 0.0 not in alphas:
        raise ValueError("alphas must include 0")
    pursued = agent.pursued
    n_colors = batch.tunnels[0].n_colors
    metrics = {}
    kept = {}
    for alpha in alphas:
        trajs = run_batch(batch, agent, obs, LegibilityConfig(alpha, log_floor), jobs, selection)
        own = reward_ratio(trajs, pursued, [o[pursued] for o in batch.oracles])
        others = [reward_ratio(trajs, c, [o[c] for o in batch.oracles]) for c in range(n_colors) if c != pursued]
        others = [x for x in others if x is not None]
        metrics[alpha] = (own, float(np.mean(others)) if others else None, success_rate(trajs),
                          legibility_score(trajs, obs, pursued))
        if keep_trajectories:
            kept[alpha] = trajs
    l_zero = metrics[0.0][3]
    rows = [SweepRow(a, *metrics[a], legibility_gain(metrics[a][3], l_zero)) for a in alphas]
    return SweepResult(rows, pursued, kept)


# --- gridworld ------------------------------------------------------------------


def gridworld_rollouts(world: GridWorld, agent: AgentModel, obs: ObserverModel, cfg: LegibilityConfig,
                       max_steps: int = 100, selection=None) -> List[Trajectory]:
    """Legible rollouts from every non-goal cell toward the active goal.

    ``selection`` overrides the agent's transform when picking actions; episode
    ``i`` uses seed ``i``, which only matters for stochastic selection.
    """
    policy = legible_policy(agent, obs, cfg, selection)
    env = world.with_goal(world.goal_index)
    return [rollout(env, policy, max_steps, seed=i, start=cell) for i, cell in enumerate(world.start_cells())]


def goal_distance(trajectories: Sequence[Trajectory], world: GridWorld) -> float:
    """Mean over trajectories and non-target goals of the closest approach
    (Manhattan) the trajectory makes to that goal."""
    others = [g for k, g in enumerate(world.goals) if k != world.goal_index]
    if not others or not trajectories:
        raise ValueError("need trajectories and at least one non-target goal")
    per_traj = [np.mean([min(manhattan(p, g) for p in t.positions) for g in others]) for t in trajectories]
    return float(np.mean(per_traj))


@dataclass
class GridworldRow:
    goal: int
    alpha: float
    legibility: float
    gain: float
    goal_distance: float
    mean_steps: float
    success_rate: float

    COLUMNS = ("goal", "alpha", "legibility", "gain", "goal_distance", "mean_steps", "success_rate")


def gridworld_sweep(world: GridWorld, agent: AgentModel, obs: ObserverModel,
                    alphas: Sequence[float], log_floor: float = LegibilityConfig.log_floor,
                    selection=None) -> List[GridworldRow]:
    alphas = [float(a) for a in alphas]
    if 0.0 not in alphas:
        raise ValueError("alphas must include 0")
    rows = []
    for goal in range(len(world.goals)):
        g_world = world.with_goal(goal)
        g_agent = AgentModel(agent.ensemble.with_pursued(goal), agent.transform_f)
        g_obs = ObserverModel(obs.ensemble.with_pursued(goal), obs.prior, obs.transform_g)
        results = {}
        for alpha in alphas:
            trajs = gridworld_rollouts(g_world, g_agent, g_obs, LegibilityConfig(alpha, log_floor),
                                       selection=selection)
            results[alpha] = (legibility_score(trajs, g_obs), goal_distance(trajs, g_world),
                              float(np.mean([len(t.steps) for t in trajs])), success_rate(trajs))
        l_zero = results[0.0][0]
        for alpha in alphas:
            leg, dist, steps, succ = results[alpha]
            rows.append(GridworldRow(goal, alpha, leg, legibility_gain(leg, l_zero), dist, steps, succ))
    return rows


def gridworld_rows_csv(rows: Sequence[GridworldRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(GridworldRow.COLUMNS)
    for r in rows:
        writer.writerow([r.goal] + [repr(float(getattr(r, c))) for c in GridworldRow.COLUMNS[1:]])
    return buf.getvalue()
