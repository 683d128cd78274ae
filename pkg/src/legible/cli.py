"""Command-line interface: train, sweep, rollout, plot, validate.

Every command reads an optional JSON config file, lets flags override it, and
writes the effective configuration to ``<out>/config.json``.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import experiments
from .envs.gridworld import GridWorld
from .envs.tunnel import Tunnel, TunnelEnv, TunnelSpec, n_observations
from .evaluation import (
    Trajectory,
    alpha_sweep,
    gridworld_rollouts,
    gridworld_rows_csv,
    gridworld_sweep,
    legible_policy,
    legibility_score,
    make_tunnel_batch,
    reward_ratio,
    rollout,
    success_rate,
    trajectory_heatmap,
)
from .learning import LearningConfig
from .mdp import Greedy, make_model, model_to_dict
from .mirror import AgentModel, EnsembleManifest, LegibilityConfig, ObserverModel, PolicyEnsemble, legible_q
from .plotting import gridworld_policy_svg, tunnel_svg

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
MANIFEST_NAME = "ensemble.json"


class UsageError(Exception):
    pass


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- configuration ---------------------------------------------------------------

DEFAULTS = {
    "env": "gridworld",
    "out": None,
    "config": None,
    "manifest": None,
    "input": None,
    "alphas": list(experiments.SWEEP_ALPHAS),
    "alpha": 1.0,
    "episodes": None,
    "seed": 0,
    "pursued": 0,
    "transform_f": None,
    "transform_g": None,
    "epsilon": None,
    "temperature": None,
    "jobs": 1,
    "verbose": False,
    "tunnel": {},
    "learning": {},
}

# default episode counts: training episodes for train, evaluation episodes otherwise
TRAIN_EPISODES = {"gridworld": experiments.GRIDWORLD_LEARNING.episodes,
                  "tunnel": experiments.TUNNEL_LEARNING.episodes}
EVAL_EPISODES = 200


def _parse_alphas(text: str) -> list:
    try:
        alphas = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not alphas:
        raise argparse.ArgumentTypeError("alphas must not be empty")
    return alphas


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--env", choices=["gridworld", "tunnel"], default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--manifest", type=Path, default=argparse.SUPPRESS,
                        help="ensemble manifest (or a directory holding ensemble.json)")
    common.add_argument("--input", type=Path, default=argparse.SUPPRESS, help="trajectory file for plot")
    common.add_argument("--alphas", type=_parse_alphas, default=argparse.SUPPRESS,
                        help="comma-separated regularization strengths")
    common.add_argument("--alpha", type=float, default=argparse.SUPPRESS)
    common.add_argument("--episodes", type=int, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--pursued", type=int, default=argparse.SUPPRESS, help="index of the pursued policy")
    common.add_argument("--transform-f", dest="transform_f", default=argparse.SUPPRESS,
                        choices=["greedy", "epsilon-greedy", "boltzmann"])
    common.add_argument("--transform-g", dest="transform_g", default=argparse.SUPPRESS,
                        choices=["greedy", "epsilon-greedy", "boltzmann"])
    common.add_argument("--epsilon", type=float, default=argparse.SUPPRESS)
    common.add_argument("--temperature", type=float, default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS)
    common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="legible", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("train", parents=[common], help="train one Q-table per goal or color")
    sub.add_parser("sweep", parents=[common], help="evaluate an ensemble over several alphas")
    sub.add_parser("rollout", parents=[common], help="roll out and score legible trajectories")
    sub.add_parser("plot", parents=[common], help="draw policy arrows or tunnel occupancy as SVG")
    sub.add_parser("validate", parents=[common], help="check a config file and/or manifest")
    return parser


def load_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags."""
    cfg = json.loads(json.dumps(DEFAULTS))
    flags = vars(args).copy()
    command = flags.pop("command")
    path = flags.get("config")
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    cfg.update(flags)
    for key in ("out", "config", "manifest", "input"):
        if cfg[key] is not None:
            cfg[key] = str(cfg[key])
    if cfg["episodes"] is None:
        cfg["episodes"] = TRAIN_EPISODES[cfg["env"]] if command == "train" else EVAL_EPISODES
    cfg["command"] = command
    _check_config(cfg)
    return cfg


def _check_config(cfg: dict) -> None:
    if cfg["env"] not in ("gridworld", "tunnel"):
        raise ValidationError(f"unknown env {cfg['env']!r}")
    if not cfg["alphas"] or any(not (isinstance(a, (int, float)) and a >= 0) for a in cfg["alphas"]):
        raise ValidationError("alphas must be a non-empty list of non-negative numbers")
    if cfg["alpha"] < 0:
        raise ValidationError("alpha must be >= 0")
    if cfg["episodes"] < 1:
        raise ValidationError("episodes must be >= 1")
    if cfg["jobs"] < 1:
        raise ValidationError("jobs must be >= 1")


def _transform(kind: Optional[str], default, cfg: dict):
    """Transform from a flag, falling back to ``default``; --epsilon and
    --temperature override the parameters of whichever kind is in effect."""
    if kind is None:
        kind = model_to_dict(default)["kind"]
        eps = getattr(default, "epsilon", 0.1)
        temp = getattr(default, "temperature", 1.0)
    else:
        eps, temp = 0.1, 1.0
    if cfg["epsilon"] is not None:
        eps = cfg["epsilon"]
    if cfg["temperature"] is not None:
        temp = cfg["temperature"]
    try:
        return make_model(kind, epsilon=eps, temperature=temp)
    except ValueError as exc:
        raise ValidationError(str(exc))


def _tunnel_spec(cfg: dict) -> TunnelSpec:
    try:
        return TunnelSpec.from_dict({**experiments.DESK_TUNNEL.to_dict(), **cfg["tunnel"]})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid tunnel spec: {exc}")


def _learning(cfg: dict, base: LearningConfig) -> LearningConfig:
    try:
        return replace(base, **{**cfg["learning"], "episodes": cfg["episodes"], "seed": cfg["seed"]})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid learning config: {exc}")


def _prepare_out(cfg: dict) -> Path:
    if cfg["out"] is None:
        raise UsageError("--out is required")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    echo = {k: v for k, v in cfg.items() if k != "command"}
    (out / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)


# --- manifest helpers -------------------------------------------------------------


def _manifest_path(cfg: dict) -> Path:
    if cfg["manifest"] is None:
        raise UsageError("--manifest is required")
    path = Path(cfg["manifest"])
    return path / MANIFEST_NAME if path.is_dir() else path


def load_manifest(cfg: dict) -> tuple:
    """Manifest, its member tables (dimension-checked) and the environment they were trained for."""
    path = _manifest_path(cfg)
    try:
        manifest = EnsembleManifest.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}")
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise ValidationError(f"invalid manifest {path}: {exc}")
    try:
        tables = manifest.load_tables()
    except OSError as exc:
        raise ValidationError(f"manifest {path} references a missing table: {exc}")
    except ValueError as exc:
        raise ValidationError(f"bad Q-table in {path}: {exc}")
    env = manifest.env
    kind = env.get("kind")
    if kind == "gridworld":
        try:
            world = GridWorld(int(env["size"]), [tuple(g) for g in env["goals"]])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"invalid gridworld in manifest: {exc}")
        expected = (world.n_states, world.n_actions, len(world.goals))
        target = world
    elif kind == "tunnel":
        try:
            spec = TunnelSpec.from_dict(env["spec"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"invalid tunnel spec in manifest: {exc}")
        expected = (n_observations(spec.width), TunnelEnv.n_actions, spec.colors)
        target = spec
    else:
        raise ValidationError(f"manifest names unknown environment {kind!r}")
    for name, t in zip(manifest.tables, tables):
        if (t.n_states, t.n_actions) != expected[:2]:
            raise ValidationError(f"{name}: table is {t.n_states}x{t.n_actions}, "
                                  f"environment needs {expected[0]}x{expected[1]}")
    if len(tables) != expected[2]:
        raise ValidationError(f"manifest lists {len(tables)} tables for {expected[2]} goals/colors")
    if cfg["env"] != kind:
        cfg["env"] = kind
    return manifest, tables, target


def _models(cfg: dict, manifest: EnsembleManifest, tables: list, pursued: int) -> tuple:
    if not 0 <= pursued < len(tables):
        raise ValidationError(f"pursued index {pursued} out of range for {len(tables)} policies")
    ensemble = PolicyEnsemble(tables, pursued)
    f = _transform(cfg["transform_f"], manifest.transform_f, cfg)
    g = _transform(cfg["transform_g"], manifest.transform_g, cfg)
    try:
        obs = ObserverModel(ensemble, manifest.prior, g)
    except ValueError as exc:
        raise ValidationError(f"invalid prior: {exc}")
    return AgentModel(ensemble, f), obs


# --- commands ---------------------------------------------------------------------


def cmd_train(cfg: dict) -> None:
    out = _prepare_out(cfg)
    log = sys.stdout if cfg["verbose"] else None
    if cfg["env"] == "gridworld":
        world = GridWorld()
        learning = _learning(cfg, experiments.GRIDWORLD_LEARNING)
        tables = experiments.train_gridworld_ensemble(world, learning, log)
        env = {"kind": "gridworld", "size": world.size, "goals": [list(g) for g in world.goals]}
        f_default = g_default = experiments.GRIDWORLD_OBSERVER
    else:
        spec = _tunnel_spec(cfg)
        learning = _learning(cfg, experiments.TUNNEL_LEARNING)
        tables = experiments.train_tunnel_ensemble(spec, learning, log)
        env = {"kind": "tunnel", "spec": spec.to_dict()}
        f_default, g_default = experiments.AGENT_SELECTION, experiments.TUNNEL_OBSERVER
    names = []
    for k, table in enumerate(tables):
        name = f"q_{k}.jsonl"
        table.save(out / name)
        names.append(name)
    manifest = EnsembleManifest(names, env, None, None,
                                _transform(cfg["transform_f"], f_default, cfg),
                                _transform(cfg["transform_g"], g_default, cfg))
    manifest.save(out / MANIFEST_NAME)
    (out / "learning.json").write_text(json.dumps(asdict(learning), indent=2, sort_keys=True) + "\n")


def _tunnel_heatmap(trajs: Sequence[Trajectory], tunnel: Tunnel, pursued: int, title: str) -> str:
    same = [t for t in trajs if t.env_key == tunnel.layout_key()]
    occupancy = trajectory_heatmap(same, (tunnel.width, tunnel.length)) if same else None
    return tunnel_svg(tunnel, pursued, occupancy, title)


def _alpha_tag(alpha: float) -> str:
    return repr(float(alpha))


def cmd_sweep(cfg: dict) -> None:
    manifest, tables, target = load_manifest(cfg)
    out = _prepare_out(cfg)
    alphas = [float(a) for a in cfg["alphas"]]
    if 0.0 not in alphas:
        alphas = [0.0] + alphas
    if cfg["env"] == "gridworld":
        agent, obs = _models(cfg, manifest, tables, cfg["pursued"])
        rows = gridworld_sweep(target, agent, obs, alphas, selection=Greedy())
        _write(out / "sweep.csv", gridworld_rows_csv(rows))
        _write(out / "sweep.json", json.dumps({"rows": [asdict(r) for r in rows]}, indent=2) + "\n")
        for alpha in alphas:
            panels = [(g, a, _greedy_actions(target, tables, obs, g, a)) for g in range(len(target.goals))
                      for a in (0.0, alpha)]
            _write(out / f"policy_alpha={_alpha_tag(alpha)}.svg",
                   gridworld_policy_svg(target, panels, f"original vs legible, alpha = {alpha}"))
        return
    agent, obs = _models(cfg, manifest, tables, cfg["pursued"])
    batch = make_tunnel_batch(target, cfg["episodes"], cfg["seed"], cfg["pursued"])
    result = alpha_sweep(batch, agent, obs, alphas, jobs=cfg["jobs"], keep_trajectories=True,
                         selection=Greedy())
    _write(out / "sweep.csv", result.to_csv())
    _write(out / "sweep.json", result.to_json())
    for alpha in alphas:
        _write(out / f"heatmap_alpha={_alpha_tag(alpha)}.svg",
               _tunnel_heatmap(result.trajectories[alpha], batch.tunnels[0], cfg["pursued"],
                               f"episode 0, alpha = {alpha}"))


def _greedy_actions(world: GridWorld, tables: list, obs: ObserverModel, goal: int, alpha: float) -> list:
    ens = PolicyEnsemble(tables, goal)
    agent = AgentModel(ens)
    g_obs = ObserverModel(ens, obs.prior, obs.transform_g)
    cfg = LegibilityConfig(alpha)
    return [int(np.argmax(legible_q(agent, g_obs, s, cfg))) for s in range(world.n_states)]


def cmd_rollout(cfg: dict) -> None:
    manifest, tables, target = load_manifest(cfg)
    out = _prepare_out(cfg)
    agent, obs = _models(cfg, manifest, tables, cfg["pursued"])
    legcfg = LegibilityConfig(cfg["alpha"])
    records = []
    if cfg["env"] == "gridworld":
        world = target.with_goal(cfg["pursued"])
        trajs = gridworld_rollouts(world, agent, obs, legcfg, selection=Greedy())
        env_doc = world.to_dict()
        env_doc.pop("position")
        for t in trajs:
            records.append({**t.to_dict(), "env": env_doc})
        summary = {"episodes": len(trajs), "success_rate": success_rate(trajs),
                   "legibility": legibility_score(trajs, obs)}
    else:
        batch = make_tunnel_batch(target, cfg["episodes"], cfg["seed"], cfg["pursued"])
        policy = legible_policy(agent, obs, legcfg, Greedy())
        trajs = []
        for tunnel, seed in zip(batch.tunnels, batch.seeds):
            t = rollout(TunnelEnv(tunnel, cfg["pursued"]), policy, tunnel.length, seed)
            trajs.append(t)
            records.append({**t.to_dict(), "env": tunnel.to_dict()})
        own = reward_ratio(trajs, cfg["pursued"], [o[cfg["pursued"]] for o in batch.oracles])
        summary = {"episodes": len(trajs), "success_rate": success_rate(trajs),
                   "legibility": legibility_score(trajs, obs), "reward_ratio_own": own}
    summary["alpha"] = cfg["alpha"]
    summary["pursued"] = cfg["pursued"]
    _write(out / "trajectories.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")


def _read_trajectories(path: Path) -> list:
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}")
    try:
        return [json.loads(line) for line in lines if line.strip()]
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not a trajectory file: {exc}")


def cmd_plot(cfg: dict) -> None:
    records = _read_trajectories(Path(cfg["input"])) if cfg["input"] is not None else None
    if records:
        cfg["env"] = records[0].get("env", {}).get("kind", cfg["env"])
    if cfg["env"] == "gridworld":
        manifest, tables, target = load_manifest(cfg)
        out = _prepare_out(cfg)
        _, obs = _models(cfg, manifest, tables, cfg["pursued"])
        panels = [(g, a, _greedy_actions(target, tables, obs, g, a)) for g in range(len(target.goals))
                  for a in (0.0, cfg["alpha"])]
        _write(out / "policy.svg",
               gridworld_policy_svg(target, panels, f"original vs legible, alpha = {cfg['alpha']}"))
        return
    if records:
        try:
            tunnel = Tunnel.from_dict(records[0]["env"])
            trajs = [Trajectory.from_dict(r, (tunnel.width, tunnel.length)) for r in records]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed trajectory record: {exc}")
        pursued = cfg["pursued"]
    else:
        # no trajectories: draw the first evaluation tunnel without an overlay
        _, _, spec = load_manifest(cfg)
        tunnel = make_tunnel_batch(spec, 1, cfg["seed"], cfg["pursued"]).tunnels[0]
        trajs, pursued = [], cfg["pursued"]
    out = _prepare_out(cfg)
    _write(out / "tunnel.svg", _tunnel_heatmap(trajs, tunnel, pursued, f"tunnel {tunnel.layout_key()}"))


def cmd_validate(cfg: dict) -> None:
    if cfg["manifest"] is not None:
        manifest, tables, _ = load_manifest(cfg)
        print(f"ok: {len(tables)} tables of {tables[0].n_states}x{tables[0].n_actions} for {cfg['env']}")
    else:
        if cfg["env"] == "tunnel":
            _tunnel_spec(cfg)
        _learning(cfg, LearningConfig())
        print("ok: configuration is valid")


COMMANDS = {"train": cmd_train, "sweep": cmd_sweep, "rollout": cmd_rollout, "plot": cmd_plot,
            "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"legible: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"legible: validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # anything else is a runtime failure
        print(f"legible: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
