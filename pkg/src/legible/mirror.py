"""Agent and observer models over a shared set of policies, the observer's
policy posterior, the cross-entropy legibility penalty and legibility-regularized
Q-values.

A *state* argument is either one StateId shared by every policy, or a sequence
holding one StateId per policy. The second form covers environments where each
policy looks at the world through its own features (a merged tunnel, where
policy ``c`` only sees color ``c``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .mdp import DistributionModel, EpsilonGreedy, Greedy, QTable, distribution, model_from_dict, model_to_dict

DEFAULT_LOG_FLOOR = -1e6
MANIFEST_FORMAT = "legible-ensemble/1"


class PolicyEnsemble:
    def __init__(self, tables: Sequence[QTable], pursued_index: Optional[int] = None):
        tables = tuple(tables)
        if not tables:
            raise ValueError("an ensemble needs at least one policy")
        shape = (tables[0].n_states, tables[0].n_actions)
        for t in tables[1:]:
            if (t.n_states, t.n_actions) != shape:
                raise ValueError(f"Q-table shape {(t.n_states, t.n_actions)} disagrees with {shape}")
        if pursued_index is not None and not 0 <= pursued_index < len(tables):
            raise ValueError(f"pursued_index {pursued_index} out of range")
        self.tables = tables
        self.pursued_index = pursued_index

    def __len__(self):
        return len(self.tables)

    @property
    def n_states(self) -> int:
        return self.tables[0].n_states

    @property
    def n_actions(self) -> int:
        return self.tables[0].n_actions

    @property
    def pursued(self) -> int:
        if self.pursued_index is None:
            raise ValueError("no pursued policy selected")
        return self.pursued_index

    def with_pursued(self, index: int) -> "PolicyEnsemble":
        return PolicyEnsemble(self.tables, index)


@dataclass(frozen=True, eq=False)
class ObserverModel:
    ensemble: PolicyEnsemble
    prior: Optional[np.ndarray] = None
    transform_g: DistributionModel = field(default_factory=lambda: EpsilonGreedy(0.1))

    def __post_init__(self):
        n = len(self.ensemble)
        prior = np.full(n, 1.0 / n) if self.prior is None else np.asarray(self.prior, dtype=float)
        if prior.shape != (n,):
            raise ValueError(f"prior must have {n} entries")
        if np.any(prior <= 0) or abs(prior.sum() - 1.0) > 1e-9:
            raise ValueError("prior must be strictly positive and sum to 1")
        object.__setattr__(self, "prior", prior)


@dataclass(frozen=True, eq=False)
class AgentModel:
    ensemble: PolicyEnsemble
    transform_f: DistributionModel = field(default_factory=Greedy)

    @property
    def pursued(self) -> int:
        return self.ensemble.pursued


@dataclass(frozen=True)
class LegibilityConfig:
    alpha: float = 1.0
    log_floor: float = DEFAULT_LOG_FLOOR

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")
        if not (np.isfinite(self.log_floor) and self.log_floor < 0):
            raise ValueError("log_floor must be finite and negative")


class Posterior(NamedTuple):
    probs: np.ndarray
    degenerate: bool


class CrossEntropyTerms(NamedTuple):
    """-log P(a|pi_R,s), +log E_prior[P(a|pi,s)], -log P(pi_R)."""

    own: float
    evidence: float
    prior: float

    @property
    def total(self) -> float:
        return self.own + self.evidence + self.prior


def policy_states(s, n_policies: int) -> list:
    if isinstance(s, (int, np.integer)):
        return [int(s)] * n_policies
    states = [int(x) for x in s]
    if len(states) != n_policies:
        raise ValueError(f"expected {n_policies} per-policy states, got {len(states)}")
    return states


def _clamped_log(x, floor: float):
    with np.errstate(divide="ignore"):
        return np.maximum(np.log(x), floor)


def _check_action(obs: ObserverModel, a: int) -> int:
    if not 0 <= a < obs.ensemble.n_actions:
        raise IndexError(f"action {a} out of range")
    return int(a)


def likelihoods(obs: ObserverModel, s) -> np.ndarray:
    """(n_policies, n_actions) array of P^H(a | pi_i, s)."""
    states = policy_states(s, len(obs.ensemble))
    return np.stack([distribution(obs.transform_g, q.row(si))
                     for q, si in zip(obs.ensemble.tables, states)])


def observer_likelihood(obs: ObserverModel, policy_index: int, s, a: int) -> float:
    if not 0 <= policy_index < len(obs.ensemble):
        raise IndexError(f"policy {policy_index} out of range")
    a = _check_action(obs, a)
    si = policy_states(s, len(obs.ensemble))[policy_index]
    return float(distribution(obs.transform_g, obs.ensemble.tables[policy_index].row(si))[a])


def posterior_table(obs: ObserverModel, s):
    """Observer posteriors for every action at ``s``.

    Returns ``(post, degenerate)`` where ``post[a, i] = P^H(pi_i | s, a)`` and
    ``degenerate[a]`` marks actions no policy can produce; their row is the prior.
    """
    lik = likelihoods(obs, s).T
    # scaling each action's likelihoods by their maximum cancels in Bayes' rule and
    # makes proportional rows give bit-identical posteriors, so exact ties survive
    top = lik.max(axis=1, keepdims=True)
    joint = np.divide(lik, top, out=np.zeros_like(lik), where=top > 0) * obs.prior[None, :]
    norm = joint.sum(axis=1)
    degenerate = norm <= 0
    post = np.where(degenerate[:, None], obs.prior[None, :],
                    joint / np.where(degenerate, 1.0, norm)[:, None])
    return post, degenerate


def observer_posterior(obs: ObserverModel, s, a: int) -> Posterior:
    a = _check_action(obs, a)
    post, degenerate = posterior_table(obs, s)
    return Posterior(post[a], bool(degenerate[a]))


def _pursued(agent: AgentModel, obs: ObserverModel) -> int:
    r = agent.pursued
    if len(obs.ensemble) != len(agent.ensemble):
        raise ValueError("agent and observer ensembles differ in size")
    if (obs.ensemble.n_states, obs.ensemble.n_actions) != (agent.ensemble.n_states, agent.ensemble.n_actions):
        raise ValueError("agent and observer ensembles differ in dimensions")
    return r


def legibility_cross_entropy(agent: AgentModel, obs: ObserverModel, s, a: int,
                             log_floor: float = DEFAULT_LOG_FLOOR) -> float:
    """-log P^H(pi_R | a, s) via the posterior; degenerate cases fall back to the prior."""
    r = _pursued(agent, obs)
    post = observer_posterior(obs, s, a)
    return float(-_clamped_log(post.probs[r], log_floor))


def cross_entropy_terms(agent: AgentModel, obs: ObserverModel, s, a: int,
                        log_floor: float = DEFAULT_LOG_FLOOR) -> CrossEntropyTerms:
    """The same quantity split into likelihood, evidence and prior terms."""
    r = _pursued(agent, obs)
    a = _check_action(obs, a)
    lik = likelihoods(obs, s)[:, a]
    evidence = float(np.dot(obs.prior, lik))
    return CrossEntropyTerms(
        own=float(-_clamped_log(lik[r], log_floor)),
        evidence=float(_clamped_log(evidence, log_floor)),
        prior=float(-np.log(obs.prior[r])),
    )


def legible_q(agent: AgentModel, obs: ObserverModel, s, cfg: LegibilityConfig) -> np.ndarray:
    """Q_R(pi_R, s, .) + alpha * log P^H(pi_R | ., s)."""
    r = _pursued(agent, obs)
    s_r = policy_states(s, len(agent.ensemble))[r]
    q_row = agent.ensemble.tables[r].row(s_r).copy()
    if cfg.alpha == 0:
        return q_row
    post, _ = posterior_table(obs, s)
    return q_row + cfg.alpha * _clamped_log(post[:, r], cfg.log_floor)


def legible_action(agent: AgentModel, obs: ObserverModel, s, cfg: LegibilityConfig,
                   selection: Optional[DistributionModel] = None,
                   rng: Optional[np.random.Generator] = None) -> int:
    """Pick an action from the regularized Q-row.

    ``selection`` defaults to the agent's own transform. Greedy selection takes
    the argmax (lowest index on ties) and never touches ``rng``.
    """
    row = legible_q(agent, obs, s, cfg)
    selection = agent.transform_f if selection is None else selection
    if isinstance(selection, Greedy):
        return int(np.argmax(row))
    if rng is None:
        raise ValueError("a random generator is required for stochastic selection")
    p = distribution(selection, row)
    return int(rng.choice(len(p), p=p))


# --- ensemble manifest ----------------------------------------------------------


@dataclass
class EnsembleManifest:
    tables: list
    env: dict
    pursued_index: Optional[int] = None
    prior: Optional[list] = None
    transform_f: DistributionModel = field(default_factory=Greedy)
    transform_g: DistributionModel = field(default_factory=lambda: EpsilonGreedy(0.1))
    base_dir: Path = field(default=Path("."), repr=False)

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "env": self.env,
            "tables": [str(t) for t in self.tables],
            "pursued_index": self.pursued_index,
            "prior": self.prior,
            "transform_f": model_to_dict(self.transform_f),
            "transform_g": model_to_dict(self.transform_g),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "EnsembleManifest":
        path = Path(path)
        data = json.loads(path.read_text())
        if data.get("format") != MANIFEST_FORMAT:
            raise ValueError(f"{path}: not an ensemble manifest")
        return cls(tables=list(data["tables"]), env=data["env"], pursued_index=data.get("pursued_index"),
                   prior=data.get("prior"), transform_f=model_from_dict(data["transform_f"]),
                   transform_g=model_from_dict(data["transform_g"]), base_dir=path.parent)

    def load_tables(self) -> list:
        return [QTable.load(self.base_dir / t) for t in self.tables]

    def ensemble(self, pursued_index: Optional[int] = None) -> PolicyEnsemble:
        """Load and dimension-check the member tables."""
        index = self.pursued_index if pursued_index is None else pursued_index
        return PolicyEnsemble(self.load_tables(), index)
