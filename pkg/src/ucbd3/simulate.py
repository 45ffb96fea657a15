"""Run a market for a horizon and record what every agent did.

Two interchangeable engines produce a :class:`Trace`: a reference driver over
:class:`~ucbd3.strategy.Strategy` objects (any user-defined rule), and compiled
kernels for the built-in profiles. Both read rewards from the same per-(agent, arm)
sub-streams, so for a given seed they produce identical traces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .baselines import CentralizedUcb, EtcAgent, GreedyAgent, NaiveUcbAgent
from .environment import Environment, RngStream
from .protocol import UcbD3Agent
from .strategy import Strategy

NO_ESTIMATE = -1

STRATEGY_CODES = {
    "ucb_d3": kernels.UCB_D3,
    "naive_ucb": kernels.NAIVE_UCB,
    "etc": kernels.ETC,
    "greedy": kernels.GREEDY,
}


@dataclass
class Trace:
    """``choices[t-1, j]`` is the arm agent ``j`` proposed at slot ``t``.

    ``communicated[i-1, j]`` is the arm a UCB-D3 agent broadcast in phase ``i``
    (``NO_ESTIMATE`` for other agents); only phases whose RM block finished are kept.
    """

    choices: np.ndarray
    matched: np.ndarray
    communicated: np.ndarray

    @property
    def horizon(self) -> int:
        return self.choices.shape[0]


@dataclass(frozen=True)
class AgentSpec:
    """Built-in rule for one agent: ``kind`` in :data:`STRATEGY_CODES`."""

    kind: str = "ucb_d3"
    alpha: float = 2.0
    etc_h: int = 801
    comm_stats: bool = True

    def build(self, n_agents: int, n_arms: int) -> Strategy:
        if self.kind == "ucb_d3":
            return UcbD3Agent(n_agents, n_arms, self.alpha, self.comm_stats)
        if self.kind == "naive_ucb":
            return NaiveUcbAgent(n_agents, n_arms, self.alpha)
        if self.kind == "etc":
            return EtcAgent(n_agents, n_arms, self.etc_h)
        if self.kind == "greedy":
            return GreedyAgent(n_agents, n_arms)
        raise ValueError(f"unknown strategy {self.kind!r}")


def _means(means) -> np.ndarray:
    return np.ascontiguousarray(getattr(means, "means", means), dtype=float)


def run_strategies(means, strategies: Sequence[Strategy], horizon: int, seed: int,
                   on_round: Callable[[int, np.ndarray, np.ndarray], None] | None = None) -> Trace:
    """Reference lockstep driver. ``strategies[j]`` plays as the agent ranked ``j+1``."""
    m = _means(means)
    n, k = m.shape
    if len(strategies) != n:
        raise ValueError("need one strategy per agent")
    env = Environment(m, RngStream(seed, n, k))
    choices = np.empty((horizon, n), dtype=np.int64)
    matched = np.empty((horizon, n), dtype=bool)
    for t in range(1, horizon + 1):
        arms = [s.act(t) for s in strategies]
        fb = env.step(arms)
        for j, s in enumerate(strategies):
            s.observe(t, arms[j], bool(fb.matched[j]), float(fb.reward[j]))
        choices[t - 1] = arms
        matched[t - 1] = fb.matched
        if on_round is not None:
            on_round(t, choices[t - 1], matched[t - 1])
    return Trace(choices, matched, _collect_estimates(strategies))


def _collect_estimates(strategies) -> np.ndarray:
    rows = [getattr(s, "communicated", None) for s in strategies]
    n_phases = max((len(r) for r in rows if r is not None), default=0)
    out = np.full((n_phases, len(strategies)), NO_ESTIMATE, dtype=np.int64)
    for j, r in enumerate(rows):
        if r:
            out[:len(r), j] = r
    return out


def run_centralized_reference(means, horizon: int, seed: int, alpha: float = 2.0) -> Trace:
    m = _means(means)
    n, k = m.shape
    arbiter = CentralizedUcb(n, k, alpha)
    env = Environment(m, RngStream(seed, n, k))
    choices = np.empty((horizon, n), dtype=np.int64)
    for t in range(1, horizon + 1):
        arms = arbiter.assign(t)
        fb = env.step(arms)
        arbiter.observe(arms, fb.reward)
        choices[t - 1] = arms
    return Trace(choices, np.ones((horizon, n), dtype=bool),
                 np.empty((0, n), dtype=np.int64))


def run_profile(means, specs: Sequence[AgentSpec] | AgentSpec, horizon: int, seed: int) -> Trace:
    """Fast path for built-in rules; ``specs`` may be a single spec shared by all agents."""
    m = _means(means)
    n, k = m.shape
    if isinstance(specs, AgentSpec):
        specs = [specs] * n
    if len(specs) != n:
        raise ValueError("need one spec per agent")
    codes = np.array([STRATEGY_CODES[s.kind] for s in specs], dtype=np.int64)
    alphas = np.array([s.alpha for s in specs], dtype=float)
    hs = np.array([s.etc_h for s in specs], dtype=np.int64)
    comm_stats = np.array([s.comm_stats for s in specs], dtype=np.bool_)
    for s in specs:
        if s.kind == "ucb_d3" and s.alpha < 2:
            raise ValueError("alpha must be at least 2")
    bits = RngStream(seed, n, k).bernoulli_table(m, horizon)
    choices, matched, comm, n_phases = kernels.simulate(m, bits, codes, alphas, hs,
                                                        comm_stats, horizon)
    if not np.any(codes == kernels.UCB_D3):
        n_phases = 0
    return Trace(choices, matched.astype(bool), comm[:n_phases].copy())


def run_centralized(means, horizon: int, seed: int, alpha: float = 2.0) -> Trace:
    m = _means(means)
    n, k = m.shape
    bits = RngStream(seed, n, k).bernoulli_table(m, horizon)
    choices = kernels.simulate_centralized(bits, alpha, horizon)
    return Trace(choices, np.ones((horizon, n), dtype=bool),
                 np.empty((0, n), dtype=np.int64))
