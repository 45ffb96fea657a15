"""Unilateral deviation experiments against the all-UCB-D3 profile.

Each pair of runs shares a seed, so both profiles see the same per-(agent, arm)
reward sub-streams. Rewards are counted as the means of matched arms, which makes
an agent's gain equal to its baseline regret minus its regret when deviating.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .analysis import aggregate_ci, epsilon_nash_bound, per_round_regret
from .market import stable_match
from .protocol import UcbD3Agent
from .runner import derive_seed
from .simulate import AgentSpec, run_profile, run_strategies
from .strategy import Strategy

StrategyFactory = Callable[[int, int], Strategy]


@dataclass(frozen=True)
class DeviationResult:
    agent: int
    gains: np.ndarray
    mean_gain: float
    ci_halfwidth: float
    baseline_regret: np.ndarray
    deviant_regret: np.ndarray
    epsilon: np.ndarray
    unaffected_identical: bool

    @property
    def ci_upper(self) -> float:
        return self.mean_gain + self.ci_halfwidth


def deviation_harness(inst, agent: int, deviant: Union[AgentSpec, StrategyFactory],
                      horizon: int, runs: int, seed: int, alpha: float = 2.0,
                      level: float = 0.95) -> DeviationResult:
    """Paired comparison of agent ``agent`` (1-based rank) deviating vs. following the protocol.

    ``deviant`` is a built-in :class:`AgentSpec` or any factory ``(N, K) -> Strategy``.
    ``epsilon`` is the deviation bound evaluated at the measured mean baseline regrets.
    ``unaffected_identical`` reports whether higher ranked agents' traces were unchanged in every pair.
    """
    m = np.asarray(getattr(inst, "means", inst), dtype=float)
    n, k = m.shape
    partner = stable_match(m)
    j = agent - 1
    base_spec = AgentSpec("ucb_d3", alpha)
    gains, base_reg, dev_reg = [], [], []
    identical = True
    for r in range(runs):
        s = derive_seed(seed, "deviation", r)
        base = run_profile(m, base_spec, horizon, s)
        if isinstance(deviant, AgentSpec):
            specs = [base_spec] * n
            specs[j] = deviant
            dev = run_profile(m, specs, horizon, s)
        else:
            strategies = [UcbD3Agent(n, k, alpha) for _ in range(n)]
            strategies[j] = deviant(n, k)
            dev = run_strategies(m, strategies, horizon, s)
        rb = per_round_regret(base, m, partner).sum(axis=0)
        rd = per_round_regret(dev, m, partner).sum(axis=0)
        base_reg.append(rb)
        dev_reg.append(rd)
        gains.append(rb[j] - rd[j])
        identical &= bool(np.array_equal(base.choices[:, :j], dev.choices[:, :j])
                          and np.array_equal(base.matched[:, :j], dev.matched[:, :j]))
    gains = np.asarray(gains)
    base_reg = np.asarray(base_reg)
    if runs >= 2:
        mean, hw = aggregate_ci(gains, level)
        mean, hw = float(mean), float(hw)
    else:
        mean, hw = float(gains.mean()), float("nan")
    eps = epsilon_nash_bound(m, base_reg.mean(axis=0), partner)
    return DeviationResult(agent, gains, mean, hw, base_reg.mean(axis=0),
                           np.asarray(dev_reg).mean(axis=0), eps, identical)
