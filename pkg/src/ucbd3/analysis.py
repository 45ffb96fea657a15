"""Regret metrics, closed-form regret bounds, KL numerics and run aggregation.

All logarithms are natural except the communication term of the full upper
bound, which is stated with ``log2``. Agent ranks ``j`` in the bound functions
are 1-based, matching how the bounds are usually written.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .market import NotOSB, classify_osb, gaps, stable_match


class DomainError(ValueError):
    pass


class InsufficientRuns(ValueError):
    pass


# ---------------------------------------------------------------------------
# regret


@dataclass(frozen=True)
class MetricSeries:
    """Cumulative per-agent metrics at ``checkpoints`` (1-based slots); arrays are ``(C, N)``."""

    checkpoints: np.ndarray
    cum_regret: np.ndarray
    cum_collision_regret: np.ndarray
    blocked_count: np.ndarray
    communicated: np.ndarray


def per_round_regret(trace, means, partner=None) -> np.ndarray:
    """``(T, N)`` pseudo-regret increments: stable-partner mean minus the matched mean (0 if blocked)."""
    m = np.asarray(getattr(means, "means", means), dtype=float)
    if partner is None:
        partner = stable_match(m)
    n = m.shape[0]
    best = m[np.arange(n), partner]
    got = m[np.arange(n)[None, :], trace.choices] * trace.matched
    return best[None, :] - got


def regret_series(trace, means, partner=None, checkpoints=None) -> MetricSeries:
    m = np.asarray(getattr(means, "means", means), dtype=float)
    if partner is None:
        partner = stable_match(m)
    horizon, n = trace.choices.shape
    cps = np.arange(1, horizon + 1) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if cps.size and (cps.min() < 1 or cps.max() > horizon):
        raise ValueError("checkpoints must lie in [1, T]")
    idx = cps - 1
    best = m[np.arange(n), partner]
    blocked = ~trace.matched
    regret = np.cumsum(per_round_regret(trace, m, partner), axis=0)[idx]
    collision = np.cumsum(blocked * best[None, :], axis=0)[idx]
    blocked_count = np.cumsum(blocked, axis=0)[idx]
    return MetricSeries(cps, regret, collision, blocked_count, trace.communicated)


# ---------------------------------------------------------------------------
# upper bounds


def i_star(n_agents: int, n_arms: int, alpha: float, delta: float) -> int:
    """First phase whose RM block outgrows ``20 N K alpha i / delta^2``."""
    c = 20.0 * n_agents * n_arms * alpha / delta ** 2
    i = 1
    while c * i > 2.0 ** (i - 1):
        i += 1
    return i


def cor1_leading(n_arms: int, j: int, horizon: float, alpha: float, delta: float) -> float:
    """Leading ``9 alpha log T`` term of the simplified upper bound for the rank-``j`` agent."""
    collision = (j - 1) * (n_arms + 1 - j) / delta ** 2
    suboptimal = max(n_arms - 1 - j, 0) / delta
    return 9.0 * alpha * math.log(horizon) * (collision + suboptimal)


def cor1_remainder_scale(n_agents: int, n_arms: int, delta: float) -> float:
    """Size of the constant-free additive remainder ``(NK)^2 + NK/delta^2 log(NK/delta^2)``."""
    nk = n_agents * n_arms
    return nk ** 2 + nk / delta ** 2 * math.log(nk / delta ** 2)


def upper_bound_cor1(inst, j: int, horizon: float, alpha: float = 2.0) -> float:
    if alpha < 2 or horizon < 2:
        raise ValueError("need alpha >= 2 and T >= 2")
    m = np.asarray(getattr(inst, "means", inst), dtype=float)
    return cor1_leading(m.shape[1], j, horizon, alpha, gaps(m).global_min)


@dataclass(frozen=True)
class UpperBoundTerms:
    communication: float
    collision: float
    suboptimal: float
    constant: float

    @property
    def total(self) -> float:
        return self.communication + self.collision + self.suboptimal + self.constant


def upper_bound_full(inst, j: int, horizon: float, alpha: float = 2.0) -> UpperBoundTerms:
    """Complete non-asymptotic upper bound, split into its labelled contributions."""
    m = np.asarray(getattr(inst, "means", inst), dtype=float)
    n, k = m.shape
    partner = stable_match(m)
    table = gaps(m, partner)
    T = float(horizon)
    log_t = math.log(T)
    jj = j - 1
    nondominated = [a for a in range(k) if a not in set(partner[:jj].tolist())]

    def per_arm(d: float) -> float:
        return 9 * alpha * log_t / d ** 2 + 1 + 178 * T ** (-4 * alpha) / d ** 2 + T ** (2 - 4 * alpha)

    best = m[jj, partner[jj]]
    collision = sum(per_arm(table.gap[jp, a]) * best
                    for jp in range(jj) for a in nondominated)
    suboptimal = sum(per_arm(table.gap[jj, a]) * table.gap[jj, a]
                     for a in nondominated if a != partner[jj])
    istar = i_star(n, k, alpha, table.global_min)
    constant = (n + j * (2 ** istar + istar + 4 * (n * k) ** 2 + 3 * n * k)
                + 2 * n * k / T ** (2 * alpha - 4))
    communication = 2 * (j - 1) * (math.log2(T) + 1)
    return UpperBoundTerms(communication, collision, suboptimal, constant)


# ---------------------------------------------------------------------------
# KL and lower bounds


def kl_bernoulli(p: float, q: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q={q} outside [0, 1]")
    if q in (0.0, 1.0):
        if p == q:
            return 0.0
        raise DomainError("KL to a degenerate Bernoulli is infinite")
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def d_inf_bernoulli(p: float, x: float) -> float:
    """Smallest KL from Bernoulli(p) to a Bernoulli with mean above ``x``."""
    if not 0.0 < x < 1.0:
        raise DomainError(f"x={x} outside (0, 1)")
    return kl_bernoulli(p, x) if p < x else 0.0


def lower_bound_thm2(inst, j: int, horizon: float) -> float:
    """Asymptotic lower bound (as a value at ``T``) for the rank-``j`` agent on an OSB instance."""
    m = np.asarray(getattr(inst, "means", inst), dtype=float)
    partner = stable_match(m)
    if not classify_osb(m, partner):
        raise NotOSB("the lower bound is stated for optimally stable instances only")
    table = gaps(m, partner)
    jj = j - 1
    target = partner[jj]
    collision = sum(table.per_agent_min[jj] / d_inf_bernoulli(m[jp, target], m[jp, partner[jp]])
                    for jp in range(jj))
    taken = set(partner[:jj].tolist())
    exploration = sum(table.gap[jj, a] / d_inf_bernoulli(m[jj, a], m[jj, target])
                      for a in range(m.shape[1]) if a not in taken and a != target)
    return math.log(horizon) * max(collision, exploration)


def hard_instance_bound(j: int, horizon: float, delta: float) -> float:
    """Closed-form collision lower bound ``(j-1) log T / (16 delta^2)`` of the hard instance."""
    return (j - 1) * math.log(horizon) / (16.0 * delta ** 2)


def epsilon_nash_bound(inst, regrets, partner=None) -> np.ndarray:
    """Per-agent deviation gain bound from per-agent regrets (bounds or measurements).

    Agent ``j`` can gain from the rounds a higher ranked agent ``l`` spends away from
    its partner only if ``l``'s partner beats ``j``'s own partner for ``j``.
    """
    m = np.asarray(getattr(inst, "means", inst), dtype=float)
    if partner is None:
        partner = stable_match(m)
    r = np.asarray(regrets, dtype=float)
    n = m.shape[0]
    row_min = m.min(axis=1)
    eps = np.empty(n)
    for j in range(n):
        own = m[j, partner[j]]
        eps[j] = r[j] + sum(m[j, partner[l]] / row_min[l] * r[l]
                            for l in range(j) if m[j, partner[l]] > own)
    return eps


@dataclass(frozen=True)
class BoundReport:
    horizon: float
    alpha: float
    delta: float
    i_star: int
    upper_cor1: np.ndarray
    lower_thm2: np.ndarray | None
    epsilon: np.ndarray
    remainder_scale: float

    def rows(self) -> list[dict]:
        out = []
        for j in range(len(self.upper_cor1)):
            out.append({
                "agent": j + 1,
                "upper_cor1": float(self.upper_cor1[j]),
                "lower_thm2": None if self.lower_thm2 is None else float(self.lower_thm2[j]),
                "epsilon": float(self.epsilon[j]),
            })
        return out


def bound_report(inst, horizon: float, alpha: float = 2.0) -> BoundReport:
    m = np.asarray(getattr(inst, "means", inst), dtype=float)
    n, k = m.shape
    delta = gaps(m).global_min
    upper = np.array([upper_bound_cor1(m, j, horizon, alpha) for j in range(1, n + 1)])
    try:
        lower = np.array([lower_bound_thm2(m, j, horizon) for j in range(1, n + 1)])
    except NotOSB:
        lower = None
    return BoundReport(float(horizon), alpha, delta, i_star(n, k, alpha, delta), upper, lower,
                       epsilon_nash_bound(m, upper), cor1_remainder_scale(n, k, delta))


# ---------------------------------------------------------------------------
# phase statistics and aggregation


def heatmap_aggregate(communicated_runs, n_arms: int) -> np.ndarray:
    """``counts[i, j, k]``: runs in which agent ``j`` broadcast arm ``k`` in phase ``i+1``."""
    runs = [np.asarray(c) for c in communicated_runs]
    n_phases = max((c.shape[0] for c in runs), default=0)
    n_agents = max((c.shape[1] for c in runs), default=0)
    counts = np.zeros((n_phases, n_agents, n_arms), dtype=np.int64)
    for c in runs:
        for i, j in zip(*np.nonzero(c >= 0)):
            counts[i, j, c[i, j]] += 1
    return counts


def freeze_phase(communicated, partner) -> np.ndarray:
    """First phase from which each agent always broadcasts its stable partner (``inf`` if never)."""
    c = np.asarray(communicated)
    n_phases, n = c.shape
    out = np.full(n, np.inf)
    for j in range(n):
        tau = n_phases + 1
        while tau > 1 and c[tau - 2, j] == partner[j]:
            tau -= 1
        if tau <= n_phases:
            out[j] = tau
    return out


def aggregate_ci(series, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Mean and normal-approximation half-width across runs (axis 0)."""
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 2:
        raise InsufficientRuns("need at least two runs for a confidence interval")
    z = stats.norm.ppf(0.5 + level / 2.0)
    # shifting by the first run keeps identical runs at exactly zero spread
    spread = (x - x[0]).std(axis=0, ddof=1)
    return x.mean(axis=0), z * spread / math.sqrt(x.shape[0])
