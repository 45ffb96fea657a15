"""Comparison rules: naive independent UCB, greedy deviant, decentralized ETC, centralized UCB."""

from __future__ import annotations

import math

from .protocol import comm_action, rank_protocol_action, rm_select, update_active_set
from .strategy import Strategy


def _argmax_mean(arms, counts, sums) -> int:
    best_arm, best = -1, -math.inf
    for k in arms:
        m = sums[k] / counts[k] if counts[k] else math.inf
        if m > best:
            best_arm, best = k, m
    return best_arm


class NaiveUcbAgent(Strategy):
    """UCB-alpha over all arms that books a blocked round as a reward-0 sample."""

    def __init__(self, n_agents: int, n_arms: int, alpha: float = 2.0):
        super().__init__(n_agents, n_arms)
        self.alpha = alpha
        self.counts = [0] * n_arms
        self.sums = [0.0] * n_arms

    def act(self, t: int) -> int:
        self._tick(t, advance=False)
        return rm_select(range(self.n_arms), self.counts, self.sums, t, self.alpha)

    def observe(self, t: int, arm: int, matched: bool, reward: float) -> None:
        self._tick(t, advance=True)
        self.counts[arm] += 1
        self.sums[arm] += reward if matched else 0.0


class GreedyAgent(Strategy):
    """Plays every arm once in index order, then the best observed average payoff.

    Payoffs include blocked rounds as 0, i.e. the agent maximizes what it actually receives.
    """

    def __init__(self, n_agents: int, n_arms: int):
        super().__init__(n_agents, n_arms)
        self.counts = [0] * n_arms
        self.sums = [0.0] * n_arms

    def act(self, t: int) -> int:
        self._tick(t, advance=False)
        if t <= self.n_arms:
            return t - 1
        return _argmax_mean(range(self.n_arms), self.counts, self.sums)

    def observe(self, t: int, arm: int, matched: bool, reward: float) -> None:
        self._tick(t, advance=True)
        self.counts[arm] += 1
        self.sums[arm] += reward if matched else 0.0


class EtcAgent(Strategy):
    """Decentralized explore-then-commit.

    After the rank-estimation window, ``K*H`` slots of staggered round robin
    (rank ``r`` plays arm ``(t + r) mod K``, collision-free when ``K >= N``),
    then one collision broadcast, then commit to the best empirical arm outside
    the arms detected as taken by higher ranks. An agent broadcasts its best
    empirical arm until its own sweep ends and its commit arm afterwards, so
    lower ranks decode the arms actually held.
    """

    def __init__(self, n_agents: int, n_arms: int, horizon_h: int):
        super().__init__(n_agents, n_arms)
        if horizon_h < 1:
            raise ValueError("H must be positive")
        self.h = horizon_h
        self.rank = n_agents
        self.first_match: int | None = None
        self.counts = [0] * n_arms
        self.sums = [0.0] * n_arms
        self.explore_end = n_agents + n_arms * horizon_h - 1
        self.comm_end = self.explore_end + (n_agents - 1) * n_arms
        self.estimate: int | None = None
        self.dominated: set[int] = set()
        self.commit: int | None = None

    def act(self, t: int) -> int:
        self._tick(t, advance=False)
        if t < self.n_agents:
            return rank_protocol_action(t, self.first_match)
        if t <= self.explore_end:
            return (t + self.rank) % self.n_arms
        if t <= self.comm_end:
            return comm_action(self.rank, t - self.explore_end - 1, self.estimate, self.n_arms)
        return self.commit

    def observe(self, t: int, arm: int, matched: bool, reward: float) -> None:
        self._tick(t, advance=True)
        if matched:
            self.counts[arm] += 1
            self.sums[arm] += reward
        if t < self.n_agents:
            if matched and self.first_match is None:
                self.first_match = self.rank = t
        elif t <= self.comm_end:
            own = self.explore_end + (self.rank - 2) * self.n_arms
            if self.rank >= 2 and own < t <= own + self.n_arms and not matched:
                self.dominated.add(arm)
        if t == self.explore_end:
            self.estimate = _argmax_mean(range(self.n_arms), self.counts, self.sums)
        if t == self.explore_end + (self.rank - 1) * self.n_arms:
            # own sweep done: broadcast the commit arm from here on
            self.commit = _argmax_mean(update_active_set(self.n_arms, self.dominated),
                                       self.counts, self.sums)
            self.estimate = self.commit


class CentralizedUcb:
    """Arbiter that collects every agent's UCB indices and assigns arms serially by rank.

    Agent ``j`` gets its highest-index arm among those not given to agents ``< j``,
    so no collisions ever occur.
    """

    def __init__(self, n_agents: int, n_arms: int, alpha: float = 2.0):
        self.n_agents = n_agents
        self.n_arms = n_arms
        self.alpha = alpha
        self.counts = [[0] * n_arms for _ in range(n_agents)]
        self.sums = [[0.0] * n_arms for _ in range(n_agents)]

    def assign(self, t: int) -> list[int]:
        free = set(range(self.n_arms))
        out = []
        for j in range(self.n_agents):
            arm = rm_select(free, self.counts[j], self.sums[j], t, self.alpha)
            free.discard(arm)
            out.append(arm)
        return out

    def observe(self, arms, rewards) -> None:
        for j, (k, r) in enumerate(zip(arms, rewards)):
            self.counts[j][k] += 1
            self.sums[j][k] += r
