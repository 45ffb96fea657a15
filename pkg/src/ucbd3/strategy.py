"""Common interface for per-agent decision rules driven in lockstep."""

from __future__ import annotations


class ClockSkew(RuntimeError):
    """An agent was driven out of lockstep (a slot skipped or repeated)."""


class Strategy:
    """A decentralized agent: chooses an arm from its own history only.

    The driver calls ``act(t)`` then ``observe(t, arm, matched, reward)`` for
    ``t = 1, 2, ...`` without gaps. Arms are 0-based.
    """

    def __init__(self, n_agents: int, n_arms: int):
        self.n_agents = n_agents
        self.n_arms = n_arms
        self.t = 0

    def _tick(self, t: int, *, advance: bool) -> None:
        if t != self.t + 1:
            raise ClockSkew(f"expected slot {self.t + 1}, got {t}")
        if advance:
            self.t = t

    def act(self, t: int) -> int:
        raise NotImplementedError

    def observe(self, t: int, arm: int, matched: bool, reward: float) -> None:
        raise NotImplementedError
