"""UCB with decentralized dominated-arm deletion, as a per-agent state machine.

Time is 1-based. Slots ``1..N-1`` estimate ranks; from slot ``N`` on the run is
split into phases ``i = 1, 2, ...``, each a regret-minimization (RM) block of
``2**(i-1)`` slots followed by a communication block of ``(N-1)*K`` slots made of
``N-1`` sub-blocks of ``K`` slots. Ranks are 1-based, arms 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .strategy import Strategy


def phase_start(i: int, n_agents: int, n_arms: int) -> int:
    return 2 ** (i - 1) + (i - 1) * (n_agents - 1) * n_arms + n_agents - 1


@dataclass(frozen=True)
class PhaseLayout:
    phase: int
    start: int
    rm_len: int
    comm_len: int
    n_arms: int

    @property
    def rm_end(self) -> int:
        return self.start + self.rm_len - 1

    @property
    def comm_start(self) -> int:
        return self.start + self.rm_len

    @property
    def end(self) -> int:
        return self.comm_start + self.comm_len - 1

    def subblock(self, l: int) -> range:
        """Slots of communication sub-block ``l`` (1-based, ``1 <= l <= N-1``)."""
        first = self.comm_start + (l - 1) * self.n_arms
        return range(first, first + self.n_arms)


def phase_layout(i: int, n_agents: int, n_arms: int) -> PhaseLayout:
    if i < 1 or n_agents < 1 or n_arms < n_agents:
        raise ValueError("need i >= 1 and K >= N >= 1")
    return PhaseLayout(i, phase_start(i, n_agents, n_arms), 2 ** (i - 1),
                       (n_agents - 1) * n_arms, n_arms)


@dataclass(frozen=True)
class Slot:
    """Where slot ``t`` falls: ``kind`` is ``"rank"``, ``"rm"`` or ``"comm"``.

    ``offset`` is 0-based within the block (the rank window counts as one block).
    """

    kind: str
    phase: int
    offset: int


def locate(t: int, n_agents: int, n_arms: int) -> Slot:
    if t < 1:
        raise ValueError("slots start at 1")
    if t < n_agents:
        return Slot("rank", 0, t - 1)
    i = 1
    while phase_start(i + 1, n_agents, n_arms) <= t:
        i += 1
    lay = phase_layout(i, n_agents, n_arms)
    if t <= lay.rm_end:
        return Slot("rm", i, t - lay.start)
    return Slot("comm", i, t - lay.comm_start)


def last_slot_of_phase(i: int, n_agents: int, n_arms: int) -> int:
    return phase_start(i + 1, n_agents, n_arms) - 1


# ---------------------------------------------------------------------------
# protocol pieces


def rank_protocol_action(t: int, first_match: int | None) -> int:
    """Arm played in rank-estimation slot ``t``.

    Never-matched agents probe arm ``t`` (arm index ``t-1``); matched agents
    hold the arm of their first match, which keeps it occupied for later slots.
    """
    if t == 1 or first_match is None:
        return t - 1
    return first_match - 1


def ucb_index(mu_hat: float, n_matches: int, t: int, alpha: float) -> float:
    if n_matches == 0:
        return math.inf
    return mu_hat + math.sqrt(2.0 * alpha * math.log(t) / n_matches)


def rm_select(active: Iterable[int], counts: Sequence[int], sums: Sequence[float],
              t: int, alpha: float) -> int:
    """UCB-alpha over the active arms with statistics through ``t-1``; lowest index wins ties."""
    best_arm, best = -1, -math.inf
    log_t = math.log(t)
    for k in sorted(active):
        n = counts[k]
        if n == 0:
            return k
        idx = sums[k] / n + math.sqrt(2.0 * alpha * log_t / n)
        if idx > best:
            best_arm, best = k, idx
    return best_arm


def most_matched(active: Iterable[int], phase_counts: Sequence[int]) -> int:
    """Arm matched most often in the RM block; ties (including all-zero) go to the lowest index."""
    best_arm, best = -1, -1
    for k in sorted(active):
        if phase_counts[k] > best:
            best_arm, best = k, phase_counts[k]
    return best_arm


def comm_action(rank: int, slot_in_comm: int, estimate: int, n_arms: int) -> int:
    """Sub-block ``l`` belongs to rank ``l+1``, which sweeps every arm; everyone else holds its estimate."""
    l = slot_in_comm // n_arms + 1
    if rank == l + 1:
        return slot_in_comm % n_arms
    return estimate


def comm_decode(rank: int, own_subblock: Iterable[tuple[int, bool]]) -> set[int]:
    """Dominated arms: those on which the agent was blocked during its own sweep.

    ``own_subblock`` yields ``(arm, blocked)`` for the agent's sub-block (``rank-1``).
    """
    if rank == 1:
        return set()
    return {arm for arm, blocked in own_subblock if blocked}


def update_active_set(n_arms: int, dominated: Iterable[int]) -> list[int]:
    dominated = set(dominated)
    return [k for k in range(n_arms) if k not in dominated]


# ---------------------------------------------------------------------------
# agent


@dataclass
class PhaseRecord:
    phase: int
    active: list[int]
    estimate: int
    dominated: set[int] = field(default_factory=set)


class UcbD3Agent(Strategy):
    """One agent running the protocol; knows only ``N``, ``K`` and its own feedback.

    ``comm_stats=False`` keeps matches from communication slots out of the UCB
    statistics (they always count toward rank detection and blocking records).
    """

    def __init__(self, n_agents: int, n_arms: int, alpha: float = 2.0, comm_stats: bool = True):
        super().__init__(n_agents, n_arms)
        if alpha < 2:
            raise ValueError("alpha must be at least 2")
        self.alpha = alpha
        self.comm_stats = comm_stats
        self.rank = n_agents
        self.first_match: int | None = None
        self.counts = [0] * n_arms
        self.sums = [0.0] * n_arms
        self.phase_counts = [0] * n_arms
        self.active = list(range(n_arms))
        self.estimate: int | None = None
        self.dominated: set[int] = set()
        self.history: list[PhaseRecord] = []
        self._blocked_log: list[tuple[int, bool]] = []
        self._layout = phase_layout(1, n_agents, n_arms)

    def _layout_for(self, t: int) -> PhaseLayout:
        while t > self._layout.end:
            self._layout = phase_layout(self._layout.phase + 1, self.n_agents, self.n_arms)
        return self._layout

    def act(self, t: int) -> int:
        self._tick(t, advance=False)
        if t < self.n_agents:
            arm = rank_protocol_action(t, self.first_match)
        else:
            lay = self._layout_for(t)
            if t <= lay.rm_end:
                arm = rm_select(self.active, self.counts, self.sums, t, self.alpha)
            else:
                arm = comm_action(self.rank, t - lay.comm_start, self.estimate, self.n_arms)
        return arm

    def observe(self, t: int, arm: int, matched: bool, reward: float) -> None:
        self._tick(t, advance=True)
        if t < self.n_agents:
            if matched:
                self._record(arm, reward)
                if self.first_match is None:
                    self.first_match = t
                    self.rank = t
            return
        lay = self._layout_for(t)
        if t <= lay.rm_end:
            if matched:
                self._record(arm, reward)
                self.phase_counts[arm] += 1
            if t == lay.rm_end:
                self.estimate = most_matched(self.active, self.phase_counts)
                self.history.append(PhaseRecord(lay.phase, list(self.active), self.estimate))
                if lay.comm_len == 0:
                    self._close_phase(set())
            return
        if matched and self.comm_stats:
            self._record(arm, reward)
        if self.rank >= 2 and t in lay.subblock(self.rank - 1):
            self._blocked_log.append((arm, not matched))
        if t == lay.end:
            self._close_phase(comm_decode(self.rank, self._blocked_log))

    def _record(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward

    def _close_phase(self, dominated: set[int]) -> None:
        self.dominated = dominated
        self.history[-1].dominated = dominated
        self.active = update_active_set(self.n_arms, dominated)
        self.phase_counts = [0] * self.n_arms
        self._blocked_log = []

    @property
    def communicated(self) -> list[int]:
        return [rec.estimate for rec in self.history]
