"""One synchronous round of the market: proposals, serial-dictatorship resolution, rewards."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NO_AGENT = -1
_CHUNK = 1024


def match_outcome(choices, n_arms: int) -> np.ndarray:
    """Winner of each arm: the highest ranked (lowest index) proposer, or ``NO_AGENT``."""
    winner = np.full(n_arms, NO_AGENT, dtype=np.int64)
    # walk from lowest rank up so higher ranked proposers overwrite
    for j in range(len(choices) - 1, -1, -1):
        winner[choices[j]] = j
    return winner


@dataclass(frozen=True)
class RoundFeedback:
    """Per-agent outcome of a round. Blocked agents have ``matched=False`` and reward 0."""

    matched: np.ndarray
    reward: np.ndarray
    winner: np.ndarray

    def blocked(self, j: int) -> bool:
        return not self.matched[j]


class RngStream:
    """Independent uniform sub-streams, one per (agent, arm), derived from a run seed.

    The ``n``-th reward agent ``j`` ever receives from arm ``k`` is decided by the
    ``n``-th uniform of sub-stream ``(j, k)``, whatever else happens in the run.
    """

    def __init__(self, seed: int, n_agents: int, n_arms: int):
        self.seed = int(seed)
        self.shape = (n_agents, n_arms)
        self._gens = [[self._generator(j, k) for k in range(n_arms)] for j in range(n_agents)]
        self._buf = [[np.empty(0) for _ in range(n_arms)] for _ in range(n_agents)]
        self._pos = np.zeros(self.shape, dtype=np.int64)

    def _generator(self, j: int, k: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(j, k))
        return np.random.Generator(np.random.PCG64(ss))

    def next_uniform(self, j: int, k: int) -> float:
        pos = self._pos[j, k]
        buf = self._buf[j][k]
        if pos >= len(buf):
            buf = self._buf[j][k] = self._gens[j][k].random(_CHUNK)
            pos = self._pos[j, k] = 0
        self._pos[j, k] = pos + 1
        return float(buf[pos])

    def bernoulli_table(self, means: np.ndarray, length: int) -> np.ndarray:
        """First ``length`` Bernoulli draws of every sub-stream, shape ``(N, K, length)``.

        Uses fresh generators, so it does not disturb :meth:`next_uniform`.
        """
        n, k = self.shape
        table = np.empty((n, k, length), dtype=np.uint8)
        for j in range(n):
            for a in range(k):
                table[j, a] = self._generator(j, a).random(length) < means[j, a]
        return table


class Environment:
    """Bernoulli market. ``means`` may be a raw matrix (e.g. containing a mean of exactly 1)."""

    def __init__(self, means, rng: RngStream):
        self.means = np.asarray(getattr(means, "means", means), dtype=float)
        self.rng = rng
        self.n_agents, self.n_arms = self.means.shape

    def step(self, choices) -> RoundFeedback:
        winner = match_outcome(choices, self.n_arms)
        matched = np.zeros(self.n_agents, dtype=bool)
        reward = np.zeros(self.n_agents)
        for j, k in enumerate(choices):
            if winner[k] == j:
                matched[j] = True
                reward[j] = float(self.rng.next_uniform(j, k) < self.means[j, k])
        return RoundFeedback(matched, reward, winner)
