"""Brute-force references, deliberately independent of the package code paths."""

from __future__ import annotations

import itertools

import numpy as np


def stable_matchings_bruteforce(means) -> list[tuple[int, ...]]:
    """Every injective agent->arm matching with no blocking pair.

    Arms rank agents by index (lower index preferred). A pair (j, k) blocks if
    agent j prefers k to its own arm and arm k is free or held by a lower ranked agent.
    """
    m = np.asarray(means, dtype=float)
    n, k = m.shape
    out = []
    for assign in itertools.permutations(range(k), n):
        holder = {arm: j for j, arm in enumerate(assign)}
        stable = True
        for j in range(n):
            for arm in range(k):
                if m[j, arm] > m[j, assign[j]]:
                    h = holder.get(arm)
                    if h is None or h > j:
                        stable = False
                        break
            if not stable:
                break
        if stable:
            out.append(assign)
    return out


def winners_bruteforce(choices, n_arms: int) -> list[int]:
    out = []
    for arm in range(n_arms):
        proposers = [j for j, c in enumerate(choices) if c == arm]
        out.append(min(proposers) if proposers else -1)
    return out
