"""Market model: instances, the serial-dictatorship stable matching, gaps and generators.

Agents are indexed ``0..N-1`` in rank order (index 0 is the highest ranked agent,
never blocked) and arms ``0..K-1``. Every arm prefers agents by the same ranking,
so the stable matching is unique and produced by letting agents pick in rank order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class InstanceError(ValueError):
    """Base class for invalid market instances."""


class ShapeViolation(InstanceError):
    pass


class RangeViolation(InstanceError):
    pass


class DistinctnessViolation(InstanceError):
    pass


class NotOSB(ValueError):
    """Raised when a calculation requires an optimally stable instance."""


@dataclass(frozen=True)
class Instance:
    """Ground-truth mean rewards ``means[j, k]`` of agent ``j`` on arm ``k``."""

    means: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.means.shape[0]

    @property
    def n_arms(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "n_arms": self.n_arms,
            "means": [[float(x) for x in row] for row in self.means],
        }


def _as_matrix(means) -> np.ndarray:
    if isinstance(means, Instance):
        return means.means
    return np.asarray(means, dtype=float)


def validate_instance(means: Sequence[Sequence[float]] | np.ndarray,
                      n_agents: int | None = None,
                      n_arms: int | None = None) -> Instance:
    """Check the market invariants and return a read-only :class:`Instance`.

    ``n_agents``/``n_arms`` are optional declared sizes (as found in instance
    files); when given they must agree with the matrix.
    """
    try:
        m = np.array(means, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ShapeViolation(f"means is not a rectangular numeric matrix: {exc}") from None
    if m.ndim != 2 or m.size == 0:
        raise ShapeViolation(f"means must be a non-empty 2-d matrix, got shape {m.shape}")
    n, k = m.shape
    if n_agents is not None and n_agents != n:
        raise ShapeViolation(f"n_agents={n_agents} but means has {n} rows")
    if n_arms is not None and n_arms != k:
        raise ShapeViolation(f"n_arms={n_arms} but means has {k} columns")
    if k < n:
        raise ShapeViolation(f"need K >= N, got N={n}, K={k}")
    if not np.all(np.isfinite(m)) or np.any(m <= 0.0) or np.any(m >= 1.0):
        raise RangeViolation("every mean must lie in the open interval (0, 1)")
    for j, row in enumerate(m):
        if len(np.unique(row)) != k:
            raise DistinctnessViolation(f"agent {j} has duplicate arm means")
    m.setflags(write=False)
    return Instance(m)


def load_instance(path: str | Path) -> Instance:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        return validate_instance(doc["means"], doc.get("n_agents"), doc.get("n_arms"))
    except (KeyError, TypeError):
        raise ShapeViolation(f"{path}: instance document needs a 'means' matrix") from None


def save_instance(inst: Instance, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(inst.to_dict(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# stable matching and gaps


def stable_match(means) -> np.ndarray:
    """Serial dictatorship: agent ``j`` takes its best arm among those left by agents ``< j``.

    Accepts an :class:`Instance` or a raw matrix (so out-of-range illustrative
    instances can be matched too). Returns ``partner`` with ``partner[j] = k*_j``.
    """
    m = _as_matrix(means)
    n, k = m.shape
    taken = np.zeros(k, dtype=bool)
    partner = np.empty(n, dtype=np.int64)
    for j in range(n):
        row = np.where(taken, -np.inf, m[j])
        partner[j] = int(np.argmax(row))
        taken[partner[j]] = True
    return partner


@dataclass(frozen=True)
class GapTable:
    """``gap[j, k] = mu[j, k*_j] - mu[j, k]``; negative entries are dominated arms beating k*_j.

    ``per_agent_min[j]`` is the minimum over all ``k != k*_j``; ``nondominated_min[j]``
    restricts to arms not taken by higher ranked agents; ``global_min`` is the
    minimum of the latter across agents (``inf`` when no such arm exists).
    """

    gap: np.ndarray
    per_agent_min: np.ndarray
    nondominated_min: np.ndarray
    global_min: float


def gaps(means, partner: np.ndarray | None = None) -> GapTable:
    m = _as_matrix(means)
    if partner is None:
        partner = stable_match(m)
    n, k = m.shape
    best = m[np.arange(n), partner]
    gap = best[:, None] - m
    per_agent_min = np.full(n, np.inf)
    nondominated_min = np.full(n, np.inf)
    for j in range(n):
        others = np.ones(k, dtype=bool)
        others[partner[j]] = False
        if others.any():
            per_agent_min[j] = gap[j, others].min()
        others[partner[:j]] = False
        if others.any():
            nondominated_min[j] = gap[j, others].min()
    return GapTable(gap, per_agent_min, nondominated_min, float(nondominated_min.min()))


def dominated_arms(partner: np.ndarray, j: int) -> set[int]:
    """Arms held by agents ranked above ``j`` in the stable matching."""
    return {int(a) for a in partner[:j]}


def classify_osb(means, partner: np.ndarray | None = None) -> bool:
    """True iff every agent's stable partner is its best arm overall."""
    m = _as_matrix(means)
    if partner is None:
        partner = stable_match(m)
    return bool(np.all(np.argmax(m, axis=1) == partner))


# ---------------------------------------------------------------------------
# generators


def _distinct_row(rng: np.random.Generator, k: int, low: float, high: float,
                  fixed: dict[int, float]) -> np.ndarray:
    row = np.empty(k)
    free = [a for a in range(k) if a not in fixed]
    for a, v in fixed.items():
        row[a] = v
    row[free] = rng.uniform(low, high, size=len(free))
    # a redraw is a probability-zero event in exact arithmetic
    while True:
        values, counts = np.unique(row, return_counts=True)
        repeated = set(values[counts > 1].tolist())
        clash = [a for a in free if row[a] in repeated or not 0.0 < row[a] < 1.0]
        if not clash:
            return row
        row[clash] = rng.uniform(low, high, size=len(clash))


def gen_osb(n_agents: int, n_arms: int, seed: int, opt_mean: float = 0.9,
            sub_range: tuple[float, float] = (0.0, 0.8)) -> Instance:
    """OSB instance: agent ``j`` has ``opt_mean`` on arm ``sigma(j)``, the rest uniform in ``sub_range``.

    ``sigma`` is a uniformly random injection of agents into arms.
    """
    if n_arms < n_agents:
        raise ShapeViolation(f"need K >= N, got N={n_agents}, K={n_arms}")
    if not sub_range[1] < opt_mean:
        raise ValueError("opt_mean must exceed every sub-optimal mean")
    rng = np.random.default_rng(seed)
    sigma = rng.permutation(n_arms)[:n_agents]
    rows = [_distinct_row(rng, n_arms, sub_range[0], sub_range[1], {int(sigma[j]): opt_mean})
            for j in range(n_agents)]
    return validate_instance(np.array(rows))


def gen_spaced(n_agents: int, n_arms: int, seed: int) -> Instance:
    """Each agent spreads means evenly over ``[0.1, 0.9]`` along its own random arm permutation."""
    if n_arms < 2:
        raise ShapeViolation("spaced instances need at least two arms")
    if n_arms < n_agents:
        raise ShapeViolation(f"need K >= N, got N={n_agents}, K={n_arms}")
    rng = np.random.default_rng(seed)
    grid = 0.1 + np.arange(n_arms) * 0.8 / (n_arms - 1)
    means = np.empty((n_agents, n_arms))
    for j in range(n_agents):
        means[j, rng.permutation(n_arms)] = grid
    return validate_instance(means)


# Steps used to keep "all other arms" rows distinct in the hard instance.
_HARD_LB_STEP = 1e-3


def gen_hard_lb(j_target: int, n_agents: int, n_arms: int, delta: float,
                seed: int = 0) -> Instance:
    """Hard OSB instance for the ``(j-1) log T / (16 delta^2)`` lower bound.

    ``j_target`` is a 1-based rank. Agents ranked above it hold their own-index
    arm at 1/2 and sit at ``1/2 - delta`` on arm ``j_target``; the target agent
    has 1/2 on its own arm and 1/4 on the runner-up, so its minimum gap is 1/4.
    Remaining entries of those rows step down by ``1e-3`` to keep rows distinct.
    Agents ranked below the target get distinct means in ``(0.01, 0.24)`` with
    the largest placed on their own-index arm.
    """
    if not 2 <= j_target <= n_agents <= n_arms:
        raise ShapeViolation("need 2 <= j_target <= N <= K")
    if not 0.0 < delta < 0.25:
        raise ValueError("delta must lie in (0, 1/4)")
    if (n_arms - 1) * _HARD_LB_STEP >= 0.24:
        raise ShapeViolation("too many arms for the fixed spacing of the hard instance")
    jt = j_target - 1
    means = np.empty((n_agents, n_arms))
    for j in range(jt):
        means[j, j] = 0.5
        means[j, jt] = 0.5 - delta
        rest = [a for a in range(n_arms) if a not in (j, jt)]
        means[j, rest] = 0.5 - delta - _HARD_LB_STEP * np.arange(1, len(rest) + 1)
    means[jt, jt] = 0.5
    rest = [a for a in range(n_arms) if a != jt]
    means[jt, rest] = 0.25 - _HARD_LB_STEP * np.arange(len(rest))
    rng = np.random.default_rng(seed)
    for j in range(jt + 1, n_agents):
        row = _distinct_row(rng, n_arms, 0.01, 0.24, {})
        top = int(np.argmax(row))
        row[[top, j]] = row[[j, top]]
        means[j] = row
    return validate_instance(means)
