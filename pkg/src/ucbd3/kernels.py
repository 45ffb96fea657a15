"""Compiled simulation loops for the built-in rules.

These mirror :mod:`ucbd3.protocol` and :mod:`ucbd3.baselines` step for step
(same arithmetic, same tie-breaking) and are checked against them for trace
equality in the test suite. Rewards come pre-drawn as ``bits[j, k, n]``, the
``n``-th Bernoulli outcome of sub-stream ``(j, k)``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

UCB_D3 = 0
NAIVE_UCB = 1
ETC = 2
GREEDY = 3

MAX_PHASES = 64


@njit(cache=True)
def _ucb_pick(counts, sums, allowed, log_t, alpha):
    best_arm = -1
    best = -math.inf
    for k in range(counts.shape[0]):
        if not allowed[k]:
            continue
        n = counts[k]
        if n == 0:
            return k
        idx = sums[k] / n + math.sqrt(2.0 * alpha * log_t / n)
        if idx > best:
            best_arm = k
            best = idx
    return best_arm


@njit(cache=True)
def _best_mean(counts, sums, allowed):
    best_arm = -1
    best = -math.inf
    for k in range(counts.shape[0]):
        if not allowed[k]:
            continue
        m = sums[k] / counts[k] if counts[k] else math.inf
        if m > best:
            best_arm = k
            best = m
    return best_arm


@njit(cache=True)
def _most_matched(phase_counts, allowed):
    best_arm = -1
    best = -1
    for k in range(phase_counts.shape[0]):
        if allowed[k] and phase_counts[k] > best:
            best_arm = k
            best = phase_counts[k]
    return best_arm


@njit(cache=True)
def simulate(means, bits, codes, alphas, hs, comm_stats, horizon):
    n, k_arms = means.shape
    choices = np.empty((horizon, n), np.int64)
    matched = np.zeros((horizon, n), np.uint8)
    comm = np.full((MAX_PHASES, n), -1, np.int64)

    counts = np.zeros((n, k_arms), np.int64)
    sums = np.zeros((n, k_arms), np.float64)
    phase_counts = np.zeros((n, k_arms), np.int64)
    active = np.ones((n, k_arms), np.bool_)
    blocked_seen = np.zeros((n, k_arms), np.bool_)
    draws = np.zeros((n, k_arms), np.int64)
    all_arms = np.ones(k_arms, np.bool_)
    rank = np.full(n, n, np.int64)
    first_match = np.zeros(n, np.int64)
    estimate = np.full(n, -1, np.int64)
    commit = np.full(n, -1, np.int64)
    winner = np.empty(k_arms, np.int64)
    arm = np.empty(n, np.int64)
    got = np.zeros(n, np.bool_)
    reward = np.zeros(n, np.float64)

    explore_end = np.empty(n, np.int64)
    etc_comm_end = np.empty(n, np.int64)
    for j in range(n):
        explore_end[j] = n + k_arms * hs[j] - 1
        etc_comm_end[j] = explore_end[j] + (n - 1) * k_arms

    phase = 1
    start = n
    rm_len = 1
    comm_len = (n - 1) * k_arms
    rm_end = start + rm_len - 1
    comm_start = rm_end + 1
    end = comm_start + comm_len - 1
    phases_done = 0

    for t in range(1, horizon + 1):
        while t >= n and t > end:
            phase += 1
            start = end + 1
            rm_len *= 2
            rm_end = start + rm_len - 1
            comm_start = rm_end + 1
            end = comm_start + comm_len - 1
        log_t = math.log(t)
        if t < n:
            kind = 0
        elif t <= rm_end:
            kind = 1
        else:
            kind = 2

        # --- act
        for j in range(n):
            code = codes[j]
            if code == UCB_D3:
                if kind == 0:
                    a = t - 1 if (t == 1 or first_match[j] == 0) else first_match[j] - 1
                elif kind == 1:
                    a = _ucb_pick(counts[j], sums[j], active[j], log_t, alphas[j])
                else:
                    off = t - comm_start
                    if rank[j] == off // k_arms + 2:
                        a = off % k_arms
                    else:
                        a = estimate[j]
            elif code == NAIVE_UCB:
                a = _ucb_pick(counts[j], sums[j], all_arms, log_t, alphas[j])
            elif code == GREEDY:
                if t <= k_arms:
                    a = t - 1
                else:
                    a = _best_mean(counts[j], sums[j], all_arms)
            else:
                if t < n:
                    a = t - 1 if (t == 1 or first_match[j] == 0) else first_match[j] - 1
                elif t <= explore_end[j]:
                    a = (t + rank[j]) % k_arms
                elif t <= etc_comm_end[j]:
                    off = t - explore_end[j] - 1
                    if rank[j] == off // k_arms + 2:
                        a = off % k_arms
                    else:
                        a = estimate[j]
                else:
                    a = commit[j]
            arm[j] = a

        # --- resolve
        for a in range(k_arms):
            winner[a] = -1
        for j in range(n):
            a = arm[j]
            choices[t - 1, j] = a
            if winner[a] == -1:
                winner[a] = j
                got[j] = True
                matched[t - 1, j] = 1
                reward[j] = 1.0 if bits[j, a, draws[j, a]] else 0.0
                draws[j, a] += 1
            else:
                got[j] = False
                reward[j] = 0.0

        # --- observe
        for j in range(n):
            code = codes[j]
            a = arm[j]
            if code == UCB_D3:
                if kind == 0:
                    if got[j]:
                        counts[j, a] += 1
                        sums[j, a] += reward[j]
                        if first_match[j] == 0:
                            first_match[j] = t
                            rank[j] = t
                elif kind == 1:
                    if got[j]:
                        counts[j, a] += 1
                        sums[j, a] += reward[j]
                        phase_counts[j, a] += 1
                    if t == rm_end:
                        est = _most_matched(phase_counts[j], active[j])
                        estimate[j] = est
                        if phase <= MAX_PHASES:
                            comm[phase - 1, j] = est
                        if comm_len == 0:
                            for b in range(k_arms):
                                active[j, b] = True
                                phase_counts[j, b] = 0
                else:
                    if got[j] and comm_stats[j]:
                        counts[j, a] += 1
                        sums[j, a] += reward[j]
                    r = rank[j]
                    if r >= 2:
                        own = comm_start + (r - 2) * k_arms
                        if own <= t < own + k_arms and not got[j]:
                            blocked_seen[j, a] = True
                    if t == end:
                        for b in range(k_arms):
                            active[j, b] = not blocked_seen[j, b]
                            blocked_seen[j, b] = False
                            phase_counts[j, b] = 0
            elif code == NAIVE_UCB or code == GREEDY:
                counts[j, a] += 1
                sums[j, a] += reward[j]
            else:
                if got[j]:
                    counts[j, a] += 1
                    sums[j, a] += reward[j]
                if t < n:
                    if got[j] and first_match[j] == 0:
                        first_match[j] = t
                        rank[j] = t
                elif t <= etc_comm_end[j]:
                    r = rank[j]
                    own = explore_end[j] + (r - 2) * k_arms
                    if r >= 2 and own < t <= own + k_arms and not got[j]:
                        blocked_seen[j, a] = True
                if t == explore_end[j]:
                    estimate[j] = _best_mean(counts[j], sums[j], all_arms)
                if t == explore_end[j] + (rank[j] - 1) * k_arms:
                    # own sweep done: broadcast the commit arm from here on
                    free = np.empty(k_arms, np.bool_)
                    for b in range(k_arms):
                        free[b] = not blocked_seen[j, b]
                    commit[j] = _best_mean(counts[j], sums[j], free)
                    estimate[j] = commit[j]
        if t >= n and t == rm_end:
            phases_done = phase

    return choices, matched, comm, min(phases_done, MAX_PHASES)


@njit(cache=True)
def simulate_centralized(bits, alpha, horizon):
    n, k_arms, _ = bits.shape
    choices = np.empty((horizon, n), np.int64)
    counts = np.zeros((n, k_arms), np.int64)
    sums = np.zeros((n, k_arms), np.float64)
    draws = np.zeros((n, k_arms), np.int64)
    free = np.empty(k_arms, np.bool_)
    for t in range(1, horizon + 1):
        log_t = math.log(t)
        for b in range(k_arms):
            free[b] = True
        for j in range(n):
            a = _ucb_pick(counts[j], sums[j], free, log_t, alpha)
            free[a] = False
            choices[t - 1, j] = a
            counts[j, a] += 1
            if bits[j, a, draws[j, a]]:
                sums[j, a] += 1.0
            draws[j, a] += 1
    return choices
