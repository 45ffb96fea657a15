import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucbd3.baselines import CentralizedUcb, EtcAgent, GreedyAgent, NaiveUcbAgent
from ucbd3.market import gen_osb, stable_match
from ucbd3.simulate import run_centralized_reference, run_strategies


def test_centralized_first_round_is_identity():
    assert CentralizedUcb(3, 5).assign(1) == [0, 1, 2]


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2), st.integers(0, 10_000))
def test_centralized_never_collides(n, extra, seed):
    tr = run_centralized_reference(gen_osb(n, n + extra, seed), 300, seed)
    for row in tr.choices:
        assert len(set(row.tolist())) == n


def test_naive_counts_every_round():
    inst = gen_osb(3, 3, 2)
    agents = [NaiveUcbAgent(3, 3) for _ in range(3)]
    tr = run_strategies(inst, agents, 500, 1)
    for a in agents:
        assert sum(a.counts) == 500
    # blocked rounds are booked as zero reward
    blocked = ~tr.matched[:, 2]
    assert blocked.any()
    assert agents[2].sums[0] + agents[2].sums[1] + agents[2].sums[2] <= int(tr.matched[:, 2].sum())


def test_greedy_sweeps_then_exploits():
    means = np.array([[0.3, 1.0, 0.2]])
    g = GreedyAgent(1, 3)
    tr = run_strategies(means, [g], 20, 0)
    assert tr.choices[:3, 0].tolist() == [0, 1, 2]
    assert set(tr.choices[3:, 0].tolist()) == {1}


@pytest.mark.parametrize("n,k,h", [(2, 2, 5), (3, 4, 7), (4, 4, 3)])
def test_etc_exploration_collision_free(n, k, h):
    inst = gen_osb(n, k, 3)
    agents = [EtcAgent(n, k, h) for _ in range(n)]
    end = agents[0].explore_end
    tr = run_strategies(inst, agents, end + 5, 9)
    explore = slice(n - 1, end)
    assert tr.matched[explore].all()
    for j in range(n):
        per_arm = np.bincount(tr.choices[explore, j], minlength=k)
        assert per_arm.tolist() == [h] * k


def test_etc_commits_to_stable_partner_with_deterministic_rewards():
    means = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    n, k = means.shape
    agents = [EtcAgent(n, k, 2) for _ in range(n)]
    horizon = agents[0].comm_end + 4
    tr = run_strategies(means, agents, horizon, 0)
    # agent 2 prefers arm 0, which agent 1 holds: it must settle on its best remaining arm
    assert [a.commit for a in agents] == [0, 1, 2]
    assert agents[1].dominated == {0}
    assert agents[2].dominated == {0, 1}
    assert tr.matched[-4:].all()


def test_etc_recovers_stable_match_on_easy_instance():
    inst = gen_osb(3, 3, 0)
    agents = [EtcAgent(3, 3, 400) for _ in range(3)]
    run_strategies(inst, agents, agents[0].comm_end + 1, 4)
    assert [a.commit for a in agents] == stable_match(inst).tolist()
