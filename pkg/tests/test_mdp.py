import numpy as np
import pytest

from detdec import (
    MissingStateError,
    ResourceLimitError,
    SupportBelief,
    TabularModel,
    default_policy,
    mactp_generate,
    MactpSpec,
    value_iteration,
)
from detdec.evaluation import trajectory_value
from detdec.model import enumerate_joint_actions

from helpers import absorbing_model, chain_model, selfloop_model


def hand_bellman(model, tol=1e-12, sweeps=4000):
    """Independent oracle: plain dict-based value iteration over reachable states."""
    actions = enumerate_joint_actions(model.action_space_sizes)
    states = set(model.initial_belief().states)
    frontier = list(states)
    while frontier:
        nxt = []
        for s in frontier:
            for a in actions:
                s2, _, _ = model.step(s, a)
                if s2 not in states:
                    states.add(s2)
                    nxt.append(s2)
        frontier = nxt
    v = {s: 0.0 for s in states}
    for _ in range(sweeps):
        delta = 0.0
        nv = {}
        for s in states:
            best = max(
                model.step(s, a)[2] + model.discount * v[model.step(s, a)[0]] for a in actions
            )
            nv[s] = best
            delta = max(delta, abs(best - v[s]))
        v = nv
        if delta <= tol:
            break
    return v


class TestValueIteration:
    def test_absorbing_state_is_zero(self):
        table = value_iteration(absorbing_model())
        assert table.value(0) == 0.0

    def test_selfloop_geometric_series(self):
        table = value_iteration(selfloop_model(reward=1.0, gamma=0.95), tol=1e-9)
        assert table.value(0) == pytest.approx(20.0, abs=1e-7)

    def test_chain_matches_hand_bellman(self):
        m = chain_model(gamma=0.95)
        oracle = hand_bellman(m)
        table = value_iteration(m, tol=1e-9)
        for s, v in oracle.items():
            assert table.value(s) == pytest.approx(v, abs=1e-6)

    def test_mactp_residual_invariant(self):
        m = mactp_generate(MactpSpec(3, 2, 3, seed=4))
        tol = 1e-6
        table = value_iteration(m, tol=tol)
        actions = enumerate_joint_actions(m.action_space_sizes)
        for s in list(table.state_index)[::7]:
            backed = max(
                m.step(s, a)[2] + m.discount * table.value(m.step(s, a)[0]) for a in actions
            )
            assert abs(table.value(s) - backed) <= tol

    def test_deterministic_tables(self):
        m = mactp_generate(MactpSpec(3, 2, 3, seed=4))
        t1 = value_iteration(m)
        t2 = value_iteration(m)
        assert t1.states == t2.states
        assert np.array_equal(t1.values, t2.values)

    def test_state_cap(self):
        m = mactp_generate(MactpSpec(3, 2, 3, seed=4))
        with pytest.raises(ResourceLimitError, match="state_cap=10"):
            value_iteration(m, state_cap=10)

    def test_missing_state(self):
        table = value_iteration(selfloop_model())
        with pytest.raises(MissingStateError):
            table.value(99)

    def test_invalid_tol(self):
        with pytest.raises(ValueError):
            value_iteration(selfloop_model(), tol=0.0)


class TestDefaultPolicy:
    def test_terminal_state_ties_break_to_first_action(self):
        m = chain_model()
        pol = default_policy(value_iteration(m), m)
        assert pol.joint_action(2) == (0,)  # all actions tie at value 0

    def test_unique_best_action(self):
        m = chain_model()
        pol = default_policy(value_iteration(m), m)
        assert pol.joint_action(0) == (1,)  # move right toward the goal
        assert pol.joint_action(1) == (1,)

    def test_crafted_tie_prefers_lower_index(self):
        # two actions with identical dynamics: argmax must pick index 0
        t = {
            (0, (0,)): (1, (0,), 1.0),
            (0, (1,)): (1, (0,), 1.0),
            (1, (0,)): (1, (0,), 0.0),
            (1, (1,)): (1, (0,), 0.0),
        }
        m = TabularModel(1, (2,), (1,), 0.9, t, SupportBelief.point(0), frozenset({1}))
        pol = default_policy(value_iteration(m), m)
        assert pol.joint_action(0) == (0,)

    def test_missing_state(self):
        m = chain_model()
        pol = default_policy(value_iteration(m), m)
        with pytest.raises(MissingStateError):
            pol.joint_action(17)

    def test_greedy_rollout_matches_value(self):
        m = mactp_generate(MactpSpec(2, 2, 2, seed=8))
        tol = 1e-8
        table = value_iteration(m, tol=tol)
        pol = default_policy(table, m)

        def step_fn(s):
            s2, _, r = m.step(s, pol.joint_action(s))
            return s2, r

        memo = {}
        for s in list(table.state_index)[::5]:
            got = trajectory_value(s, step_fn, lambda s: s, m.is_terminal, m.discount, memo)
            assert abs(got - table.value(s)) <= tol / (1 - m.discount) + 1e-9
