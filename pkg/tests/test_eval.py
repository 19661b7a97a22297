import pytest

from detdec import (
    Fsc,
    FscNode,
    JointPolicy,
    SupportBelief,
    TabularModel,
    evaluate,
    exact_value,
    mc_value,
    mactp_generate,
    MactpSpec,
)
from detdec.rng import SplitMix64

from helpers import chain_model, random_joint_policy, selfloop_model, tiny_mactp

WAIT_POLICY_1 = JointPolicy([Fsc([FscNode(0)])])


class TestExactValue:
    def test_unit_reward_selfloop_geometric(self):
        m = selfloop_model(reward=1.0, gamma=0.95)
        assert exact_value(m, WAIT_POLICY_1) == pytest.approx(20.0, abs=1e-12)

    def test_terminal_after_three_steps(self):
        # rewards (0, 0, 500) then absorbing: value = 500 * 0.95^2
        t = {
            (0, (0,)): (1, (0,), 0.0),
            (1, (0,)): (2, (0,), 0.0),
            (2, (0,)): (3, (0,), 500.0),
        }
        m = TabularModel(1, (1,), (1,), 0.95, t, SupportBelief.point(0), frozenset({3}))
        assert exact_value(m, WAIT_POLICY_1) == pytest.approx(500.0 * 0.95**2, abs=1e-12)

    def test_singleton_belief_equals_single_trajectory(self):
        m = chain_model()
        right = JointPolicy([Fsc([FscNode(1)])])
        # two moves at -1, second one also +500: -1 + gamma * 499
        assert exact_value(m, right) == pytest.approx(-1.0 + 0.95 * 499.0, abs=1e-12)

    def test_cycle_detection_on_longer_period(self):
        # period-2 cycle with rewards 2, 3
        t = {
            (0, (0,)): (1, (0,), 2.0),
            (1, (0,)): (0, (1,), 3.0),
        }
        m = TabularModel(1, (1,), (2,), 0.5, t, SupportBelief.point(0))
        expected = (2.0 + 0.5 * 3.0) / (1 - 0.25)
        assert exact_value(m, WAIT_POLICY_1) == pytest.approx(expected, abs=1e-12)

    def test_weighted_over_support(self):
        m = tiny_mactp(probs=())
        wait = JointPolicy([Fsc([FscNode(4)])])
        assert exact_value(m, wait) == 0.0

    def test_agent_count_mismatch(self):
        with pytest.raises(ValueError, match="controllers"):
            exact_value(tiny_mactp(agents=2, probs=()), WAIT_POLICY_1)


class TestMcValue:
    def test_singleton_zero_std_error(self):
        m = chain_model()
        right = JointPolicy([Fsc([FscNode(1)])])
        mean, se = mc_value(m, right, episodes=500, horizon=50, seed=3)
        assert se == 0.0
        assert mean == pytest.approx(exact_value(m, right), abs=1e-9)

    def test_single_episode_flagged_degenerate(self):
        m = chain_model()
        with pytest.warns(UserWarning, match="single episode"):
            mean, se = mc_value(m, WAIT_POLICY_1.replace(0, Fsc([FscNode(2)])), episodes=1)
        assert se == 0.0
        report = evaluate(m, WAIT_POLICY_1.replace(0, Fsc([FscNode(2)])), episodes=1)
        assert report.degenerate

    def test_seed_determinism(self):
        m = mactp_generate(MactpSpec(3, 2, 4, seed=6))
        pol = random_joint_policy(m, SplitMix64(1))
        a = mc_value(m, pol, episodes=2000, horizon=60, seed=11)
        b = mc_value(m, pol, episodes=2000, horizon=60, seed=11)
        c = mc_value(m, pol, episodes=2000, horizon=60, seed=12)
        assert a == b
        assert a != c

    def test_validation(self):
        m = chain_model()
        with pytest.raises(ValueError):
            mc_value(m, WAIT_POLICY_1.replace(0, Fsc([FscNode(2)])), episodes=0)
        with pytest.raises(ValueError):
            mc_value(m, WAIT_POLICY_1.replace(0, Fsc([FscNode(2)])), episodes=5, horizon=0)

    def test_agreement_with_exact_within_bounds(self):
        m = mactp_generate(MactpSpec(3, 2, 4, seed=6))
        rng = SplitMix64(42)
        gamma = m.discount
        rmax = max(abs(b) for b in m.reward_bounds())
        trunc = gamma**100 * rmax / (1 - gamma)
        hits = 0
        for k in range(5):
            pol = random_joint_policy(m, rng)
            ev = exact_value(m, pol)
            mean, se = mc_value(m, pol, episodes=20_000, horizon=100, seed=k)
            if abs(mean - ev) <= 3 * se + trunc:
                hits += 1
        assert hits >= 4


class TestEvaluate:
    def test_report_fields(self):
        m = chain_model()
        pol = JointPolicy([Fsc([FscNode(1)])])
        report = evaluate(m, pol, exact=True, episodes=100, horizon=30, seed=2)
        assert report.exact_value is not None
        assert report.mc_mean is not None and report.mc_std_error is not None
        assert report.episodes == 100 and report.horizon == 30 and report.seed == 2
        assert not report.degenerate
        d = report.to_dict()
        assert set(d) == {
            "exact_value", "mc_mean", "mc_std_error", "episodes", "horizon", "seed", "degenerate",
        }

    def test_exact_only(self):
        m = chain_model()
        report = evaluate(m, JointPolicy([Fsc([FscNode(1)])]), exact=True, episodes=0)
        assert report.mc_mean is None
