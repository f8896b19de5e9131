import numpy as np
import pytest

from defersched import (DomainError, GeneralDemandTable, ModelParams, SegmentKind, Source,
                        UnresolvedPolicyError, approximate_policy, bar_limits, bar_sequence,
                        constrained_argmin, general_demand_policy, optimal_policy, regime, theta,
                        value_iteration)

BASE = ModelParams(0.5, 2.0, 1.0)
HEAVY = ModelParams(0.85, 2.0, 1.0)


class TestTheta:
    def test_exact_zero(self):
        assert theta(1.0, 0.0, ModelParams(0.5, 2.0, 2.0)) == pytest.approx(0.0, abs=1e-15)

    def test_negative_value(self):
        assert theta(1.0, 2.0, ModelParams(0.5, 2.0, 0.125)) == pytest.approx(-0.5)

    def test_positive_at_heavy_load_limits(self):
        lim = bar_limits(HEAVY)
        assert theta(lim.a, lim.b, HEAVY) > 0
        assert regime(HEAVY).boundary == pytest.approx(3.0412, abs=1e-4)

    @pytest.mark.parametrize("a,b", [(-0.1, 0.0), (0.0, -0.1)])
    def test_rejects_negative_coefficients(self, a, b):
        with pytest.raises(DomainError):
            theta(a, b, BASE)


class TestSequences:
    def test_base_case(self):
        s = bar_sequence(BASE, 0)
        assert (s.index, s.a, s.b) == (0, 1.0, 2.0)

    def test_one_step(self):
        s = bar_sequence(BASE, 1)
        assert s.a == pytest.approx(0.75) and s.b == pytest.approx(1.5)

    def test_limits_closed_form(self):
        lim = bar_limits(BASE)
        assert lim.index is None
        assert lim.a == pytest.approx(0.70711, abs=1e-5)
        assert lim.b == pytest.approx(1.17157, abs=1e-5)
        heavy = bar_limits(HEAVY)
        assert heavy.a == pytest.approx(0.38730, abs=1e-5)
        # b_inf = 2 p psi / (1 + sqrt(1 - p)); half of it is 1.22540.
        assert heavy.b == pytest.approx(2.45081, abs=1e-5)

    @pytest.mark.parametrize("params", [BASE, HEAVY])
    def test_identity(self, params):
        lim = bar_limits(params)
        assert abs(lim.a * params.psi + lim.b / 2 - params.psi) < 1e-12

    def test_recursion_reaches_limit(self):
        s, lim = bar_sequence(BASE, 200), bar_limits(BASE)
        assert abs(s.a - lim.a) < 1e-10 and abs(s.b - lim.b) < 1e-10

    def test_monotone_and_bounded(self):
        prev = bar_sequence(HEAVY, 0)
        lim = bar_limits(HEAVY)
        for k in range(1, 60):
            cur = bar_sequence(HEAVY, k)
            assert cur.a <= prev.a and cur.b <= prev.b
            assert lim.a - 1e-15 <= cur.a <= 1.0 and lim.b - 1e-12 <= cur.b <= 2 * HEAVY.p * HEAVY.psi
            prev = cur

    def test_negative_k_rejected(self):
        with pytest.raises(DomainError):
            bar_sequence(BASE, -1)


class TestConstrainedArgmin:
    @pytest.mark.parametrize("x", [0.0, 0.7, 1.3, 2.0])
    def test_large_penalty_never_defers(self, x):
        assert constrained_argmin(1.0, 0.0, x, ModelParams(0.5, 2.0, 8.0)) == 0.0

    def test_interior_branch(self):
        assert constrained_argmin(1.0, 1.0, 0.0, ModelParams(0.5, 2.0, 0.125)) == pytest.approx(0.75)

    def test_bang_bang_branch(self):
        params = ModelParams(0.5, 2.0, 8.0)
        assert constrained_argmin(0.1, 0.0, 1.0, params) == 0.0
        assert constrained_argmin(0.1, 0.0, 1.5, params) == 2.0

    def test_tie_at_threshold_goes_to_zero(self):
        params = ModelParams(0.5, 2.0, 2.0)
        # theta(1, 0.5) = 2 + 0.25 - 2 = 0.25.
        assert constrained_argmin(1.0, 0.5, 0.25, params) == 0.0
        assert constrained_argmin(1.0, 0.5, 0.25 + 1e-6, params) > 0

    def test_penalty_override(self):
        params = ModelParams(0.5, 2.0, 8.0)
        assert constrained_argmin(1.0, 0.0, 1.0, params, penalty=0.0) == pytest.approx(1.5)

    @pytest.mark.parametrize("a,b,x", [(-1, 0, 0), (0, -1, 0), (0, 0, -0.5), (0, 0, 2.5)])
    def test_domain(self, a, b, x):
        with pytest.raises(DomainError):
            constrained_argmin(a, b, x, BASE)


class TestOptimalPolicy:
    def test_defer_regime_is_affine(self):
        policy = optimal_policy(BASE)
        assert len(policy.segments) == 1
        seg = policy.segments[0]
        assert seg.kind is SegmentKind.AFFINE
        assert seg.slope == pytest.approx(1 / 1.70711, abs=1e-5)
        assert policy(0.0) == pytest.approx(0.82843, abs=1e-5)
        assert policy(1.0) == pytest.approx((1 + 1.41421) / 1.70711, abs=1e-5)
        assert regime(BASE).boundary == pytest.approx(1.84776, abs=1e-5)
        assert regime(BASE).name == "defer"

    def test_values_inside_open_interval(self):
        policy = optimal_policy(BASE)
        out = policy.evaluate(np.linspace(0, 2, 101)[:-1])
        assert np.all(out > 0) and np.all(out < 2)
        # psi - b_inf/2 = a_inf psi, so the rule reaches the cap exactly at x = psi.
        assert policy(2.0) == pytest.approx(2.0, abs=1e-12)

    def test_no_defer_regime(self):
        policy = optimal_policy(HEAVY)
        assert regime(HEAVY).name == "no-defer"
        assert policy(0.0) == 0.0
        assert policy.segments[0].kind is SegmentKind.ZERO
        assert policy.segments[-1].source is Source.NUMERIC
        with pytest.raises(UnresolvedPolicyError):
            policy(1.9)

    def test_no_defer_tail_filled_from_oracle(self):
        oracle = value_iteration(HEAVY)
        policy = optimal_policy(HEAVY, oracle)
        xs = oracle.grid.states
        assert np.max(np.abs(policy.evaluate(xs) - oracle.actions)) < 1e-12

    def test_matches_approximate_in_defer_regime(self):
        xs = np.linspace(0, 2, 201)
        assert np.allclose(optimal_policy(BASE).evaluate(xs), approximate_policy(BASE).evaluate(xs))

    def test_boundary_equality_is_no_defer(self):
        boundary = regime(BASE).boundary
        on = ModelParams(0.5, boundary, 1.0)
        assert not regime(on).defers
        assert optimal_policy(on)(0.0) == 0.0


class TestApproximatePolicy:
    def test_all_zero_branch(self):
        params = ModelParams(0.5, 2.0, 8.0)
        assert regime(params).all_zero
        policy = approximate_policy(params)
        assert [s.kind for s in policy.segments] == [SegmentKind.ZERO]

    def test_threshold_branch(self):
        params = ModelParams(0.7, 2.0, 1.0)
        policy = approximate_policy(params)
        reg = regime(params)
        assert [s.kind for s in policy.segments] == [SegmentKind.ZERO, SegmentKind.AFFINE]
        assert policy.segments[0].x_hi == pytest.approx(reg.theta)
        assert policy(reg.theta) == 0.0
        assert policy(reg.theta + 1e-3) > 0

    def test_coincides_with_oracle_above_first_jump(self):
        params = ModelParams(0.7, 2.0, 1.0)
        sol = value_iteration(params)
        first = sol.jumps()[0]
        xs = sol.grid.states
        above = xs >= first
        gap = np.abs(approximate_policy(params).evaluate(xs[above]) - sol.actions[above])
        assert gap.max() <= sol.grid.step


class TestGeneralDemand:
    def test_single_entry_reduces_to_bernoulli(self):
        family = general_demand_policy(GeneralDemandTable([(2.0, 0.5)]), 1.0)
        xs = np.linspace(0, 2, 101)
        assert np.allclose(family[2.0].evaluate(xs), optimal_policy(BASE).evaluate(xs), atol=1e-12)

    def test_two_sizes_share_limits_and_cap(self):
        family = general_demand_policy(GeneralDemandTable.parse("1:0.25,3:0.25"), 1.0)
        lim = bar_limits(BASE)
        small, big = family[1.0], family[3.0]
        assert small.psi == 1.0 and big.psi == 3.0
        xs = np.linspace(0, 1, 51)
        expected = np.clip((xs + 1 - lim.b / 2) / (1 + lim.a), 0, 1)
        assert np.allclose(small.evaluate(xs), expected)
        assert big(3.0) == 3.0
        assert big.segments[-1].kind is SegmentKind.SATURATED

    def test_no_defer_mix_defers_nothing_at_zero(self):
        family = general_demand_policy(GeneralDemandTable.parse("1:0.4,3:0.45"), 1.0)
        for policy in family.values():
            assert policy(0.0) == 0.0
            assert policy.segments[0].source is Source.ON_PATH

    def test_bad_d(self):
        with pytest.raises(DomainError):
            general_demand_policy(GeneralDemandTable([(2.0, 0.5)]), 0.0)


def test_regime_iff_on_sweep():
    rng = np.random.default_rng(7)
    for _ in range(200):
        params = ModelParams(rng.uniform(0.01, 0.99), rng.uniform(0.1, 6), rng.uniform(0.05, 5))
        reg = regime(params)
        if abs(params.psi - reg.boundary) < 1e-9:
            continue
        assert (reg.theta >= 0) == (params.psi <= reg.boundary)
