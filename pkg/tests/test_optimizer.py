import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import reduced_space_argmax
from relwealth.errors import ConditioningError, ParameterError
from relwealth.instances import ONE_ASSET, ONE_ASSET_CAPM, TWO_ASSET, random_capm, random_context
from relwealth.model import CapmModel, MarketModel, assemble_capm_investable, assemble_capm_noninvestable
from relwealth.objective import BenchmarkSet, ObjectiveContext, UtilityParams, grad_H, objective_H
from relwealth.optimizer import (
    ConstraintSpec,
    capm_constrained_investable,
    capm_constrained_noninvestable,
    check_perturbations,
    kkt_oracle,
    merton_optimal,
    merton_optimal_60_40,
    merton_with_oracle,
)


class TestMerton:
    def test_one_asset(self):
        sol = merton_optimal(ObjectiveContext.build(ONE_ASSET, 0.5))
        assert sol.weights[0] == pytest.approx(3.0, rel=1e-15)
        assert sol.gradient_norm <= 1e-15

    def test_one_asset_with_benchmark(self):
        sol = merton_optimal(ObjectiveContext.build(ONE_ASSET, 0.5, [[1.0]], [0.2]))
        assert sol.weights[0] == pytest.approx(2.6, rel=1e-15)

    def test_two_asset_cramer(self):
        # 2 A^-1 (0.06, 0.03) by Cramer's rule: det = 0.0035
        sol = merton_optimal(ObjectiveContext.build(TWO_ASSET, 0.5))
        np.testing.assert_allclose(sol.weights, [102 / 35, 12 / 35], rtol=1e-14)

    def test_60_40(self):
        ctx = ObjectiveContext.build(ONE_ASSET, 0.5, [[0.0]], [0.2])
        assert merton_optimal_60_40(ctx, 0.6).weights[0] == pytest.approx(2.76, rel=1e-15)
        assert merton_optimal_60_40(ctx, 0.0).weights[0] == pytest.approx(3.0, rel=1e-15)
        assert merton_optimal_60_40(ctx, 1.0).weights[0] == pytest.approx(2.6, rel=1e-15)

    def test_60_40_needs_one_exponent(self):
        with pytest.raises(Exception):
            merton_optimal_60_40(ObjectiveContext.build(ONE_ASSET, 0.5), 0.6)

    def test_singular_covariance(self):
        m = MarketModel([0.1, 0.1], [[1.0, 1.0], [1.0, 1.0]], 0.0)
        with pytest.raises(ConditioningError):
            merton_optimal(ObjectiveContext.build(m, 0.5))

    def test_benchmark_shift_only_touches_benchmark_coordinates(self):
        ctx = ObjectiveContext.build(TWO_ASSET, 0.5, [[0.6, 0.0]], [0.2])
        with_b = merton_optimal(ctx).weights
        without = merton_optimal(ctx.without_benchmarks()).weights
        assert with_b[1] == without[1]
        assert without[0] - with_b[0] == pytest.approx(0.2 * 0.6 / 0.5, abs=1e-14)

    @pytest.mark.parametrize("scale", [0.01, 1.0, 250.0])
    def test_positive_rescaling_of_utility_keeps_argmax(self, scale):
        # E[c U] = c exp(T H): its gradient c T exp(T H) grad H vanishes wherever grad H does
        rng = np.random.default_rng(1)
        ctx = random_context(rng, 4, 2)
        p = merton_optimal(ctx).weights
        h = 1e-6

        def eu(x):
            return scale * np.exp(2.0 * objective_H(x, ctx))

        fd = np.array([(eu(p + h * e) - eu(p - h * e)) / (2 * h) for e in np.eye(4)])
        assert np.max(np.abs(fd)) <= 1e-8 * scale


class TestKKTOracle:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 3))
    def test_unconstrained_matches_closed_form(self, seed, n, k):
        ctx = random_context(np.random.default_rng(seed), n, k)
        np.testing.assert_allclose(kkt_oracle(ctx).weights, merton_optimal(ctx).weights, rtol=0, atol=1e-8)

    def test_single_asset_pinned(self):
        ctx = ObjectiveContext.build(ONE_ASSET, 0.5)
        sol = kkt_oracle(ctx, ConstraintSpec("vector_beta", 1.0, [1.0]))
        assert sol.weights[0] == pytest.approx(1.0, abs=1e-15)
        assert abs(sol.constraint_residual) <= 1e-10

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.integers(0, 3))
    def test_constrained_matches_reduced_space(self, seed, n, k):
        rng = np.random.default_rng(seed)
        ctx = random_context(rng, n, k)
        b = rng.uniform(0.5, 1.5, size=n)
        sol = kkt_oracle(ctx, ConstraintSpec("vector_beta", 1.0, b))
        np.testing.assert_allclose(sol.weights, reduced_space_argmax(ctx, b, 1.0), atol=1e-8)
        assert abs(sol.constraint_residual) <= 1e-10
        assert sol.gradient_norm <= 1e-8

    def test_perturbation_check_random_instances(self):
        rng = np.random.default_rng(77)
        for _ in range(5):
            n, k = int(rng.integers(1, 7)), int(rng.integers(0, 4))
            ctx = random_context(rng, n, k)
            b = rng.uniform(0.5, 1.5, size=n)
            for spec in (ConstraintSpec(), ConstraintSpec("vector_beta", 0.8, b)):
                sol = kkt_oracle(ctx, spec)
                chk = check_perturbations(ctx, sol.weights, spec, samples=1000, seed=3)
                assert chk.violations == 0
                assert chk.min_gap > 0

    def test_perturbation_check_flags_non_optimum(self):
        ctx = ObjectiveContext.build(TWO_ASSET, 0.5)
        p = merton_optimal(ctx).weights + np.array([0.5, 0.0])
        assert check_perturbations(ctx, p, samples=200).violations > 0

    def test_ill_conditioned(self):
        m = MarketModel([0.1, 0.1], [[1.0, 0.0], [0.0, 1e-15]], 0.0)
        with pytest.raises(ConditioningError):
            kkt_oracle(ObjectiveContext.build(m, 0.5))


class TestCapmInvestable:
    def test_one_asset_general_benchmark(self):
        # q solves a one-dimensional concave quadratic after substituting pi_0 = 1 - 1.5 q
        params = UtilityParams(0.5, (0.2,))
        sol = capm_constrained_investable(ONE_ASSET_CAPM, params, [[0.0, 1.0]], 1.0)
        ctx = ObjectiveContext(assemble_capm_investable(ONE_ASSET_CAPM), params, BenchmarkSet([[0.0, 1.0]]))

        def h(q):
            return objective_H([1.0 - 1.5 * q, q], ctx)

        vertex = (h(-1) - h(1)) / (2 * (h(-1) - 2 * h(0) + h(1)))
        assert sol.risky[0] == pytest.approx(vertex, abs=1e-10)
        assert sol.pi0 == pytest.approx(1.0 - 1.5 * vertex, abs=1e-10)
        diag = {d.name: d for d in sol.diagnostics}
        # printed candidate: 0.04 * 20 * (0.028 - 0.012 * 1.5) = 0.008
        assert diag["printed"].weights[0] == pytest.approx(0.008, rel=1e-12)
        assert not diag["printed"].matches and diag["printed"].severity == "warning"
        assert not diag["proof_display"].matches
        assert diag["proof_corrected"].matches
        assert sol.matched == ["proof_corrected"]

    @pytest.mark.parametrize("theta", [0.0, 0.3, 0.6, 1.0])
    def test_benchmark_plus_cash_holds_only_benchmark(self, theta):
        c = random_capm(np.random.default_rng(5), 3)
        rho = np.array([[theta, 0.0, 0.0, 0.0]])
        sol = capm_constrained_investable(c, UtilityParams(0.4, (0.3,)), rho, 1.2)
        assert np.max(np.abs(sol.risky)) <= 1e-10
        assert sol.pi0 == pytest.approx(1.2, abs=1e-10)
        assert all(d.matches for d in sol.diagnostics)

    def test_no_benchmark(self):
        c = random_capm(np.random.default_rng(6), 2)
        sol = capm_constrained_investable(c, UtilityParams(0.7), [], 0.9)
        assert np.max(np.abs(sol.risky)) <= 1e-10
        assert sol.pi0 == pytest.approx(0.9, abs=1e-10)

    def test_matches_reduced_space(self):
        rng = np.random.default_rng(21)
        c = random_capm(rng, 4)
        params = UtilityParams(0.6, (0.2, 0.1))
        rho = rng.uniform(0, 0.5, size=(2, 5))
        sol = capm_constrained_investable(c, params, rho, 1.1)
        ctx = ObjectiveContext(assemble_capm_investable(c), params, BenchmarkSet(rho))
        ref = reduced_space_argmax(ctx, np.concatenate(([1.0], c.betas)), 1.1)
        np.testing.assert_allclose(sol.weights, ref, atol=1e-8)

    def test_singular_residual_is_conditioning_error(self):
        c = CapmModel(0.08, 0.2, 0.02, [1.0, 1.0], [[0.05, 0.05], [0.05, 0.05]])
        with pytest.raises(ConditioningError):
            capm_constrained_investable(c, UtilityParams(0.5), [], 1.0)


class TestCapmNonInvestable:
    def test_identity_residual(self):
        c = CapmModel(0.08, 0.2, 0.02, [1.0, 1.0], np.eye(2))
        sol = capm_constrained_noninvestable(c, UtilityParams(0.5), [], 1.0)
        np.testing.assert_allclose(sol.weights, [0.5, 0.5], atol=1e-12)
        assert {d.name for d in sol.diagnostics if d.matches} == {"printed", "pre_cancellation"}

    def test_general_benchmark_only_pre_cancellation_matches(self):
        rng = np.random.default_rng(31)
        c = random_capm(rng, 3)
        params = UtilityParams(0.5, (0.3,))
        rho = np.array([[0.5, 0.0, 0.2]])
        sol = capm_constrained_noninvestable(c, params, rho, 1.0)
        ctx = ObjectiveContext(assemble_capm_noninvestable(c), params, BenchmarkSet(rho))
        np.testing.assert_allclose(sol.weights, reduced_space_argmax(ctx, c.betas, 1.0), atol=1e-8)
        assert sol.matched == ["pre_cancellation"]
        printed = next(d for d in sol.diagnostics if d.name == "printed")
        assert printed.severity == "warning"

    def test_stationarity(self):
        rng = np.random.default_rng(32)
        c = random_capm(rng, 5)
        params = UtilityParams(0.3, (0.2,))
        rho = rng.uniform(size=(1, 5))
        sol = capm_constrained_noninvestable(c, params, rho, 0.7)
        ctx = ObjectiveContext(assemble_capm_noninvestable(c), params, BenchmarkSet(rho))
        resid = grad_H(sol.weights, ctx) + sol.lagrange_multiplier * c.betas
        assert np.max(np.abs(resid)) <= 1e-8
        assert sol.gradient_norm <= 1e-8
        assert abs(sol.constraint_residual) <= 1e-10

    def test_zero_betas_rejected(self):
        c = CapmModel(0.08, 0.2, 0.02, [0.0, 0.0], np.eye(2))
        with pytest.raises(ParameterError):
            capm_constrained_noninvestable(c, UtilityParams(0.5), [], 1.0)


def test_merton_with_oracle_diagnostic():
    sol = merton_with_oracle(ObjectiveContext.build(TWO_ASSET, 0.5, [[0.6, 0.0]], [0.2]))
    assert sol.matched == ["oracle"]
    assert sol.failures == []


def test_gradient_zero_at_oracle_for_investable():
    rng = np.random.default_rng(41)
    c = random_capm(rng, 3)
    params = UtilityParams(0.5, (0.25,))
    rho = rng.uniform(size=(1, 4))
    sol = capm_constrained_investable(c, params, rho, 1.0)
    ctx = ObjectiveContext(assemble_capm_investable(c), params, BenchmarkSet(rho))
    resid = grad_H(sol.weights, ctx) + sol.lagrange_multiplier * np.concatenate(([1.0], c.betas))
    assert np.max(np.abs(resid)) <= 1e-8
