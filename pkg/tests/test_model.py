import math

import numpy as np
import pytest

from pstratum import (
    FitConfig,
    ModelParams,
    UnderIdentifiedWarning,
    analytic_gradient,
    fit_beta,
    g_m,
    jacobian_rank,
    objective,
    population_tables,
    residuals,
    make_preset,
)
from helpers import fd_gradient, tables_from_gl_gr


def random_tables(rng, k=4):
    g_l = rng.uniform(0.05, 0.95, size=k)
    g_r1 = rng.uniform(0.05, 0.95, size=k)
    g_r = np.column_stack([1.0 - g_r1, g_r1])
    return tables_from_gl_gr(g_l, g_r)


class TestModelProbability:
    def test_zero_coefficients_give_half(self):
        beta = ModelParams(0.0, 0.0, 0.0)
        for x in range(4):
            for y in (0, 1):
                assert g_m(beta, x, y) == 0.5

    def test_closed_form_values(self):
        beta = ModelParams(-3.0, -5.0, 0.2)
        assert g_m(beta, 0, 0) == pytest.approx(1.0 / (1.0 + math.exp(3.0)), rel=1e-12)
        # linear predictor -3 - 5 + 0.6 = -7.4
        assert g_m(beta, 3, 1) == pytest.approx(1.0 / (1.0 + math.exp(7.4)), rel=1e-12)

    def test_extreme_arguments_do_not_overflow(self):
        assert 0.0 <= g_m(ModelParams(-700.0, 0.0, 0.0), 0, 0) < 1e-300
        assert g_m(ModelParams(700.0, 0.0, 0.0), 0, 0) == 1.0
        assert 0.0 <= g_m(ModelParams(0.0, -700.0, 0.0), 0, 1) < 1e-300

    def test_monotone_in_each_coefficient(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            b = rng.uniform(-4, 4, size=3)
            eps = 0.05
            base = ModelParams(*b)
            assert g_m(ModelParams(b[0] + eps, b[1], b[2]), 1, 1) > g_m(base, 1, 1)
            assert g_m(ModelParams(b[0], b[1] + eps, b[2]), 1, 1) > g_m(base, 1, 1)
            assert g_m(ModelParams(b[0], b[1], b[2] + eps), 2, 1) > g_m(base, 2, 1)
            # y = 0 leaves beta1 out; x = 0 leaves beta2 out
            assert g_m(ModelParams(b[0], b[1] + eps, b[2]), 1, 0) == g_m(base, 1, 0)
            assert g_m(ModelParams(b[0], b[1], b[2] + eps), 0, 1) == g_m(base, 0, 1)


class TestObjective:
    def test_zero_at_exact_solution(self):
        beta = ModelParams(-1.0, 2.0, 0.5)
        k = 3
        g_r1 = np.array([0.7, 0.6, 0.5])
        g_r = np.column_stack([1.0 - g_r1, g_r1])
        g_l = np.array([
            g_r[x, 0] * g_m(beta, x, 0) + g_r[x, 1] * g_m(beta, x, 1)
            for x in range(k)
        ])
        tables = tables_from_gl_gr(g_l, g_r)
        assert objective(beta, tables) == pytest.approx(0.0, abs=1e-30)

    def test_single_level_hand_value(self):
        tables = tables_from_gl_gr([0.3], [[0.5, 0.5]])
        assert objective(ModelParams(0, 0, 0), tables) == pytest.approx(0.04, abs=1e-15)

    def test_nonnegative_on_random_inputs(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            tables = random_tables(rng, k=int(rng.integers(1, 6)))
            beta = ModelParams(*rng.uniform(-8, 8, size=3))
            assert objective(beta, tables) >= 0.0


class TestGradient:
    def test_zero_at_stationary_point(self):
        beta = ModelParams(-1.0, 2.0, 0.5)
        g_r1 = np.array([0.7, 0.6, 0.5])
        g_r = np.column_stack([1.0 - g_r1, g_r1])
        g_l = np.array([
            g_r[x, 0] * g_m(beta, x, 0) + g_r[x, 1] * g_m(beta, x, 1)
            for x in range(3)
        ])
        grad = analytic_gradient(beta, tables_from_gl_gr(g_l, g_r))
        assert np.max(np.abs(grad)) < 1e-8

    def test_matches_central_differences(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(100):
            tables = random_tables(rng, k=4)
            beta = ModelParams(*rng.uniform(-5, 5, size=3))
            exact = analytic_gradient(beta, tables)
            approx = fd_gradient(lambda b: objective(b, tables), beta, step=1e-6)
            worst = max(worst, float(np.max(np.abs(exact - approx))))
        assert worst < 1e-5

    def test_single_level_hand_chain_rule(self):
        tables = tables_from_gl_gr([0.3], [[0.5, 0.5]])
        grad = analytic_gradient(ModelParams(0, 0, 0), tables)
        # residual -0.2, d(mix)/d(beta0) = 0.25, so dQ/d(beta0) = 0.1
        assert grad[0] == pytest.approx(0.1, abs=1e-14)
        assert grad[1] == pytest.approx(0.05, abs=1e-14)
        assert grad[2] == pytest.approx(0.0, abs=1e-14)


class TestFit:
    def test_recovers_generating_coefficients(self):
        tables = population_tables(make_preset("setting1"))
        fit = fit_beta(tables)
        assert fit.converged
        assert np.max(np.abs(fit.beta_hat.as_array() - [-3.0, -5.0, 0.2])) < 1e-4
        assert fit.objective_value < 1e-12
        assert np.max(np.abs(fit.per_level_residuals)) < 1e-6

    def test_full_rank_at_recovered_solution(self):
        tables = population_tables(make_preset("setting1"))
        fit = fit_beta(tables)
        assert fit.jacobian_rank == 3

    def test_outcome_coefficient_column_vanishes(self):
        # every control non-responder fails: the outcome coefficient never enters
        g_r = np.tile([1.0, 0.0], (4, 1))
        tables = tables_from_gl_gr([0.2, 0.3, 0.4, 0.5], g_r)
        fit = fit_beta(tables)
        assert fit.jacobian_rank < 3
        assert jacobian_rank(ModelParams(0, 0, 0), tables) < 3

    def test_objective_not_above_any_start(self):
        rng = np.random.default_rng(3)
        tables = random_tables(rng, k=4)
        inits = tuple(ModelParams(*rng.uniform(-3, 3, 3)) for _ in range(5))
        fit = fit_beta(tables, FitConfig(init_points=inits))
        for p in inits:
            assert fit.objective_value <= objective(p, tables) + 1e-15

    def test_under_identified_warns_but_proceeds(self):
        tables = tables_from_gl_gr([0.3, 0.4], [[0.5, 0.5], [0.4, 0.6]])
        with pytest.warns(UnderIdentifiedWarning):
            fit = fit_beta(tables)
        assert fit.objective_value < 1e-15

    def test_objective_value_equals_residual_sum(self):
        rng = np.random.default_rng(4)
        tables = random_tables(rng, k=5)
        fit = fit_beta(tables)
        assert fit.objective_value == pytest.approx(
            float(fit.per_level_residuals @ fit.per_level_residuals), abs=1e-10)
        assert np.allclose(fit.per_level_residuals,
                           residuals(fit.beta_hat, tables), atol=1e-12)

    def test_multistart_reaches_shared_minimum(self):
        tables = population_tables(make_preset("setting1"))
        fit = fit_beta(tables, FitConfig(grid_multistart=2))
        objs = fit.start_objectives
        assert objs is not None and objs.size == 126
        assert np.mean(objs <= fit.objective_value + 1e-6) >= 0.95

    def test_deterministic_tie_breaking(self):
        tables = population_tables(make_preset("setting2"))
        a = fit_beta(tables, FitConfig(grid_multistart=1))
        b = fit_beta(tables, FitConfig(grid_multistart=1))
        assert a.beta_hat == b.beta_hat
        assert a.objective_value == b.objective_value
