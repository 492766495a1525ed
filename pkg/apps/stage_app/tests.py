from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from apps.cuts_app.domain import AGGREGATED, Cut, CutKind, CutOrigin
from apps.cuts_app.services import CutPool, expected_cut
from apps.engine_app.domain import EngineConfig
from apps.engine_app.services import SddpEngine
from apps.hydro_app.domain import HydroSystem, InflowScenario, Reservoir, Thermal
from apps.hydro_app.services import compile_system, fixture_instance
from apps.lp_app.services import dual_check
from apps.stage_app.services import (build_classic, build_feasibility, build_optimality, solve_classic,
                                     solve_feasibility, solve_optimality)
from core.exceptions import StructuralInfeasibility

DRY, WET = 0, 1


def pool_with(kind, intercept, gradient, stage=2):
    pool = CutPool(stage, kind, len(gradient))
    pool.add_if_novel(Cut.create(intercept, gradient, kind, CutOrigin(stage, 1, 0, 0)), np.zeros(len(gradient)))
    return pool


def scale_slack_weights(instance, factor):
    stages = tuple(
        replace(stage, rows=tuple(
            replace(row, slack_weight=row.slack_weight * factor) if row.relaxable else row for row in stage.rows
        ))
        for stage in instance.stages
    )
    return replace(instance, stages=stages)


class FeasibilityProblemTests(SimpleTestCase):
    def setUp(self):
        self.stochastic = fixture_instance("toy_stochastic")
        self.infeasible = fixture_instance("toy_infeasible")

    def test_dry_branch_from_empty_reservoir(self):
        result = solve_feasibility(self.stochastic, 2, [0.0], DRY, None)
        self.assertAlmostEqual(result.value, 3.0, places=7)
        np.testing.assert_allclose(result.s_star, [3.0], atol=1e-7)
        self.assertEqual(result.beta_star, 0.0)

    def test_dry_branch_cut(self):
        result = solve_feasibility(self.stochastic, 2, [1.0], DRY, None, iteration=3, trial_state=1)
        self.assertAlmostEqual(result.value, 2.0, places=7)
        self.assertAlmostEqual(result.cut.intercept, 3.0, places=7)
        np.testing.assert_allclose(result.cut.gradient, [-1.0], atol=1e-7)
        self.assertEqual(result.cut.kind, CutKind.FEASIBILITY)
        self.assertEqual(result.cut.origin, CutOrigin(stage=2, iteration=3, realization=DRY, trial_state=1))

    def test_cut_is_valid_everywhere(self):
        cut = solve_feasibility(self.stochastic, 2, [1.0], DRY, None).cut
        for level in np.linspace(0.0, 10.0, 11):
            value = solve_feasibility(self.stochastic, 2, [level], DRY, None).value
            self.assertLessEqual(cut.value_at(np.array([level])), value + 1e-7)

    def test_wet_branch_needs_no_slack(self):
        result = solve_feasibility(self.stochastic, 2, [0.0], WET, None)
        self.assertAlmostEqual(result.value, 0.0, places=7)

    def test_last_stage_of_infeasible_fixture(self):
        result = solve_feasibility(self.infeasible, 3, [1.0], 0, None)
        self.assertAlmostEqual(result.value, 2.0, places=7)
        np.testing.assert_allclose(result.s_star, [2.0], atol=1e-7)

    def test_downstream_cut_drives_beta(self):
        fff = pool_with(CutKind.FEASIBILITY, 3.0, [-1.0])
        result = solve_feasibility(self.stochastic, 1, self.stochastic.x0, 0, fff)
        self.assertAlmostEqual(result.value, 0.0, places=7)
        self.assertAlmostEqual(result.beta_star, 0.0, places=7)
        self.assertGreaterEqual(result.x_feas[0], 3.0 - 1e-7)

    def test_fff_ignored_at_last_stage(self):
        fff = pool_with(CutKind.FEASIBILITY, 3.0, [-1.0], stage=3)
        lp = build_feasibility(self.stochastic, 2, [0.0], DRY, fff)
        self.assertNotIn("beta", lp.var_names)

    def test_duals_certify(self):
        result = solve_feasibility(self.stochastic, 2, [1.0], DRY, None)
        self.assertTrue(dual_check(result.lp, result.solution))

    def test_structural_infeasibility(self):
        system = HydroSystem(
            name="short_of_power",
            reservoirs=(Reservoir(capacity=5.0, initial_storage=0.0, max_release=5.0),),
            thermals=(Thermal(capacity=1.0, unit_cost=10.0),),
            demand=(4.0,),
            inflows=((InflowScenario(1.0, (0.0,)),),),
        )
        with self.assertRaises(StructuralInfeasibility) as ctx:
            solve_feasibility(compile_system(system), 1, [0.0], 0, None)
        self.assertEqual(ctx.exception.stage, 1)
        self.assertEqual(ctx.exception.realization, 0)


class TrainedFeasibilityCutTests(SimpleTestCase):
    """Feasibility cuts generated against the pools of a trained policy."""

    STATES = (0.5, 1.5, 2.5, 6.0)
    STEP = 1e-4

    def check_fixture(self, name):
        instance = fixture_instance(name)
        config = EngineConfig(max_iters=60, gap_epsilon=1e-4).validated()
        policy = SddpEngine(instance, config).run().policy
        rng = np.random.default_rng(17)
        smooth = {}
        for t in range(1, instance.T + 1):
            pool = policy.fff_next(t)
            for k in range(len(instance.stage(t).realizations)):
                def value(level):
                    return solve_feasibility(instance, t, [level], k, pool).value

                for level in self.STATES:
                    result = solve_feasibility(instance, t, [level], k, pool)
                    cut = result.cut
                    self.assertAlmostEqual(cut.value_at(np.array([level])), result.value, delta=1e-6)
                    for other in rng.uniform(0.0, 10.0, 100):
                        self.assertLessEqual(cut.value_at(np.array([other])), value(other) + 1e-6)

                    below, above = value(level - self.STEP), value(level + self.STEP)
                    left = (result.value - below) / self.STEP
                    right = (above - result.value) / self.STEP
                    if abs(left - right) > 1e-3:
                        continue
                    slope = (above - below) / (2 * self.STEP)
                    self.assertAlmostEqual(cut.gradient[0], slope, delta=1e-3)
                    smooth[(t, k, level)] = slope
        self.assertTrue(smooth)
        return smooth

    def test_feasible_fixture(self):
        self.check_fixture("toy_feasible")

    def test_infeasible_fixture(self):
        self.check_fixture("toy_infeasible")

    def test_stochastic_fixture(self):
        smooth = self.check_fixture("toy_stochastic")
        self.assertAlmostEqual(smooth[(2, DRY, 1.5)], -1.0, delta=1e-3)


class OptimalityProblemTests(SimpleTestCase):
    def setUp(self):
        self.stochastic = fixture_instance("toy_stochastic")

    def test_caps_keep_stage_one_water(self):
        fff = pool_with(CutKind.FEASIBILITY, 3.0, [-1.0])
        result = solve_optimality(self.stochastic, 1, self.stochastic.x0, 0, None, fff, [], 0.0)
        self.assertAlmostEqual(result.stage_cost, 20.0, places=5)
        self.assertAlmostEqual(result.outgoing_state[0], 3.0, places=5)

    def test_future_cost_through_theta(self):
        fff = pool_with(CutKind.FEASIBILITY, 3.0, [-1.0])
        fcf = pool_with(CutKind.OPTIMALITY, 10.0, [-2.0])
        result = solve_optimality(self.stochastic, 1, self.stochastic.x0, 0, fcf, fff, [], 0.0)
        self.assertAlmostEqual(result.objective_value, 24.0, places=5)
        self.assertAlmostEqual(result.theta, 4.0, places=5)
        self.assertAlmostEqual(result.stage_cost, 20.0, places=5)

    def test_slack_capped_at_feasibility_optimum(self):
        feas = solve_feasibility(self.stochastic, 2, [0.0], DRY, None)
        result = solve_optimality(self.stochastic, 2, [0.0], DRY, None, None, feas.s_star, feas.beta_star)
        self.assertAlmostEqual(result.stage_cost, 40.0, places=5)
        np.testing.assert_allclose(result.slacks_used, [3.0], atol=1e-6)

    def test_slacks_and_beta_carry_no_cost(self):
        fff = pool_with(CutKind.FEASIBILITY, 3.0, [-1.0])
        fcf = pool_with(CutKind.OPTIMALITY, 10.0, [-2.0])
        lp = build_optimality(self.stochastic, 1, self.stochastic.x0, 0, fcf, fff, [], 0.0)
        names = lp.var_names
        self.assertEqual(lp.objective[names.index("beta")], 0.0)
        self.assertEqual(lp.objective[names.index("theta")], 1.0)

        lp = build_optimality(self.stochastic, 2, [0.0], DRY, None, None, [3.0], 0.0)
        self.assertEqual(lp.objective[lp.var_names.index("s_min_outflow:0")], 0.0)

    def test_cut_supports_value_function(self):
        feas = solve_feasibility(self.stochastic, 2, [2.0], WET, None)
        result = solve_optimality(self.stochastic, 2, [2.0], WET, None, None, feas.s_star, feas.beta_star)
        self.assertAlmostEqual(result.cut.value_at(np.array([2.0])), result.objective_value, places=6)
        self.assertEqual(result.cut.kind, CutKind.OPTIMALITY)

    def test_theta_lower_bound_override(self):
        fcf = CutPool(2, CutKind.OPTIMALITY, 1)
        result = solve_optimality(self.stochastic, 1, self.stochastic.x0, 0, fcf, None, [], 0.0,
                                  theta_lower_bound=-5.0)
        self.assertAlmostEqual(result.theta, -5.0, places=7)


    def test_slack_weight_scale_leaves_optimality_unchanged(self):
        instance = fixture_instance("toy_infeasible")
        heavier = scale_slack_weights(instance, 10.0)
        for t in range(1, instance.T + 1):
            for level in (0.5, 2.0, 4.0):
                with self.subTest(t=t, level=level):
                    feas = solve_feasibility(instance, t, [level], 0, None)
                    heavy = solve_feasibility(heavier, t, [level], 0, None)
                    self.assertAlmostEqual(heavy.value, 10.0 * feas.value, places=6)
                    np.testing.assert_allclose(heavy.s_star, feas.s_star, atol=1e-9)

                    lp = build_optimality(instance, t, [level], 0, None, None, feas.s_star, 0.0)
                    heavy_lp = build_optimality(heavier, t, [level], 0, None, None, feas.s_star, 0.0)
                    np.testing.assert_array_equal(heavy_lp.objective, lp.objective)
                    first = solve_optimality(instance, t, [level], 0, None, None, feas.s_star, 0.0)
                    second = solve_optimality(heavier, t, [level], 0, None, None, feas.s_star, 0.0)
                    self.assertAlmostEqual(second.objective_value, first.objective_value, places=9)

    def test_expected_cut_matches_weighted_objectives(self):
        stage = self.stochastic.stage(2)
        level, step = 3.5, 1e-4
        caps = [solve_feasibility(self.stochastic, 2, [level], k, None).s_star for k in (DRY, WET)]
        np.testing.assert_allclose(caps, [[0.0], [0.0]], atol=1e-9)

        def expected_objective(x):
            return sum(
                realization.probability
                * solve_optimality(self.stochastic, 2, [x], k, None, None, caps[k], 0.0).objective_value
                for k, realization in enumerate(stage.realizations)
            )

        results = [solve_optimality(self.stochastic, 2, [level], k, None, None, caps[k], 0.0) for k in (DRY, WET)]
        cut = expected_cut([(r.probability, result.cut) for r, result in zip(stage.realizations, results)])
        self.assertEqual(cut.origin.realization, AGGREGATED)
        self.assertAlmostEqual(cut.value_at(np.array([level])), expected_objective(level), places=6)
        self.assertAlmostEqual(cut.value_at(np.array([level])), 2.5, places=5)

        slope = (expected_objective(level + step) - expected_objective(level - step)) / (2 * step)
        self.assertAlmostEqual(slope, -5.0, delta=1e-3)
        self.assertAlmostEqual(cut.gradient[0], slope, delta=1e-3)
        self.assertAlmostEqual(cut.intercept, 20.0, places=5)

class ClassicProblemTests(SimpleTestCase):
    def setUp(self):
        self.stochastic = fixture_instance("toy_stochastic")

    def test_penalty_on_slack(self):
        result = solve_classic(self.stochastic, 2, [0.0], DRY, None, penalty_override=1.0)
        self.assertAlmostEqual(result.stage_cost, 40.0, places=6)
        self.assertAlmostEqual(result.penalty_cost, 3.0, places=6)
        self.assertAlmostEqual(result.objective_value, 43.0, places=6)

    def test_default_penalty_from_rows(self):
        lp = build_classic(self.stochastic, 2, [0.0], DRY, None)
        self.assertEqual(lp.objective[lp.var_names.index("s_min_outflow:0")], 1000.0)

    def test_override_replaces_row_penalty(self):
        lp = build_classic(self.stochastic, 2, [0.0], DRY, None, penalty_override=7.0)
        self.assertEqual(lp.objective[lp.var_names.index("s_min_outflow:0")], 7.0)
