from dataclasses import replace
from unittest.mock import Mock, patch

import numpy as np
from django.test import SimpleTestCase, TestCase
from rest_framework.test import APIClient

from apps.cuts_app.services import Policy, deserialize_policy, serialize_policy
from apps.engine_app.domain import EngineConfig, EngineMode, IterationStats, RunReport, StopReason
from apps.engine_app.models import SolveRun
from apps.engine_app.services import PathSampler, SddpEngine, format_iteration
from apps.engine_app.tasks import run_solve_task
from apps.hydro_app.domain import GenParams, HydroSystem, InflowScenario, Reservoir, Thermal
from apps.hydro_app.services import compile_system, fixture_instance, generate
from apps.instance_app.services import instance_to_data
from apps.lp_app.extensive.services import ViolationMeasure, solve_hierarchical
from core.exceptions import ConfigurationError, DimensionMismatch


def engine_config(**overrides):
    values = dict(max_iters=60, gap_epsilon=1e-4, n_forward_paths=8, seed=7)
    values.update(overrides)
    return EngineConfig(**values).validated()


def scale_slack_weights(instance, factor):
    stages = tuple(
        replace(stage, rows=tuple(
            replace(row, slack_weight=row.slack_weight * factor) if row.relaxable else row for row in stage.rows
        ))
        for stage in instance.stages
    )
    return replace(instance, stages=stages)


def assert_bounds_consistent(case, report, v_star):
    previous = None
    for stats in report.iterations:
        case.assertLessEqual(stats.fff_at_root, v_star + 1e-6 * max(1.0, v_star))
        if previous is not None:
            case.assertGreaterEqual(stats.fff_at_root, previous - 1e-9 * max(1.0, previous))
        previous = stats.fff_at_root


def short_of_power():
    return compile_system(HydroSystem(
        name="short_of_power",
        reservoirs=(Reservoir(capacity=5.0, initial_storage=0.0, max_release=5.0),),
        thermals=(Thermal(capacity=1.0, unit_cost=10.0),),
        demand=(4.0, 4.0),
        inflows=((InflowScenario(1.0, (0.0,)),), (InflowScenario(1.0, (0.0,)),)),
    ))


class EngineConfigTests(SimpleTestCase):
    def test_settings_and_overrides(self):
        with self.settings(PFSDDP={"MAX_ITERS": 12, "GAP_EPSILON": 0.01, "SEED": 3}):
            config = EngineConfig.from_settings(seed=9, theta_lower_bound=None)
        self.assertEqual(config.max_iters, 12)
        self.assertEqual(config.gap_epsilon, 0.01)
        self.assertEqual(config.seed, 9)
        self.assertIsNone(config.theta_lower_bound)
        self.assertEqual(config.mode, EngineMode.PENALTY_FREE)

    def test_rejects_unknown_option(self):
        with self.assertRaises(ConfigurationError):
            EngineConfig.from_settings(speed=11)

    def test_rejects_bad_values(self):
        for bad in ({"gap_epsilon": 0.0}, {"max_iters": 0}, {"threads": 0}, {"mode": "fast"},
                    {"classic_penalty": -1.0}):
            with self.subTest(bad=bad), self.assertRaises(ConfigurationError):
                EngineConfig.from_settings(**bad)

    def test_iteration_line(self):
        stats = IterationStats(iteration=3, z_low=1.5, z_up=2.0, z_up_stderr=0.0, new_feasibility_cuts=1,
                               new_optimality_cuts=2, fff_at_root=0.0, expected_violation=0.0)
        self.assertEqual(format_iteration(stats),
                         "iteration=3 z_low=1.5 z_up=2.0 stderr=0.0 new_feas_cuts=1 new_opt_cuts=2")


class PathSamplerTests(SimpleTestCase):
    def setUp(self):
        self.instance = compile_system(generate(GenParams(n_reservoirs=1, n_stages=4, realizations_per_stage=3,
                                                          seed=2)))

    def test_enumeration_covers_the_tree(self):
        sampler = PathSampler(self.instance, 5, 0, leaf_limit=64)
        self.assertTrue(sampler.exact)
        paths = sampler.paths(1)
        self.assertEqual(len(paths), 27)
        self.assertAlmostEqual(sum(weight for _, weight in paths), 1.0)
        self.assertTrue(all(path[0] == 0 for path, _ in paths))

    def test_sampling_is_reproducible(self):
        sampler = PathSampler(self.instance, 6, 11, leaf_limit=1)
        self.assertFalse(sampler.exact)
        self.assertEqual(sampler.paths(2), sampler.paths(2))
        self.assertTrue(all(weight == 1.0 / 6 for _, weight in sampler.paths(2)))

    def test_paths_do_not_depend_on_how_many_are_drawn(self):
        few = PathSampler(self.instance, 3, 11, leaf_limit=1).sample(4)
        many = PathSampler(self.instance, 10, 11, leaf_limit=1).sample(4)
        self.assertEqual([path for path, _ in few], [path for path, _ in many[:3]])

    def test_streams_differ(self):
        sampler = PathSampler(self.instance, 10, 11, leaf_limit=1)
        self.assertNotEqual(sampler.sample(1), sampler.sample(2))


class PenaltyFreeRunTests(SimpleTestCase):
    def assertMonotoneLowerBound(self, report):
        lows = [stats.z_low for stats in report.iterations]
        for previous, current in zip(lows, lows[1:]):
            self.assertGreaterEqual(current, previous - 1e-7 * max(1.0, abs(previous)))

    def test_feasible_fixture(self):
        report = SddpEngine(fixture_instance("toy_feasible"), engine_config()).run()
        self.assertTrue(report.converged)
        self.assertEqual(report.reason, StopReason.GAP_AND_FEAS_STABLE)
        self.assertAlmostEqual(report.operation_cost, 30.0, places=4)
        self.assertAlmostEqual(report.weighted_violation, 0.0, places=6)
        self.assertAlmostEqual(report.fff_at_root, 0.0, places=6)
        self.assertEqual(report.iterations[-1].new_feasibility_cuts, 0)
        self.assertMonotoneLowerBound(report)

    def test_infeasible_fixture_keeps_least_violation(self):
        report = SddpEngine(fixture_instance("toy_infeasible"), engine_config()).run()
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.weighted_violation, 2.0, places=5)
        self.assertAlmostEqual(report.operation_cost, 50.0, places=4)
        self.assertAlmostEqual(report.simulation.by_label["min_outflow:0"], 2.0, places=5)
        self.assertAlmostEqual(report.simulation.by_prefix["min_outflow"], 2.0, places=5)
        self.assertAlmostEqual(report.fff_at_root, 2.0, places=5)
        self.assertMonotoneLowerBound(report)

    def test_stochastic_fixture(self):
        report = SddpEngine(fixture_instance("toy_stochastic"), engine_config()).run()
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.z_low, 25.0, delta=5e-3)
        self.assertAlmostEqual(report.operation_cost, 25.0, places=4)
        self.assertEqual(report.z_up_stderr, 0.0)
        self.assertAlmostEqual(report.first_stage_decision[0], 3.0, places=5)
        costs = sorted(path["cost"] for path in report.simulation.paths)
        np.testing.assert_allclose(costs, [20.0, 30.0], atol=1e-5)
        self.assertTrue(all(path["violation"] < 1e-6 for path in report.simulation.paths))
        self.assertMonotoneLowerBound(report)

    def test_stochastic_lower_bound_reaches_the_optimum(self):
        report = SddpEngine(fixture_instance("toy_stochastic"), engine_config(gap_epsilon=1e-7)).run()
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.z_low, 25.0, delta=1e-6)
        self.assertAlmostEqual(report.z_up, 25.0, delta=1e-6)
        self.assertLessEqual(report.bound_crossing, 1e-6)

    def test_fff_at_root_is_a_monotone_bound(self):
        for name in ("toy_feasible", "toy_infeasible", "toy_stochastic"):
            instance = fixture_instance(name)
            with self.subTest(fixture=name):
                worst = solve_hierarchical(instance, measure=ViolationMeasure.WORST_CASE)
                report = SddpEngine(instance, engine_config()).run()
                assert_bounds_consistent(self, report, worst.V_star)
                self.assertAlmostEqual(report.fff_at_root, worst.V_star, delta=1e-5)

    def test_slack_weight_scale_keeps_the_policy(self):
        report = SddpEngine(scale_slack_weights(fixture_instance("toy_infeasible"), 10.0), engine_config()).run()
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.operation_cost, 50.0, places=4)
        self.assertAlmostEqual(report.weighted_violation, 20.0, places=5)
        self.assertAlmostEqual(report.fff_at_root, 20.0, places=5)
        self.assertAlmostEqual(report.simulation.by_label["min_outflow:0"], 2.0, places=5)

    def test_myopic_policy_violates_in_the_dry_branch(self):
        engine = SddpEngine(fixture_instance("toy_stochastic"), engine_config())
        simulation = engine.simulate()
        dry = [path for path in simulation.paths if path["path"] == [0, 0]][0]
        self.assertGreater(dry["violation"], 1e-6)

    def test_reproducible(self):
        first = SddpEngine(fixture_instance("toy_stochastic"), engine_config()).run()
        second = SddpEngine(fixture_instance("toy_stochastic"), engine_config()).run()
        self.assertEqual(first.to_dict(include_timing=False), second.to_dict(include_timing=False))
        self.assertEqual(serialize_policy(first.policy), serialize_policy(second.policy))

    def test_threads_do_not_change_results(self):
        instance = compile_system(generate(GenParams(n_reservoirs=2, n_stages=3, realizations_per_stage=2, seed=5)))
        single = SddpEngine(instance, engine_config(threads=1, max_iters=8)).run()
        pooled = SddpEngine(instance, engine_config(threads=4, max_iters=8)).run()
        self.assertEqual([s.to_dict(include_timing=False) for s in single.iterations],
                         [s.to_dict(include_timing=False) for s in pooled.iterations])
        self.assertEqual(serialize_policy(single.policy), serialize_policy(pooled.policy))
        self.assertEqual(single.to_dict(include_timing=False), pooled.to_dict(include_timing=False))
        self.assertNotIn("threads", single.to_dict(include_timing=False)["config"])
        self.assertEqual(pooled.to_dict()["config"]["threads"], 4)

    def test_iteration_limit(self):
        report = SddpEngine(fixture_instance("toy_stochastic"), engine_config(max_iters=1)).run()
        self.assertFalse(report.converged)
        self.assertEqual(report.reason, StopReason.MAX_ITERS)
        self.assertEqual(len(report.iterations), 1)
        self.assertIsNotNone(report.simulation)

    def test_structural_infeasibility_is_reported(self):
        report = SddpEngine(short_of_power(), engine_config()).run()
        self.assertFalse(report.converged)
        self.assertEqual(report.reason, StopReason.STRUCTURAL_INFEASIBILITY)
        self.assertEqual(report.failed_stage, 1)
        self.assertIn("stage 1", report.message)

    def test_policy_shape_must_match(self):
        with self.assertRaises(DimensionMismatch):
            SddpEngine(fixture_instance("toy_stochastic"), engine_config(), policy=Policy(T=3, m=1))

    def test_warm_start_reuses_the_policy(self):
        instance = fixture_instance("toy_stochastic")
        trained = SddpEngine(instance, engine_config()).run()
        restored = deserialize_policy(serialize_policy(trained.policy))
        engine = SddpEngine(instance, engine_config(), policy=restored)
        self.assertAlmostEqual(engine.lower_bound(), trained.z_low, places=6)
        self.assertAlmostEqual(engine.simulate().expected_cost, trained.operation_cost, places=6)
        resumed = engine.run()
        self.assertTrue(resumed.converged)
        self.assertEqual(len(resumed.iterations), 1)

    def test_forward_pass_rejects_bad_paths(self):
        engine = SddpEngine(fixture_instance("toy_stochastic"), engine_config())
        with self.assertRaises(DimensionMismatch):
            engine.forward_pass([((0, 2), 1.0)])
        with self.assertRaises(DimensionMismatch):
            engine.forward_pass([((0,), 1.0)])

    def test_trial_states_are_deduplicated(self):
        engine = SddpEngine(fixture_instance("toy_stochastic"), engine_config())
        forward = engine.forward_pass([((0, 0), 0.5), ((0, 1), 0.5)])
        self.assertEqual(len(forward.trial_states[1]), 1)

    def test_root_problems(self):
        engine = SddpEngine(fixture_instance("toy_stochastic"), engine_config())
        names = sorted(engine.root_problems())
        self.assertEqual(len(names), 2)
        self.assertTrue(any("feasibility" in name for name in names))
        self.assertTrue(any("optimality" in name for name in names))


class ClassicRunTests(SimpleTestCase):
    def test_cheap_penalty_trades_violation_for_cost(self):
        report = SddpEngine(fixture_instance("toy_stochastic"),
                            engine_config(mode=EngineMode.CLASSIC, classic_penalty=1.0)).run()
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.operation_cost, 15.0, places=4)
        self.assertAlmostEqual(report.weighted_violation, 1.0, places=5)
        self.assertAlmostEqual(report.first_stage_decision[0], 1.0, places=5)
        self.assertAlmostEqual(report.z_up, 16.0, places=4)

    def test_steep_penalty_matches_penalty_free(self):
        report = SddpEngine(fixture_instance("toy_stochastic"),
                            engine_config(mode=EngineMode.CLASSIC, classic_penalty=100.0)).run()
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.operation_cost, 25.0, places=4)
        self.assertAlmostEqual(report.weighted_violation, 0.0, places=6)

    def test_classic_adds_no_feasibility_cuts(self):
        report = SddpEngine(fixture_instance("toy_infeasible"), engine_config(mode=EngineMode.CLASSIC)).run()
        self.assertTrue(all(stats.new_feasibility_cuts == 0 for stats in report.iterations))
        self.assertEqual(report.policy.fff[2].cuts, [])

    def test_modes_agree_without_relaxable_rows(self):
        system = generate(GenParams(n_reservoirs=2, n_stages=3, realizations_per_stage=2, hoc_tightness=0.0, seed=3))
        instance = compile_system(system)
        self.assertFalse(instance.has_relaxable_rows)
        optimum = solve_hierarchical(instance).C_star
        reports = {mode: SddpEngine(instance, engine_config(mode=mode)).run() for mode in EngineMode.values}
        for mode, report in reports.items():
            with self.subTest(mode=mode):
                self.assertTrue(report.converged)
                self.assertTrue(all(stats.new_feasibility_cuts == 0 for stats in report.iterations))
                self.assertAlmostEqual(report.z_low, optimum, delta=1e-3 * max(1.0, abs(optimum)))

        penalty_free, classic = reports[EngineMode.PENALTY_FREE], reports[EngineMode.CLASSIC]
        self.assertEqual(len(penalty_free.iterations), len(classic.iterations))
        for free, penalized in zip(penalty_free.iterations, classic.iterations):
            self.assertAlmostEqual(free.z_low, penalized.z_low, delta=1e-9 * max(1.0, abs(penalized.z_low)))
            self.assertAlmostEqual(free.z_up, penalized.z_up, delta=1e-9 * max(1.0, abs(penalized.z_up)))


class OracleSweepTests(SimpleTestCase):
    def test_deterministic_instances_reach_least_violation(self):
        for reservoirs in (1, 2, 3):
            for seed in (0, 1):
                system = generate(GenParams(n_reservoirs=reservoirs, n_stages=3, hoc_tightness=0.8, seed=seed))
                instance = compile_system(system)
                with self.subTest(reservoirs=reservoirs, seed=seed):
                    oracle = solve_hierarchical(instance)
                    report = SddpEngine(instance, engine_config(max_iters=100)).run()
                    self.assertTrue(report.converged)
                    last = report.iterations[-1]
                    tolerance = 1e-4 * max(1.0, oracle.V_star)
                    self.assertAlmostEqual(last.expected_violation, oracle.V_star, delta=tolerance)
                    self.assertAlmostEqual(report.fff_at_root, oracle.V_star, delta=tolerance)
                    self.assertGreaterEqual(last.z_up, oracle.C_star - 1e-4 * max(1.0, oracle.C_star))

    def test_stochastic_policies_reach_least_worst_case_violation(self):
        for seed in (0, 1):
            system = generate(GenParams(n_reservoirs=1, n_stages=3, realizations_per_stage=3, hoc_tightness=0.8,
                                        seed=seed))
            instance = compile_system(system)
            with self.subTest(seed=seed):
                expected = solve_hierarchical(instance, measure=ViolationMeasure.EXPECTED)
                worst = solve_hierarchical(instance, measure=ViolationMeasure.WORST_CASE)
                report = SddpEngine(instance, engine_config(max_iters=100)).run()
                self.assertTrue(report.converged)
                self.assertGreaterEqual(report.weighted_violation, expected.V_star - 1e-6)
                self.assertGreaterEqual(report.worst_path_violation, worst.V_star - 1e-6)
                self.assertAlmostEqual(report.fff_at_root, worst.V_star, delta=1e-4 * max(1.0, worst.V_star))

    def test_seeded_sweep_keeps_bounds_valid(self):
        for seed in range(50):
            params = GenParams(n_reservoirs=1 + seed % 3, n_stages=2 + (seed // 3) % 3,
                               realizations_per_stage=1 + (seed // 9) % 3, hoc_tightness=0.8, seed=seed)
            instance = compile_system(generate(params))
            with self.subTest(seed=seed):
                worst = solve_hierarchical(instance, measure=ViolationMeasure.WORST_CASE)
                report = SddpEngine(instance, engine_config(max_iters=40)).run()
                self.assertIn(report.reason, (StopReason.GAP_AND_FEAS_STABLE, StopReason.CUTS_STABLE,
                                              StopReason.MAX_ITERS))
                assert_bounds_consistent(self, report, worst.V_star)
                for stats in report.iterations:
                    self.assertAlmostEqual(stats.bound_crossing, max(0.0, stats.z_low - stats.z_up), places=9)

                last = report.iterations[-1]
                if report.converged:
                    self.assertEqual(last.new_feasibility_cuts, 0)
                    self.assertLessEqual(report.z_low, report.z_up + 1e-6 * max(1.0, abs(report.z_up)))
                if report.reason == StopReason.CUTS_STABLE:
                    self.assertEqual((last.new_feasibility_cuts, last.new_optimality_cuts), (0, 0))
                    self.assertEqual(report.bound_crossing, last.bound_crossing)


class StalledRunTests(SimpleTestCase):
    def setUp(self):
        system = generate(GenParams(n_reservoirs=3, n_stages=4, n_thermals=2, realizations_per_stage=3,
                                    hoc_tightness=0.8, seed=4))
        self.instance = compile_system(system)

    def test_exact_iteration_without_cuts_stops_the_run(self):
        report = SddpEngine(self.instance, engine_config(gap_epsilon=1e-6, max_iters=60)).run()
        self.assertFalse(report.converged)
        self.assertEqual(report.reason, StopReason.CUTS_STABLE)
        self.assertLess(len(report.iterations), 60)
        last = report.iterations[-1]
        self.assertEqual((last.new_feasibility_cuts, last.new_optimality_cuts), (0, 0))
        self.assertEqual(report.z_up_stderr, 0.0)
        self.assertGreater(report.bound_crossing, 0.0)
        self.assertAlmostEqual(report.bound_crossing, report.z_low - report.z_up, places=9)
        self.assertIsNotNone(report.simulation)

    def test_iterations_without_cuts_repeat_themselves(self):
        engine = SddpEngine(self.instance, engine_config(gap_epsilon=1e-6, max_iters=60))
        report = engine.run()
        z_low = engine.lower_bound()
        new_feas, new_opt = engine.backward_pass(engine.forward_pass(engine.sampler.paths(99)).trial_states, 99)
        self.assertEqual((new_feas, new_opt), (0, 0))
        self.assertEqual(engine.lower_bound(), z_low)
        self.assertEqual(report.z_low, z_low)


class RunApiTests(TestCase):
    def setUp(self):
        self.client = APIClient()
        setattr(self.client, 'raise_request_exception', False)

        self.task_delay_patcher = patch('apps.engine_app.views.run_solve_task.delay')
        self.mock_task_delay = self.task_delay_patcher.start()
        self.addCleanup(self.task_delay_patcher.stop)
        mock_result = Mock()
        mock_result.id = 'mock-task-id'
        self.mock_task_delay.return_value = mock_result

        self.instance_document = instance_to_data(fixture_instance("toy_stochastic"))

    def test_submit_queues_a_run(self):
        resp = self.client.post('/runs/', {"instance": self.instance_document, "overrides": {"max_iters": 5}},
                                format='json')
        self.assertEqual(resp.status_code, 202)
        self.assertEqual(resp.data["status"], SolveRun.Status.PENDING)
        self.assertEqual(resp.data["name"], "toy_stochastic")
        self.assertEqual(resp.data["overrides"], {"max_iters": 5})
        run = SolveRun.objects.get(id=resp.data["id"])
        self.assertEqual(run.celery_task_id, 'mock-task-id')
        self.mock_task_delay.assert_called_once_with(run.id)

    def test_submit_rejects_invalid_instance(self):
        self.instance_document["stages"][1]["realizations"][0]["probability"] = 0.2
        resp = self.client.post('/runs/', {"instance": self.instance_document}, format='json')
        self.assertEqual(resp.status_code, 400)
        self.assertIn("instance", resp.data["message"])
        self.assertFalse(SolveRun.objects.exists())
        self.mock_task_delay.assert_not_called()

    def test_submit_rejects_bad_overrides(self):
        resp = self.client.post('/runs/', {"instance": self.instance_document, "overrides": {"gap_epsilon": 0}},
                                format='json')
        self.assertEqual(resp.status_code, 400)

    def test_list_is_paginated(self):
        for index in range(3):
            SolveRun.objects.create(name=f"run{index}", instance_document=self.instance_document)
        resp = self.client.get('/runs/?page_size=2')
        self.assertEqual(resp.status_code, 200)
        self.assertEqual(resp.data["count"], 3)
        self.assertEqual(resp.data["total_pages"], 2)
        self.assertEqual(len(resp.data["results"]), 2)

    def test_detail_and_missing_run(self):
        run = SolveRun.objects.create(name="one", instance_document=self.instance_document)
        resp = self.client.get(f'/runs/{run.id}/')
        self.assertEqual(resp.status_code, 200)
        self.assertEqual(resp.data["name"], "one")
        self.assertNotIn("policy", resp.data)

        resp = self.client.get(f'/runs/{run.id + 100}/')
        self.assertEqual(resp.status_code, 404)
        self.assertEqual(resp.data["error"], "Not Found")

    def test_policy_missing_until_trained(self):
        run = SolveRun.objects.create(name="one", instance_document=self.instance_document)
        resp = self.client.get(f'/runs/{run.id}/policy/')
        self.assertEqual(resp.status_code, 404)


class RunSolveTaskTests(TestCase):
    def setUp(self):
        self.instance_document = instance_to_data(fixture_instance("toy_stochastic"))
        self.client = APIClient()

    def test_task_stores_report_and_policy(self):
        run = SolveRun.objects.create(name="toy", instance_document=self.instance_document,
                                      overrides={"max_iters": 60, "gap_epsilon": 1e-4})
        run_solve_task(run.id)
        run.refresh_from_db()
        self.assertEqual(run.status, SolveRun.Status.CONVERGED)
        self.assertIsNotNone(run.started_at)
        self.assertIsNotNone(run.finished_at)
        self.assertAlmostEqual(run.report["operation_cost"], 25.0, places=4)
        self.assertTrue(run.report["converged"])

        policy = deserialize_policy(self.client.get(f'/runs/{run.id}/policy/').content)
        self.assertEqual(policy.T, 2)
        self.assertGreater(policy.cut_count, 0)

    def test_task_records_structural_infeasibility(self):
        run = SolveRun.objects.create(name="short", instance_document=instance_to_data(short_of_power()))
        run_solve_task(run.id)
        run.refresh_from_db()
        self.assertEqual(run.status, SolveRun.Status.STRUCTURAL_INFEASIBILITY)
        self.assertIn("Structural infeasibility", run.last_error)

    @patch('apps.engine_app.tasks.SddpEngine.run')
    def test_task_records_stalled_run(self, mock_run):
        mock_run.return_value = RunReport(instance="toy_stochastic", mode=EngineMode.PENALTY_FREE, converged=False,
                                          reason=StopReason.CUTS_STABLE, bound_crossing=0.5,
                                          policy=Policy(T=2, m=1))
        run = SolveRun.objects.create(name="stalled", instance_document=self.instance_document)
        run_solve_task(run.id)
        run.refresh_from_db()
        self.assertEqual(run.status, SolveRun.Status.CUTS_STABLE)
        self.assertEqual(run.report["reason"], StopReason.CUTS_STABLE)
        self.assertEqual(run.report["bound_crossing"], 0.5)

    @patch('apps.engine_app.tasks.logger.exception')
    def test_task_marks_failure_on_bad_overrides(self, _mock_logger):
        run = SolveRun.objects.create(name="bad", instance_document=self.instance_document,
                                      overrides={"speed": 3})
        run_solve_task(run.id)
        run.refresh_from_db()
        self.assertEqual(run.status, SolveRun.Status.FAILED)
        self.assertIn("speed", run.last_error)

    @patch('apps.engine_app.tasks.logger.warning')
    def test_task_ignores_missing_run(self, mock_warning):
        run_solve_task(999)
        mock_warning.assert_called_once()
