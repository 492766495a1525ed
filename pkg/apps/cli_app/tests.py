import json
import re
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.cli_app import config
from apps.cli_app.services import format_number, render_table
from apps.cuts_app.services import Policy, deserialize_policy, serialize_policy
from apps.engine_app.domain import EngineMode, RunReport, StopReason
from apps.hydro_app.domain import HydroSystem, InflowScenario, Reservoir, Thermal
from apps.hydro_app.services import compile_system, fixture_instance
from apps.instance_app.services import dump_instance, load_instance
from core.exceptions import NumericalFailure

ITERATION_LINE = re.compile(
    r"^iteration=\d+ z_low=\S+ z_up=\S+ stderr=\S+ new_feas_cuts=\d+ new_opt_cuts=\d+$"
)


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def path(self, name):
        return str(self.dir / name)

    def write_instance(self, instance, name="instance.json"):
        target = self.path(name)
        Path(target).write_bytes(dump_instance(instance))
        return target

    def run_command(self, name, **options):
        out = StringIO()
        call_command(name, stdout=out, **options)
        return out.getvalue()

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(name, **options)
        self.assertEqual(ctx.exception.returncode, code)
        return ctx.exception


class FormattingTests(SimpleTestCase):
    def test_numbers(self):
        self.assertEqual(format_number(2.0), "2")
        self.assertEqual(format_number(25.0000000004), "25")
        self.assertEqual(format_number(-1e-12), "0")
        self.assertEqual(format_number(0.125), "0.125")
        self.assertEqual(format_number(None), "-")

    def test_table_columns_line_up(self):
        table = render_table(["method", "cost"], [["extensive", 25.0], ["classic", 15.5]])
        lines = table.splitlines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(lines[1].startswith("---------"))
        self.assertEqual(lines[2].index("25"), lines[3].index("15.5"))


class GenerateCommandTests(CommandTestCase):
    def test_fixture_with_oracle(self):
        out = self.run_command("generate", fixture="toy_stochastic", out=self.path("toy.json"), oracle=True)
        self.assertIn("V*=0 C*=25", out)
        self.assertEqual(load_instance(Path(self.path("toy.json")).read_bytes()), fixture_instance("toy_stochastic"))

    def test_infeasible_fixture_oracle(self):
        out = self.run_command("generate", fixture="toy_infeasible", out=self.path("toy.json"), oracle=True)
        self.assertIn("V*=2 C*=50", out)

    def test_generated_instance_is_reproducible(self):
        options = dict(reservoirs=2, stages=3, realizations=2, seed=9)
        self.run_command("generate", out=self.path("a.json"), system_out=self.path("a.system.json"), **options)
        self.run_command("generate", out=self.path("b.json"), **options)
        first, second = Path(self.path("a.json")).read_bytes(), Path(self.path("b.json")).read_bytes()
        self.assertEqual(first, second)
        self.assertEqual(load_instance(first).T, 3)
        self.assertIn("reservoirs", json.loads(Path(self.path("a.system.json")).read_bytes()))

    def test_bad_parameters(self):
        self.assertExitCode(config.EXIT_BAD_INPUT, "generate", tightness=2.0, out=self.path("x.json"))

    def test_tree_too_large(self):
        limits = dict(settings.PFSDDP, TREE_NODE_LIMIT=2)
        with self.settings(PFSDDP=limits):
            self.assertExitCode(config.EXIT_TREE_TOO_LARGE, "generate", fixture="toy_stochastic",
                                out=self.path("toy.json"), oracle=True)


class SolveCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.instance_path = self.write_instance(fixture_instance("toy_stochastic"))

    def test_penalty_free_run_writes_outputs(self):
        out = self.run_command(
            "solve", instance=self.instance_path, gap=1e-4, max_iters=60,
            policy_out=self.path("policy.json"), report_out=self.path("report.json"), log_out=self.path("run.log"),
        )
        self.assertIn("gap_and_feas_stable", out)
        self.assertIn("operation_cost=25", out)

        report = json.loads(Path(self.path("report.json")).read_bytes())
        self.assertTrue(report["converged"])
        self.assertEqual(report["mode"], "penalty_free")
        self.assertAlmostEqual(report["operation_cost"], 25.0, places=4)

        lines = Path(self.path("run.log")).read_text().splitlines()
        self.assertEqual(len(lines), len(report["iterations"]))
        self.assertTrue(all(ITERATION_LINE.match(line) for line in lines))

        policy = deserialize_policy(Path(self.path("policy.json")).read_bytes())
        self.assertEqual((policy.T, policy.m), (2, 1))

    def test_classic_mode(self):
        out = self.run_command("solve", instance=self.instance_path, mode="classic", classic_penalty=1.0,
                               gap=1e-4, max_iters=60, report_out=self.path("report.json"))
        self.assertIn("operation_cost=15", out)
        report = json.loads(Path(self.path("report.json")).read_bytes())
        self.assertEqual(report["mode"], "classic")
        self.assertEqual(report["config"]["classic_penalty"], 1.0)

    def test_iteration_limit_exit_code(self):
        self.assertExitCode(config.EXIT_MAX_ITERS, "solve", instance=self.instance_path, max_iters=1,
                            policy_out=self.path("policy.json"))
        self.assertTrue(Path(self.path("policy.json")).exists())

    def test_structural_infeasibility_exit_code(self):
        system = HydroSystem(
            name="short_of_power",
            reservoirs=(Reservoir(capacity=5.0, initial_storage=0.0, max_release=5.0),),
            thermals=(Thermal(capacity=1.0, unit_cost=10.0),),
            demand=(4.0,),
            inflows=((InflowScenario(1.0, (0.0,)),),),
        )
        path = self.write_instance(compile_system(system), "short.json")
        error = self.assertExitCode(config.EXIT_STRUCTURAL_INFEASIBILITY, "solve", instance=path)
        self.assertIn("stage 1", str(error))

    def test_bad_input_exit_codes(self):
        self.assertExitCode(config.EXIT_BAD_INPUT, "solve", instance=self.path("missing.json"))
        Path(self.path("broken.json")).write_text("{")
        self.assertExitCode(config.EXIT_BAD_INPUT, "solve", instance=self.path("broken.json"))
        self.assertExitCode(config.EXIT_BAD_INPUT, "solve", instance=self.instance_path, gap=0.0)

    @patch('apps.engine_app.services.SddpEngine.run')
    def test_numerical_failure_exit_code(self, mock_run):
        mock_run.side_effect = NumericalFailure("Singular basis in 'toy_stochastic:optimality:t1:k0'")
        error = self.assertExitCode(config.EXIT_NUMERICAL_FAILURE, "solve", instance=self.instance_path)
        self.assertIn("Singular basis", str(error))

    @patch('apps.engine_app.services.SddpEngine.run')
    def test_stalled_run_exit_code(self, mock_run):
        mock_run.return_value = RunReport(instance="toy_stochastic", mode=EngineMode.PENALTY_FREE, converged=False,
                                          reason=StopReason.CUTS_STABLE, z_low=26.0, z_up=25.0,
                                          bound_crossing=1.0, policy=Policy(T=2, m=1))
        error = self.assertExitCode(config.EXIT_CUTS_STABLE, "solve", instance=self.instance_path,
                                    report_out=self.path("report.json"))
        self.assertIn("bound crossing 1", str(error))
        report = json.loads(Path(self.path("report.json")).read_bytes())
        self.assertEqual(report["reason"], "cuts_stable")
        self.assertFalse(report["converged"])

    def test_mismatched_warm_start(self):
        Path(self.path("policy.json")).write_bytes(serialize_policy(Policy(T=3, m=1)))
        self.assertExitCode(config.EXIT_BAD_INPUT, "solve", instance=self.instance_path,
                            policy=self.path("policy.json"))

    def test_dump_stage_one_problems(self):
        self.run_command("solve", instance=self.instance_path, gap=1e-4, max_iters=60, dump_lp=self.path("lp"))
        dumps = sorted((self.dir / "lp").glob("stage1_*.lp"))
        self.assertEqual(len(dumps), 2)
        for dump in dumps:
            text = dump.read_text()
            self.assertIn("Minimize", text)
            self.assertIn("Subject To", text)


class SimulateCommandTests(CommandTestCase):
    def test_simulate_trained_policy(self):
        instance_path = self.write_instance(fixture_instance("toy_stochastic"))
        self.run_command("solve", instance=instance_path, gap=1e-4, max_iters=60, policy_out=self.path("policy.json"))
        out = self.run_command("simulate", instance=instance_path, policy=self.path("policy.json"),
                               out=self.path("simulation.json"))
        self.assertIn("expected_cost=25", out)
        self.assertIn("stderr=0", out)
        self.assertIn("min_outflow:0", out)
        simulation = json.loads(Path(self.path("simulation.json")).read_bytes())
        self.assertEqual(len(simulation["paths"]), 2)
        self.assertTrue(simulation["exact"])

    def test_simulate_requires_valid_policy(self):
        instance_path = self.write_instance(fixture_instance("toy_stochastic"))
        Path(self.path("policy.json")).write_text("[]")
        self.assertExitCode(config.EXIT_BAD_INPUT, "simulate", instance=instance_path, policy=self.path("policy.json"))


class CompareCommandTests(CommandTestCase):
    def test_compare_methods(self):
        instance_path = self.write_instance(fixture_instance("toy_stochastic"))
        out = self.run_command("compare", instance=instance_path, classic_penalty=[1.0, 100.0], gap=1e-4,
                               max_iters=60, out=self.path("compare.json"))
        self.assertIn("classic(p=1)", out)
        self.assertIn("penalty_free", out)

        report = json.loads(Path(self.path("compare.json")).read_bytes())
        rows = report["rows"]
        self.assertEqual([row["method"] for row in rows], ["extensive", "classic", "classic", "penalty_free"])
        extensive, cheap, steep, penalty_free = rows
        self.assertAlmostEqual(extensive["operation_cost"], 25.0, places=5)
        self.assertAlmostEqual(extensive["violation_cost"], 0.0, places=6)
        self.assertAlmostEqual(cheap["operation_cost"], 15.0, places=4)
        self.assertAlmostEqual(cheap["violation_cost"], 1.0, places=5)
        self.assertAlmostEqual(cheap["penalty_cost"], 1.0, places=5)
        self.assertEqual(cheap["classic_penalty"], 1.0)
        self.assertAlmostEqual(steep["operation_cost"], 25.0, places=4)
        self.assertAlmostEqual(penalty_free["operation_cost"], 25.0, places=4)
        self.assertAlmostEqual(penalty_free["violation_cost"], 0.0, places=6)
        self.assertIsNone(penalty_free["penalty_cost"])
        self.assertAlmostEqual(report["violations"]["classic(p=1)"]["min_outflow:0"], 1.0, places=5)

    def test_compare_tree_too_large(self):
        instance_path = self.write_instance(fixture_instance("toy_stochastic"))
        limits = dict(settings.PFSDDP, TREE_NODE_LIMIT=2)
        with self.settings(PFSDDP=limits):
            self.assertExitCode(config.EXIT_TREE_TOO_LARGE, "compare", instance=instance_path)
