from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from apps.cli_app import config
from apps.cli_app.services import (build_engine, engine_config, format_number, load_instance_file,
                                   load_policy_file, write_output)
from apps.cuts_app.services import serialize_policy
from apps.engine_app.domain import StopReason
from apps.engine_app.services import format_iteration
from apps.lp_app.utils import to_lp_format
from core.documents import render_document
from core.exceptions import NumericalFailure


class Command(BaseCommand):
    help = "Train a cut policy on an instance with penalty-free or classic SDDP."

    def add_arguments(self, parser):
        parser.add_argument("--instance", required=True)
        parser.add_argument("--mode", choices=sorted(config.MODE_ALIASES), default="penalty-free")
        parser.add_argument("--gap", type=float, default=None, help="Relative gap (default 0.005).")
        parser.add_argument("--max-iters", type=int, default=None)
        parser.add_argument("--paths", type=int, default=None, help="Forward paths per iteration.")
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--threads", type=int, default=None)
        parser.add_argument("--classic-penalty", type=float, default=None,
                            help="Uniform penalty per unit of slack in classic mode.")
        parser.add_argument("--theta-lower-bound", type=float, default=None)
        parser.add_argument("--policy", help="Warm-start from a policy document.")
        parser.add_argument("--policy-out")
        parser.add_argument("--report-out")
        parser.add_argument("--log-out", help="Iteration log, one line per iteration.")
        parser.add_argument("--dump-lp", help="Directory for the stage-1 problems in LP format.")

    def handle(self, *args, **options):
        instance = load_instance_file(options["instance"])
        engine_cfg = engine_config(
            options["mode"],
            gap_epsilon=options["gap"],
            max_iters=options["max_iters"],
            n_forward_paths=options["paths"],
            seed=options["seed"],
            threads=options["threads"],
            classic_penalty=options["classic_penalty"],
            theta_lower_bound=options["theta_lower_bound"],
        )
        policy = load_policy_file(options["policy"]) if options["policy"] else None
        engine = build_engine(instance, engine_cfg, policy)

        try:
            report = engine.run()
        except NumericalFailure as exc:
            raise CommandError(f"Numerical failure: {exc}", returncode=config.EXIT_NUMERICAL_FAILURE) from exc

        if options["policy_out"]:
            write_output(options["policy_out"], serialize_policy(report.policy))
        if options["report_out"]:
            write_output(options["report_out"], render_document(report.to_dict()))
        if options["log_out"]:
            write_output(options["log_out"], "".join(format_iteration(s) + "\n" for s in report.iterations))
        if options["dump_lp"] and report.reason != StopReason.STRUCTURAL_INFEASIBILITY:
            directory = Path(options["dump_lp"])
            for name, lp in engine.root_problems().items():
                write_output(directory / f"stage1_{name}.lp", to_lp_format(lp))

        if report.reason == StopReason.STRUCTURAL_INFEASIBILITY:
            raise CommandError(report.message, returncode=config.EXIT_STRUCTURAL_INFEASIBILITY)

        self.stdout.write(
            f"{report.reason} after {len(report.iterations)} iteration(s): "
            f"z_low={format_number(report.z_low)} z_up={format_number(report.z_up)} "
            f"fff_at_root={format_number(report.fff_at_root)} "
            f"operation_cost={format_number(report.operation_cost)} "
            f"violation={format_number(report.weighted_violation)}"
        )
        if report.reason == StopReason.CUTS_STABLE:
            raise CommandError(f"No new cuts after {len(report.iterations)} iteration(s) with the gap still open "
                               f"(bound crossing {format_number(report.bound_crossing)})",
                               returncode=config.EXIT_CUTS_STABLE)
        if not report.converged:
            raise CommandError(f"No convergence within {engine_cfg.max_iters} iterations",
                               returncode=config.EXIT_MAX_ITERS)
