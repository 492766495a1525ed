from django.core.management.base import BaseCommand, CommandError

from apps.cli_app import config
from apps.cli_app.services import build_compare_report, load_instance_file, write_output
from apps.lp_app.extensive.services import ViolationMeasure
from core.documents import render_document
from core.exceptions import ConfigurationError, StructuralInfeasibility, TreeTooLarge


class Command(BaseCommand):
    help = "Compare the extensive oracle, classic SDDP and penalty-free SDDP on one instance."

    def add_arguments(self, parser):
        parser.add_argument("--instance", required=True)
        parser.add_argument("--classic-penalty", type=float, nargs="+", default=None,
                            help="One classic run per penalty value; instance penalties when omitted.")
        parser.add_argument("--gap", type=float, default=0.005)
        parser.add_argument("--measure", choices=ViolationMeasure.values, default=ViolationMeasure.EXPECTED)
        parser.add_argument("--max-iters", type=int, default=None)
        parser.add_argument("--paths", type=int, default=None)
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--threads", type=int, default=None)
        parser.add_argument("--out", help="Compare report document.")

    def handle(self, *args, **options):
        instance = load_instance_file(options["instance"])
        penalties = options["classic_penalty"] or [None]
        try:
            report = build_compare_report(
                instance,
                gap_epsilon=options["gap"],
                classic_penalties=penalties,
                measure=options["measure"],
                max_iters=options["max_iters"],
                n_forward_paths=options["paths"],
                seed=options["seed"],
                threads=options["threads"],
            )
        except TreeTooLarge as exc:
            raise CommandError(str(exc), returncode=config.EXIT_TREE_TOO_LARGE) from exc
        except StructuralInfeasibility as exc:
            raise CommandError(str(exc), returncode=config.EXIT_STRUCTURAL_INFEASIBILITY) from exc
        except ConfigurationError as exc:
            raise CommandError(str(exc), returncode=config.EXIT_BAD_INPUT) from exc

        if options["out"]:
            write_output(options["out"], render_document(report.to_dict()))
        self.stdout.write(report.render())
