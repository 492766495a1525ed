from django.core.management.base import BaseCommand, CommandError

from apps.cli_app import config
from apps.cli_app.services import format_number, write_output
from apps.hydro_app.domain import GenParams
from apps.hydro_app.services import compile_system, dump_system, fixtures, generate
from apps.instance_app.services import dump_instance
from apps.lp_app.extensive.services import ViolationMeasure, solve_hierarchical
from core.exceptions import ConfigurationError, StructuralInfeasibility, TopologyError, TreeTooLarge


class Command(BaseCommand):
    help = "Generate a hydrothermal instance (or write a named fixture) in the instance document format."

    def add_arguments(self, parser):
        parser.add_argument("--reservoirs", type=int, default=2)
        parser.add_argument("--stages", type=int, default=3)
        parser.add_argument("--thermals", type=int, default=1)
        parser.add_argument("--realizations", type=int, default=1)
        parser.add_argument("--tightness", type=float, default=0.5)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--fixture", choices=sorted(fixtures()), help="Write a named fixture instead.")
        parser.add_argument("--out", required=True, help="Instance document path.")
        parser.add_argument("--system-out", help="Also write the hydrothermal system document.")
        parser.add_argument("--oracle", action="store_true", help="Print V* and C* of the extensive oracle.")
        parser.add_argument("--measure", choices=ViolationMeasure.values, default=ViolationMeasure.EXPECTED)

    def handle(self, *args, **options):
        if options["fixture"]:
            system = fixtures()[options["fixture"]]
        else:
            params = GenParams(
                n_reservoirs=options["reservoirs"],
                n_stages=options["stages"],
                n_thermals=options["thermals"],
                realizations_per_stage=options["realizations"],
                hoc_tightness=options["tightness"],
                seed=options["seed"],
            )
            try:
                system = generate(params)
            except ConfigurationError as exc:
                raise CommandError(str(exc), returncode=config.EXIT_BAD_INPUT) from exc

        try:
            instance = compile_system(system)
        except (ConfigurationError, TopologyError) as exc:
            raise CommandError(str(exc), returncode=config.EXIT_BAD_INPUT) from exc

        path = write_output(options["out"], dump_instance(instance))
        self.stdout.write(f"Wrote instance '{instance.name}' to {path}")
        if options["system_out"]:
            write_output(options["system_out"], dump_system(system))

        if options["oracle"]:
            try:
                oracle = solve_hierarchical(instance, measure=options["measure"])
            except TreeTooLarge as exc:
                raise CommandError(str(exc), returncode=config.EXIT_TREE_TOO_LARGE) from exc
            except StructuralInfeasibility as exc:
                raise CommandError(str(exc), returncode=config.EXIT_STRUCTURAL_INFEASIBILITY) from exc
            self.stdout.write(f"V*={format_number(oracle.V_star)} C*={format_number(oracle.C_star)}")
