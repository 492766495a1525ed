from django.core.management.base import BaseCommand, CommandError

from apps.cli_app import config
from apps.cli_app.services import (build_engine, engine_config, format_number, load_instance_file,
                                   load_policy_file, render_table, write_output)
from core.documents import render_document
from core.exceptions import StructuralInfeasibility


class Command(BaseCommand):
    help = "Simulate a trained policy and report costs and violations per row label."

    def add_arguments(self, parser):
        parser.add_argument("--instance", required=True)
        parser.add_argument("--policy", required=True)
        parser.add_argument("--mode", choices=sorted(config.MODE_ALIASES), default="penalty-free")
        parser.add_argument("--classic-penalty", type=float, default=None)
        parser.add_argument("--paths", type=int, default=None)
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--out", help="Simulation report document.")

    def handle(self, *args, **options):
        instance = load_instance_file(options["instance"])
        policy = load_policy_file(options["policy"])
        engine_cfg = engine_config(options["mode"], classic_penalty=options["classic_penalty"],
                                   n_forward_paths=options["paths"], seed=options["seed"])
        engine = build_engine(instance, engine_cfg, policy)
        try:
            simulation = engine.simulate(options["paths"], options["seed"])
        except StructuralInfeasibility as exc:
            raise CommandError(str(exc), returncode=config.EXIT_STRUCTURAL_INFEASIBILITY) from exc

        if options["out"]:
            write_output(options["out"], render_document(simulation.to_dict()))
        self.stdout.write(
            f"expected_cost={format_number(simulation.expected_cost)} "
            f"stderr={format_number(simulation.cost_stderr)} "
            f"expected_violation={format_number(simulation.expected_violation)} "
            f"worst_path_violation={format_number(simulation.worst_path_violation)}"
        )
        rows = [[label, amount] for label, amount in sorted(simulation.by_label.items())]
        if rows:
            self.stdout.write(render_table(["label", "violation"], rows))
