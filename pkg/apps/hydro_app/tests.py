import json

from django.test import SimpleTestCase

from apps.hydro_app.config import DEMAND_LABEL, MIN_OUTFLOW_LABEL, WATER_BALANCE_LABEL
from apps.hydro_app.domain import GenParams, HydroSystem, InflowScenario, Reservoir, Thermal
from apps.hydro_app.services import (check_topology, compile_system, dump_system, fixture_instance, fixtures,
                                     generate, load_system, release_var, spill_var, storage_var)
from apps.instance_app.services import validate
from apps.lp_app.domain import Sense
from apps.lp_app.extensive.services import solve_hierarchical
from core.exceptions import ConfigurationError, ParseError, TopologyError


def cascade(downstream=(1, None), hoc_stages=None):
    return HydroSystem(
        name="cascade",
        reservoirs=(
            Reservoir(capacity=10.0, initial_storage=4.0, max_release=6.0, min_outflow=2.0, downstream=downstream[0]),
            Reservoir(capacity=8.0, initial_storage=2.0, max_release=5.0, downstream=downstream[1]),
        ),
        thermals=(Thermal(capacity=12.0, unit_cost=20.0), Thermal(capacity=5.0, unit_cost=35.0)),
        demand=(7.0, 7.0),
        inflows=(
            (InflowScenario(1.0, (1.0, 0.5)),),
            (InflowScenario(0.5, (0.0, 0.0)), InflowScenario(0.5, (3.0, 1.0))),
        ),
        hoc_stages=hoc_stages,
    )


class CompileSystemTests(SimpleTestCase):
    def setUp(self):
        self.instance = compile_system(cascade())

    def test_shape(self):
        self.assertEqual(self.instance.T, 2)
        self.assertEqual(self.instance.m, 2)
        self.assertEqual(self.instance.initial_state, (4.0, 2.0))
        stage = self.instance.stage(1)
        self.assertEqual(stage.n, 3 * 2 + 2)
        self.assertEqual(stage.state_indices, (storage_var(0), storage_var(1)))
        self.assertEqual([row.label for row in stage.rows],
                         [f"{WATER_BALANCE_LABEL}:0", f"{WATER_BALANCE_LABEL}:1", DEMAND_LABEL,
                          f"{MIN_OUTFLOW_LABEL}:0"])
        self.assertEqual(stage.cost, (0.0,) * 6 + (20.0, 35.0))
        self.assertEqual(validate(self.instance), [])

    def test_cascade_feeds_downstream_balance(self):
        balance = dict(self.instance.stage(1).rows[1].coeffs)
        self.assertEqual(balance[release_var(0)], -1.0)
        self.assertEqual(balance[spill_var(0)], -1.0)
        self.assertEqual(balance[storage_var(1)], 1.0)
        upstream = dict(self.instance.stage(1).rows[0].coeffs)
        self.assertNotIn(release_var(1), upstream)

    def test_storage_is_linked_to_previous_stage(self):
        self.assertEqual(self.instance.stage(2).link, ((0, 0, -1.0), (1, 1, -1.0)))

    def test_min_outflow_rows(self):
        row = self.instance.stage(2).rows[3]
        self.assertTrue(row.relaxable)
        self.assertEqual(row.sense, Sense.GE)
        self.assertEqual(dict(row.coeffs), {release_var(0): 1.0, spill_var(0): 1.0})
        self.assertEqual(row.slack_weight, 1.0)
        self.assertEqual(row.penalty_weight, 1000.0)

    def test_realizations_carry_inflow_demand_and_floor(self):
        rhs = [r.rhs for r in self.instance.stage(2).realizations]
        self.assertEqual(rhs, [(0.0, 0.0, 7.0, 2.0), (3.0, 1.0, 7.0, 2.0)])

    def test_min_outflow_only_on_active_stages(self):
        instance = compile_system(cascade(hoc_stages=(2,)))
        self.assertEqual(len(instance.stage(1).rows), 3)
        self.assertEqual(len(instance.stage(2).rows), 4)


class TopologyTests(SimpleTestCase):
    def test_cycle(self):
        with self.assertRaises(TopologyError) as ctx:
            check_topology(cascade(downstream=(1, 0)))
        self.assertEqual(sorted(ctx.exception.cycle), [0, 1])

    def test_self_loop(self):
        with self.assertRaises(TopologyError):
            compile_system(cascade(downstream=(0, None)))

    def test_unknown_downstream(self):
        with self.assertRaises(ConfigurationError):
            check_topology(cascade(downstream=(5, None)))


class SystemDocumentTests(SimpleTestCase):
    def test_round_trip(self):
        system = cascade()
        self.assertEqual(load_system(dump_system(system)), system)

    def test_rejects_overfull_reservoir(self):
        data = json.loads(dump_system(cascade()))
        data["reservoirs"][0]["initial_storage"] = 50.0
        with self.assertRaises(ParseError):
            load_system(json.dumps(data))

    def test_rejects_cycle_on_load(self):
        data = json.loads(dump_system(cascade()))
        data["reservoirs"][1]["downstream"] = 0
        with self.assertRaises(TopologyError):
            load_system(json.dumps(data))

    def test_fixture_names(self):
        self.assertEqual(sorted(fixtures()), ["toy_feasible", "toy_infeasible", "toy_stochastic"])
        with self.assertRaises(ConfigurationError):
            fixture_instance("nope")


class GeneratorTests(SimpleTestCase):
    def test_same_seed_same_system(self):
        params = GenParams(n_reservoirs=3, n_stages=4, realizations_per_stage=2, seed=13)
        self.assertEqual(dump_system(generate(params)), dump_system(generate(params)))

    def test_different_seed_different_system(self):
        first = generate(GenParams(seed=1))
        second = generate(GenParams(seed=2))
        self.assertNotEqual(dump_system(first), dump_system(second))

    def test_generated_systems_compile_to_valid_instances(self):
        for seed in range(5):
            system = generate(GenParams(n_reservoirs=3, n_stages=3, realizations_per_stage=2, seed=seed))
            check_topology(system)
            instance = compile_system(system)
            self.assertEqual(validate(instance), [])
            self.assertEqual(len(instance.stage(1).realizations), 1)
            self.assertEqual(len(instance.stage(2).realizations), 2)

    def test_no_tightness_is_always_feasible(self):
        system = generate(GenParams(n_reservoirs=2, n_stages=3, realizations_per_stage=2, hoc_tightness=0.0, seed=4))
        instance = compile_system(system)
        self.assertFalse(instance.has_relaxable_rows)
        self.assertAlmostEqual(solve_hierarchical(instance).V_star, 0.0, places=7)

    def test_full_tightness_forces_violation(self):
        system = generate(GenParams(n_reservoirs=2, n_stages=3, realizations_per_stage=2, hoc_tightness=1.0, seed=4))
        self.assertGreater(solve_hierarchical(compile_system(system)).V_star, 1e-6)

    def test_rejects_bad_parameters(self):
        with self.assertRaises(ConfigurationError):
            generate(GenParams(n_stages=0))
        with self.assertRaises(ConfigurationError):
            generate(GenParams(hoc_tightness=1.5))
