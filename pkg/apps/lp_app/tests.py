import itertools

import numpy as np
from django.test import SimpleTestCase, override_settings

from apps.hydro_app.services import fixture_instance
from apps.lp_app.domain import LinearProgram, LpStatus, Sense
from apps.lp_app.extensive.services import (ExtensiveMode, ViolationMeasure, build_extensive, solve_extensive,
                                            solve_hierarchical)
from apps.lp_app.services import SimplexSolver, dual_check, get_backend, solve_lp
from apps.lp_app.utils import to_lp_format
from core.exceptions import ConfigurationError, NumericalFailure, TreeTooLarge


def single_row_lp(sense=Sense.GE, rhs=3.0, cost=1.0):
    lp = LinearProgram.create(1, [cost], name="single")
    lp.add_row([(0, 1.0)], sense, rhs, name="floor")
    return lp


def random_feasible_lp(rng, n, rows):
    """Feasible by construction around a random point; nonnegative costs keep it bounded."""
    point = rng.uniform(0.0, 5.0, n)
    upper = np.where(rng.uniform(size=n) < 0.3, point + rng.uniform(0.0, 3.0, n), np.inf)
    lp = LinearProgram.create(n, rng.uniform(0.0, 4.0, n), upper=upper, name="random")
    for _ in range(rows):
        coeffs = np.round(rng.uniform(-3.0, 3.0, n), 3)
        activity = float(coeffs @ point)
        sense = (Sense.GE, Sense.LE, Sense.EQ)[int(rng.integers(3))]
        if sense == Sense.GE:
            rhs = activity - rng.uniform(0.0, 2.0)
        elif sense == Sense.LE:
            rhs = activity + rng.uniform(0.0, 2.0)
        else:
            rhs = activity
        lp.add_row(list(enumerate(coeffs)), sense, rhs)
    return lp


def brute_force_optimum(lp):
    """Enumerate vertices of a small LP with finite bounds."""
    n = lp.n_vars
    constraints = []
    for row in lp.rows:
        a = np.zeros(n)
        for j, v in row.coeffs:
            a[j] += v
        if row.sense in (Sense.GE, Sense.EQ):
            constraints.append((a, row.rhs))
        if row.sense in (Sense.LE, Sense.EQ):
            constraints.append((-a, -row.rhs))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        constraints.append((e, lp.lower[j]))
        constraints.append((-e, -lp.upper[j]))

    best = np.inf
    for subset in itertools.combinations(range(len(constraints)), n):
        a = np.array([constraints[i][0] for i in subset])
        b = np.array([constraints[i][1] for i in subset])
        if abs(np.linalg.det(a)) < 1e-9:
            continue
        x = np.linalg.solve(a, b)
        if all(c @ x >= r - 1e-7 for c, r in constraints):
            best = min(best, float(lp.objective @ x))
    return best


class LpKernelTests(SimpleTestCase):
    def setUp(self):
        self.solver = SimplexSolver()

    def test_single_binding_row(self):
        sol = solve_lp(single_row_lp(), self.solver)
        self.assertEqual(sol.status, LpStatus.OPTIMAL)
        self.assertAlmostEqual(sol.primal[0], 3.0, places=9)
        self.assertAlmostEqual(sol.objective_value, 3.0, places=9)
        self.assertAlmostEqual(sol.row_duals[0], 1.0, places=9)

    def test_unbounded(self):
        lp = LinearProgram.create(1, [-1.0])
        self.assertEqual(solve_lp(lp, self.solver).status, LpStatus.UNBOUNDED)

    def test_infeasible(self):
        lp = LinearProgram.create(1, [0.0])
        lp.add_row([(0, 1.0)], Sense.GE, 3.0)
        lp.add_row([(0, 1.0)], Sense.LE, 2.0)
        self.assertEqual(solve_lp(lp, self.solver).status, LpStatus.INFEASIBLE)

    def test_dual_signs(self):
        lp = LinearProgram.create(2, [1.0, 1.0])
        lp.add_row([(0, 1.0), (1, 1.0)], Sense.GE, 4.0)
        lp.add_row([(0, 1.0)], Sense.LE, 1.0)
        lp.add_row([(1, -1.0)], Sense.LE, -5.0)
        sol = solve_lp(lp, self.solver)
        self.assertTrue(sol.is_optimal)
        self.assertGreaterEqual(sol.row_duals[0], -1e-9)
        self.assertLessEqual(sol.row_duals[1], 1e-9)
        self.assertLessEqual(sol.row_duals[2], 1e-9)
        self.assertTrue(dual_check(lp, sol))

    def test_equality_row_with_upper_bounds(self):
        lp = LinearProgram.create(3, [2.0, 1.0, 3.0], upper=[2.0, 1.5, np.inf])
        lp.add_row([(0, 1.0), (1, 1.0), (2, 1.0)], Sense.EQ, 4.0)
        sol = solve_lp(lp, self.solver)
        self.assertTrue(sol.is_optimal)
        np.testing.assert_allclose(sol.primal, [2.0, 1.5, 0.5], atol=1e-9)
        self.assertAlmostEqual(sol.objective_value, 7.0, places=9)
        self.assertTrue(dual_check(lp, sol))

    def test_free_variable(self):
        lp = LinearProgram.create(1, [1.0], lower=[-np.inf])
        lp.add_row([(0, 1.0)], Sense.GE, -2.5)
        sol = solve_lp(lp, self.solver)
        self.assertTrue(sol.is_optimal)
        self.assertAlmostEqual(sol.primal[0], -2.5, places=9)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        lp = random_feasible_lp(rng, 6, 5)
        first, second = solve_lp(lp, self.solver), solve_lp(lp, self.solver)
        np.testing.assert_array_equal(first.primal, second.primal)
        np.testing.assert_array_equal(first.row_duals, second.row_duals)

    def test_malformed_lp_raises_numerical_failure(self):
        lp = LinearProgram.create(1, [1.0])
        lp.add_row([(4, 1.0)], Sense.GE, 1.0)
        with self.assertRaises(NumericalFailure):
            solve_lp(lp, self.solver)

    def test_iteration_cap_raises_numerical_failure(self):
        rng = np.random.default_rng(11)
        lp = random_feasible_lp(rng, 8, 8)
        with self.assertRaises(NumericalFailure):
            solve_lp(lp, SimplexSolver(max_iterations=1))

    def test_bland_rule_from_the_first_degenerate_pivot(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            lp = random_feasible_lp(rng, 6, 6)
            reference = solve_lp(lp, self.solver)
            sol = solve_lp(lp, SimplexSolver(degeneracy_streak=0))
            self.assertTrue(sol.is_optimal)
            self.assertAlmostEqual(sol.objective_value, reference.objective_value, places=6)

    @override_settings(PFSDDP={"LP_BACKEND": "apps.lp_app.services.SimplexSolver"})
    def test_backend_from_settings(self):
        self.assertIsInstance(get_backend(), SimplexSolver)


class DualCheckTests(SimpleTestCase):
    def setUp(self):
        self.solver = SimplexSolver()

    def test_accepts_solver_output(self):
        lp = single_row_lp()
        self.assertTrue(dual_check(lp, solve_lp(lp, self.solver)))

    def test_rejects_forged_dual(self):
        lp = single_row_lp()
        sol = solve_lp(lp, self.solver)
        sol.row_duals = np.array([0.5])
        self.assertFalse(dual_check(lp, sol))

    def test_rejects_non_optimal(self):
        lp = LinearProgram.create(1, [-1.0])
        self.assertFalse(dual_check(lp, solve_lp(lp, self.solver)))

    def test_random_lps_certify(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(1, 9))
            rows = int(rng.integers(1, 9))
            lp = random_feasible_lp(rng, n, rows)
            sol = solve_lp(lp, self.solver)
            self.assertTrue(sol.is_optimal, msg=f"status {sol.status}")
            self.assertTrue(dual_check(lp, sol))

    def test_matches_vertex_enumeration(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            n = int(rng.integers(1, 4))
            lp = random_feasible_lp(rng, n, int(rng.integers(1, 4)))
            lp.upper = np.minimum(lp.upper, 20.0)
            sol = solve_lp(lp, self.solver)
            self.assertTrue(sol.is_optimal)
            self.assertAlmostEqual(sol.objective_value, brute_force_optimum(lp), places=6)


class ExtensiveFormTests(SimpleTestCase):
    def setUp(self):
        self.feasible = fixture_instance("toy_feasible")
        self.infeasible = fixture_instance("toy_infeasible")
        self.stochastic = fixture_instance("toy_stochastic")

    def test_min_violation(self):
        _, sol = solve_extensive(self.feasible, ExtensiveMode.MIN_VIOLATION)
        self.assertAlmostEqual(sol.objective_value, 0.0, places=7)
        _, sol = solve_extensive(self.infeasible, ExtensiveMode.MIN_VIOLATION)
        self.assertAlmostEqual(sol.objective_value, 2.0, places=7)

    def test_cost_with_budget(self):
        _, sol = solve_extensive(self.infeasible, ExtensiveMode.COST_WITH_VIOLATION_BUDGET, budget=2.0)
        self.assertAlmostEqual(sol.objective_value, 50.0, places=6)

    def test_cost_nonincreasing_in_budget(self):
        previous = np.inf
        for budget in (2.0, 2.5, 3.0, 5.0):
            _, sol = solve_extensive(self.infeasible, ExtensiveMode.COST_WITH_VIOLATION_BUDGET, budget=budget)
            self.assertLessEqual(sol.objective_value, previous + 1e-7)
            previous = sol.objective_value

    def test_budget_mode_requires_budget(self):
        with self.assertRaises(ConfigurationError):
            build_extensive(self.infeasible, ExtensiveMode.COST_WITH_VIOLATION_BUDGET)

    def test_hierarchical_fixtures(self):
        expected = {"feasible": (0.0, 30.0), "infeasible": (2.0, 50.0), "stochastic": (0.0, 25.0)}
        for name, (v_star, c_star) in expected.items():
            result = solve_hierarchical(getattr(self, name))
            self.assertAlmostEqual(result.V_star, v_star, places=6, msg=name)
            self.assertAlmostEqual(result.C_star, c_star, places=5, msg=name)

    def test_worst_case_measure_on_deterministic_instance(self):
        expected = solve_hierarchical(self.infeasible, measure=ViolationMeasure.EXPECTED)
        worst = solve_hierarchical(self.infeasible, measure=ViolationMeasure.WORST_CASE)
        self.assertAlmostEqual(worst.V_star, expected.V_star, places=6)
        self.assertAlmostEqual(worst.C_star, expected.C_star, places=5)

    def test_node_slacks_on_infeasible_fixture(self):
        result = solve_hierarchical(self.infeasible)
        total = sum(float(np.sum(slacks)) for slacks in result.node_slacks.values())
        self.assertAlmostEqual(total, 2.0, places=6)

    def test_penalized_with_small_penalty_uses_slack(self):
        _, sol = solve_extensive(self.stochastic, ExtensiveMode.PENALIZED, penalty=1.0)
        self.assertAlmostEqual(sol.objective_value, 16.0, places=6)
        _, sol = solve_extensive(self.stochastic, ExtensiveMode.PENALIZED, penalty=100.0)
        self.assertAlmostEqual(sol.objective_value, 25.0, places=6)

    def test_zero_violation_iff_penalized_has_zero_slack(self):
        for instance in (self.feasible, self.infeasible):
            v_star = solve_hierarchical(instance).V_star
            form, sol = solve_extensive(instance, ExtensiveMode.PENALIZED)
            slack = sum(float(np.sum(form.node_slacks(sol, node))) for node in form.nodes)
            self.assertEqual(v_star < 1e-7, slack < 1e-7)

    def test_water_conservation(self):
        form, sol = solve_extensive(self.feasible, ExtensiveMode.COST_WITH_VIOLATION_BUDGET, budget=1e-7)
        released = 0.0
        for node in form.nodes:
            x = form.node_primal(sol, node)
            released += x[1] + x[2]
        terminal = form.node_primal(sol, form.leaves[0])[0]
        self.assertAlmostEqual(terminal + released, 7.0 + 2.0, places=6)

    def test_tree_guard(self):
        with self.assertRaises(TreeTooLarge):
            build_extensive(self.stochastic, ExtensiveMode.MIN_VIOLATION, node_limit=2)


class LpFormatTests(SimpleTestCase):
    def test_sections_and_bounds(self):
        lp = LinearProgram.create(2, [1.0, -2.0], lower=[0.0, -np.inf], upper=[4.0, np.inf],
                                  var_names=["release", "theta"], name="stage1")
        lp.add_row([(0, 1.0), (1, 1.0)], Sense.GE, 3.0, name="demand")
        lp.add_row([(0, 1.0)], Sense.EQ, 2.0, name="min_outflow:0")
        text = to_lp_format(lp)
        for section in ("Minimize", "Subject To", "Bounds", "End"):
            self.assertIn(section, text)
        self.assertIn(">= 3", text)
        self.assertIn("0.0 <= release <= 4.0", text)
        self.assertIn("theta free", text)
        self.assertNotIn("min_outflow:0", text)
