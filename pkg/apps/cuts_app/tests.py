import json

import numpy as np
from django.test import SimpleTestCase

from apps.cuts_app.config import POLICY_FORMAT, POLICY_VERSION
from apps.cuts_app.domain import AGGREGATED, Cut, CutKind, CutOrigin
from apps.cuts_app.services import (CutPool, Policy, deserialize_policy, expected_cut, policy_from_data,
                                    policy_to_data, serialize_policy)
from core.exceptions import DimensionMismatch, MixedKind, ParseError


def origin(stage=2, iteration=1, realization=0, trial_state=0):
    return CutOrigin(stage=stage, iteration=iteration, realization=realization, trial_state=trial_state)


def feasibility_cut(intercept, gradient, **kwargs):
    return Cut.create(intercept, gradient, CutKind.FEASIBILITY, origin(**kwargs))


def optimality_cut(intercept, gradient, **kwargs):
    return Cut.create(intercept, gradient, CutKind.OPTIMALITY, origin(**kwargs))


class CutPoolTests(SimpleTestCase):
    def setUp(self):
        self.fff = CutPool(2, CutKind.FEASIBILITY, 1)
        self.fcf = CutPool(2, CutKind.OPTIMALITY, 1)

    def test_empty_pools(self):
        self.assertEqual(self.fff.evaluate([1.0]), 0.0)
        self.assertEqual(self.fcf.evaluate([1.0]), float("-inf"))

    def test_evaluate_takes_max_and_floors_feasibility_at_zero(self):
        self.fff.add_if_novel(feasibility_cut(3.0, [-1.0]), [0.0])
        self.assertAlmostEqual(self.fff.evaluate([1.0]), 2.0)
        self.assertEqual(self.fff.evaluate([5.0]), 0.0)

    def test_optimality_pool_is_not_floored(self):
        self.fcf.add_if_novel(optimality_cut(-3.0, [0.0]), [0.0])
        self.assertAlmostEqual(self.fcf.evaluate([0.0]), -3.0)

    def test_add_if_novel(self):
        cut = feasibility_cut(3.0, [-1.0])
        self.assertTrue(self.fff.add_if_novel(cut, [0.0], tol=1e-6))
        self.assertFalse(self.fff.add_if_novel(cut, [0.0], tol=1e-6))
        self.assertFalse(self.fff.add_if_novel(feasibility_cut(2.0, [-0.5]), [4.0], tol=1e-6))
        self.assertEqual(len(self.fff), 1)

    def test_first_optimality_cut_is_always_novel(self):
        self.assertTrue(self.fcf.add_if_novel(optimality_cut(-100.0, [0.0]), [0.0]))

    def test_novelty_is_relative(self):
        self.fcf.add_if_novel(optimality_cut(1000.0, [0.0]), [0.0])
        self.assertFalse(self.fcf.add_if_novel(optimality_cut(1000.0005, [0.0]), [0.0], tol=1e-6))
        self.assertTrue(self.fcf.add_if_novel(optimality_cut(1000.01, [0.0]), [0.0], tol=1e-6))

    def test_wrong_kind(self):
        with self.assertRaises(MixedKind):
            self.fff.add_if_novel(optimality_cut(1.0, [0.0]), [0.0])

    def test_wrong_dimension(self):
        with self.assertRaises(DimensionMismatch):
            self.fff.add_if_novel(feasibility_cut(1.0, [0.0, 1.0]), [0.0])
        with self.assertRaises(DimensionMismatch):
            self.fff.evaluate([0.0, 1.0])

    def test_evaluation_is_convex(self):
        rng = np.random.default_rng(8)
        pool = CutPool(3, CutKind.OPTIMALITY, 2)
        for _ in range(10):
            pool.add_if_novel(optimality_cut(rng.normal(), rng.normal(size=2), stage=3), rng.normal(size=2))
        for _ in range(50):
            x, y = rng.normal(size=2), rng.normal(size=2)
            lam = rng.uniform()
            mixed = pool.evaluate(lam * x + (1 - lam) * y)
            self.assertLessEqual(mixed, lam * pool.evaluate(x) + (1 - lam) * pool.evaluate(y) + 1e-9)

    def test_evaluation_is_nondecreasing_as_cuts_are_added(self):
        rng = np.random.default_rng(21)
        points = rng.normal(size=(20, 1))
        before = [self.fff.evaluate(x) for x in points]
        for _ in range(10):
            self.fff.add_if_novel(feasibility_cut(rng.uniform(0, 5), rng.normal(size=1)), rng.normal(size=1))
            after = [self.fff.evaluate(x) for x in points]
            for old, new in zip(before, after):
                self.assertGreaterEqual(new, old)
            before = after


class ExpectedCutTests(SimpleTestCase):
    def test_weighted_combination(self):
        cut = expected_cut([
            (0.5, optimality_cut(4.0, [0.0], realization=0)),
            (0.5, optimality_cut(0.0, [2.0], realization=1)),
        ])
        self.assertAlmostEqual(cut.intercept, 2.0)
        self.assertEqual(cut.gradient, (1.0,))
        self.assertEqual(cut.kind, CutKind.OPTIMALITY)
        self.assertEqual(cut.origin.realization, AGGREGATED)

    def test_rejects_feasibility_cuts(self):
        with self.assertRaises(MixedKind):
            expected_cut([(1.0, feasibility_cut(1.0, [0.0]))])

    def test_rejects_mismatched_gradients(self):
        with self.assertRaises(DimensionMismatch):
            expected_cut([(0.5, optimality_cut(1.0, [0.0])), (0.5, optimality_cut(1.0, [0.0, 1.0]))])


class PolicyDocumentTests(SimpleTestCase):
    def setUp(self):
        self.policy = Policy(T=3, m=1)
        self.policy.fff[2].add_if_novel(feasibility_cut(3.0, [-1.0]), [0.0])
        self.policy.fcf[2].add_if_novel(optimality_cut(10.0, [-2.0], realization=AGGREGATED), [0.0])
        self.policy.fcf[3].add_if_novel(optimality_cut(1.5, [-0.25], stage=3, iteration=4, trial_state=2), [0.0])

    def test_round_trip_preserves_cuts(self):
        restored = deserialize_policy(serialize_policy(self.policy))
        self.assertEqual(restored.T, 3)
        self.assertEqual(restored.m, 1)
        for t in range(1, 4):
            self.assertEqual(restored.fcf[t].cuts, self.policy.fcf[t].cuts)
            self.assertEqual(restored.fff[t].cuts, self.policy.fff[t].cuts)
        self.assertEqual(restored.cut_count, 3)

    def test_document_shape(self):
        data = json.loads(serialize_policy(self.policy))
        self.assertEqual(data["format"], POLICY_FORMAT)
        self.assertEqual(data["version"], POLICY_VERSION)
        self.assertEqual([stage["stage"] for stage in data["stages"]], [1, 2, 3])
        self.assertEqual(data["stages"][1]["fcf"][0]["origin"]["realization"], AGGREGATED)

    def test_rejects_wrong_pool_kind(self):
        data = policy_to_data(self.policy)
        data["stages"][1]["fff"][0]["kind"] = CutKind.OPTIMALITY.value
        with self.assertRaises(ParseError):
            policy_from_data(data)

    def test_rejects_gradient_length(self):
        data = policy_to_data(self.policy)
        data["stages"][2]["fcf"][0]["gradient"] = [1.0, 2.0]
        with self.assertRaises(ParseError):
            policy_from_data(data)

    def test_rejects_unknown_format(self):
        data = policy_to_data(self.policy)
        data["format"] = "something-else"
        with self.assertRaises(ParseError):
            policy_from_data(data)

    def test_rejects_garbage(self):
        with self.assertRaises(ParseError):
            deserialize_policy(b"\xff\xfe")

    def test_rejects_stage_outside_the_horizon(self):
        for stage in (0, 4, 2):
            data = policy_to_data(self.policy)
            data["stages"][0]["stage"] = stage
            with self.subTest(stage=stage), self.assertRaises(ParseError):
                policy_from_data(data)
