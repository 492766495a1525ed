import copy
import json

import numpy as np
from django.test import SimpleTestCase

from apps.hydro_app.services import fixture_instance
from apps.instance_app.services import (dump_instance, effective_rhs, instance_from_data, instance_to_data,
                                        load_instance, validate)
from apps.lp_app.domain import Sense
from core.exceptions import DimensionMismatch, InstanceValidationError, ParseError


def two_stage_document():
    return {
        "name": "two_stage",
        "T": 2,
        "m": 1,
        "initial_state": [5.0],
        "theta_lower_bound": 0.0,
        "stages": [
            {
                "n": 2,
                "cost": [0.0, 1.0],
                "state_indices": [0],
                "var_upper": [10.0, 10.0],
                "rows": [
                    {"coeffs": [[0, 1.0], [1, 1.0]], "sense": "EQ", "label": "balance"},
                    {"coeffs": [[1, 1.0]], "sense": "GE", "relaxable": True,
                     "slack_weight": 1.0, "penalty_weight": 100.0, "label": "floor:0"},
                ],
                "link": [[0, 0, -1.0]],
                "realizations": [{"probability": 1.0, "rhs": [2.0, 1.0]}],
            },
            {
                "n": 2,
                "cost": [0.0, 1.0],
                "state_indices": [0],
                "rows": [
                    {"coeffs": [[0, 1.0], [1, 1.0]], "sense": "EQ", "label": "balance"},
                ],
                "link": [[0, 0, -1.0]],
                "realizations": [
                    {"probability": 0.25, "rhs": [0.0]},
                    {"probability": 0.75, "rhs": [3.0]},
                ],
            },
        ],
    }


class InstanceLoadTests(SimpleTestCase):
    def setUp(self):
        self.document = two_stage_document()

    def test_loads_valid_document(self):
        instance = load_instance(json.dumps(self.document).encode("utf-8"))
        self.assertEqual(instance.name, "two_stage")
        self.assertEqual(instance.T, 2)
        self.assertEqual(instance.stage(1).rows[1].sense, Sense.GE)
        self.assertEqual(instance.stage(1).relaxable_rows, (1,))
        self.assertEqual(instance.leaf_count, 2)
        self.assertEqual(instance.node_count, 3)
        self.assertTrue(instance.has_relaxable_rows)
        self.assertFalse(instance.is_deterministic)

    def test_malformed_json(self):
        with self.assertRaises(ParseError):
            load_instance(b"{not json")

    def test_top_level_must_be_object(self):
        with self.assertRaises(ParseError):
            load_instance(b"[1, 2]")

    def test_missing_field_is_a_parse_error(self):
        del self.document["stages"][0]["cost"]
        with self.assertRaises(ParseError) as ctx:
            instance_from_data(self.document)
        self.assertIn("stages", ctx.exception.errors)

    def test_round_trip(self):
        instance = instance_from_data(self.document)
        reloaded = load_instance(dump_instance(instance))
        self.assertEqual(reloaded, instance)
        self.assertEqual(dump_instance(reloaded), dump_instance(instance))

    def test_fixture_round_trip(self):
        instance = fixture_instance("toy_stochastic")
        self.assertEqual(instance_from_data(instance_to_data(instance)), instance)


class InstanceValidationTests(SimpleTestCase):
    def setUp(self):
        self.document = two_stage_document()

    def assertRejected(self, message, stage=None, row=None):
        with self.assertRaises(InstanceValidationError) as ctx:
            instance_from_data(self.document)
        matches = [issue for issue in ctx.exception.issues if message in issue.message]
        self.assertTrue(matches, msg=f"{message!r} not in {ctx.exception}")
        if stage is not None:
            self.assertEqual(matches[0].stage, stage)
        if row is not None:
            self.assertEqual(matches[0].row, row)

    def test_valid_document_has_no_issues(self):
        self.assertEqual(validate(instance_from_data(self.document)), [])

    def test_probabilities_must_sum_to_one(self):
        self.document["stages"][1]["realizations"][0]["probability"] = 0.3
        self.assertRejected("realization probabilities sum to", stage=2)

    def test_relaxable_row_must_be_ge(self):
        self.document["stages"][0]["rows"][1]["sense"] = "EQ"
        self.assertRejected("relaxable row must be GE", stage=1, row=1)

    def test_le_rows_are_rejected(self):
        self.document["stages"][1]["rows"][0]["sense"] = "LE"
        self.assertRejected("row sense must be GE or EQ", stage=2, row=0)

    def test_relaxable_row_needs_weights(self):
        self.document["stages"][0]["rows"][1]["slack_weight"] = 0.0
        self.assertRejected("relaxable row needs a positive slack_weight", stage=1, row=1)

    def test_weights_only_on_relaxable_rows(self):
        self.document["stages"][1]["rows"][0]["penalty_weight"] = 5.0
        self.assertRejected("weights are only allowed on relaxable rows", stage=2, row=0)

    def test_duplicate_state_index(self):
        self.document["m"] = 2
        self.document["initial_state"] = [5.0, 1.0]
        for stage in self.document["stages"]:
            stage["state_indices"] = [0, 0]
        self.assertRejected("duplicate state index", stage=1)

    def test_root_stage_single_realization(self):
        self.document["stages"][0]["realizations"] = [
            {"probability": 0.5, "rhs": [2.0, 1.0]},
            {"probability": 0.5, "rhs": [2.0, 1.0]},
        ]
        self.assertRejected("stage 1 must have exactly one realization", stage=1)

    def test_rhs_length(self):
        self.document["stages"][1]["realizations"][1]["rhs"] = [3.0, 1.0]
        self.assertRejected("rhs has length 2", stage=2)

    def test_link_bounds(self):
        self.document["stages"][1]["link"] = [[0, 3, -1.0]]
        self.assertRejected("link entry (0, 3)", stage=2)

    def test_stage_count(self):
        self.document["T"] = 3
        self.assertRejected("2 stages given, expected T=3")

    def test_reports_every_issue(self):
        self.document["stages"][0]["rows"][1]["sense"] = "EQ"
        self.document["stages"][1]["realizations"][0]["probability"] = 0.3
        with self.assertRaises(InstanceValidationError) as ctx:
            instance_from_data(self.document)
        self.assertGreaterEqual(len(ctx.exception.issues), 2)
        self.assertEqual(len(ctx.exception.details()["issues"]), len(ctx.exception.issues))


class EffectiveRhsTests(SimpleTestCase):
    def setUp(self):
        self.instance = instance_from_data(two_stage_document())

    def test_incoming_state_enters_through_link(self):
        np.testing.assert_allclose(effective_rhs(self.instance, 2, 0, [4.0]), [4.0])
        np.testing.assert_allclose(effective_rhs(self.instance, 2, 1, [4.0]), [7.0])

    def test_root_uses_initial_state(self):
        np.testing.assert_allclose(effective_rhs(self.instance, 1, 0, self.instance.x0), [7.0, 1.0])

    def test_affine_in_state(self):
        a, b = np.array([1.0]), np.array([6.0])
        for lam in (0.0, 0.3, 1.0):
            mixed = effective_rhs(self.instance, 2, 1, lam * a + (1 - lam) * b)
            expected = lam * effective_rhs(self.instance, 2, 1, a) + (1 - lam) * effective_rhs(self.instance, 2, 1, b)
            np.testing.assert_allclose(mixed, expected)

    def test_state_dimension(self):
        with self.assertRaises(DimensionMismatch):
            effective_rhs(self.instance, 2, 0, [1.0, 2.0])

    def test_realization_range(self):
        with self.assertRaises(IndexError):
            effective_rhs(self.instance, 2, 2, [1.0])

    def test_does_not_mutate_realization(self):
        before = copy.deepcopy(self.instance.stage(2).realizations[1].rhs)
        effective_rhs(self.instance, 2, 1, [2.0])
        self.assertEqual(self.instance.stage(2).realizations[1].rhs, before)
