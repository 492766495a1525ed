import logging
import math
from typing import List, Sequence, Union

import numpy as np

from apps.instance_app.config import PROBABILITY_SUM_TOL
from apps.instance_app.domain import Instance, StageData
from apps.instance_app.serializers import InstanceSerializer
from apps.lp_app.domain import Sense
from core.documents import parse_document, render_document
from core.exceptions import DimensionMismatch, InstanceValidationError, Issue, ParseError

logger = logging.getLogger(__name__)


def instance_from_data(data: dict) -> Instance:
    serializer = InstanceSerializer(data=data)
    if not serializer.is_valid():
        raise ParseError("Malformed instance document", errors=serializer.errors)
    instance = serializer.save()

    issues = validate(instance)
    if issues:
        logger.info("Instance '%s' rejected with %d issue(s)", instance.name, len(issues))
        raise InstanceValidationError(issues)
    return instance


def load_instance(raw: Union[bytes, str]) -> Instance:
    """
    Parse and validate an instance document.

    :raises ParseError: When the document is not a well-typed instance tree.
    :raises InstanceValidationError: When a model invariant is violated; every issue carries its locus.
    """
    instance = instance_from_data(parse_document(raw, "instance document"))
    logger.debug("Loaded instance '%s' (T=%d, m=%d)", instance.name, instance.T, instance.m)
    return instance


def instance_to_data(instance: Instance) -> dict:
    return dict(InstanceSerializer(instance).data)


def dump_instance(instance: Instance) -> bytes:
    return render_document(instance_to_data(instance))


def _finite(values) -> bool:
    return all(math.isfinite(v) for v in values)


def _stage_issues(t: int, stage: StageData, m: int) -> List[Issue]:
    issues = []
    n_rows = len(stage.rows)

    if len(stage.cost) != stage.n:
        issues.append(Issue(t, None, f"cost has length {len(stage.cost)}, expected n={stage.n}"))
    elif not _finite(stage.cost):
        issues.append(Issue(t, None, "cost contains non-finite entries"))

    if len(stage.state_indices) != m:
        issues.append(Issue(t, None, f"state_indices has length {len(stage.state_indices)}, expected m={m}"))
    if len(set(stage.state_indices)) != len(stage.state_indices):
        issues.append(Issue(t, None, "duplicate state index"))
    if any(j < 0 or j >= stage.n for j in stage.state_indices):
        issues.append(Issue(t, None, f"state index outside [0, {stage.n})"))

    if stage.var_upper is not None:
        if len(stage.var_upper) != stage.n:
            issues.append(Issue(t, None, f"var_upper has length {len(stage.var_upper)}, expected n={stage.n}"))
        elif any(math.isnan(u) or u < 0 for u in stage.var_upper):
            issues.append(Issue(t, None, "var_upper must be nonnegative"))

    for i, row in enumerate(stage.rows):
        if any(j < 0 or j >= stage.n for j, _ in row.coeffs):
            issues.append(Issue(t, i, f"coefficient index outside [0, {stage.n})"))
        if not _finite(v for _, v in row.coeffs):
            issues.append(Issue(t, i, "coefficient is not finite"))
        if row.sense not in (Sense.GE, Sense.EQ):
            issues.append(Issue(t, i, "row sense must be GE or EQ"))
        if row.relaxable:
            if row.sense != Sense.GE:
                issues.append(Issue(t, i, "relaxable row must be GE"))
            for attr in ("slack_weight", "penalty_weight"):
                weight = getattr(row, attr)
                if weight is None or not math.isfinite(weight) or weight <= 0:
                    issues.append(Issue(t, i, f"relaxable row needs a positive {attr}"))
        elif row.slack_weight is not None or row.penalty_weight is not None:
            issues.append(Issue(t, i, "weights are only allowed on relaxable rows"))

    for i, j, value in stage.link:
        if i < 0 or i >= n_rows or j < 0 or j >= m:
            issues.append(Issue(t, i if 0 <= i < n_rows else None, f"link entry ({i}, {j}) outside {n_rows}x{m}"))
        elif not math.isfinite(value):
            issues.append(Issue(t, i, "link entry is not finite"))

    if not stage.realizations:
        issues.append(Issue(t, None, "stage has no realizations"))
    else:
        for k, realization in enumerate(stage.realizations):
            if not (0.0 < realization.probability <= 1.0):
                issues.append(Issue(t, None, f"realization {k} probability must lie in (0, 1]"))
            if len(realization.rhs) != n_rows:
                issues.append(Issue(t, None, f"realization {k} rhs has length {len(realization.rhs)}, "
                                             f"expected {n_rows}"))
            elif not _finite(realization.rhs):
                issues.append(Issue(t, None, f"realization {k} rhs contains non-finite entries"))
        total = math.fsum(r.probability for r in stage.realizations)
        if abs(total - 1.0) > PROBABILITY_SUM_TOL:
            issues.append(Issue(t, None, f"realization probabilities sum to {total!r}, expected 1"))

    return issues


def validate(instance: Instance) -> List[Issue]:
    issues = []
    if instance.T < 1:
        issues.append(Issue(None, None, "T must be at least 1"))
    if len(instance.stages) != instance.T:
        issues.append(Issue(None, None, f"{len(instance.stages)} stages given, expected T={instance.T}"))
    if len(instance.initial_state) != instance.m:
        issues.append(Issue(None, None, f"initial_state has length {len(instance.initial_state)}, "
                                        f"expected m={instance.m}"))
    elif not _finite(instance.initial_state):
        issues.append(Issue(None, None, "initial_state contains non-finite entries"))
    if not math.isfinite(instance.theta_lower_bound):
        issues.append(Issue(None, None, "theta_lower_bound must be finite"))

    for t, stage in enumerate(instance.stages, start=1):
        issues.extend(_stage_issues(t, stage, instance.m))

    if instance.stages:
        root = instance.stages[0]
        if len(root.realizations) != 1 or abs(root.realizations[0].probability - 1.0) > PROBABILITY_SUM_TOL:
            issues.append(Issue(1, None, "stage 1 must have exactly one realization with probability 1"))
    return issues


def effective_rhs(instance: Instance, t: int, k: int, x_prev: Sequence[float]) -> np.ndarray:
    """Right-hand side ``b_t(k) - D_t x_prev`` of stage ``t`` under realization ``k``."""
    stage = instance.stage(t)
    if k < 0 or k >= len(stage.realizations):
        raise IndexError(f"Realization {k} outside [0, {len(stage.realizations)}) at stage {t}")
    state = np.asarray(x_prev, dtype=float)
    if state.shape != (instance.m,):
        raise DimensionMismatch(f"Incoming state has shape {state.shape}, expected ({instance.m},)")
    return stage.realizations[k].vector - instance.link(t) @ state
