import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from apps.cuts_app.config import DEFAULT_FEAS_TOL, POLICY_FORMAT, POLICY_VERSION
from apps.cuts_app.domain import AGGREGATED, Cut, CutKind, CutOrigin
from apps.cuts_app.serializers import CutSerializer, PolicySerializer
from core.documents import parse_document, render_document
from core.exceptions import DimensionMismatch, MixedKind, ParseError

logger = logging.getLogger(__name__)


class CutPool:
    """
    Append-only collection of cuts approximating a stage value function from below.

    Feasibility pools carry the implicit zero cut; an empty optimality pool evaluates to ``-inf``
    and callers substitute their own lower bound.
    """

    def __init__(self, stage: int, kind: CutKind, m: int, cuts: Optional[Iterable[Cut]] = None):
        self.stage = stage
        self.kind = CutKind(kind)
        self.m = m
        self.cuts: List[Cut] = []
        self._intercepts = np.zeros(0)
        self._gradients = np.zeros((0, m))
        for cut in cuts or ():
            self._append(cut)

    @property
    def floor_at_zero(self) -> bool:
        return self.kind == CutKind.FEASIBILITY

    def __len__(self) -> int:
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def _check_state(self, state) -> np.ndarray:
        vector = np.asarray(state, dtype=float)
        if vector.shape != (self.m,):
            raise DimensionMismatch(f"State has shape {vector.shape}, pool at stage {self.stage} expects ({self.m},)")
        return vector

    def _check_cut(self, cut: Cut):
        if len(cut.gradient) != self.m:
            raise DimensionMismatch(f"Cut gradient has length {len(cut.gradient)}, pool expects {self.m}")
        if cut.kind != self.kind:
            raise MixedKind(f"Cannot add a {cut.kind} cut to a {self.kind} pool")
        if not np.isfinite(cut.intercept) or not np.all(np.isfinite(cut.gradient_vector)):
            raise DimensionMismatch("Cut has non-finite entries")

    def _append(self, cut: Cut):
        self._check_cut(cut)
        self.cuts.append(cut)
        self._intercepts = np.append(self._intercepts, cut.intercept)
        self._gradients = np.vstack([self._gradients, cut.gradient_vector.reshape(1, self.m)])

    def evaluate(self, state) -> float:
        vector = self._check_state(state)
        if not self.cuts:
            return 0.0 if self.floor_at_zero else float("-inf")
        value = float(np.max(self._intercepts + self._gradients @ vector))
        return max(0.0, value) if self.floor_at_zero else value

    def add_if_novel(self, cut: Cut, at_state, tol: float = DEFAULT_FEAS_TOL) -> bool:
        """
        Append ``cut`` when it lifts the approximation at ``at_state`` by more than the
        relative tolerance.

        :return: Whether the cut was appended.
        :raises DimensionMismatch: When the cut or the state does not match the pool dimension.
        """
        vector = self._check_state(at_state)
        self._check_cut(cut)
        current = self.evaluate(vector)
        candidate = cut.value_at(vector)
        if np.isfinite(current) and candidate <= current + tol * max(1.0, abs(current)):
            return False
        self._append(cut)
        logger.debug("Stage %d %s pool gained cut %d (%.9g above %.9g)",
                     self.stage, self.kind, len(self.cuts), candidate, current)
        return True


def expected_cut(cuts_per_realization: Sequence[Tuple[float, Cut]]) -> Cut:
    """Probability-weighted combination of optimality cuts sharing an incoming state."""
    if not cuts_per_realization:
        raise MixedKind("No cuts to aggregate")
    first = cuts_per_realization[0][1]
    m = len(first.gradient)
    intercept = 0.0
    gradient = np.zeros(m)
    for probability, cut in cuts_per_realization:
        if cut.kind != CutKind.OPTIMALITY:
            raise MixedKind(f"Only optimality cuts can be aggregated, got {cut.kind}")
        if len(cut.gradient) != m:
            raise DimensionMismatch(f"Cut gradient has length {len(cut.gradient)}, expected {m}")
        intercept += probability * cut.intercept
        gradient += probability * cut.gradient_vector
    origin = CutOrigin(
        stage=first.origin.stage,
        iteration=first.origin.iteration,
        realization=AGGREGATED,
        trial_state=first.origin.trial_state,
    )
    return Cut.create(intercept, gradient, CutKind.OPTIMALITY, origin)


class Policy:
    """FCF and FFF pools for stages ``1..T``; the pool of stage ``t`` is a function of the state entering ``t``."""

    def __init__(self, T: int, m: int):
        self.T = T
        self.m = m
        self.fcf: Dict[int, CutPool] = {t: CutPool(t, CutKind.OPTIMALITY, m) for t in range(1, T + 1)}
        self.fff: Dict[int, CutPool] = {t: CutPool(t, CutKind.FEASIBILITY, m) for t in range(1, T + 1)}

    def fcf_next(self, t: int) -> Optional[CutPool]:
        return self.fcf.get(t + 1)

    def fff_next(self, t: int) -> Optional[CutPool]:
        return self.fff.get(t + 1)

    def pool(self, t: int, kind: Union[CutKind, str]) -> CutPool:
        pools = self.fcf if CutKind(kind) == CutKind.OPTIMALITY else self.fff
        return pools[t]

    @property
    def cut_count(self) -> int:
        return sum(len(p) for p in self.fcf.values()) + sum(len(p) for p in self.fff.values())


def policy_to_data(policy: Policy) -> dict:
    return {
        "format": POLICY_FORMAT,
        "version": POLICY_VERSION,
        "m": policy.m,
        "stages": [
            {
                "stage": t,
                "fcf": CutSerializer(policy.fcf[t].cuts, many=True).data,
                "fff": CutSerializer(policy.fff[t].cuts, many=True).data,
            }
            for t in range(1, policy.T + 1)
        ],
    }


def policy_from_data(data: dict) -> Policy:
    serializer = PolicySerializer(data=data)
    if not serializer.is_valid():
        raise ParseError("Malformed policy document", errors=serializer.errors)
    stages = serializer.validated_data["stages"]
    m = serializer.validated_data["m"]
    policy = Policy(T=len(stages), m=m)
    cut_serializer = CutSerializer()
    seen = set()
    for stage in stages:
        t = stage["stage"]
        if not 1 <= t <= len(stages) or t in seen:
            raise ParseError(f"Policy stage {t} is out of range or repeated for {len(stages)} stage(s)")
        seen.add(t)
        policy.fcf[t] = CutPool(t, CutKind.OPTIMALITY, m, [cut_serializer.create(c) for c in stage["fcf"]])
        policy.fff[t] = CutPool(t, CutKind.FEASIBILITY, m, [cut_serializer.create(c) for c in stage["fff"]])
    return policy


def serialize_policy(policy: Policy) -> bytes:
    return render_document(policy_to_data(policy))


def deserialize_policy(raw: Union[bytes, str]) -> Policy:
    """
    Rebuild a policy from its document; cuts keep their order, kind and origin.

    :raises ParseError: When the document is malformed.
    """
    return policy_from_data(parse_document(raw, "policy document"))
