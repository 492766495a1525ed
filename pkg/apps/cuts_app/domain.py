from dataclasses import dataclass
from functools import cached_property
from typing import Tuple, Union

import numpy as np
from django.db import models

AGGREGATED = "AGGREGATED"


class CutKind(models.TextChoices):
    OPTIMALITY = "optimality", "Optimality"
    FEASIBILITY = "feasibility", "Feasibility"


@dataclass(frozen=True)
class CutOrigin:
    stage: int
    iteration: int
    realization: Union[int, str]
    trial_state: int


@dataclass(frozen=True)
class Cut:
    """Affine minorant ``intercept + gradient . x`` over the incoming state of a stage."""

    intercept: float
    gradient: Tuple[float, ...]
    kind: CutKind
    origin: CutOrigin

    @classmethod
    def create(cls, intercept: float, gradient, kind: CutKind, origin: CutOrigin) -> "Cut":
        return cls(
            intercept=float(intercept),
            gradient=tuple(float(g) for g in np.asarray(gradient, dtype=float).ravel()),
            kind=CutKind(kind),
            origin=origin,
        )

    @cached_property
    def gradient_vector(self) -> np.ndarray:
        return np.asarray(self.gradient, dtype=float)

    def value_at(self, state: np.ndarray) -> float:
        return float(self.intercept + self.gradient_vector @ state)
