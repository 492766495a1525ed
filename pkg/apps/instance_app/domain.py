from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from apps.lp_app.domain import Sense


@dataclass(frozen=True)
class Row:
    coeffs: Tuple[Tuple[int, float], ...]
    sense: Sense
    relaxable: bool = False
    slack_weight: Optional[float] = None
    penalty_weight: Optional[float] = None
    label: str = ""


@dataclass(frozen=True)
class Realization:
    probability: float
    rhs: Tuple[float, ...]

    @cached_property
    def vector(self) -> np.ndarray:
        return np.asarray(self.rhs, dtype=float)


@dataclass(frozen=True)
class StageData:
    n: int
    rows: Tuple[Row, ...]
    cost: Tuple[float, ...]
    link: Tuple[Tuple[int, int, float], ...]
    state_indices: Tuple[int, ...]
    realizations: Tuple[Realization, ...]
    var_upper: Optional[Tuple[float, ...]] = None

    @cached_property
    def matrix(self) -> np.ndarray:
        dense = np.zeros((len(self.rows), self.n))
        for i, row in enumerate(self.rows):
            for j, value in row.coeffs:
                dense[i, j] += value
        return dense

    @cached_property
    def cost_vector(self) -> np.ndarray:
        return np.asarray(self.cost, dtype=float)

    @cached_property
    def upper_vector(self) -> np.ndarray:
        if self.var_upper is None:
            return np.full(self.n, np.inf)
        return np.asarray(self.var_upper, dtype=float)

    @cached_property
    def relaxable_rows(self) -> Tuple[int, ...]:
        return tuple(i for i, row in enumerate(self.rows) if row.relaxable)

    @cached_property
    def probabilities(self) -> np.ndarray:
        return np.array([r.probability for r in self.realizations], dtype=float)

    def link_matrix(self, m: int) -> np.ndarray:
        dense = np.zeros((len(self.rows), m))
        for i, j, value in self.link:
            dense[i, j] += value
        return dense


@dataclass(frozen=True)
class Instance:
    """Multistage stochastic LP with stagewise independent right-hand-side noise."""

    name: str
    T: int
    m: int
    initial_state: Tuple[float, ...]
    stages: Tuple[StageData, ...] = field(default_factory=tuple)
    theta_lower_bound: float = 0.0

    def stage(self, t: int) -> StageData:
        if t < 1 or t > len(self.stages):
            raise IndexError(f"Stage {t} outside [1, {len(self.stages)}]")
        return self.stages[t - 1]

    @cached_property
    def x0(self) -> np.ndarray:
        return np.asarray(self.initial_state, dtype=float)

    @cached_property
    def link_matrices(self) -> List[np.ndarray]:
        return [stage.link_matrix(self.m) for stage in self.stages]

    def link(self, t: int) -> np.ndarray:
        self.stage(t)
        return self.link_matrices[t - 1]

    @property
    def is_deterministic(self) -> bool:
        return all(len(stage.realizations) == 1 for stage in self.stages)

    @property
    def has_relaxable_rows(self) -> bool:
        return any(stage.relaxable_rows for stage in self.stages)

    @property
    def leaf_count(self) -> int:
        count = 1
        for stage in self.stages:
            count *= len(stage.realizations)
        return count

    @property
    def node_count(self) -> int:
        total, width = 0, 1
        for stage in self.stages:
            width *= len(stage.realizations)
            total += width
        return total
