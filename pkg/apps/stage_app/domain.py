from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from apps.cuts_app.domain import Cut
from apps.lp_app.domain import LinearProgram, LpSolution


@dataclass(frozen=True)
class StageLayout:
    """Column layout of a stage subproblem: stage variables, one slack per relaxable row, then β and θ."""

    n: int
    n_slacks: int
    n_stage_rows: int
    has_beta: bool
    has_theta: bool

    @property
    def slack_start(self) -> int:
        return self.n

    @property
    def beta(self) -> Optional[int]:
        return self.n + self.n_slacks if self.has_beta else None

    @property
    def theta(self) -> Optional[int]:
        if not self.has_theta:
            return None
        return self.n + self.n_slacks + (1 if self.has_beta else 0)

    @property
    def n_vars(self) -> int:
        return self.n + self.n_slacks + int(self.has_beta) + int(self.has_theta)

    def slacks(self, primal: np.ndarray) -> np.ndarray:
        return primal[self.n:self.n + self.n_slacks]


@dataclass
class StageProblem:
    lp: LinearProgram
    layout: StageLayout


@dataclass
class FeasibilityResult:
    s_star: np.ndarray
    beta_star: float
    value: float
    x_feas: np.ndarray
    cut: Cut
    lp: Optional[LinearProgram] = field(default=None, repr=False)
    solution: Optional[LpSolution] = field(default=None, repr=False)


@dataclass
class OptimalityResult:
    x_t: np.ndarray
    outgoing_state: np.ndarray
    stage_cost: float
    theta: float
    objective_value: float
    cut: Cut
    slacks_used: np.ndarray
    beta: float = 0.0
    penalty_cost: float = 0.0
    lp: Optional[LinearProgram] = field(default=None, repr=False)
    solution: Optional[LpSolution] = field(default=None, repr=False)
