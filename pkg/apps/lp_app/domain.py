from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from django.db import models


class Sense(models.TextChoices):
    GE = "GE", "Greater or equal"
    LE = "LE", "Less or equal"
    EQ = "EQ", "Equal"


class LpStatus(models.TextChoices):
    OPTIMAL = "optimal", "Optimal"
    INFEASIBLE = "infeasible", "Infeasible"
    UNBOUNDED = "unbounded", "Unbounded"


@dataclass(frozen=True)
class LpRow:
    coeffs: Tuple[Tuple[int, float], ...]
    sense: Sense
    rhs: float
    name: str = ""


@dataclass
class LinearProgram:
    """Minimisation LP over bounded variables: min c'x s.t. rows, lower <= x <= upper."""

    n_vars: int
    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    rows: List[LpRow] = field(default_factory=list)
    var_names: Optional[List[str]] = None
    name: str = "lp"

    @classmethod
    def create(cls, n_vars: int, objective: Sequence[float], lower: Optional[Sequence[float]] = None,
               upper: Optional[Sequence[float]] = None, var_names: Optional[List[str]] = None,
               name: str = "lp") -> "LinearProgram":
        lower_arr = np.zeros(n_vars) if lower is None else np.asarray(lower, dtype=float)
        upper_arr = np.full(n_vars, np.inf) if upper is None else np.asarray(upper, dtype=float)
        return cls(
            n_vars=n_vars,
            objective=np.asarray(objective, dtype=float),
            lower=lower_arr,
            upper=upper_arr,
            var_names=var_names,
            name=name,
        )

    def add_row(self, coeffs, sense: Sense, rhs: float, name: str = "") -> int:
        if isinstance(coeffs, dict):
            pairs = tuple(sorted((int(j), float(v)) for j, v in coeffs.items()))
        else:
            pairs = tuple((int(j), float(v)) for j, v in coeffs)
        self.rows.append(LpRow(coeffs=pairs, sense=Sense(sense), rhs=float(rhs), name=name))
        self.__dict__.pop("matrix", None)
        return len(self.rows) - 1

    @cached_property
    def matrix(self) -> np.ndarray:
        dense = np.zeros((len(self.rows), self.n_vars))
        for i, row in enumerate(self.rows):
            for j, value in row.coeffs:
                dense[i, j] += value
        return dense

    @property
    def rhs(self) -> np.ndarray:
        return np.array([row.rhs for row in self.rows], dtype=float)

    @property
    def senses(self) -> List[Sense]:
        return [row.sense for row in self.rows]

    def var_name(self, j: int) -> str:
        if self.var_names and j < len(self.var_names):
            return self.var_names[j]
        return f"x{j}"

    def violations(self, x: np.ndarray) -> np.ndarray:
        """Per-row amount by which ``x`` violates the row, zero where satisfied."""
        if not self.rows:
            return np.zeros(0)
        gap = self.matrix @ np.asarray(x, dtype=float) - self.rhs
        out = np.zeros(len(self.rows))
        for i, row in enumerate(self.rows):
            if row.sense == Sense.GE:
                out[i] = max(0.0, -gap[i])
            elif row.sense == Sense.LE:
                out[i] = max(0.0, gap[i])
            else:
                out[i] = abs(gap[i])
        return out

    def issues(self) -> List[str]:
        found = []
        if self.objective.shape != (self.n_vars,):
            found.append("objective length differs from n_vars")
        if self.lower.shape != (self.n_vars,) or self.upper.shape != (self.n_vars,):
            found.append("bound vectors differ from n_vars")
        for i, row in enumerate(self.rows):
            if not np.isfinite(row.rhs):
                found.append(f"row {i} has non-finite rhs")
            for j, _ in row.coeffs:
                if j < 0 or j >= self.n_vars:
                    found.append(f"row {i} references variable {j} outside [0, {self.n_vars})")
        return found


@dataclass
class LpSolution:
    status: LpStatus
    primal: np.ndarray
    objective_value: float
    row_duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL
