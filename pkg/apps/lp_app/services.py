import logging
from typing import Optional, Protocol

import numpy as np
from django.conf import settings
from django.utils.module_loading import import_string

from apps.lp_app import config
from apps.lp_app.domain import LinearProgram, LpSolution, LpStatus, Sense
from core.exceptions import NumericalFailure

logger = logging.getLogger(__name__)

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3


class LpBackend(Protocol):
    def solve(self, lp: LinearProgram) -> LpSolution:
        ...


class SimplexSolver:
    """
    Bounded-variable revised simplex with an explicit basis inverse.

    Rows are brought to equality form with one logical per inequality (GE: ``a'x - s = b``,
    LE: ``a'x + s = b``), phase one starts from an artificial basis and minimises the sum of
    artificials, phase two fixes the artificials at zero and optimises the true objective.
    Pricing is Dantzig's rule; after ``degeneracy_streak`` consecutive degenerate pivots
    Bland's rule is used until a step makes progress.
    """

    def __init__(self, max_iterations: int = config.MAX_ITERATIONS,
                 degeneracy_streak: int = config.DEGENERACY_STREAK,
                 refactor_every: int = config.REFACTOR_EVERY):
        self.max_iterations = max_iterations
        self.degeneracy_streak = degeneracy_streak
        self.refactor_every = refactor_every

    def solve(self, lp: LinearProgram) -> LpSolution:
        problems = lp.issues()
        if problems:
            raise NumericalFailure(f"Malformed LP '{lp.name}': {'; '.join(problems)}")
        return _SimplexRun(lp, self).execute()


class _SimplexRun:
    def __init__(self, lp: LinearProgram, solver: SimplexSolver):
        self.lp = lp
        self.solver = solver
        self.iterations = 0

        a = lp.matrix
        self.m, self.n = a.shape
        self.rhs = lp.rhs

        slack_rows = [i for i, row in enumerate(lp.rows) if row.sense != Sense.EQ]
        n_slack = len(slack_rows)
        self.n_total = self.n + n_slack + self.m
        self.art_start = self.n + n_slack

        self.M = np.zeros((self.m, self.n_total))
        self.M[:, :self.n] = a
        for offset, i in enumerate(slack_rows):
            self.M[i, self.n + offset] = -1.0 if lp.rows[i].sense == Sense.GE else 1.0

        self.lo = np.concatenate([lp.lower, np.zeros(n_slack), np.zeros(self.m)])
        self.hi = np.concatenate([lp.upper, np.full(n_slack, np.inf), np.full(self.m, np.inf)])

        self.x = np.zeros(self.n_total)
        self.state = np.full(self.n_total, AT_LOWER, dtype=int)
        for j in range(self.art_start):
            if np.isfinite(self.lo[j]):
                self.x[j] = self.lo[j]
                self.state[j] = AT_LOWER
            elif np.isfinite(self.hi[j]):
                self.x[j] = self.hi[j]
                self.state[j] = AT_UPPER
            else:
                self.x[j] = 0.0
                self.state[j] = FREE

        residual = self.rhs - self.M[:, :self.art_start] @ self.x[:self.art_start]
        signs = np.where(residual >= 0.0, 1.0, -1.0)
        for i in range(self.m):
            self.M[i, self.art_start + i] = signs[i]
        self.x[self.art_start:] = np.abs(residual)
        self.basis = np.arange(self.art_start, self.n_total)
        self.state[self.art_start:] = BASIC
        self.binv = np.diag(signs) if self.m else np.zeros((0, 0))

    def execute(self) -> LpSolution:
        phase_one_cost = np.zeros(self.n_total)
        phase_one_cost[self.art_start:] = 1.0
        outcome = self._iterate(phase_one_cost)
        if outcome == LpStatus.UNBOUNDED:
            raise NumericalFailure(f"Phase one of '{self.lp.name}' reported unboundedness")

        infeasibility = float(self.x[self.art_start:].sum())
        scale = max(1.0, float(np.max(np.abs(self.rhs))) if self.m else 1.0)
        if infeasibility > config.PHASE_ONE_TOL * scale:
            logger.debug("LP %s infeasible after phase one (sum of artificials %.3e)", self.lp.name, infeasibility)
            return self._result(LpStatus.INFEASIBLE, np.zeros(self.n_total))

        self.hi[self.art_start:] = 0.0
        self.x[self.art_start:] = np.where(self.state[self.art_start:] == BASIC, self.x[self.art_start:], 0.0)
        self._drive_out_artificials()
        logger.debug("LP %s feasible after %d iterations, entering phase two", self.lp.name, self.iterations)

        cost = np.zeros(self.n_total)
        cost[:self.n] = self.lp.objective
        outcome = self._iterate(cost)
        if outcome == LpStatus.UNBOUNDED:
            return self._result(LpStatus.UNBOUNDED, cost)

        self._refactor()
        return self._result(LpStatus.OPTIMAL, cost)

    def _result(self, status: LpStatus, cost: np.ndarray) -> LpSolution:
        primal = self.x[:self.n].copy()
        if status == LpStatus.OPTIMAL:
            duals = cost[self.basis] @ self.binv if self.m else np.zeros(0)
            reduced = self.lp.objective - self.lp.matrix.T @ duals if self.m else self.lp.objective.copy()
            objective_value = float(self.lp.objective @ primal)
        else:
            duals = np.zeros(self.m)
            reduced = np.zeros(self.n)
            objective_value = float("inf") if status == LpStatus.INFEASIBLE else float("-inf")
        return LpSolution(
            status=status,
            primal=primal,
            objective_value=objective_value,
            row_duals=np.asarray(duals, dtype=float),
            reduced_costs=np.asarray(reduced, dtype=float),
            iterations=self.iterations,
        )

    def _refactor(self):
        if not self.m:
            return
        try:
            self.binv = np.linalg.inv(self.M[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"Singular basis in '{self.lp.name}'") from exc
        nonbasic = self.state != BASIC
        self.x[self.basis] = self.binv @ (self.rhs - self.M[:, nonbasic] @ self.x[nonbasic])

    def _drive_out_artificials(self):
        for r in range(self.m):
            leaving = self.basis[r]
            if leaving < self.art_start:
                continue
            row = self.binv[r] @ self.M[:, :self.art_start]
            candidates = [j for j in np.flatnonzero(np.abs(row) > 1e-7) if self.state[j] != BASIC]
            if not candidates:
                continue
            entering = max(candidates, key=lambda j: (abs(row[j]), -j))
            alpha = self.binv @ self.M[:, entering]
            self._pivot(r, entering, alpha)
            self.state[leaving] = AT_LOWER
            self.x[leaving] = 0.0

    def _pivot(self, r: int, entering: int, alpha: np.ndarray):
        pivot_row = self.binv[r] / alpha[r]
        self.binv -= np.outer(alpha, pivot_row)
        self.binv[r] = pivot_row
        self.basis[r] = entering
        self.state[entering] = BASIC

    def _choose_entering(self, reduced: np.ndarray, bland: bool) -> Optional[int]:
        best, best_score = None, 0.0
        for j in np.flatnonzero(self.state != BASIC):
            if self.hi[j] - self.lo[j] <= 0.0:
                continue
            d = reduced[j]
            state = self.state[j]
            if state == AT_LOWER:
                score = -d
            elif state == AT_UPPER:
                score = d
            else:
                score = abs(d)
            if score <= config.OPTIMALITY_TOL:
                continue
            if bland:
                return int(j)
            if score > best_score:
                best, best_score = int(j), score
        return best

    def _iterate(self, cost: np.ndarray) -> LpStatus:
        streak = 0
        while True:
            self.iterations += 1
            if self.iterations > self.solver.max_iterations:
                raise NumericalFailure(
                    f"Iteration limit {self.solver.max_iterations} reached on '{self.lp.name}'"
                )
            if self.iterations % self.solver.refactor_every == 0:
                self._refactor()

            duals = cost[self.basis] @ self.binv if self.m else np.zeros(0)
            reduced = cost - duals @ self.M if self.m else cost.copy()

            bland = streak >= self.solver.degeneracy_streak
            if streak == self.solver.degeneracy_streak:
                logger.debug("LP %s: %d degenerate pivots, switching to Bland's rule", self.lp.name, streak)
            entering = self._choose_entering(reduced, bland)
            if entering is None:
                return LpStatus.OPTIMAL

            direction = 1.0 if reduced[entering] < 0.0 else -1.0
            if self.state[entering] == AT_UPPER:
                direction = -1.0
            elif self.state[entering] == AT_LOWER:
                direction = 1.0
            alpha = self.binv @ self.M[:, entering] if self.m else np.zeros(0)

            step = self.hi[entering] - self.lo[entering]
            leave_row, leave_state = None, None
            for i in range(self.m):
                rate = direction * alpha[i]
                var = self.basis[i]
                if rate > config.PIVOT_TOL:
                    if not np.isfinite(self.lo[var]):
                        continue
                    candidate, bound_state = (self.x[var] - self.lo[var]) / rate, AT_LOWER
                elif rate < -config.PIVOT_TOL:
                    if not np.isfinite(self.hi[var]):
                        continue
                    candidate, bound_state = (self.hi[var] - self.x[var]) / -rate, AT_UPPER
                else:
                    continue
                candidate = max(candidate, 0.0)
                if candidate < step - config.DEGENERATE_STEP:
                    better = True
                elif candidate <= step + config.DEGENERATE_STEP and leave_row is not None:
                    if bland:
                        better = var < self.basis[leave_row]
                    else:
                        better = abs(alpha[i]) > abs(alpha[leave_row])
                else:
                    better = False
                if better:
                    step, leave_row, leave_state = candidate, i, bound_state

            if not np.isfinite(step):
                return LpStatus.UNBOUNDED

            self.x[entering] += direction * step
            if self.m:
                self.x[self.basis] -= direction * step * alpha

            if leave_row is None:
                self.state[entering] = AT_UPPER if direction > 0 else AT_LOWER
                self.x[entering] = self.hi[entering] if direction > 0 else self.lo[entering]
            else:
                leaving = self.basis[leave_row]
                self._pivot(leave_row, entering, alpha)
                self.state[leaving] = leave_state
                self.x[leaving] = self.lo[leaving] if leave_state == AT_LOWER else self.hi[leaving]

            streak = streak + 1 if step <= config.DEGENERATE_STEP else 0


def get_backend() -> LpBackend:
    path = getattr(settings, "PFSDDP", {}).get("LP_BACKEND", "apps.lp_app.services.SimplexSolver")
    return import_string(path)()


def solve_lp(lp: LinearProgram, backend: Optional[LpBackend] = None) -> LpSolution:
    return (backend or get_backend()).solve(lp)


def dual_check(lp: LinearProgram, sol: LpSolution,
               tol_feas: float = config.TOL_FEAS_LP,
               tol_duality: float = config.TOL_DUALITY,
               tol_cs: float = config.TOL_COMPLEMENTARITY) -> bool:
    """
    Certify an optimal solution: primal feasibility, dual sign feasibility, strong duality and
    complementary slackness. Reduced costs are recomputed from the row duals.
    """
    if sol.status != LpStatus.OPTIMAL:
        return False

    x = np.asarray(sol.primal, dtype=float)
    y = np.asarray(sol.row_duals, dtype=float)
    if x.shape != (lp.n_vars,) or y.shape != (len(lp.rows),):
        return False

    a = lp.matrix
    rhs = lp.rhs
    activity = a @ x if lp.rows else np.zeros(0)

    if np.any(x < lp.lower - tol_feas) or np.any(x > lp.upper + tol_feas):
        return False

    for i, row in enumerate(lp.rows):
        gap = activity[i] - rhs[i]
        if row.sense == Sense.GE and (gap < -tol_feas or y[i] < -config.TOL_DUAL_SIGN):
            return False
        if row.sense == Sense.LE and (gap > tol_feas or y[i] > config.TOL_DUAL_SIGN):
            return False
        if row.sense == Sense.EQ and abs(gap) > tol_feas:
            return False
        if row.sense != Sense.EQ and abs(y[i] * gap) > tol_cs:
            return False

    reduced = lp.objective - (a.T @ y if lp.rows else 0.0)
    dual_objective = float(rhs @ y) if lp.rows else 0.0
    for j in range(lp.n_vars):
        d = reduced[j]
        if d > config.TOL_DUAL_SIGN:
            if not np.isfinite(lp.lower[j]) or d * (x[j] - lp.lower[j]) > tol_cs:
                return False
            dual_objective += d * lp.lower[j]
        elif d < -config.TOL_DUAL_SIGN:
            if not np.isfinite(lp.upper[j]) or -d * (lp.upper[j] - x[j]) > tol_cs:
                return False
            dual_objective += d * lp.upper[j]

    primal_objective = float(lp.objective @ x)
    scale = max(1.0, abs(sol.objective_value))
    if abs(primal_objective - sol.objective_value) > tol_duality * scale:
        return False
    return abs(primal_objective - dual_objective) <= tol_duality * scale
