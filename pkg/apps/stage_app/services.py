import logging
from typing import Optional, Sequence

import numpy as np

from apps.cuts_app.domain import Cut, CutKind, CutOrigin
from apps.cuts_app.services import CutPool
from apps.instance_app.domain import Instance, StageData
from apps.instance_app.services import effective_rhs
from apps.lp_app.domain import LinearProgram, LpSolution, LpStatus, Sense
from apps.lp_app.services import LpBackend, dual_check, solve_lp
from apps.stage_app.config import CAP_PADDING, HINT_TOL
from apps.stage_app.domain import FeasibilityResult, OptimalityResult, StageLayout, StageProblem
from core.exceptions import DefensiveInfeasible, NumericalFailure, StructuralInfeasibility

logger = logging.getLogger(__name__)


def slack_weights(stage: StageData) -> np.ndarray:
    return np.array([stage.rows[i].slack_weight for i in stage.relaxable_rows], dtype=float)


def penalty_weights(stage: StageData, override: Optional[float] = None) -> np.ndarray:
    if override is not None:
        return np.full(len(stage.relaxable_rows), float(override))
    return np.array([stage.rows[i].penalty_weight for i in stage.relaxable_rows], dtype=float)


def _padded(cap: float) -> float:
    return float(cap) + CAP_PADDING * max(1.0, abs(float(cap)))


class StageProblemBuilder:
    """
    Assembles the subproblem of stage ``t`` at a fixed incoming state and realization.

    Stage rows carry ``b_t(k) - D_t x_prev`` on the right-hand side; cut rows read the outgoing
    state from the stage variables listed in ``state_indices``.
    """

    def __init__(self, instance: Instance, t: int, x_prev: Sequence[float], k: int):
        self.instance = instance
        self.t = t
        self.k = k
        self.stage = instance.stage(t)
        self.x_prev = np.asarray(x_prev, dtype=float)
        self.rhs = effective_rhs(instance, t, k, self.x_prev)

    def layout(self, has_beta: bool, has_theta: bool) -> StageLayout:
        return StageLayout(
            n=self.stage.n,
            n_slacks=len(self.stage.relaxable_rows),
            n_stage_rows=len(self.stage.rows),
            has_beta=has_beta,
            has_theta=has_theta,
        )

    def assemble(self, layout: StageLayout, objective: np.ndarray, slack_upper: np.ndarray,
                 beta_upper: float = np.inf, theta_lower: float = 0.0, name: str = "stage") -> LinearProgram:
        stage = self.stage
        upper = np.full(layout.n_vars, np.inf)
        lower = np.zeros(layout.n_vars)
        upper[:stage.n] = stage.upper_vector
        upper[layout.slack_start:layout.slack_start + layout.n_slacks] = slack_upper
        names = [f"x{j}" for j in range(stage.n)]
        names += [f"s_{stage.rows[i].label or i}" for i in stage.relaxable_rows]
        if layout.has_beta:
            upper[layout.beta] = beta_upper
            names.append("beta")
        if layout.has_theta:
            lower[layout.theta] = theta_lower
            names.append("theta")

        lp = LinearProgram.create(layout.n_vars, objective, lower=lower, upper=upper, var_names=names,
                                  name=f"{self.instance.name}:{name}:t{self.t}:k{self.k}")
        slack_of = {i: layout.slack_start + position for position, i in enumerate(stage.relaxable_rows)}
        for i, row in enumerate(stage.rows):
            coeffs = dict()
            for j, value in row.coeffs:
                coeffs[j] = coeffs.get(j, 0.0) + value
            if i in slack_of:
                coeffs[slack_of[i]] = 1.0
            lp.add_row(coeffs, row.sense, self.rhs[i], name=row.label or f"row{i}")
        return lp

    def add_cut_rows(self, lp: LinearProgram, pool: Optional[CutPool], epigraph: int, prefix: str):
        if pool is None:
            return
        for index, cut in enumerate(pool.cuts):
            coeffs = {epigraph: 1.0}
            for j, g in zip(self.stage.state_indices, cut.gradient):
                if g != 0.0:
                    coeffs[j] = coeffs.get(j, 0.0) - g
            lp.add_row(coeffs, Sense.GE, cut.intercept, name=f"{prefix}_cut_{index}")

    def cut_from(self, solution: LpSolution, layout: StageLayout, kind: CutKind,
                 iteration: int, trial_state: int) -> Cut:
        duals = solution.row_duals[:layout.n_stage_rows]
        gradient = -(self.instance.link(self.t).T @ duals)
        intercept = solution.objective_value - float(gradient @ self.x_prev)
        origin = CutOrigin(stage=self.t, iteration=iteration, realization=self.k, trial_state=trial_state)
        return Cut.create(intercept, gradient, kind, origin)

    def last_violated_row(self, solution: LpSolution, layout: StageLayout, lp: LinearProgram) -> Optional[str]:
        violations = lp.violations(solution.primal)[:layout.n_stage_rows]
        violated = [i for i in np.flatnonzero(violations > HINT_TOL) if not self.stage.rows[i].relaxable]
        if not violated:
            return None
        i = violated[-1]
        return self.stage.rows[i].label or f"row{i}"


def _assemble_feasibility(instance: Instance, t: int, x_prev, k: int, fff_next: Optional[CutPool]):
    builder = StageProblemBuilder(instance, t, x_prev, k)
    has_beta = fff_next is not None and t < instance.T
    layout = builder.layout(has_beta=has_beta, has_theta=False)
    objective = np.zeros(layout.n_vars)
    objective[layout.slack_start:layout.slack_start + layout.n_slacks] = slack_weights(builder.stage)
    if has_beta:
        objective[layout.beta] = 1.0
    lp = builder.assemble(layout, objective, np.full(layout.n_slacks, np.inf), name="feasibility")
    if has_beta:
        builder.add_cut_rows(lp, fff_next, layout.beta, "fff")
    return builder, StageProblem(lp=lp, layout=layout)


def build_feasibility(instance: Instance, t: int, x_prev, k: int, fff_next: Optional[CutPool]) -> LinearProgram:
    """
    Minimum weighted slack plus downstream infeasibility at ``(t, x_prev, k)``.

    ``fff_next`` approximates the feasibility function of stage ``t + 1``; it is ignored at the last stage.
    """
    return _assemble_feasibility(instance, t, x_prev, k, fff_next)[1].lp


def _check_duals(lp: LinearProgram, solution: LpSolution):
    if not dual_check(lp, solution):
        logger.warning("Dual certificate of '%s' outside tolerance", lp.name)


def solve_feasibility(instance: Instance, t: int, x_prev, k: int, fff_next: Optional[CutPool],
                      iteration: int = 0, trial_state: int = 0,
                      backend: Optional[LpBackend] = None) -> FeasibilityResult:
    builder, problem = _assemble_feasibility(instance, t, x_prev, k, fff_next)
    lp, layout = problem.lp, problem.layout
    solution = solve_lp(lp, backend)

    if solution.status == LpStatus.INFEASIBLE:
        row_label = builder.last_violated_row(solution, layout, lp)
        logger.error("Stage %d realization %d is structurally infeasible (last violated row %s)", t, k, row_label)
        raise StructuralInfeasibility(t, k, row_label)
    if not solution.is_optimal:
        raise NumericalFailure(f"Feasibility problem '{lp.name}' reported {solution.status}")
    _check_duals(lp, solution)

    s_star = np.maximum(layout.slacks(solution.primal), 0.0)
    beta_star = max(0.0, float(solution.primal[layout.beta])) if layout.has_beta else 0.0
    value = max(0.0, solution.objective_value)
    return FeasibilityResult(
        s_star=s_star,
        beta_star=beta_star,
        value=value,
        x_feas=solution.primal[:layout.n].copy(),
        cut=builder.cut_from(solution, layout, CutKind.FEASIBILITY, iteration, trial_state),
        lp=lp,
        solution=solution,
    )


def _assemble_optimality(instance: Instance, t: int, x_prev, k: int, fcf_next: Optional[CutPool],
                         fff_next: Optional[CutPool], s_cap, beta_cap: float,
                         theta_lower_bound: Optional[float]):
    builder = StageProblemBuilder(instance, t, x_prev, k)
    has_beta = fff_next is not None and t < instance.T
    has_theta = fcf_next is not None and t < instance.T
    layout = builder.layout(has_beta=has_beta, has_theta=has_theta)

    objective = np.zeros(layout.n_vars)
    objective[:layout.n] = builder.stage.cost_vector
    if has_theta:
        objective[layout.theta] = 1.0

    caps = np.asarray(s_cap, dtype=float).reshape(layout.n_slacks)
    slack_upper = np.array([_padded(max(0.0, c)) for c in caps])
    theta_lower = instance.theta_lower_bound if theta_lower_bound is None else theta_lower_bound
    lp = builder.assemble(layout, objective, slack_upper, beta_upper=_padded(max(0.0, beta_cap)),
                          theta_lower=theta_lower, name="optimality")
    if has_beta:
        builder.add_cut_rows(lp, fff_next, layout.beta, "fff")
    if has_theta:
        builder.add_cut_rows(lp, fcf_next, layout.theta, "fcf")
    return builder, StageProblem(lp=lp, layout=layout)


def build_optimality(instance: Instance, t: int, x_prev, k: int, fcf_next: Optional[CutPool],
                     fff_next: Optional[CutPool], s_cap, beta_cap: float,
                     theta_lower_bound: Optional[float] = None) -> LinearProgram:
    """
    Least stage cost plus future cost with slacks capped at ``s_cap`` and β capped at ``beta_cap``.

    Slacks carry no objective coefficient.
    """
    return _assemble_optimality(instance, t, x_prev, k, fcf_next, fff_next, s_cap, beta_cap,
                                theta_lower_bound)[1].lp


def _optimality_result(builder: StageProblemBuilder, problem: StageProblem, solution: LpSolution,
                       iteration: int, trial_state: int, penalties: Optional[np.ndarray] = None) -> OptimalityResult:
    layout = problem.layout
    x_t = solution.primal[:layout.n].copy()
    slacks = np.maximum(layout.slacks(solution.primal), 0.0)
    stage_cost = float(builder.stage.cost_vector @ x_t)
    return OptimalityResult(
        x_t=x_t,
        outgoing_state=x_t[list(builder.stage.state_indices)] if builder.stage.state_indices else np.zeros(0),
        stage_cost=stage_cost,
        theta=float(solution.primal[layout.theta]) if layout.has_theta else 0.0,
        objective_value=solution.objective_value,
        cut=builder.cut_from(solution, layout, CutKind.OPTIMALITY, iteration, trial_state),
        slacks_used=slacks,
        beta=float(solution.primal[layout.beta]) if layout.has_beta else 0.0,
        penalty_cost=float(penalties @ slacks) if penalties is not None else 0.0,
        lp=problem.lp,
        solution=solution,
    )


def solve_optimality(instance: Instance, t: int, x_prev, k: int, fcf_next: Optional[CutPool],
                     fff_next: Optional[CutPool], s_cap, beta_cap: float,
                     theta_lower_bound: Optional[float] = None, iteration: int = 0, trial_state: int = 0,
                     backend: Optional[LpBackend] = None) -> OptimalityResult:
    builder, problem = _assemble_optimality(instance, t, x_prev, k, fcf_next, fff_next, s_cap, beta_cap,
                                   theta_lower_bound)
    solution = solve_lp(problem.lp, backend)
    if solution.status == LpStatus.INFEASIBLE:
        logger.error("Optimality problem '%s' infeasible although its caps come from the same state",
                     problem.lp.name)
        raise DefensiveInfeasible(t, k)
    if not solution.is_optimal:
        raise NumericalFailure(f"Optimality problem '{problem.lp.name}' reported {solution.status}")
    _check_duals(problem.lp, solution)
    return _optimality_result(builder, problem, solution, iteration, trial_state)


def _assemble_classic(instance: Instance, t: int, x_prev, k: int, fcf_next: Optional[CutPool],
                      penalty_override: Optional[float], theta_lower_bound: Optional[float]):
    builder = StageProblemBuilder(instance, t, x_prev, k)
    has_theta = fcf_next is not None and t < instance.T
    layout = builder.layout(has_beta=False, has_theta=has_theta)
    penalties = penalty_weights(builder.stage, penalty_override)

    objective = np.zeros(layout.n_vars)
    objective[:layout.n] = builder.stage.cost_vector
    objective[layout.slack_start:layout.slack_start + layout.n_slacks] = penalties
    if has_theta:
        objective[layout.theta] = 1.0
    theta_lower = instance.theta_lower_bound if theta_lower_bound is None else theta_lower_bound
    lp = builder.assemble(layout, objective, np.full(layout.n_slacks, np.inf), theta_lower=theta_lower,
                          name="classic")
    if has_theta:
        builder.add_cut_rows(lp, fcf_next, layout.theta, "fcf")
    return builder, StageProblem(lp=lp, layout=layout), penalties


def build_classic(instance: Instance, t: int, x_prev, k: int, fcf_next: Optional[CutPool],
                  penalty_override: Optional[float] = None,
                  theta_lower_bound: Optional[float] = None) -> LinearProgram:
    return _assemble_classic(instance, t, x_prev, k, fcf_next, penalty_override, theta_lower_bound)[1].lp


def solve_classic(instance: Instance, t: int, x_prev, k: int, fcf_next: Optional[CutPool],
                  penalty_override: Optional[float] = None, theta_lower_bound: Optional[float] = None,
                  iteration: int = 0, trial_state: int = 0,
                  backend: Optional[LpBackend] = None) -> OptimalityResult:
    """
    Penalized stage problem: stage cost plus ``penalty_weight`` per unit of slack plus future cost.

    :raises StructuralInfeasibility: When the non-relaxable rows admit no point.
    """
    builder, problem, penalties = _assemble_classic(instance, t, x_prev, k, fcf_next, penalty_override,
                                                    theta_lower_bound)
    solution = solve_lp(problem.lp, backend)
    if solution.status == LpStatus.INFEASIBLE:
        row_label = builder.last_violated_row(solution, problem.layout, problem.lp)
        logger.error("Classic stage %d realization %d is structurally infeasible (last violated row %s)",
                     t, k, row_label)
        raise StructuralInfeasibility(t, k, row_label)
    if not solution.is_optimal:
        raise NumericalFailure(f"Classic problem '{problem.lp.name}' reported {solution.status}")
    _check_duals(problem.lp, solution)
    return _optimality_result(builder, problem, solution, iteration, trial_state, penalties)
