import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings
from django.db import models

from apps.instance_app.domain import Instance
from apps.lp_app.domain import LinearProgram, LpSolution, LpStatus, Sense
from apps.lp_app.services import LpBackend, solve_lp
from core.exceptions import ConfigurationError, NumericalFailure, StructuralInfeasibility, TreeTooLarge

logger = logging.getLogger(__name__)

# Relative padding of the violation budget in the second hierarchical solve.
BUDGET_PADDING = 1e-7


class ExtensiveMode(models.TextChoices):
    PENALIZED = "penalized", "Probability-weighted cost plus penalties"
    MIN_VIOLATION = "min_violation", "Expected weighted violation"
    COST_WITH_VIOLATION_BUDGET = "cost_with_violation_budget", "Expected cost under an expected violation budget"
    MIN_WORST_VIOLATION = "min_worst_violation", "Worst-path weighted violation"
    COST_WITH_WORST_VIOLATION_BUDGET = "cost_with_worst_violation_budget", "Expected cost under a per-path budget"


class ViolationMeasure(models.TextChoices):
    EXPECTED = "expected", "Expected"
    WORST_CASE = "worst_case", "Worst case"


@dataclass(frozen=True)
class TreeNode:
    index: int
    stage: int
    realization: int
    parent: Optional[int]
    probability: float
    path: Tuple[int, ...]


@dataclass
class ExtensiveForm:
    lp: LinearProgram
    nodes: List[TreeNode]
    offsets: List[int]
    slack_offsets: List[int]
    path_variable: Optional[int] = None

    def node_primal(self, solution: LpSolution, node: TreeNode) -> np.ndarray:
        start = self.offsets[node.index]
        return solution.primal[start:start + (self.slack_offsets[node.index] - start)]

    def slack_range(self, node: TreeNode) -> range:
        start = self.slack_offsets[node.index]
        if node.index + 1 < len(self.offsets):
            return range(start, self.offsets[node.index + 1])
        return range(start, self.lp.n_vars - (1 if self.path_variable is not None else 0))

    def node_slacks(self, solution: LpSolution, node: TreeNode) -> np.ndarray:
        span = self.slack_range(node)
        return solution.primal[span.start:span.stop]

    @property
    def leaves(self) -> List[TreeNode]:
        last = max(node.stage for node in self.nodes)
        return [node for node in self.nodes if node.stage == last]

    def lineage(self, node: TreeNode) -> List[TreeNode]:
        chain = []
        current: Optional[TreeNode] = node
        while current is not None:
            chain.append(current)
            current = self.nodes[current.parent] if current.parent is not None else None
        return list(reversed(chain))


@dataclass
class HierarchicalResult:
    V_star: float
    C_star: float
    node_slacks: Dict[Tuple[int, ...], np.ndarray] = field(default_factory=dict)
    measure: str = ViolationMeasure.EXPECTED
    form: Optional[ExtensiveForm] = None
    solution: Optional[LpSolution] = None


class ExtensiveFormBuilder:
    """
    Deterministic equivalent over the full scenario tree.

    Every tree node owns a copy of its stage variables followed by one slack per relaxable row.
    The incoming state of a node is read from its parent's state variables, so nonanticipativity
    holds by construction.
    """

    def __init__(self, instance: Instance, node_limit: Optional[int] = None):
        self.instance = instance
        self.node_limit = node_limit or settings.PFSDDP["TREE_NODE_LIMIT"]

    def enumerate_nodes(self) -> List[TreeNode]:
        total = self.instance.node_count
        if total > self.node_limit:
            raise TreeTooLarge(total, self.node_limit)

        nodes: List[TreeNode] = []
        frontier: List[Optional[TreeNode]] = [None]
        for t in range(1, self.instance.T + 1):
            stage = self.instance.stage(t)
            next_frontier = []
            for parent in frontier:
                for k, realization in enumerate(stage.realizations):
                    node = TreeNode(
                        index=len(nodes),
                        stage=t,
                        realization=k,
                        parent=parent.index if parent else None,
                        probability=(parent.probability if parent else 1.0) * realization.probability,
                        path=(parent.path if parent else ()) + (k,),
                    )
                    nodes.append(node)
                    next_frontier.append(node)
            frontier = next_frontier
        return nodes

    def build(self, mode: str, budget: Optional[float] = None, penalty: Optional[float] = None) -> ExtensiveForm:
        mode = ExtensiveMode(mode)
        needs_budget = mode in (ExtensiveMode.COST_WITH_VIOLATION_BUDGET,
                                ExtensiveMode.COST_WITH_WORST_VIOLATION_BUDGET)
        if needs_budget and (budget is None or budget < 0):
            raise ConfigurationError(f"Mode {mode.value} needs a nonnegative violation budget")

        instance = self.instance
        nodes = self.enumerate_nodes()

        offsets, slack_offsets = [], []
        cursor = 0
        for node in nodes:
            stage = instance.stage(node.stage)
            offsets.append(cursor)
            slack_offsets.append(cursor + stage.n)
            cursor += stage.n + len(stage.relaxable_rows)
        path_variable = cursor if mode == ExtensiveMode.MIN_WORST_VIOLATION else None
        n_vars = cursor + (1 if path_variable is not None else 0)

        objective = np.zeros(n_vars)
        upper = np.full(n_vars, np.inf)
        names = [""] * n_vars
        slack_weights = np.zeros(n_vars)

        for node in nodes:
            stage = instance.stage(node.stage)
            start, slack_start = offsets[node.index], slack_offsets[node.index]
            upper[start:start + stage.n] = stage.upper_vector
            for j in range(stage.n):
                names[start + j] = f"x_{node.index}_{j}"
            if mode in (ExtensiveMode.PENALIZED, ExtensiveMode.COST_WITH_VIOLATION_BUDGET,
                        ExtensiveMode.COST_WITH_WORST_VIOLATION_BUDGET):
                objective[start:start + stage.n] = node.probability * stage.cost_vector
            for position, i in enumerate(stage.relaxable_rows):
                row = stage.rows[i]
                var = slack_start + position
                names[var] = f"s_{node.index}_{i}"
                slack_weights[var] = row.slack_weight
                if mode == ExtensiveMode.PENALIZED:
                    objective[var] = node.probability * (row.penalty_weight if penalty is None else penalty)
                elif mode == ExtensiveMode.MIN_VIOLATION:
                    objective[var] = node.probability * row.slack_weight
        if path_variable is not None:
            objective[path_variable] = 1.0
            names[path_variable] = "worst_path_violation"

        lp = LinearProgram.create(n_vars, objective, upper=upper, var_names=names,
                                  name=f"{instance.name}:extensive:{mode.value}")

        for node in nodes:
            self._add_node_rows(lp, node, nodes, offsets, slack_offsets)

        form = ExtensiveForm(lp=lp, nodes=nodes, offsets=offsets, slack_offsets=slack_offsets,
                             path_variable=path_variable)

        if mode == ExtensiveMode.COST_WITH_VIOLATION_BUDGET:
            coeffs = {}
            for node in nodes:
                for var in form.slack_range(node):
                    coeffs[var] = node.probability * slack_weights[var]
            lp.add_row(coeffs, Sense.LE, budget, name="violation_budget")
        elif mode in (ExtensiveMode.MIN_WORST_VIOLATION, ExtensiveMode.COST_WITH_WORST_VIOLATION_BUDGET):
            for leaf in form.leaves:
                coeffs = {}
                for node in form.lineage(leaf):
                    for var in form.slack_range(node):
                        coeffs[var] = slack_weights[var]
                path_label = "_".join(str(k) for k in leaf.path)
                if path_variable is not None:
                    negated = {var: -value for var, value in coeffs.items()}
                    negated[path_variable] = 1.0
                    lp.add_row(negated, Sense.GE, 0.0, name=f"path_violation_{path_label}")
                else:
                    lp.add_row(coeffs, Sense.LE, budget, name=f"path_budget_{path_label}")

        logger.debug("Extensive form '%s': %d nodes, %d variables, %d rows",
                     lp.name, len(nodes), lp.n_vars, len(lp.rows))
        return form

    def _add_node_rows(self, lp: LinearProgram, node: TreeNode, nodes: List[TreeNode],
                       offsets: List[int], slack_offsets: List[int]):
        instance = self.instance
        stage = instance.stage(node.stage)
        start, slack_start = offsets[node.index], slack_offsets[node.index]
        link = instance.link(node.stage)
        rhs = stage.realizations[node.realization].vector.copy()

        parent_state_vars = None
        if node.parent is None:
            rhs -= link @ instance.x0
        else:
            parent = nodes[node.parent]
            parent_stage = instance.stage(parent.stage)
            parent_state_vars = [offsets[parent.index] + j for j in parent_stage.state_indices]

        slack_position = {i: position for position, i in enumerate(stage.relaxable_rows)}
        for i, row in enumerate(stage.rows):
            coeffs: Dict[int, float] = {}
            for j, value in row.coeffs:
                coeffs[start + j] = coeffs.get(start + j, 0.0) + value
            if parent_state_vars is not None:
                for j in np.flatnonzero(link[i]):
                    var = parent_state_vars[j]
                    coeffs[var] = coeffs.get(var, 0.0) + link[i, j]
            if i in slack_position:
                coeffs[slack_start + slack_position[i]] = 1.0
            label = row.label or f"row{i}"
            lp.add_row(coeffs, row.sense, rhs[i], name=f"{label}@{node.index}")


def build_extensive(instance: Instance, mode: str, budget: Optional[float] = None,
                    penalty: Optional[float] = None, node_limit: Optional[int] = None) -> LinearProgram:
    return ExtensiveFormBuilder(instance, node_limit).build(mode, budget=budget, penalty=penalty).lp


def _solve_or_raise(form: ExtensiveForm, backend: Optional[LpBackend]) -> LpSolution:
    solution = solve_lp(form.lp, backend)
    if solution.is_optimal:
        return solution
    if solution.status == LpStatus.INFEASIBLE:
        violations = form.lp.violations(solution.primal)
        violated = np.flatnonzero(violations > 1e-9)
        hint = form.lp.rows[violated[-1]].name if violated.size else None
        raise StructuralInfeasibility(None, None, hint)
    raise NumericalFailure(f"Extensive form '{form.lp.name}' reported {solution.status}")


def solve_extensive(instance: Instance, mode: str, budget: Optional[float] = None,
                    penalty: Optional[float] = None, node_limit: Optional[int] = None,
                    backend: Optional[LpBackend] = None) -> Tuple[ExtensiveForm, LpSolution]:
    form = ExtensiveFormBuilder(instance, node_limit).build(mode, budget=budget, penalty=penalty)
    return form, _solve_or_raise(form, backend)


def solve_hierarchical(instance: Instance, measure: str = ViolationMeasure.EXPECTED,
                       node_limit: Optional[int] = None,
                       backend: Optional[LpBackend] = None) -> HierarchicalResult:
    """
    Two-level oracle: the least achievable weighted violation, then the least expected cost
    among solutions that stay within that violation.

    :param instance: Validated instance with an enumerable tree.
    :param measure: ``expected`` aggregates violation by probability, ``worst_case`` by the worst path.
    :raises TreeTooLarge: When the tree exceeds the node limit.
    """
    measure = ViolationMeasure(measure)
    builder = ExtensiveFormBuilder(instance, node_limit)
    if measure == ViolationMeasure.EXPECTED:
        violation_mode, cost_mode = ExtensiveMode.MIN_VIOLATION, ExtensiveMode.COST_WITH_VIOLATION_BUDGET
    else:
        violation_mode, cost_mode = ExtensiveMode.MIN_WORST_VIOLATION, ExtensiveMode.COST_WITH_WORST_VIOLATION_BUDGET

    violation_form = builder.build(violation_mode)
    v_star = max(0.0, _solve_or_raise(violation_form, backend).objective_value)

    budget = v_star + BUDGET_PADDING * max(1.0, v_star)
    cost_form = builder.build(cost_mode, budget=budget)
    cost_solution = _solve_or_raise(cost_form, backend)

    node_slacks = {
        node.path: cost_form.node_slacks(cost_solution, node).copy()
        for node in cost_form.nodes
    }
    logger.info("Hierarchical oracle on '%s' (%s): V*=%.9g C*=%.9g",
                instance.name, measure.value, v_star, cost_solution.objective_value)
    return HierarchicalResult(
        V_star=v_star,
        C_star=cost_solution.objective_value,
        node_slacks=node_slacks,
        measure=measure.value,
        form=cost_form,
        solution=cost_solution,
    )
