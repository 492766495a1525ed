import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from apps.cuts_app.services import Policy, expected_cut
from apps.engine_app.domain import (EngineConfig, EngineMode, ForwardResult, IterationStats, PathRecord,
                                    RunReport, SimulationReport, StopReason, UpperBound)
from apps.instance_app.domain import Instance
from apps.instance_app.services import validate
from apps.lp_app.domain import LinearProgram
from apps.lp_app.services import LpBackend
from apps.stage_app.domain import FeasibilityResult, OptimalityResult
from apps.stage_app.services import slack_weights, solve_classic, solve_feasibility, solve_optimality
from core.exceptions import DimensionMismatch, InstanceValidationError, StructuralInfeasibility

logger = logging.getLogger(__name__)

# Trial states closer than this (Euclidean) are treated as one.
STATE_DEDUP_TOL = 1e-9
# Spawn key of the simulation stream; training iterations start at 1.
SIMULATION_STREAM = 0
# Relative amount by which an exact z_up may sit below z_low at convergence.
BOUND_TOL = 1e-6

T = TypeVar("T")
Path = Tuple[int, ...]


def format_iteration(stats: IterationStats) -> str:
    return (f"iteration={stats.iteration} z_low={stats.z_low!r} z_up={stats.z_up!r} "
            f"stderr={stats.z_up_stderr!r} new_feas_cuts={stats.new_feasibility_cuts} "
            f"new_opt_cuts={stats.new_optimality_cuts}")


class PathSampler:
    """
    Realization sequences for forward passes.

    Trees with at most ``leaf_limit`` leaves are enumerated with their probabilities. Larger
    trees are sampled: path ``p`` of iteration ``i`` draws from its own PCG64 stream seeded by
    ``SeedSequence(seed, spawn_key=(i, p))``, so a path never depends on how many others are drawn.
    """

    def __init__(self, instance: Instance, n_paths: int, seed: int, leaf_limit: int):
        self.instance = instance
        self.n_paths = n_paths
        self.seed = seed
        self.leaf_limit = leaf_limit

    @property
    def exact(self) -> bool:
        return self.instance.leaf_count <= self.leaf_limit

    def enumerate(self) -> List[Tuple[Path, float]]:
        stages = self.instance.stages
        paths = []
        for path in itertools.product(*(range(len(stage.realizations)) for stage in stages)):
            weight = 1.0
            for stage, k in zip(stages, path):
                weight *= stage.realizations[k].probability
            paths.append((tuple(path), weight))
        return paths

    def sample(self, stream: int) -> List[Tuple[Path, float]]:
        paths = []
        for p in range(self.n_paths):
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(stream, p)))
            path = tuple(
                int(rng.choice(len(stage.realizations), p=stage.probabilities))
                for stage in self.instance.stages
            )
            paths.append((path, 1.0 / self.n_paths))
        return paths

    def paths(self, stream: int) -> List[Tuple[Path, float]]:
        return self.enumerate() if self.exact else self.sample(stream)


class SddpEngine:
    """
    Forward/backward cut-generation loop.

    In penalty-free mode every stage first solves the feasibility problem and then the
    optimality problem capped by its slacks and β; feasibility cuts are kept per realization
    and optimality cuts are averaged over realizations. Classic mode solves the penalized stage
    problem only. Subproblem solves may run on a thread pool; the policy is mutated on the
    calling thread in a fixed order.
    """

    def __init__(self, instance: Instance, config: Optional[EngineConfig] = None,
                 policy: Optional[Policy] = None, backend: Optional[LpBackend] = None):
        issues = validate(instance)
        if issues:
            raise InstanceValidationError(issues)
        self.instance = instance
        self.config = (config or EngineConfig.from_settings()).validated()
        self.policy = policy or Policy(instance.T, instance.m)
        if self.policy.T != instance.T or self.policy.m != instance.m:
            raise DimensionMismatch(f"Policy shape (T={self.policy.T}, m={self.policy.m}) does not match "
                                    f"instance (T={instance.T}, m={instance.m})")
        self.backend = backend
        self.sampler = PathSampler(instance, self.config.n_forward_paths, self.config.seed,
                                   self.config.enumeration_leaf_limit)

    @property
    def penalty_free(self) -> bool:
        return self.config.mode == EngineMode.PENALTY_FREE

    @property
    def theta_lower_bound(self) -> float:
        if self.config.theta_lower_bound is not None:
            return self.config.theta_lower_bound
        return self.instance.theta_lower_bound

    def _map(self, fn: Callable[..., T], items: Sequence) -> List[T]:
        if self.config.threads > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    def _stage_solve(self, t: int, x_prev: np.ndarray, k: int, iteration: int = 0,
                     trial_state: int = 0) -> Tuple[Optional[FeasibilityResult], OptimalityResult]:
        if not self.penalty_free:
            decision = solve_classic(self.instance, t, x_prev, k, self.policy.fcf_next(t),
                                     penalty_override=self.config.classic_penalty,
                                     theta_lower_bound=self.theta_lower_bound, iteration=iteration,
                                     trial_state=trial_state, backend=self.backend)
            return None, decision
        fff_next = self.policy.fff_next(t)
        feasibility = solve_feasibility(self.instance, t, x_prev, k, fff_next, iteration=iteration,
                                        trial_state=trial_state, backend=self.backend)
        decision = solve_optimality(self.instance, t, x_prev, k, self.policy.fcf_next(t), fff_next,
                                    feasibility.s_star, feasibility.beta_star,
                                    theta_lower_bound=self.theta_lower_bound, iteration=iteration,
                                    trial_state=trial_state, backend=self.backend)
        return feasibility, decision

    def _follow_path(self, item: Tuple[Path, float]) -> PathRecord:
        path, weight = item
        record = PathRecord(path=path, weight=weight, stage_costs=[], penalty_costs=[], slacks=[],
                            weighted_violations=[], outgoing_states=[])
        x = self.instance.x0
        for t in range(1, self.instance.T + 1):
            _, decision = self._stage_solve(t, x, path[t - 1])
            weights = slack_weights(self.instance.stage(t))
            record.stage_costs.append(decision.stage_cost)
            record.penalty_costs.append(decision.penalty_cost)
            record.slacks.append(decision.slacks_used)
            record.weighted_violations.append(float(weights @ decision.slacks_used))
            record.outgoing_states.append(decision.outgoing_state)
            x = decision.outgoing_state
        return record

    def forward_pass(self, paths: Iterable[Tuple[Path, float]], exact: Optional[bool] = None) -> ForwardResult:
        """
        Simulate the current policy along ``paths`` and collect the distinct outgoing states per stage.

        :param paths: ``(realization indices, weight)`` pairs, one index per stage.
        :raises StructuralInfeasibility: When a visited stage problem has no point at all.
        """
        items = list(paths)
        for path, _ in items:
            if len(path) != self.instance.T or any(
                    not (0 <= k < len(stage.realizations)) for k, stage in zip(path, self.instance.stages)):
                raise DimensionMismatch(f"Path {path} does not index the scenario tree")
        records = self._map(self._follow_path, items)

        trial_states: Dict[int, List[np.ndarray]] = {t: [] for t in range(1, self.instance.T)}
        for record in records:
            for t in range(1, self.instance.T):
                state = record.outgoing_states[t - 1]
                known = trial_states[t]
                if all(np.linalg.norm(state - other) > STATE_DEDUP_TOL for other in known):
                    known.append(state)
        return ForwardResult(records=records, trial_states=trial_states,
                             exact=self.sampler.exact if exact is None else exact)

    def backward_pass(self, trial_states: Dict[int, List[np.ndarray]], iteration: int = 0) -> Tuple[int, int]:
        """
        Generate cuts from stage ``T`` down to stage 1.

        Stage ``t`` is solved at the outgoing states of stage ``t - 1`` (the initial state for
        ``t = 1``) under every realization. Cuts land in the stage-``t`` pools before stage
        ``t - 1`` is solved.

        :return: Numbers of new feasibility and optimality cuts.
        """
        new_feas, new_opt = 0, 0
        for t in range(self.instance.T, 0, -1):
            states = [self.instance.x0] if t == 1 else trial_states.get(t - 1, [])
            stage = self.instance.stage(t)
            K = len(stage.realizations)
            tasks = [(i, x, k) for i, x in enumerate(states) for k in range(K)]
            results = self._map(lambda task: self._stage_solve(t, task[1], task[2], iteration, task[0]), tasks)

            for i, x in enumerate(states):
                per_realization = results[i * K:(i + 1) * K]
                if self.penalty_free:
                    for feasibility, _ in per_realization:
                        if self.policy.fff[t].add_if_novel(feasibility.cut, x, self.config.feas_tol):
                            new_feas += 1
                aggregated = expected_cut([
                    (stage.realizations[k].probability, decision.cut)
                    for k, (_, decision) in enumerate(per_realization)
                ])
                if self.policy.fcf[t].add_if_novel(aggregated, x, self.config.opt_tol):
                    new_opt += 1
        return new_feas, new_opt

    def root_solve(self) -> OptimalityResult:
        return self._stage_solve(1, self.instance.x0, 0)[1]

    def lower_bound(self) -> float:
        return self.root_solve().objective_value

    def root_problems(self) -> Dict[str, LinearProgram]:
        """Stage-1 problems under the current policy, keyed by problem name."""
        feasibility, decision = self._stage_solve(1, self.instance.x0, 0)
        problems = {feasibility.lp.name: feasibility.lp} if feasibility is not None else {}
        problems[decision.lp.name] = decision.lp
        return problems

    def fff_at_root(self) -> float:
        return self.policy.fff[1].evaluate(self.instance.x0)

    def _estimate(self, forward: ForwardResult, value: Callable[[PathRecord], float]) -> UpperBound:
        values = np.array([value(record) for record in forward.records], dtype=float)
        weights = np.array([record.weight for record in forward.records], dtype=float)
        if forward.exact:
            return UpperBound(mean=float(weights @ values), stderr=0.0, exact=True)
        stderr = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        return UpperBound(mean=float(values.mean()), stderr=stderr, exact=False)

    def upper_bound_from(self, forward: ForwardResult) -> UpperBound:
        """Policy cost estimate; classic mode prices slack at its penalty, penalty-free mode never does."""
        if self.penalty_free:
            return self._estimate(forward, lambda record: record.cost)
        return self._estimate(forward, lambda record: record.penalized_cost)

    def upper_bound(self, n_paths: Optional[int] = None, seed: Optional[int] = None) -> UpperBound:
        sampler = PathSampler(self.instance, n_paths or self.config.n_forward_paths,
                              self.config.seed if seed is None else seed, self.config.enumeration_leaf_limit)
        return self.upper_bound_from(self.forward_pass(sampler.paths(SIMULATION_STREAM), exact=sampler.exact))

    def simulate(self, n_paths: Optional[int] = None, seed: Optional[int] = None) -> SimulationReport:
        """
        Per-path costs and slacks of the current policy, with slack totals per ``(stage, label)``,
        per label and per label prefix. Totals are probability-weighted for enumerated trees and
        sample means otherwise.
        """
        sampler = PathSampler(self.instance, n_paths or self.config.n_forward_paths,
                              self.config.seed if seed is None else seed, self.config.enumeration_leaf_limit)
        forward = self.forward_pass(sampler.paths(SIMULATION_STREAM), exact=sampler.exact)
        cost = self._estimate(forward, lambda record: record.cost)
        violation = self._estimate(forward, lambda record: record.violation)

        by_stage_label: Dict[Tuple[int, str], float] = {}
        paths = []
        for record in forward.records:
            slacks = []
            for t, stage_slacks in enumerate(record.slacks, start=1):
                stage = self.instance.stage(t)
                for position, i in enumerate(stage.relaxable_rows):
                    label = stage.rows[i].label or f"row{i}"
                    amount = float(stage_slacks[position])
                    slacks.append({"stage": t, "label": label, "slack": amount})
                    by_stage_label[(t, label)] = by_stage_label.get((t, label), 0.0) + record.weight * amount
            paths.append({
                "path": list(record.path),
                "weight": record.weight,
                "stage_costs": list(record.stage_costs),
                "cost": record.cost,
                "penalty_cost": float(sum(record.penalty_costs)),
                "violation": record.violation,
                "slacks": slacks,
            })

        by_label: Dict[str, float] = {}
        by_prefix: Dict[str, float] = {}
        for (_, label), amount in by_stage_label.items():
            by_label[label] = by_label.get(label, 0.0) + amount
            prefix = label.split(":", 1)[0]
            by_prefix[prefix] = by_prefix.get(prefix, 0.0) + amount

        return SimulationReport(
            paths=paths,
            expected_cost=cost.mean,
            cost_stderr=cost.stderr,
            expected_violation=violation.mean,
            worst_path_violation=max((record.violation for record in forward.records), default=0.0),
            by_stage_label=[
                {"stage": t, "label": label, "slack": amount}
                for (t, label), amount in sorted(by_stage_label.items())
            ],
            by_label=by_label,
            by_prefix=by_prefix,
            exact=forward.exact,
        )

    def run(self) -> RunReport:
        """
        Iterate forward pass, backward pass and bound update until the relative gap closes and,
        in penalty-free mode, the backward pass adds no feasibility cut.

        With an exact z_up, convergence also needs z_low at most z_up, and an iteration that adds
        no cut stops the run as ``cuts_stable``. Optimality cuts hold the violation caps of their
        trial state fixed, so they can overshoot the cost-to-go elsewhere; ``bound_crossing``
        reports by how much.
        """
        config = self.config
        started = time.perf_counter()
        report = RunReport(instance=self.instance.name, mode=config.mode, converged=False,
                           reason=StopReason.MAX_ITERS.value, config=config.to_dict(), policy=self.policy)
        logger.info("Solving '%s' in %s mode (max_iters=%d, gap=%g)", self.instance.name, config.mode,
                    config.max_iters, config.gap_epsilon)
        try:
            for iteration in range(1, config.max_iters + 1):
                iteration_started = time.perf_counter()
                forward = self.forward_pass(self.sampler.paths(iteration))
                upper = self.upper_bound_from(forward)
                violation = self._estimate(forward, lambda record: record.violation)
                new_feas, new_opt = self.backward_pass(forward.trial_states, iteration)
                z_low = self.lower_bound()
                crossing = max(0.0, z_low - upper.mean) if upper.exact else 0.0

                stats = IterationStats(
                    iteration=iteration,
                    z_low=z_low,
                    z_up=upper.mean,
                    z_up_stderr=upper.stderr,
                    new_feasibility_cuts=new_feas,
                    new_optimality_cuts=new_opt,
                    fff_at_root=self.fff_at_root(),
                    expected_violation=violation.mean,
                    bound_crossing=crossing,
                    wall_time=time.perf_counter() - iteration_started,
                )
                report.iterations.append(stats)
                logger.info(format_iteration(stats))

                gap = abs(upper.mean - z_low) / max(1.0, abs(upper.mean))
                feasibility_stable = new_feas == 0 or not self.penalty_free
                bounds_ordered = crossing <= BOUND_TOL * max(1.0, abs(upper.mean))
                if feasibility_stable and bounds_ordered and gap <= config.gap_epsilon:
                    report.converged = True
                    report.reason = StopReason.GAP_AND_FEAS_STABLE.value
                    break
                # An exact forward pass that adds no cut repeats itself on every later iteration.
                if forward.exact and new_feas == 0 and new_opt == 0:
                    logger.warning("'%s' added no cuts at iteration %d with z_low=%r z_up=%r; stopping",
                                   self.instance.name, iteration, z_low, upper.mean)
                    report.reason = StopReason.CUTS_STABLE.value
                    break
            else:
                logger.warning("'%s' stopped after %d iterations without convergence",
                               self.instance.name, config.max_iters)
        except StructuralInfeasibility as exc:
            logger.error("Run on '%s' aborted: %s", self.instance.name, exc)
            report.reason = StopReason.STRUCTURAL_INFEASIBILITY.value
            report.message = str(exc)
            report.failed_stage = exc.stage
            report.wall_time = time.perf_counter() - started
            return report

        self._summarize(report)
        report.wall_time = time.perf_counter() - started
        logger.info("Run on '%s' finished: %s after %d iteration(s)", self.instance.name, report.reason,
                    len(report.iterations))
        return report

    def _summarize(self, report: RunReport):
        last = report.iterations[-1]
        simulation = self.simulate()
        root = self.root_solve()
        report.simulation = simulation
        report.violation_summary = simulation.by_stage_label
        report.first_stage_decision = [float(v) for v in root.x_t]
        report.fff_at_root = self.fff_at_root()
        report.z_low = last.z_low
        report.z_up = last.z_up
        report.z_up_stderr = last.z_up_stderr
        report.z_up_interval = [last.z_up - self.config.confidence_z * last.z_up_stderr,
                                last.z_up + self.config.confidence_z * last.z_up_stderr]
        report.operation_cost = simulation.expected_cost
        report.weighted_violation = simulation.expected_violation
        report.worst_path_violation = simulation.worst_path_violation
        report.bound_crossing = last.bound_crossing
