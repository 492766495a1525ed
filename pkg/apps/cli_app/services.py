import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from django.core.management.base import CommandError

from apps.cli_app import config
from apps.cuts_app.services import Policy, deserialize_policy
from apps.engine_app.domain import EngineConfig, EngineMode, RunReport
from apps.engine_app.services import SddpEngine
from apps.instance_app.domain import Instance
from apps.instance_app.services import load_instance
from apps.lp_app.extensive.services import HierarchicalResult, ViolationMeasure, solve_hierarchical
from apps.stage_app.services import slack_weights
from core.exceptions import ConfigurationError, DimensionMismatch, InstanceValidationError, ParseError

logger = logging.getLogger(__name__)


def read_input(path: Union[str, Path], what: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CommandError(f"Cannot read {what} '{path}': {exc.strerror or exc}",
                           returncode=config.EXIT_BAD_INPUT) from exc


def write_output(path: Union[str, Path], payload: Union[bytes, str]) -> Path:
    target = Path(path)
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    try:
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    except OSError as exc:
        raise CommandError(f"Cannot write '{path}': {exc.strerror or exc}",
                           returncode=config.EXIT_BAD_INPUT) from exc
    logger.debug("Wrote %d bytes to %s", len(data), target)
    return target


def engine_config(mode: str, **overrides) -> EngineConfig:
    """
    Engine configuration from settings plus command-line overrides.

    :raises CommandError: With the bad-input exit code on invalid values.
    """
    try:
        return EngineConfig.from_settings(mode=config.MODE_ALIASES.get(mode, mode), **overrides)
    except ConfigurationError as exc:
        raise CommandError(str(exc), returncode=config.EXIT_BAD_INPUT) from exc


def format_number(value: Optional[float]) -> str:
    if value is None:
        return "-"
    rounded = round(float(value), config.TABLE_PRECISION)
    return f"{rounded + 0.0:.{config.TABLE_PRECISION}g}"


def render_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in headers]] + [
        [format_number(v) if isinstance(v, float) or v is None else str(v) for v in row] for row in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


@dataclass
class MethodRow:
    method: str
    operation_cost: float
    violation_cost: float
    iterations: Optional[int] = None
    converged: bool = True
    penalty_cost: Optional[float] = None
    classic_penalty: Optional[float] = None
    wall_time: float = 0.0


@dataclass
class CompareReport:
    instance: str
    gap_epsilon: float
    measure: str
    rows: List[MethodRow] = field(default_factory=list)
    violations: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        rows = []
        for row in self.rows:
            data = asdict(row)
            if not include_timing:
                data.pop("wall_time")
            rows.append(data)
        return {
            "instance": self.instance,
            "gap_epsilon": self.gap_epsilon,
            "measure": self.measure,
            "rows": rows,
            "violations": self.violations,
        }

    def render(self) -> str:
        headers = ["method", "penalty", "operation_cost", "violation_cost", "iterations", "wall_time"]
        rows = [
            [row.method, row.classic_penalty, row.operation_cost, row.violation_cost,
             "-" if row.iterations is None else row.iterations, round(row.wall_time, 3)]
            for row in self.rows
        ]
        table = render_table(headers, rows)
        columns = [self._column(row) for row in self.rows]
        labels = sorted({label for per_method in self.violations.values() for label in per_method})
        if not labels:
            return table
        violation_rows = [[label] + [self.violations[c].get(label, 0.0) for c in columns] for label in labels]
        return table + "\n\n" + render_table(["label"] + columns, violation_rows)

    @staticmethod
    def _column(row: MethodRow) -> str:
        return row.method if row.classic_penalty is None else f"{row.method}(p={row.classic_penalty:g})"


def _oracle_violations(instance: Instance, oracle: HierarchicalResult) -> Dict[str, float]:
    totals: Dict[str, float] = {}
    for node in oracle.form.nodes:
        stage = instance.stage(node.stage)
        slacks = oracle.form.node_slacks(oracle.solution, node)
        for position, i in enumerate(stage.relaxable_rows):
            label = stage.rows[i].label or f"row{i}"
            totals[label] = totals.get(label, 0.0) + node.probability * max(0.0, float(slacks[position]))
    return totals


def _oracle_violation_cost(instance: Instance, oracle: HierarchicalResult) -> float:
    total = 0.0
    for node in oracle.form.nodes:
        slacks = np.maximum(oracle.form.node_slacks(oracle.solution, node), 0.0)
        total += node.probability * float(slack_weights(instance.stage(node.stage)) @ slacks)
    return total


def _sddp_row(method: str, report: RunReport, classic_penalty: Optional[float] = None) -> MethodRow:
    simulation = report.simulation
    penalty = None
    if method == "classic" and simulation is not None:
        penalty = float(sum(p["weight"] * p["penalty_cost"] for p in simulation.paths))
    return MethodRow(
        method=method,
        operation_cost=report.operation_cost,
        violation_cost=report.weighted_violation,
        iterations=len(report.iterations),
        converged=report.converged,
        penalty_cost=penalty,
        classic_penalty=classic_penalty,
        wall_time=report.wall_time,
    )


def build_compare_report(instance: Instance, gap_epsilon: float, classic_penalties: Sequence[float],
                         measure: str = ViolationMeasure.EXPECTED, **overrides) -> CompareReport:
    """
    Solve ``instance`` with the hierarchical extensive oracle, classic SDDP for every penalty and
    penalty-free SDDP under the same gap.

    Violation columns are weighted slack totals for every method; classic penalties are reported
    in their own column and never added to the operation cost.

    :raises TreeTooLarge: When the scenario tree cannot be enumerated.
    """
    report = CompareReport(instance=instance.name, gap_epsilon=gap_epsilon, measure=ViolationMeasure(measure).value)

    started = time.perf_counter()
    oracle = solve_hierarchical(instance, measure=measure)
    report.rows.append(MethodRow(
        method="extensive",
        operation_cost=oracle.C_star,
        violation_cost=_oracle_violation_cost(instance, oracle),
        wall_time=time.perf_counter() - started,
    ))
    report.violations["extensive"] = _oracle_violations(instance, oracle)

    for penalty in classic_penalties:
        classic = SddpEngine(instance, engine_config(EngineMode.CLASSIC, gap_epsilon=gap_epsilon,
                                                     classic_penalty=penalty, **overrides)).run()
        row = _sddp_row("classic", classic, classic_penalty=penalty)
        report.rows.append(row)
        report.violations[CompareReport._column(row)] = dict(classic.simulation.by_label) if classic.simulation else {}

    penalty_free = SddpEngine(instance, engine_config(EngineMode.PENALTY_FREE, gap_epsilon=gap_epsilon,
                                                      **overrides)).run()
    report.rows.append(_sddp_row("penalty_free", penalty_free))
    report.violations["penalty_free"] = dict(penalty_free.simulation.by_label) if penalty_free.simulation else {}
    logger.info("Compared %d method(s) on '%s'", len(report.rows), instance.name)
    return report


def load_instance_file(path: Union[str, Path]) -> Instance:
    try:
        return load_instance(read_input(path, "instance"))
    except (ParseError, InstanceValidationError) as exc:
        raise CommandError(f"Invalid instance '{path}': {exc}", returncode=config.EXIT_BAD_INPUT) from exc


def load_policy_file(path: Union[str, Path]) -> Policy:
    try:
        return deserialize_policy(read_input(path, "policy"))
    except ParseError as exc:
        raise CommandError(f"Invalid policy '{path}': {exc}", returncode=config.EXIT_BAD_INPUT) from exc


def build_engine(instance: Instance, engine_cfg: EngineConfig, policy: Optional[Policy] = None) -> SddpEngine:
    try:
        return SddpEngine(instance, engine_cfg, policy=policy)
    except DimensionMismatch as exc:
        raise CommandError(str(exc), returncode=config.EXIT_BAD_INPUT) from exc
