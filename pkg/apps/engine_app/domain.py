from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings
from django.db import models

from core.exceptions import ConfigurationError


class EngineMode(models.TextChoices):
    PENALTY_FREE = "penalty_free", "Penalty-free"
    CLASSIC = "classic", "Classic penalized"


class StopReason(models.TextChoices):
    GAP_AND_FEAS_STABLE = "gap_and_feas_stable", "Gap closed and feasibility cuts stable"
    CUTS_STABLE = "cuts_stable", "No new cuts with the gap still open"
    MAX_ITERS = "max_iters", "Iteration limit"
    STRUCTURAL_INFEASIBILITY = "structural_infeasibility", "Structural infeasibility"


_SETTINGS_KEYS = {
    "max_iters": "MAX_ITERS",
    "gap_epsilon": "GAP_EPSILON",
    "feas_tol": "FEAS_TOL",
    "opt_tol": "OPT_TOL",
    "n_forward_paths": "FORWARD_PATHS",
    "seed": "SEED",
    "theta_lower_bound": "THETA_LOWER_BOUND",
    "confidence_z": "CONFIDENCE_Z",
    "enumeration_leaf_limit": "ENUMERATION_LEAF_LIMIT",
    "threads": "THREADS",
}


@dataclass(frozen=True)
class EngineConfig:
    mode: str = EngineMode.PENALTY_FREE
    max_iters: int = 200
    gap_epsilon: float = 0.005
    feas_tol: float = 1e-6
    opt_tol: float = 1e-9
    n_forward_paths: int = 20
    seed: int = 0
    # None defers to the instance's own bound.
    theta_lower_bound: Optional[float] = None
    confidence_z: float = 1.96
    enumeration_leaf_limit: int = 64
    threads: int = 1
    classic_penalty: Optional[float] = None

    @classmethod
    def from_settings(cls, **overrides) -> "EngineConfig":
        """
        Build a configuration from ``settings.PFSDDP`` with keyword overrides on top.

        Overrides set to ``None`` are ignored, except for the optional fields.

        :raises ConfigurationError: On unknown keys or invalid values.
        """
        defaults = getattr(settings, "PFSDDP", {})
        values: Dict[str, Any] = {}
        for attr, key in _SETTINGS_KEYS.items():
            if key in defaults:
                values[attr] = defaults[key]
        known = {f.name for f in fields(cls)}
        for key, value in overrides.items():
            if key not in known:
                raise ConfigurationError(f"Unknown engine option '{key}'")
            if value is None and key not in ("theta_lower_bound", "classic_penalty"):
                continue
            values[key] = value
        return cls(**values).validated()

    def validated(self) -> "EngineConfig":
        try:
            mode = EngineMode(self.mode)
        except ValueError as exc:
            raise ConfigurationError(f"Unknown mode '{self.mode}'") from exc
        checks = [
            (self.gap_epsilon > 0, "gap_epsilon must be positive"),
            (self.max_iters >= 1, "max_iters must be at least 1"),
            (self.n_forward_paths >= 1, "n_forward_paths must be at least 1"),
            (self.feas_tol >= 0, "feas_tol must be nonnegative"),
            (self.opt_tol >= 0, "opt_tol must be nonnegative"),
            (self.threads >= 1, "threads must be at least 1"),
            (self.enumeration_leaf_limit >= 1, "enumeration_leaf_limit must be at least 1"),
            (self.confidence_z >= 0, "confidence_z must be nonnegative"),
            (self.seed >= 0, "seed must be nonnegative"),
            (self.classic_penalty is None or self.classic_penalty >= 0, "classic_penalty must be nonnegative"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        return replace(self, mode=mode.value)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IterationStats:
    iteration: int
    z_low: float
    z_up: float
    z_up_stderr: float
    new_feasibility_cuts: int
    new_optimality_cuts: int
    fff_at_root: float
    expected_violation: float
    # max(0, z_low - z_up) when z_up is exact, zero otherwise.
    bound_crossing: float = 0.0
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        data = asdict(self)
        if not include_timing:
            data.pop("wall_time")
        return data


@dataclass
class PathRecord:
    path: Tuple[int, ...]
    weight: float
    stage_costs: List[float]
    penalty_costs: List[float]
    slacks: List[np.ndarray]
    weighted_violations: List[float]
    outgoing_states: List[np.ndarray]

    @property
    def cost(self) -> float:
        return float(sum(self.stage_costs))

    @property
    def penalized_cost(self) -> float:
        return self.cost + float(sum(self.penalty_costs))

    @property
    def violation(self) -> float:
        return float(sum(self.weighted_violations))


@dataclass
class ForwardResult:
    records: List[PathRecord]
    trial_states: Dict[int, List[np.ndarray]]
    exact: bool

    @property
    def path_costs(self) -> List[float]:
        return [record.cost for record in self.records]

    @property
    def path_slacks(self) -> List[List[np.ndarray]]:
        return [record.slacks for record in self.records]


@dataclass
class UpperBound:
    mean: float
    stderr: float
    exact: bool

    def interval(self, z: float) -> Tuple[float, float]:
        return self.mean - z * self.stderr, self.mean + z * self.stderr


@dataclass
class SimulationReport:
    paths: List[dict]
    expected_cost: float
    cost_stderr: float
    expected_violation: float
    worst_path_violation: float
    by_stage_label: List[dict]
    by_label: Dict[str, float]
    by_prefix: Dict[str, float]
    exact: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    instance: str
    mode: str
    converged: bool
    reason: str
    iterations: List[IterationStats] = field(default_factory=list)
    violation_summary: List[dict] = field(default_factory=list)
    first_stage_decision: List[float] = field(default_factory=list)
    fff_at_root: float = 0.0
    z_low: Optional[float] = None
    z_up: Optional[float] = None
    z_up_stderr: Optional[float] = None
    z_up_interval: Optional[List[float]] = None
    operation_cost: Optional[float] = None
    weighted_violation: Optional[float] = None
    worst_path_violation: Optional[float] = None
    bound_crossing: float = 0.0
    message: str = ""
    failed_stage: Optional[int] = None
    config: Dict[str, Any] = field(default_factory=dict)
    policy: Any = field(default=None, repr=False)
    simulation: Optional[SimulationReport] = field(default=None, repr=False)
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        data = {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name not in ("policy", "simulation", "iterations", "wall_time")
        }
        data["iterations"] = [stats.to_dict(include_timing) for stats in self.iterations]
        data["simulation"] = self.simulation.to_dict() if self.simulation else None
        if include_timing:
            data["wall_time"] = self.wall_time
        else:
            data["config"] = {key: value for key, value in self.config.items() if key != "threads"}
        return data
