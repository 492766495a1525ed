from dataclasses import dataclass
from typing import Optional, Tuple

from apps.hydro_app.config import DEFAULT_HOC_PENALTY, DEFAULT_HOC_WEIGHT


@dataclass(frozen=True)
class Reservoir:
    """Storage in hm³; releases and spills in hm³ per stage. One released hm³ yields one MWh."""

    capacity: float
    initial_storage: float
    max_release: float
    min_outflow: float = 0.0
    downstream: Optional[int] = None
    hoc_weight: float = DEFAULT_HOC_WEIGHT
    hoc_penalty: float = DEFAULT_HOC_PENALTY


@dataclass(frozen=True)
class Thermal:
    capacity: float
    unit_cost: float


@dataclass(frozen=True)
class InflowScenario:
    probability: float
    inflows: Tuple[float, ...]


@dataclass(frozen=True)
class HydroSystem:
    name: str
    reservoirs: Tuple[Reservoir, ...]
    thermals: Tuple[Thermal, ...]
    demand: Tuple[float, ...]
    inflows: Tuple[Tuple[InflowScenario, ...], ...]
    # Stages (1-based) where minimum outflows apply; None means every stage.
    hoc_stages: Optional[Tuple[int, ...]] = None

    @property
    def n_stages(self) -> int:
        return len(self.demand)

    def hoc_active(self, t: int) -> bool:
        return self.hoc_stages is None or t in self.hoc_stages


@dataclass(frozen=True)
class GenParams:
    n_reservoirs: int = 2
    n_stages: int = 3
    n_thermals: int = 1
    realizations_per_stage: int = 1
    hoc_tightness: float = 0.5
    seed: int = 0
