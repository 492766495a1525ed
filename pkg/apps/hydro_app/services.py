import logging
import math
from typing import Dict, List, Optional, Union

import numpy as np

from apps.hydro_app import config
from apps.hydro_app.domain import GenParams, HydroSystem, InflowScenario, Reservoir, Thermal
from apps.hydro_app.serializers import HydroSystemSerializer
from apps.instance_app.domain import Instance, Realization, Row, StageData
from apps.lp_app.domain import Sense
from core.documents import parse_document, render_document
from core.exceptions import ConfigurationError, ParseError, TopologyError

logger = logging.getLogger(__name__)


def storage_var(r: int) -> int:
    return 3 * r


def release_var(r: int) -> int:
    return 3 * r + 1


def spill_var(r: int) -> int:
    return 3 * r + 2


def check_topology(system: HydroSystem) -> None:
    """
    Reject cascades whose downstream links form a cycle.

    :raises ConfigurationError: When a downstream index points outside the reservoir list.
    :raises TopologyError: When following downstream links revisits a reservoir.
    """
    count = len(system.reservoirs)
    for r, reservoir in enumerate(system.reservoirs):
        if reservoir.downstream is not None and not (0 <= reservoir.downstream < count):
            raise ConfigurationError(f"Reservoir {r} points to unknown downstream reservoir {reservoir.downstream}")

    for start in range(count):
        chain: List[int] = []
        current: Optional[int] = start
        while current is not None:
            if current in chain:
                cycle = chain[chain.index(current):]
                raise TopologyError(cycle)
            chain.append(current)
            current = system.reservoirs[current].downstream


def _spill_bound(system: HydroSystem) -> float:
    water = sum(r.capacity + r.initial_storage for r in system.reservoirs)
    for scenarios in system.inflows:
        water += max(sum(s.inflows) for s in scenarios)
    return float(water)


def compile_system(system: HydroSystem) -> Instance:
    """
    Compile a hydrothermal system into a multistage instance.

    Per stage the variables are ``(storage, release, spill)`` for every reservoir followed by
    one generation variable per thermal plant. Rows are the water balances, the demand balance
    and, where active, the relaxable minimum total outflows. Storage is the state.

    :param system: System to compile.
    :type system: HydroSystem
    :return: Instance with ``m`` equal to the number of reservoirs.
    :rtype: Instance
    :raises TopologyError: If the cascade contains a cycle.
    """
    check_topology(system)
    R, J = len(system.reservoirs), len(system.thermals)
    n = 3 * R + J
    spill_upper = _spill_bound(system)

    upstream: Dict[int, List[int]] = {r: [] for r in range(R)}
    for r, reservoir in enumerate(system.reservoirs):
        if reservoir.downstream is not None:
            upstream[reservoir.downstream].append(r)

    var_upper = []
    for reservoir in system.reservoirs:
        var_upper.extend([reservoir.capacity, reservoir.max_release, spill_upper])
    var_upper.extend(thermal.capacity for thermal in system.thermals)
    cost = tuple([0.0] * (3 * R) + [thermal.unit_cost for thermal in system.thermals])

    stages = []
    for t in range(1, system.n_stages + 1):
        rows: List[Row] = []
        link = []
        for r in range(R):
            coeffs = [(storage_var(r), 1.0), (release_var(r), 1.0), (spill_var(r), 1.0)]
            for up in upstream[r]:
                coeffs.extend([(release_var(up), -1.0), (spill_var(up), -1.0)])
            link.append((len(rows), r, -1.0))
            rows.append(Row(coeffs=tuple(coeffs), sense=Sense.EQ, label=f"{config.WATER_BALANCE_LABEL}:{r}"))

        demand_coeffs = [(release_var(r), 1.0) for r in range(R)]
        demand_coeffs += [(3 * R + j, 1.0) for j in range(J)]
        rows.append(Row(coeffs=tuple(demand_coeffs), sense=Sense.GE, label=config.DEMAND_LABEL))

        hoc_rhs = []
        if system.hoc_active(t):
            for r, reservoir in enumerate(system.reservoirs):
                if reservoir.min_outflow <= 0:
                    continue
                rows.append(Row(
                    coeffs=((release_var(r), 1.0), (spill_var(r), 1.0)),
                    sense=Sense.GE,
                    relaxable=True,
                    slack_weight=reservoir.hoc_weight,
                    penalty_weight=reservoir.hoc_penalty,
                    label=f"{config.MIN_OUTFLOW_LABEL}:{r}",
                ))
                hoc_rhs.append(reservoir.min_outflow)

        realizations = tuple(
            Realization(
                probability=scenario.probability,
                rhs=tuple(scenario.inflows) + (system.demand[t - 1],) + tuple(hoc_rhs),
            )
            for scenario in system.inflows[t - 1]
        )
        stages.append(StageData(
            n=n,
            rows=tuple(rows),
            cost=cost,
            link=tuple(link),
            state_indices=tuple(storage_var(r) for r in range(R)),
            realizations=realizations,
            var_upper=tuple(float(u) for u in var_upper),
        ))

    instance = Instance(
        name=system.name,
        T=system.n_stages,
        m=R,
        initial_state=tuple(r.initial_storage for r in system.reservoirs),
        stages=tuple(stages),
    )
    logger.debug("Compiled system '%s' into %d stages with %d variables each", system.name, instance.T, n)
    return instance


def _round(value: float) -> float:
    return float(np.round(value, config.DECIMALS))


def generate(params: GenParams) -> HydroSystem:
    """
    Draw a reproducible hydrothermal system.

    Reservoir ``r`` may drain into ``r + 1``, so cascades are acyclic. Thermal capacity always
    covers demand. Minimum outflows scale with ``hoc_tightness`` between zero and a level above
    the total water that can ever reach the reservoir, spread over the horizon.

    :raises ConfigurationError: When a count is below one or the tightness leaves ``[0, 1]``.
    """
    if min(params.n_reservoirs, params.n_stages, params.n_thermals, params.realizations_per_stage) < 1:
        raise ConfigurationError("Reservoir, stage, thermal and realization counts must be at least 1")
    if not (0.0 <= params.hoc_tightness <= 1.0):
        raise ConfigurationError("hoc_tightness must lie in [0, 1]")

    rng = np.random.default_rng(params.seed)
    R, T = params.n_reservoirs, params.n_stages

    capacities = [_round(rng.uniform(*config.CAPACITY_RANGE)) for _ in range(R)]
    initial = [_round(c * rng.uniform(*config.INITIAL_FILL_RANGE)) for c in capacities]
    max_release = [_round(c * rng.uniform(*config.RELEASE_SHARE_RANGE)) for c in capacities]
    downstream: List[Optional[int]] = [
        r + 1 if r + 1 < R and rng.uniform() < config.CASCADE_LINK_PROBABILITY else None
        for r in range(R)
    ]
    mean_inflow = [rng.uniform(*config.MEAN_INFLOW_RANGE) for _ in range(R)]

    inflows = []
    for t in range(1, T + 1):
        count = 1 if t == 1 else params.realizations_per_stage
        scenarios = []
        for _ in range(count):
            values = tuple(_round(rng.uniform(0.0, 2.0 * mean)) if t > 1 else _round(mean) for mean in mean_inflow)
            scenarios.append(InflowScenario(probability=1.0 / count, inflows=values))
        inflows.append(tuple(scenarios))

    hydro_power = sum(max_release)
    demand = tuple(_round(hydro_power * rng.uniform(*config.DEMAND_SHARE_RANGE)) for _ in range(T))
    thermal_share = max(demand) * config.THERMAL_MARGIN / params.n_thermals
    thermals = tuple(
        Thermal(capacity=_round(thermal_share + 1.0), unit_cost=_round(rng.uniform(*config.UNIT_COST_RANGE)))
        for _ in range(params.n_thermals)
    )

    # Water that can ever reach each reservoir: own storage and worst-case inflows plus everything upstream.
    reachable = [initial[r] + sum(max(s.inflows[r] for s in inflows[t]) for t in range(T)) for r in range(R)]
    for r in range(R):
        if downstream[r] is not None:
            reachable[downstream[r]] += reachable[r]
    min_outflow = [
        _round(params.hoc_tightness * (math.ceil(reachable[r] / T) + 1.0)) for r in range(R)
    ]

    reservoirs = tuple(
        Reservoir(
            capacity=capacities[r],
            initial_storage=initial[r],
            max_release=max_release[r],
            min_outflow=min_outflow[r],
            downstream=downstream[r],
        )
        for r in range(R)
    )
    name = (f"hydro-r{R}-t{T}-j{params.n_thermals}-k{params.realizations_per_stage}"
            f"-h{params.hoc_tightness:g}-s{params.seed}")
    system = HydroSystem(name=name, reservoirs=reservoirs, thermals=thermals, demand=demand,
                         inflows=tuple(inflows))
    logger.info("Generated system '%s'", name)
    return system


def _toy(name: str, initial_storage: float) -> HydroSystem:
    reservoir = Reservoir(capacity=10.0, initial_storage=initial_storage, max_release=10.0, min_outflow=3.0)
    deterministic = (
        (InflowScenario(1.0, (2.0,)),),
        (InflowScenario(1.0, (0.0,)),),
        (InflowScenario(1.0, (0.0,)),),
    )
    return HydroSystem(
        name=name,
        reservoirs=(reservoir,),
        thermals=(Thermal(capacity=10.0, unit_cost=10.0),),
        demand=(4.0, 4.0, 4.0),
        inflows=deterministic,
    )


def fixtures() -> Dict[str, HydroSystem]:
    stochastic = HydroSystem(
        name="toy_stochastic",
        reservoirs=(Reservoir(capacity=10.0, initial_storage=3.0, max_release=10.0, min_outflow=3.0),),
        thermals=(Thermal(capacity=10.0, unit_cost=10.0),),
        demand=(4.0, 4.0),
        inflows=(
            (InflowScenario(1.0, (2.0,)),),
            (InflowScenario(0.5, (0.0,)), InflowScenario(0.5, (4.0,))),
        ),
        hoc_stages=(2,),
    )
    return {
        "toy_feasible": _toy("toy_feasible", 7.0),
        "toy_infeasible": _toy("toy_infeasible", 5.0),
        "toy_stochastic": stochastic,
    }


def fixture_instance(name: str) -> Instance:
    systems = fixtures()
    if name not in systems:
        raise ConfigurationError(f"Unknown fixture '{name}', expected one of {sorted(systems)}")
    return compile_system(systems[name])


def system_to_data(system: HydroSystem) -> dict:
    return dict(HydroSystemSerializer(system).data)


def dump_system(system: HydroSystem) -> bytes:
    return render_document(system_to_data(system))


def load_system(raw: Union[bytes, str]) -> HydroSystem:
    serializer = HydroSystemSerializer(data=parse_document(raw, "system document"))
    if not serializer.is_valid():
        raise ParseError("Malformed system document", errors=serializer.errors)
    system = serializer.save()
    check_topology(system)
    return system
