DEFAULT_HOC_WEIGHT = 1.0
DEFAULT_HOC_PENALTY = 1000.0

WATER_BALANCE_LABEL = "water_balance"
DEMAND_LABEL = "demand"
MIN_OUTFLOW_LABEL = "min_outflow"

CAPACITY_RANGE = (8.0, 20.0)
INITIAL_FILL_RANGE = (0.3, 0.7)
RELEASE_SHARE_RANGE = (0.5, 1.0)
MEAN_INFLOW_RANGE = (1.0, 5.0)
UNIT_COST_RANGE = (5.0, 50.0)
DEMAND_SHARE_RANGE = (0.6, 1.2)
CASCADE_LINK_PROBABILITY = 0.6
THERMAL_MARGIN = 1.25
DECIMALS = 3
