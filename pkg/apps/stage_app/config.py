# Relative widening of the s*/β* caps so the feasibility optimum stays feasible after round-off.
CAP_PADDING = 1e-9
HINT_TOL = 1e-7
