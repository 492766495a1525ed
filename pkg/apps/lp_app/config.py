TOL_FEAS_LP = 1e-8
TOL_DUALITY = 1e-6
TOL_COMPLEMENTARITY = 1e-6
TOL_DUAL_SIGN = 1e-7

PIVOT_TOL = 1e-9
OPTIMALITY_TOL = 1e-9
PHASE_ONE_TOL = 1e-9
DEGENERATE_STEP = 1e-12

# Bland's rule takes over after this many consecutive degenerate pivots.
DEGENERACY_STREAK = 50
MAX_ITERATIONS = 50_000
REFACTOR_EVERY = 50
