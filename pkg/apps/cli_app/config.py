EXIT_BAD_INPUT = 2
EXIT_TREE_TOO_LARGE = 3
EXIT_MAX_ITERS = 4
EXIT_STRUCTURAL_INFEASIBILITY = 5
EXIT_CUTS_STABLE = 6
EXIT_NUMERICAL_FAILURE = 7

# Command-line spelling of the engine modes.
MODE_ALIASES = {
    "penalty-free": "penalty_free",
    "classic": "classic",
}

TABLE_PRECISION = 6
