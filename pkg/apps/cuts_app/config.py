POLICY_FORMAT = "pfsddp-policy"
POLICY_VERSION = 1

DEFAULT_FEAS_TOL = 1e-6
# Optimality cuts only need to clear round-off to count as new.
DEFAULT_OPT_TOL = 1e-9
