PROBABILITY_SUM_TOL = 1e-9
