"""Shared numerical tolerances.

Every module reads its tolerances from here so that a single number governs
feasibility decisions across the whole toolkit.
"""

# Absolute tolerance on linear constraint residuals.  A point satisfies
# <a, z> <= b when <a, z> - b <= FEAS_TOL.
FEAS_TOL = 1e-9

# Angular tolerance (radians-scale chord distance on the unit sphere) for
# comparing cones produced by exact computations.
ANGULAR_TOL_EXACT = 1e-9

# Angular tolerance for cones assembled from sampled data.
ANGULAR_TOL_SAMPLED = 1e-3

# Ratio samples above this cap are treated as infinite and raise the
# estimator failure flag.
RATIO_CAP = 1e9

# Default relative tolerance for the criterion equality check
# (estimator error budget, not a statement about the theory).
CRITERION_REL_TOL = 0.05
