"""Frozen numerical defaults shared by the solvers, diagnostics and harness."""

CFL = 0.9
CRITICAL_TOL = 1e-9

N_CELLS = 400
T = 1.0
EPS_LIST = (0.2, 0.1, 0.05, 0.025)
DELTA_LIST = (0.1, 0.05, 0.025, 0.0125)

KRUZHKOV_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(1, 20))

# entropy residual: hats of half-width 0.05 in x, ~20 hats in t
RESIDUAL_X_HALFWIDTH = 0.05
RESIDUAL_TIME_TESTS = 20
# calibrated once on the stationary-shock fixture: a (0.3, 0.7) shock whose
# jump sits at a cell centre settles with one intermediate cell and leaves a
# residual of exactly 16 dx (see analysis.calibrate_entropy_constant)
ENTROPY_RESIDUAL_C = 16.0

# BLN verdicts on outermost-cell traces: flux tolerance per unit dx
BLN_TOL_PER_DX = 1.0
TRACE_VALUE_TOL_PER_DX = 4.0

YOUNG_BINS = 50
YOUNG_MIN_SAMPLES = 50
YOUNG_MIN_MODE_MASS = 0.02

DICTIONARY_VERSION = "v1"

# floor below which an error counts as converged when checking monotone decrease
ROUNDOFF_FLOOR = 1e-12
