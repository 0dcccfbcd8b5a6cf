"""
Constants for the cdual package.

Numerical defaults, enumeration caps, exit codes and report field names used
throughout the core modules and the CLI. Runtime overrides live in
`cdual.config`.
"""

# ==============================================================================
# TOLERANCES
# ==============================================================================

DEFAULT_TOL = 1e-9
DEFAULT_TIE_TOL = 1e-6
DEFAULT_DUALITY_TOL = 1e-6
DEFAULT_INTEGRAL_TOL = 1e-8
DEFAULT_GRAPH_TOL = 1e-8
SUPPORT_TOL_FACTOR = 1e-9
MEASURE_SUM_TOL = 1e-12
MARGINAL_TOL = 1e-9
IDENTITY_TOL = 1e-12
TRIANGLE_RTOL = 1e-12

# Below this absolute deviation a finite-difference sweep is treated as exact
CONVERGENCE_NOISE_FLOOR = 1e-6


# ==============================================================================
# ITERATION LIMITS
# ==============================================================================

DEFAULT_MAX_ITER = 10_000


# ==============================================================================
# ENUMERATION CAPS
# ==============================================================================

DEFAULT_MAX_CYCLE_ORDER = 5
DEFAULT_CYCLE_CAPS = {
    3: 40,
    4: 20,
    5: 12,
}

# Max-plus products are evaluated in row chunks of at most this many cells
MAXPLUS_CHUNK_CELLS = 4_000_000


# ==============================================================================
# LP BACKENDS
# ==============================================================================

BACKEND_NETWORK_SIMPLEX = "network_simplex"
BACKEND_HIGHS = "highs"
LP_BACKENDS = (BACKEND_NETWORK_SIMPLEX, BACKEND_HIGHS)
NETWORK_SIMPLEX_MAX_ITER = 1_000_000
HIGHS_FEASIBILITY_TOL = 1e-10


# ==============================================================================
# EXIT CODES
# ==============================================================================

EXIT_OK = 0
EXIT_ASSERTION_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_RESOURCE_LIMIT = 3
EXIT_SOLVER_FAILURE = 4


# ==============================================================================
# STENCILS
# ==============================================================================

STENCIL_CENTRAL = "central"
STENCIL_FORWARD = "forward"
STENCIL_BACKWARD = "backward"
STENCILS = (STENCIL_CENTRAL, STENCIL_FORWARD, STENCIL_BACKWARD)


# ==============================================================================
# PIPELINE LIMITS
# ==============================================================================

# The lifted LP is solved as an independent cross-check only up to this size
LIFTED_CHECK_MAX_POINTS = 64
