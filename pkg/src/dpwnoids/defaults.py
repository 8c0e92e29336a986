"""Numerical defaults used across the package.

Every tolerance here can be overridden per run through RunConfig; these are
the values the test suite pins.
"""

TRUNCATION = 32          # loop coefficients live on powers [-N, N]
RHO = 2.0                # Wiener weight; any value > 1 is legal

DET_TOL = 1e-9           # |det - 1| allowed for unimodular loop matrices
UNITARY_TOL = 1e-9       # SU(2)-distance allowed on circle samples
LOG_RADIUS = 0.5         # matrix log radius, operator norm on the circle

IWASAWA_TOL = 1e-10
IWASAWA_MAX_ITER = 50

QUAD_TOL = 1e-11         # contour quadrature convergence target
QUAD_MIN_NODES = 64
QUAD_MAX_NODES = 4096

FD_STEP = 1e-6           # finite-difference step scale (times 1 + |param|)
RANK_TOL = 1e-8          # singular-value cutoff, relative to the largest

ODE_TOL = 1e-11          # relative tolerance of the transport integrator
SOLVER_TOL = 1e-9        # max-norm of the flattened monodromy residual
WELL_DEF_TOL = 1e-7      # immersion well-definedness across path classes

POLE_CLEARANCE = 1e-8    # refuse potential samples closer to a pole
PATH_CLEARANCE = 1e-6    # paths must keep this distance from poles

MESH_RADIAL_RATIO = 1.2  # geometric refinement toward the ends
