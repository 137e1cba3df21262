"""Central numeric defaults.

Every tolerance or iteration cap that appears in more than one place lives
here so the whole package agrees on them.
"""

# geometry
ORIENT_EPS = 1e-12          # orientation predicate, relative to bbox diameter^2
VERTEX_MERGE_REL = 1e-9     # merging near-identical candidate vertices
POLY_CONTAINS_REL = 1e-9

# L1 / Weiszfeld
WEISZFELD_TOL = 1e-10       # step size relative to data diameter
WEISZFELD_MAX_ITER = 10000
COLLISION_REL = 1e-13       # iterate counts as sitting on a data point

# rank / degeneracy thresholds
RANK_EPS_REL = 1e-12        # singular values below this fraction of s_max are zero
COV_MIN_EIG_REL = 1e-10     # covariance counts as singular below this
STRUCT_TENSOR_EIG_REL = 1e-10

# Oja
OJA_EXACT_MAX_N = 40
OJA_SET_REL = 1e-9          # relative slack when collecting optimal candidates
SUBGRAD_TOL = 1e-10         # relative objective change stopping rule
SUBGRAD_MAX_ITER = 4000

# half-space
HALFSPACE_EXACT_MAX_N = 200
CLIP_SLACK_REL = 1e-9       # halfplane clipping slack so degenerate sets survive
ACTIVE_CONSTRAINT_REL = 1e-6

# PDE / jets
GRAD_EPS = 1e-12            # vanishing-gradient guard
GRID_DEGENERATE_EPS = 1e-8  # per-pixel Jacobian norm below this evolves by zero
Q_QUAD_EPS = 1e-12          # quadrature tolerance for the angular integrals
Q_ASYM_SWITCH = 1e5         # quotient quadrature hands over to tail expansions here
UNSTABLE_GROWTH = 10.0

# curve flow
CURVE_DT_SAFETY = 0.25
CHS_EPS_REL = 1e-3          # default density regularization, relative to max density
AREA_STOP_REL = 1e-3
CURVE_MIN_VERTICES = 8

# consistency harness
JET_COND_MAX = 20.0
NOISE_ESCALATE_FRACTION = 0.2
ESCALATE_MAX_FACTOR = 4
