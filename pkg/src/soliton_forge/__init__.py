"""Cohomogeneity-one gradient expanding Ricci solitons on S1xR3 and S2xR2."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .profile_ode import (InitialConditions, ProfileState, SeriesJet, Topology,  # noqa: F401
                          boundary_jet, jet_eval, rhs, rhs_transformed_s2r2)
from .integrator import IntegrationParams, SolitonSolution, detect_r0, integrate, sweep  # noqa: F401
from .geometry import (CurvatureFrame, bianchi_residual, cone_curvature, curvature,  # noqa: F401
                       scalar_at_origin, trace_residual)
from .cone_map import (ConeSlopes, EpsilonConicalityReport, decay_constant,  # noqa: F401
                       epsilon_conicality, estimate_K, eval_F, extract_slopes)
from .degree import (Box, DegreeReport, degree_s1r3, degree_s2r2, invert_F,  # noqa: F401
                     winding_number)
