"""Small dense convex solvers: unit-diagonal complex SDP and a log-barrier method."""

from .barrier import (AffineEquality, AffineInequality, ConvexResult, ConvexSubproblem,
                      InfeasibleStartError, Objective, SecondOrderCone, SmoothInequality,
                      solve_convex)
from .sdp import NotHermitianError, SdpSolution, solve_sdp_unit_diag

__all__ = [
    "AffineEquality", "AffineInequality", "SecondOrderCone", "SmoothInequality", "Objective",
    "ConvexSubproblem", "ConvexResult", "InfeasibleStartError", "solve_convex",
    "SdpSolution", "NotHermitianError", "solve_sdp_unit_diag",
]
