from m2meh.kernel.rootfind import bisect, expand_bracket
from m2meh.kernel.simplex import LinearProgram, LPSolution, solve_lp
from m2meh.kernel.barrier import (
    ConstraintBlock,
    ConvexProblem,
    BarrierResult,
    check_gradients,
    solve_convex,
)

__all__ = [
    "BarrierResult",
    "ConstraintBlock",
    "ConvexProblem",
    "LPSolution",
    "LinearProgram",
    "bisect",
    "check_gradients",
    "expand_bracket",
    "solve_convex",
    "solve_lp",
]
