from .linprog import LinearProgram, LpResult, solve_lp
from .mip import MipResult, solve_mip
from .barrier import (BarrierResult, BoxConstraints, ConcaveProgram,
                      LinearConstraints, SmoothConstraints, solve_concave)
from .dinkelbach import DinkelbachResult, FractionalObjective, dinkelbach

__all__ = [
    "LinearProgram", "LpResult", "solve_lp", "MipResult", "solve_mip",
    "BarrierResult", "BoxConstraints", "ConcaveProgram", "LinearConstraints",
    "SmoothConstraints", "solve_concave",
    "DinkelbachResult", "FractionalObjective", "dinkelbach",
]
