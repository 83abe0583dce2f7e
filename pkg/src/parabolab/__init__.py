"""Grid laboratory for paraboloid contact sets and W^{2,delta} estimates.

Fields live on node-centred grids over the closed unit ball. The modules
build exact test cases and discrete solutions, compute contact sets by
separable distance transforms, and measure how fast their complements decay.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    CellSet,
    GridFunction,
    GridSpec,
    build_ball_grid,
    fd_derivatives,
    read_gf01,
    sample_function,
    write_gf01,
)
from .operators import Ellipticity, pucci_eval  # noqa: E402
from .catalog import make_case, parse_case  # noqa: E402
from .contact import contact_set, moreau_envelope  # noqa: E402
from .measure import decay_profile, dyadic_norm, w2delta_estimate  # noqa: E402
from .solver import SolverConfig, solve_plaplace, solve_pucci  # noqa: E402

__all__ = [
    "CellSet", "GridFunction", "GridSpec", "build_ball_grid", "fd_derivatives", "read_gf01",
    "sample_function", "write_gf01", "Ellipticity", "pucci_eval", "make_case", "parse_case",
    "contact_set", "moreau_envelope", "decay_profile", "dyadic_norm", "w2delta_estimate",
    "SolverConfig", "solve_plaplace", "solve_pucci",
]
