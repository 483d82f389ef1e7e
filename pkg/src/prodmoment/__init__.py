"""Global minimization of sparse polynomials over the hypercube via product-measure moments."""

from .config import SolverConfig, load_config, preset
from .extract import Solution, global_minimize
from .poly import SparseChebPoly, evaluate, family1, family2, load, parse

__version__ = "0.1.0"

__all__ = [
    "Solution", "SolverConfig", "SparseChebPoly", "evaluate", "family1", "family2",
    "global_minimize", "load", "load_config", "parse", "preset",
]
