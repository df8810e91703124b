"""Online edge coloring via degree-corrected random matchings."""
from ._accel import BACKEND
from .graph import EdgeStream, GeneratorSpec, Graph, generate
from .rng import RandomSource

__version__ = "0.1.0"

__all__ = ["BACKEND", "EdgeStream", "GeneratorSpec", "Graph", "RandomSource", "generate", "__version__"]
