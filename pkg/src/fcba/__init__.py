"""Four-parameter coalescing ballistic annihilation: simulation and verification."""

__version__ = "0.1.0"

from .model import ReactionParams, validate_params  # noqa: E402,F401
from .theory import pc_closed_form, solve_q  # noqa: E402,F401
