"""Numerical toolkit for the delayed logistic patch model with dispersal."""

from .errors import PatchHopfError
from .network import (
    PatchNetwork,
    ValidationReport,
    build_from_edges,
    grid_network,
    load,
    paper_network_9,
    save,
    validate,
)

__version__ = "0.1.0"
