"""Biased adjacent-transposition Markov chains.

Gladiator chains, linear particle systems, the Jump/Hop chain and
league-hierarchy chains, with exact stationary laws, exact and Monte Carlo
mixing times, canonical-path and comparison congestion, and q-binomial checks.
"""

from .chains import (MA1, ConstantBias, Gladiator, JumpHop, LeagueHierarchy, MTree,
                     ParticleSystem, Simple, spec_from_config, spec_to_config, step,
                     transition_row)
from .combinatorics import Arrangement, Permutation, StateSpace, enumerate_states
from .errors import ChainStructureError, DomainError, SizeLimitError, UnsupportedDimensionError
from .trees import TernaryTree, balanced_ternary

__version__ = "0.1.0"

__all__ = [
    "MA1", "ConstantBias", "Gladiator", "JumpHop", "LeagueHierarchy", "MTree", "ParticleSystem",
    "Simple", "spec_from_config", "spec_to_config", "step", "transition_row", "Arrangement",
    "Permutation", "StateSpace", "enumerate_states", "ChainStructureError", "DomainError",
    "SizeLimitError", "UnsupportedDimensionError", "TernaryTree", "balanced_ternary",
]
