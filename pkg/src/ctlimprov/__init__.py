"""Exact control improvisation over automata, unambiguous grammars and CNF specifications."""

from .core import (CiInstance, FeasibilityReport, Improviser, SpecHandle, build_improviser,
                   check_feasibility, epsilon_opt)
from .errors import ImprovError

__version__ = "0.1.0"

__all__ = [
    "CiInstance", "FeasibilityReport", "Improviser", "SpecHandle", "build_improviser",
    "check_feasibility", "epsilon_opt", "ImprovError", "__version__",
]
