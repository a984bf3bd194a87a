"""Symbolic (CNF) specifications with SAT-oracle based approximate sampling."""

from .sampling import ApproxImproviser, ApproxSampler, approx_improviser, approx_uniform_sample
from .sat import DpllSolver, ExternalSolver, SatOracle, default_oracle
from .spec import (SymbolicAutomaton, SymbolicSpec, conjoin, dfa_spec, encode_dfa, parse_cnf,
                   parse_saut, projected_count_exact, unroll)

__all__ = [
    "ApproxImproviser", "ApproxSampler", "approx_improviser", "approx_uniform_sample",
    "DpllSolver", "ExternalSolver", "SatOracle", "default_oracle",
    "SymbolicAutomaton", "SymbolicSpec", "conjoin", "dfa_spec", "encode_dfa", "parse_cnf",
    "parse_saut", "projected_count_exact", "unroll",
]
