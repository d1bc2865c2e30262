"""Solver, certificates and oracles for single-coin quantum Arthur-Merlin games."""

from .linalg import DimTriple
from .sdp import (DualCandidate, PrimalCandidate, ProtocolInstance, SdpInstance, ValidationReport,
                  apply_soundness_padding, assemble, validate_dual, validate_primal)
from .solver import SolveOutcome, SolverConfig, configure, solve

__version__ = "0.1.0"
