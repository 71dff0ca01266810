"""Belief-propagation decoding of stabilizer codes under circuit-level noise."""
from .check_matrix import GeneralizedCheckMatrix, build_check_matrix, code_capacity_matrix, sparsify, to_tanner
from .circuit import ExtractionCircuit, build_circuit, evaluate, sample_errors
from .codes import CodeSpec, build_code, build_toy_code, is_logical_error
from .consolidation import build_recipe, consolidate, initial_priors
from .decoder import DecodeOutcome, FTBPDecoder, ftbp_adaptive, ftbp_decode
from .memory import LifetimeResult, run_lifetime
from .pauli import MixedErrorVector, MixedSymbol, SymbolKind
from .threshold import AnsatzFit, RateCurve, ScalingAnsatz, aggregate, error_floor_curve, fit_scaling_ansatz

__all__ = [
    "AnsatzFit", "CodeSpec", "DecodeOutcome", "ExtractionCircuit", "FTBPDecoder", "GeneralizedCheckMatrix",
    "LifetimeResult", "MixedErrorVector", "MixedSymbol", "RateCurve", "ScalingAnsatz", "SymbolKind",
    "aggregate", "build_check_matrix", "build_circuit", "build_code", "build_recipe", "build_toy_code",
    "code_capacity_matrix", "consolidate", "error_floor_curve", "evaluate", "fit_scaling_ansatz", "ftbp_adaptive", "ftbp_decode",
    "initial_priors", "is_logical_error", "run_lifetime", "sample_errors", "sparsify", "to_tanner",
]
