"""Mixed q-Gaussian algebras: moments, Fock space, spin-model approximation and L_p inequalities."""

from .moments import StructureMatrix, constant, load, moment, validate, wick_decompose, wick_inner

__version__ = "0.1.0"

__all__ = ["StructureMatrix", "constant", "load", "moment", "validate", "wick_decompose", "wick_inner"]
