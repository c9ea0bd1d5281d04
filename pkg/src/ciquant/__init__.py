"""Brackets from integration constants.

Given the general solution of a classical system written in terms of its
integration constants C, the brackets {C_k, C_l} are fixed by requiring that
d f/dt = {f, H} for every dynamical variable f, identified term by term in
the time dependence.  The package does this exactly (rational arithmetic,
graded/Grassmann-aware) and propagates the table to any pair of functions.
"""

from .brackets import (
    BracketTable,
    DerivationError,
    bracket_of,
    derive_table,
    eta_regularized_derivation,
    propagate_bracket,
)
from .expr import Expr, Parity, Symbol
from .library import BUILTIN_NAMES, builtin
from .model import ModelSpec, load_model, save_model
from .parser import parse

__all__ = [
    "BUILTIN_NAMES",
    "BracketTable",
    "DerivationError",
    "Expr",
    "ModelSpec",
    "Parity",
    "Symbol",
    "bracket_of",
    "builtin",
    "derive_table",
    "eta_regularized_derivation",
    "load_model",
    "parse",
    "propagate_bracket",
    "save_model",
]
