"""Tape-based reverse-mode automatic differentiation on numpy arrays."""
from . import ops
from .checkpoint import load_arrays, save_arrays
from .gradcheck import GradCheckReport, gradient_check
from .lstm import LstmWeights, lstm_cell, lstm_sequence
from .tensor import GradientMap, Tape, Tensor, as_tensor, backward, no_grad

__all__ = [
    "GradCheckReport", "GradientMap", "LstmWeights", "Tape", "Tensor", "as_tensor",
    "backward", "gradient_check", "load_arrays", "lstm_cell", "lstm_sequence",
    "no_grad", "ops", "save_arrays",
]
