"""Squared-slack linear SVM trained through its Wolfe dual, with diagnostics."""

from .dataset import DatasetFormatError, LabeledDataset, load_csv, save_csv
from .geometry import LinearLocus, gram_matrix, inner_product_stats, locus_membership, scalar_projection
from .model import EigenlocusModel, decide, deserialize, fit, margin_geometry, serialize
from .solver import DualProblem, DualSolution, SolverOptions, duality_gap, objective_and_gradient, solve_dual

__all__ = [
    "DatasetFormatError", "LabeledDataset", "load_csv", "save_csv",
    "LinearLocus", "gram_matrix", "inner_product_stats", "locus_membership", "scalar_projection",
    "EigenlocusModel", "decide", "deserialize", "fit", "margin_geometry", "serialize",
    "DualProblem", "DualSolution", "SolverOptions", "duality_gap", "objective_and_gradient", "solve_dual",
]
