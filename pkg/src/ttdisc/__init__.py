"""Tensor-train discriminant analysis with Tucker baselines and a 1-NN harness."""
from .classify import DEFAULT_LAMBDA_GRID, OneNearestNeighbor, accuracy, nn1_classify, select_lambda
from .data import LabeledTensorSet, SyntheticSpec, generate_synthetic, per_class_split
from .discriminant import ScatterPair, cmda, dgtda, lda_solve, mda_mode_scatter, scatter_matrices
from .estimators import CMDA, DGTDA, LDA, TTDA, MultiBranchTTDA, ThreeWayTTDA, TwoWayTTDA
from .multibranch import BranchModel, BranchSpec, multibranch_fit, select_branch_points
from .stiefel import SolverConfig, cayley_retract, minimize_on_stiefel, quad_objective_grad
from .storage import optimal_branch_count, storage_count, storage_formula
from .tensor import merge_leading, merge_product, tensor_trace, unfold, fold, vec, unvec
from .tt import TTChain, chain_contract, project, reconstruct, subspace_matrix, tt_svd
from .ttda import assemble_an, ttda_fit

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "OneNearestNeighbor",
    "accuracy",
    "nn1_classify",
    "select_lambda",
    "LabeledTensorSet",
    "SyntheticSpec",
    "generate_synthetic",
    "per_class_split",
    "ScatterPair",
    "cmda",
    "dgtda",
    "lda_solve",
    "mda_mode_scatter",
    "scatter_matrices",
    "CMDA",
    "DGTDA",
    "LDA",
    "TTDA",
    "MultiBranchTTDA",
    "ThreeWayTTDA",
    "TwoWayTTDA",
    "BranchModel",
    "BranchSpec",
    "multibranch_fit",
    "select_branch_points",
    "SolverConfig",
    "cayley_retract",
    "minimize_on_stiefel",
    "quad_objective_grad",
    "optimal_branch_count",
    "storage_count",
    "storage_formula",
    "merge_leading",
    "merge_product",
    "tensor_trace",
    "unfold",
    "fold",
    "vec",
    "unvec",
    "TTChain",
    "chain_contract",
    "project",
    "reconstruct",
    "subspace_matrix",
    "tt_svd",
    "assemble_an",
    "ttda_fit",
]

__version__ = "0.1.0"
