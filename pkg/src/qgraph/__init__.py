"""Quasi-delta self-adjoint extensions on quantum graphs and spectra of loop chains."""

from .chain import (
    ChainConfig,
    EdgeCoefficients,
    EigenCandidate,
    band_structure,
    build_candidate,
    closed_chain_spectrum,
    general_alpha_reduction_check,
    sample_eigenfunction,
    transfer_matrix,
)
from .exceptions import (
    IllConditionedError,
    InvalidArgumentError,
    InvarianceObstruction,
    NotInBandError,
    NotQuasiDeltaError,
    QGraphError,
    SingularEliminationError,
    UnsupportedReductionError,
)
from .extensions import (
    BlockUnitary,
    QuasiDeltaParams,
    blockwise_spectrum,
    boundary_residual,
    build_block_unitary,
    build_quasi_delta_block,
    build_zeta,
    node_block,
    partial_cayley,
)
from .graph import MetricGraph, build_chain_graph, trace_of_plane_wave
from .pointint import PointInteractionModel, compare_formula_to_oracle, psi_k_oracle, psi_k_paper
from .symmetry import ThetaAssignment, build_trace_generator, check_z_invariance, solve_theta

__version__ = "0.1.0"
