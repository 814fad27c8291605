"""Whittaker functions of matrix argument and interacting walks on positive definite matrices."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .energy import Dag, chain_graph, laplace_integral, minimize_Phi, parse_graph, triangular_graph
from .kernels import log_K, log_P, log_Pi, log_Q, log_Sigma
from .process import (
    AlphaSchedule,
    compose_U,
    sample_sigma_bar,
    simulate_left_edge,
    simulate_right_edge,
    simulate_triangular,
)
from .rand import RngStream, WishartParams, sample_inverse_wishart, sample_wishart
from .spd import DomainError, NotPositiveDefiniteError, log_mvgamma
from .triangle import TriangularArray
from .whittaker import WhittakerEvaluator, log_psi_quadrature, log_whittaker_measure

__all__ = [
    "__version__",
    "BACKEND",
    "AlphaSchedule",
    "Dag",
    "DomainError",
    "NotPositiveDefiniteError",
    "RngStream",
    "TriangularArray",
    "WhittakerEvaluator",
    "WishartParams",
    "chain_graph",
    "compose_U",
    "laplace_integral",
    "log_K",
    "log_P",
    "log_Pi",
    "log_Q",
    "log_Sigma",
    "log_mvgamma",
    "log_psi_quadrature",
    "log_whittaker_measure",
    "minimize_Phi",
    "parse_graph",
    "sample_inverse_wishart",
    "sample_sigma_bar",
    "sample_wishart",
    "simulate_left_edge",
    "simulate_right_edge",
    "simulate_triangular",
    "triangular_graph",
]
