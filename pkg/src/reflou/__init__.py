"""Reflected Ornstein-Uhlenbeck diffusions on level-set domains of a truncated Gaussian space."""

from .gaussian_space import GaussianSpace, TestFunction, apply_covariance, h_inner, hat_functional, sample_gamma
from .domain import Ball, GraphRegion, HalfSpace, LevelSetDomain, eval_G, grad_H, project_to_closure, unit_normal
from .errors import ContractViolation, DegenerateGradientError, SchemeFailure

__all__ = [
    "GaussianSpace",
    "TestFunction",
    "apply_covariance",
    "h_inner",
    "hat_functional",
    "sample_gamma",
    "Ball",
    "GraphRegion",
    "HalfSpace",
    "LevelSetDomain",
    "eval_G",
    "grad_H",
    "project_to_closure",
    "unit_normal",
    "ContractViolation",
    "DegenerateGradientError",
    "SchemeFailure",
]

__version__ = "0.1.0"
