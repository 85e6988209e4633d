"""Stochastic Bregman subgradient methods for nonsmooth nonconvex problems."""
from .blocked import BlockedVector, DimensionError
from .kernels import (BlockPolynomialKernel, CoordPolynomialKernel, EuclideanKernel,
                      Kernel, RootFindingError, make_kernel)
from .oracle import ConservativeOracle, FiniteSumObjective, Sampler
from .prox import (Box, Certificate, CertificateError, L1Regularizer, NonNegative,
                   WholeSpace, ZeroRegularizer, bregman_prox, forward_backward,
                   min_norm_residual)
from .schedules import Constant, LogDecay, PolyTolerance, StagedDecay
from .optim import OptimizerState, RunAborted, run

__version__ = "0.1.0"

__all__ = [
    "BlockedVector", "DimensionError", "Kernel", "EuclideanKernel", "BlockPolynomialKernel",
    "CoordPolynomialKernel", "RootFindingError", "make_kernel", "ConservativeOracle",
    "FiniteSumObjective", "Sampler", "Box", "Certificate", "CertificateError",
    "L1Regularizer", "NonNegative", "WholeSpace", "ZeroRegularizer", "bregman_prox",
    "forward_backward", "min_norm_residual", "Constant", "LogDecay", "StagedDecay",
    "PolyTolerance", "OptimizerState", "RunAborted", "run",
]
