"""Lamperti-type transformations for self-similar random fields.

Submodules:

``regvar``      regularly and slowly varying functions, matrix powers
``fields``      covariance kernels and seeded Gaussian samplers
``lamperti``    path-level Lamperti transforms and cocycle checks
``attraction``  partial-sum fields, exact box variances, scaling transitions
``statcheck``   covariance and permutation tests, self-similarity checks
``io``, ``cli`` CSV formats and the ``lampfield`` command
"""
from .errors import DomainError, GridRangeError, LampfieldError, NumericError, ParameterError
from .fields import (FBMSheet, FieldSample, LatticeGrid, LatticeIsotropicLRD, LatticeSeparable, LevyFBM,
                     PolarStationary, WhiteNoise, covariance, covariance_R, gram_matrix,
                     sample_gaussian_field, sample_stationary_lattice)
from .lamperti import (CocycleSpec, DiagonalGroupElement, HurstMatrix, PathOnGrid, lamperti_forward_1d,
                       lamperti_forward_mss, lamperti_inverse_1d, lamperti_inverse_mss,
                       polar_forward_levy, polar_inverse_levy)

__version__ = "0.1.0"

__all__ = [
    "LampfieldError", "DomainError", "ParameterError", "NumericError", "GridRangeError",
    "LevyFBM", "FBMSheet", "PolarStationary", "WhiteNoise", "LatticeSeparable", "LatticeIsotropicLRD",
    "LatticeGrid", "FieldSample", "covariance", "covariance_R", "gram_matrix",
    "sample_gaussian_field", "sample_stationary_lattice",
    "HurstMatrix", "DiagonalGroupElement", "CocycleSpec", "PathOnGrid",
    "lamperti_forward_mss", "lamperti_inverse_mss", "polar_forward_levy", "polar_inverse_levy",
    "lamperti_forward_1d", "lamperti_inverse_1d",
]
