"""
Services package for SDP Code Bounds.
One module per concern: spaces, moments, model building, solving,
formulations and certification.
"""

from app.services.spaces import SpaceError, zonal_family
from app.services.moments import MomentError, RecoveryError
from app.services.sdpmodel import ModelError, assemble
from app.services.solver import InteriorPointSolver, SolverError, solve
from app.services.formulations import FormulationError, solve_bound
from app.services.certify import CertificationError, certify_result, verify_certificate

__all__ = [
    'SpaceError',
    'zonal_family',
    'MomentError',
    'RecoveryError',
    'ModelError',
    'assemble',
    'InteriorPointSolver',
    'SolverError',
    'solve',
    'FormulationError',
    'solve_bound',
    'CertificationError',
    'certify_result',
    'verify_certificate',
]
