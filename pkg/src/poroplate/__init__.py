"""Matrix-free simulation and verification of a hinged poro-elastic plate.

A Kirchhoff plate on the unit square is coupled to a pressure field in the
slab ``(0,1)^2 x (-h, h)`` that diffuses only across the thickness. The
quasi-static system is integrated as an implicit Cauchy problem for the
pressure, the inertial system as a first-order contraction semigroup.
"""
from .errors import (
    BoundsViolation, EnergyInequalityError, EnvelopeViolation, NoConvergence, ParseError,
    PermeabilityEvalError, PoroPlateError, RegularityError, SchemaError, SingularBlock,
    SizeError, SolverError, StepError, UnsupportedPermeability, ValidationError,
)
from .model import (
    InitialData, PermeabilityModel, PhysicalParams, SourceTerms, constant_permeability,
    layered_x3_permeability, make_permeability, sin_in_time_permeability, validate_params,
    validate_permeability,
)
from .operators import OperatorContext, make_context

__version__ = "0.1.0"

__all__ = [
    "BoundsViolation", "EnergyInequalityError", "EnvelopeViolation", "InitialData",
    "NoConvergence", "OperatorContext", "ParseError", "PermeabilityEvalError",
    "PermeabilityModel", "PhysicalParams", "PoroPlateError", "RegularityError", "SchemaError",
    "SingularBlock", "SizeError", "SolverError", "SourceTerms", "StepError",
    "UnsupportedPermeability", "ValidationError", "constant_permeability",
    "layered_x3_permeability", "make_context", "make_permeability",
    "sin_in_time_permeability", "validate_params", "validate_permeability",
]
