"""Exception hierarchy shared by the solver modules."""


class PoroPlateError(Exception):
    """Base class for every error raised by this package."""


class SizeError(PoroPlateError, ValueError):
    pass


class ValidationError(PoroPlateError, ValueError):
    """Raised when validated input fails; carries the full report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class BoundsViolation(ValidationError):
    """Permeability sample outside the declared ``[k_lower, k_upper]``."""


class EnvelopeViolation(ValidationError):
    """Sampled time derivative of the permeability exceeds its envelope."""


class PermeabilityEvalError(PoroPlateError):
    pass


class SolverError(PoroPlateError):
    pass


class NoConvergence(SolverError):
    def __init__(self, iterations, residual, message=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            message
            or f"CG did not converge: {iterations} iterations, relative residual {residual:.3e}"
        )


class StepError(SolverError, ValueError):
    pass


class RegularityError(SolverError, ValueError):
    pass


class EnergyInequalityError(SolverError):
    """The discrete energy inequality failed beyond round-off; indicates a bug."""


class SingularBlock(SolverError):
    def __init__(self, mode):
        self.mode = mode
        super().__init__(f"singular resolvent block at in-plane mode {mode}")


class UnsupportedPermeability(PoroPlateError, ValueError):
    pass


class ParseError(PoroPlateError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class SchemaError(PoroPlateError, ValueError):
    def __init__(self, message, key=None):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}" if key else message)
