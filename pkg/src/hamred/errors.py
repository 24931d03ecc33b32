"""Exception hierarchy shared by all hamred modules.

Configuration and validation problems map to CLI exit code 2, numerical
failures to exit code 3 (see `hamred.cli`).
"""


class HamredError(Exception):
    """Base class for all hamred errors."""


class ConfigError(HamredError):
    """Invalid or missing experiment configuration."""


class ValidationError(HamredError):
    """An argument violates a documented precondition."""


class InvalidDimensionError(ValidationError):
    """Array dimensions are incompatible with the requested operation."""


class UnknownModelError(ValidationError):
    """Requested model name is not registered."""


class UnsupportedModelError(ValidationError):
    """Model kind is incompatible with the requested scheme or reduction."""


class StructureViolationError(ValidationError):
    """A matrix fails a required structural property (symplecticity,
    orthonormality, skew-symmetry)."""


class VerticalStructureError(StructureViolationError):
    """Basis has a nonzero upper-right block, so the projected dissipation
    would not be a vertical velocity field."""

    def __init__(self, block_norm, tol):
        self.block_norm = block_norm
        self.tol = tol
        super().__init__(
            f"basis is not vertical: max|A_qs| = {block_norm:.3e} > {tol:.0e}; "
            "use a cotangent-lift basis or pass require_vertical=False"
        )


class NumericalError(HamredError):
    """Base class for runtime numerical failures."""


class NonFiniteStateError(NumericalError):
    """A state vector or matrix contains NaN or Inf entries."""


class StepFailureError(NumericalError):
    """Implicit time step did not converge."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)


class DecompositionFailureError(NumericalError):
    """A matrix decomposition could not be completed to tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class DegenerateCandidateError(NumericalError):
    """Candidate vector lies (numerically) in the span of the current basis."""


class RankDeficiencyError(NumericalError):
    """Requested basis size exceeds the available rank."""


class RankDegeneracyError(NumericalError):
    """Coefficient Gram matrix is singular; the low-rank representation is
    not unique.  Lower the rank or perturb the coefficients."""
