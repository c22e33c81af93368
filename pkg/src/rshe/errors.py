"""Exception types shared across the package."""


class RsheError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RsheError):
    """Non-finite or structurally malformed numerical input."""


class SymmetryError(InvalidInputError):
    """Field violates the j <-> -j grid symmetry beyond tolerance."""


class InvalidParameterError(RsheError, ValueError):
    """Parameter outside its admissible range."""


class UnsupportedVariantError(RsheError):
    """Operation not defined for this drift variant."""


class KernelRangeError(RsheError):
    """Pairwise state differences left the tabulated kernel range (strict mode)."""


class StepSizeError(RsheError):
    """dt times the witnessed local drift Lipschitz bound exceeds the sanity limit."""


class BlowUpError(RsheError):
    """State became non-finite or exceeded the blow-up norm threshold.

    Carries the index of the offending step in ``step_index``.
    """

    def __init__(self, message, step_index):
        super().__init__(message)
        self.step_index = step_index


class DissipativityError(RsheError):
    """Drift failed the dissipativity diagnostic required by the experiment."""


class ConfigError(RsheError):
    """Run configuration failed validation."""
