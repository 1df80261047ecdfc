"""Exception types shared across the package."""


class CoopMimoError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(CoopMimoError, ValueError):
    """Invalid system or experiment configuration."""


class DimensionError(CoopMimoError, ValueError):
    """Array arguments with inconsistent or unsupported shapes."""


class UnsupportedSchemeError(CoopMimoError, ValueError):
    """Space-time code dimensions outside the supported set."""


class UnsupportedScenarioError(CoopMimoError, ValueError):
    """Operation defined only for a restricted network topology."""


class DegenerateAllocationError(CoopMimoError, ValueError):
    """Power allocation that cannot be normalized (all-zero block)."""


class SingularFilterError(CoopMimoError, ValueError):
    """Receive filter column with zero norm where a norm is required."""


class NumericalError(CoopMimoError, ArithmeticError):
    """Singular second-moment matrix or other linear-algebra failure."""


class UndefinedSnrError(CoopMimoError, ZeroDivisionError):
    """SNR requested for an all-zero receive filter."""


class EnumerationCapError(CoopMimoError, ValueError):
    """Constellation enumeration larger than the configured cap."""


class DivergenceError(CoopMimoError, FloatingPointError):
    """Non-finite value produced by an optimizer update.

    ``step_name`` identifies the update whose step size produced the
    non-finite value.
    """

    def __init__(self, step_name: str, iteration: int):
        self.step_name = step_name
        self.iteration = iteration
        super().__init__(
            f"non-finite value in the {step_name} update at iteration {iteration}"
        )
