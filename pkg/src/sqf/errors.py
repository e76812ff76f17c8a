"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so engine code should raise
the most specific class that applies.
"""


class ConfigError(ValueError):
    """Invalid run configuration or input file."""


class TruncationError(ArithmeticError):
    """A Fock-space cutoff is too small for the requested tolerance."""


class PhysicalityError(ArithmeticError):
    """A state representation violates its positivity constraints."""
