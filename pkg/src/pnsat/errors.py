"""Exception types shared across the package.

The CLI maps these onto exit codes: ValidationError -> 1,
NumericalError -> 2, I/O errors -> 3.
"""


class ValidationError(ValueError):
    """Bad user input: config schema violations, out-of-range parameters."""


class NumericalError(RuntimeError):
    """A numerical contract was violated (rank loss, NaN state, failed closure solve)."""
