"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver code should raise
the most specific one that applies rather than bare ValueError.
"""


class FGammaError(Exception):
    """Base class for all package-specific errors."""


class InputError(FGammaError):
    """Malformed or inconsistent user input (bad file, bad weights, bad spec).

    CLI exit code 2.
    """


class SolverFailure(FGammaError):
    """An iterative routine failed to converge or detected divergence.

    CLI exit code 3.  Carries optional diagnostics for serialization.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics) if diagnostics else {}
