"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Error types shared by the library. Each error derives from the builtin       ║
║   exception the caller would naturally expect (ValueError, RuntimeError)       ║
║   so plain except-clauses keep working.                                        ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""


class DroToolkitError(Exception):
    """Base class for all toolkit errors"""


class DomainError(DroToolkitError, ValueError):
    """An input lies outside the mathematical domain of an operation"""


class ShapeError(DroToolkitError, ValueError):
    """Matrix or vector shapes are inconsistent"""


class FactorizationError(DroToolkitError, ValueError):
    """A covariance matrix could not be Cholesky-factorized"""


class SingularGramError(DroToolkitError, ValueError):
    """The design matrix is rank deficient and no fallback was allowed"""


class ConfigError(DroToolkitError, ValueError):
    """Malformed configuration file or experiment definition"""


class DatasetFormatError(DroToolkitError, ValueError):
    """
    Malformed dataset CSV

    Args:
        message: Human readable description naming the offending field
        line: 1-based line number in the file (header is line 1)
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SolverError(DroToolkitError, RuntimeError):
    """
    The minimizer hit a non-finite objective

    Args:
        message: Diagnostic message
        trace: Best-so-far objective values recorded before the failure
        iteration: Iteration at which the failure was detected
    """

    def __init__(self, message, trace=None, iteration=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.iteration = iteration
