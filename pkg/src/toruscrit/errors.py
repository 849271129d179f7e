"""Exception types shared across the package."""


class ToruscritError(Exception):
    """Base class for all package-specific errors."""


class UncertifiedTail(ToruscritError):
    """An amplitude lacks the decay certificate needed for a truncation bound."""


class QuadratureError(ToruscritError):
    """A numerical integral failed to converge; carries the residual estimate."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateConditioning(ToruscritError):
    """Conditioning covariance is numerically singular; carries the minimum eigenvalue."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class ConfigError(ToruscritError):
    """Invalid experiment configuration; lists every offending key."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
