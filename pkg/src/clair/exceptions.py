"""Exception types raised across the package."""


class ClairError(Exception):
    """Base class for all errors raised by this package."""


class InvalidPairError(ClairError):
    """Client pair with identical or out-of-range indices."""


class InsufficientClientsError(ClairError):
    """Fewer than two clients supplied where pairwise contrasts are needed."""


class DimensionError(ClairError):
    """Matrix shapes inconsistent with each other or with the declared dims."""


class ConfigError(ClairError):
    """Invalid configuration value (weights, thresholds, step sizes, ...)."""


class NumericError(ClairError):
    """Numerical failure, e.g. SVD of a non-finite matrix."""


class DivergenceError(ClairError):
    """Solver iterate became non-finite."""


class RankError(ClairError):
    """Requested subspace rank exceeds what the matrix can support."""


class IllPosedError(ClairError):
    """Least-squares system is singular or numerically rank deficient."""


class EmptyClientSetError(ClairError):
    """An operation requiring a nonempty client set received an empty one."""


class MatrixFormatError(ClairError):
    """Malformed matrix text file; carries file name and line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line
