"""
Exception types for the HBN-PUF simulator
"""


class HBNError(Exception):
    """Base class for every simulator error"""


class ParameterError(HBNError, ValueError):
    """Infeasible or invalid argument"""


class ConfigError(ParameterError):
    """Invalid experiment configuration field"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class GenerationError(HBNError, RuntimeError):
    """Bounded retry exhausted while drawing random structure"""


class FitError(HBNError, RuntimeError):
    """Nonlinear least-squares solver could not make progress"""


class DatasetFormatError(HBNError, IOError):
    """Dataset or table file does not match the expected layout"""
