"""Exception hierarchy shared by the generator, simulator and CLI.

User errors (bad parameters, malformed formulas or vector files) subclass
``ValueError`` so callers that only know the builtin still catch them;
internal consistency failures subclass ``RuntimeError``.
"""

from typing import Optional


class PolarAutogenError(Exception):
    """Base class for every error raised by polar_encoder_autogen."""


class ParameterError(PolarAutogenError, ValueError):
    """(N, M) or another numeric parameter is outside its legal range."""


class FormulaSyntaxError(PolarAutogenError, ValueError):
    """Formula text does not match the grammar."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class FormulaStructureError(PolarAutogenError, ValueError):
    """Formula parses but is not a well-formed encoder formula."""


class InvariantViolation(PolarAutogenError, RuntimeError):
    """A walked count or structure disagrees with its closed form."""


class SimulationError(PolarAutogenError, RuntimeError):
    """Misuse of the cycle simulator, such as stepping an uninitialised state."""


class VectorFileError(PolarAutogenError, ValueError):
    """A stimulus or response vector file is malformed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
