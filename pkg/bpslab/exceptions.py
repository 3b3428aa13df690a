"""Error hierarchy shared by every bpslab service.

Each error carries a ``detail`` message and the process ``exit_code`` the CLI
reports when the error escapes a command.
"""

from typing import Optional


class BpsLabError(Exception):
    """Base class for all domain errors"""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class AllZeroWeights(BpsLabError):
    """Every weight handed to a normalizer was zero (degenerate or unwinnable game)"""


class NegativeWeight(BpsLabError):
    """A weight handed to a normalizer was negative"""


class EmptyUtteranceSpace(BpsLabError):
    """An argmax was requested over zero utterances"""


class SupportViolation(BpsLabError):
    """A KL divergence would be infinite"""


class ZeroMarginal(BpsLabError):
    """A posterior was requested for an utterance the target never produces"""


class InvalidParameter(BpsLabError):
    """A numeric knob is outside its documented range"""


class UndefinedCounterfactual(BpsLabError):
    """A listener was asked for intention rows it does not model"""


class ParseError(BpsLabError):
    """A spec file is not well-formed JSON"""


class IoError(BpsLabError):
    """A spec file could not be read or an output could not be written"""


class ValidationError(BpsLabError):
    """A table or spec file violates an invariant; ``path`` locates the first violation"""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class UsageError(BpsLabError):
    """The command line itself is wrong"""

    exit_code = 2

    def __init__(self, detail: str, hint: Optional[str] = None):
        super().__init__(detail if hint is None else f"{detail} ({hint})")
