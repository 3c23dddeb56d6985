"""Exception hierarchy shared by the library and the command-line front-end.

Each exception carries the process exit code the CLI maps it to:
0 success, 1 config/hypothesis violation, 2 I/O or malformed input,
3 recovery ambiguity, 4 check failure.
"""


class MaxIdentError(Exception):
    """Base class for toolkit errors"""

    exit_code = 1


class ConfigurationError(MaxIdentError):
    """A configuration or modelling hypothesis is violated"""

    exit_code = 1


class HypothesisViolationError(ConfigurationError):
    """Inputs contradict a hypothesis of the identification results"""


class UnsupportedSamplerError(ConfigurationError):
    """The generator family has no sampler"""


class UnsupportedCoefficientsError(ConfigurationError):
    """The quotient region is empty for the given coefficients"""


class InvalidCandidateError(ConfigurationError):
    """An alternative candidate is not a valid set of CDFs"""


class DomainError(MaxIdentError, ValueError):
    """An argument lies outside the domain of an operation"""

    exit_code = 1


class InputError(MaxIdentError):
    """An input file is missing, unreadable or malformed"""

    exit_code = 2
