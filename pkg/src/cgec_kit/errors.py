"""Exception hierarchy shared by all cgec_kit modules.

Validation problems (bad flags, malformed files, contract violations) map to
CLI exit code 1; transport and I/O problems map to exit code 2.
"""


class CgecError(Exception):
    """Base class for all cgec_kit errors."""


class ValidationError(CgecError):
    """Input data or arguments violate a documented contract."""


class InputFormatError(ValidationError):
    """A file could not be parsed; the message names the file and line."""


class ConfigurationError(ValidationError):
    """Missing or inconsistent configuration (lexicon, credentials, ...)."""


class TransportError(CgecError):
    """A network request failed after exhausting retries."""


class AuthenticationError(TransportError):
    """The remote endpoint rejected the supplied credentials."""
