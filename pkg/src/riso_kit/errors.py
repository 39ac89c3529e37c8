"""Shared exception types.

The toolkit distinguishes three failure modes: bad input data, exhausted
precision (the truncated series no longer determine the answer), and
computations that are possible in principle but outside the implemented
fragment.  The last two must never be silently converted into a yes/no
answer, so they get dedicated exception types that the CLI and service
layers map onto distinct exit codes / response statuses.
"""


class RisoKitError(Exception):
    """Base class for all toolkit errors."""


class InputError(RisoKitError):
    """Malformed or out-of-domain input data."""


class PrecisionError(RisoKitError):
    """A truncated series does not carry enough terms to decide the question."""


class Inconclusive(RisoKitError):
    """The question is outside the decidable fragment; not a yes and not a no."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason
