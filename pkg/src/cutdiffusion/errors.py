"""Error taxonomy shared by every module.

Each class marks one failure family so callers (and the CLI exit-code
mapping) can tell configuration mistakes apart from wire trouble and from
internal contract breaks.
"""


class CutDiffusionError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CutDiffusionError):
    """A user-supplied value is invalid. Always names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class InvariantViolation(CutDiffusionError):
    """An internal contract was broken (shape mismatch, corrupt data)."""


class CapacityError(CutDiffusionError):
    """The request exceeds a documented size cap."""


class TransportError(CutDiffusionError):
    """A remote call failed at the I/O level. Carries the request id."""

    def __init__(self, request_id: int, message: str):
        self.request_id = request_id
        super().__init__(f"request {request_id}: {message}")


class ProtocolViolation(CutDiffusionError):
    """The remote peer answered with a malformed or mismatched frame."""
