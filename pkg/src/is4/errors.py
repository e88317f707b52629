"""Shared exception types."""


class ParseError(ValueError):
    """Raised on malformed concrete syntax; carries a character position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class InternalError(RuntimeError):
    """An invariant the procedure relies on failed; never a valid outcome."""


class GuardViolation(InternalError):
    """A termination bound was exceeded; signals a bug, not an answer."""


class VerificationError(RuntimeError):
    """An emitted artifact failed its independent re-check."""
