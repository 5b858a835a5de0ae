"""Exception hierarchy shared by every module.

Data problems raise subclasses of :class:`MtmtError`; the CLI maps them to
exit status 2. I/O problems surface as plain :class:`OSError`.
"""

from __future__ import annotations


class MtmtError(Exception):
    """Base class for all data/validation errors raised by the toolkit."""


class ParseError(MtmtError):
    """A text record could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key {key}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(MtmtError):
    """A value violates a documented invariant."""


class DimensionError(MtmtError, ValueError):
    """Matrix shapes are incompatible."""


class CapacityError(MtmtError):
    """More distinct speakers than the configured maximum."""


class MappingError(MtmtError, KeyError):
    """A speaker label is not covered by the speaker mapping."""

    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class EligibilityError(MtmtError):
    """No query region satisfies the duration / word-count constraints."""


class PoolError(MtmtError):
    """The source-utterance pool cannot satisfy a mixing recipe."""


class UndefinedRateError(MtmtError):
    """Error rate is undefined because the reference has no words.

    ``report`` still carries the insertion count.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class TensorFormatError(MtmtError):
    """Base class for tensor-file decoding failures."""


class BadMagicError(TensorFormatError):
    pass


class UnsupportedVersionError(TensorFormatError):
    pass


class UnsupportedDtypeError(TensorFormatError):
    pass


class TruncatedTensorError(TensorFormatError):
    pass
