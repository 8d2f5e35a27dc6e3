"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError (and subclasses) -> 3, NumericError -> 4.
"""

from __future__ import annotations


class NerfusionError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NerfusionError):
    """Missing or inconsistent run configuration."""


class DataError(NerfusionError):
    """Malformed or mutually inconsistent input data."""


class NumericError(NerfusionError):
    """NaN/Inf detected during training or inference."""


class MalformedLine(DataError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnknownTag(DataError):
    def __init__(self, label: str, lineno: int | None = None):
        where = f" (line {lineno})" if lineno is not None else ""
        super().__init__(f"tag {label!r} not in tagset{where}")
        self.label = label


class BadHeadIndex(DataError):
    """CoNLL-U HEAD column points outside the sentence."""


class CountMismatch(DataError):
    """Parallel resources disagree on sentence or token counts."""


class OverlapError(DataError):
    """Entity spans overlap or are out of order."""


class IndexOutOfRange(DataError):
    """A token index points outside its sentence."""


class DimMismatch(DataError):
    def __init__(self, lineno: int, got: int, expected: int):
        super().__init__(f"line {lineno}: vector has {got} components, expected {expected}")
        self.lineno = lineno


class ParseError(DataError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class CtxeFormatError(DataError):
    """Structural violation in a CTXE container."""


class BadMagic(CtxeFormatError):
    pass


class BadVersion(CtxeFormatError):
    pass


class TruncatedFile(CtxeFormatError):
    pass


class MaskSumMismatch(CtxeFormatError):
    def __init__(self, message: str, sent_id: int | None = None):
        super().__init__(message)
        self.sent_id = sent_id

    @classmethod
    def for_sentence(cls, sent_id: int, mask_sum: int, word_count: int) -> "MaskSumMismatch":
        return cls(
            f"sentence {sent_id}: mask sums to {mask_sum} but word_count is {word_count}",
            sent_id=sent_id,
        )


class ShapeMismatch(DataError):
    """Matrix shapes inconsistent with the declared dimensions."""


class LengthMismatch(DataError):
    """Gold and predicted sentence lists have different lengths."""


class MissingModel(ConfigError):
    """The requested mode needs a model component that was not provided."""
