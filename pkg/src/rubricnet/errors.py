"""Exception hierarchy shared by all rubricnet modules.

Every exception carries a short machine-parsable ``category`` slug that the
CLI prints as ``error:<category>: <message>`` on failure.
"""

from __future__ import annotations


class RubricnetError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class ShapeError(RubricnetError):
    """Operands have incompatible shapes."""

    category = "shape"


class EmptyAttentionError(RubricnetError):
    """Attention requested over a fully masked sequence."""

    category = "empty-attention"


class ParseError(RubricnetError):
    """A file or line could not be parsed."""

    category = "parse"


class ValidationError(RubricnetError):
    """Parsed data violates a documented invariant."""

    category = "validation"


class SizeError(RubricnetError):
    """A dataset is too small for the requested operation."""

    category = "size"


class ConfigError(RubricnetError):
    """A configuration value violates its invariant."""

    category = "config"


class FormatError(RubricnetError):
    """A file is syntactically valid but structurally wrong."""

    category = "format"


class ContractError(RubricnetError):
    """An internal precondition was violated by the caller."""

    category = "contract"


class TrainingError(RubricnetError):
    """Training failed (for example a non-finite loss)."""

    category = "training"


class DegenerateTestError(RubricnetError):
    """A statistical test was requested on degenerate input."""

    category = "degenerate-test"
