"""Error types shared across the package.

The CLI maps these onto its exit-code contract: usage/validation errors
exit 1, resource exhaustion exits 2.
"""

from __future__ import annotations


class UsageError(ValueError):
    """A caller violated a precondition (bad operand, bad config value)."""


class ResourceError(RuntimeError):
    """A computation exceeded its declared budget (support cap, search depth).

    Carries whatever partial result was achieved so callers can degrade
    gracefully instead of discarding work.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
