"""Small argument checks shared across modules."""
from __future__ import annotations

from typing import Sequence

import numpy as np


class NumericOverflowError(FloatingPointError):
    """A vector field evaluation produced a non-finite value."""

    def __init__(self, message: str, component=None):
        super().__init__(message)
        self.component = component


class UnsupportedOrderError(ValueError):
    """A derivative of higher order than supported was requested."""


def check_level(L: int, max_level: int = 20) -> int:
    if int(L) != L or L < 0:
        raise ValueError(f"level must be a non-negative integer, got {L!r}")
    if L > max_level:
        raise ValueError(f"level {L} exceeds supported maximum {max_level}")
    return int(L)


def check_word(w: Sequence[int], d: int) -> tuple[int, ...]:
    w = tuple(int(a) for a in w)
    for a in w:
        if not 1 <= a <= d:
            raise ValueError(f"letter {a} out of range 1..{d}")
    return w


def check_point(x, N: int) -> np.ndarray:
    """Coerce ``x`` to a float array whose trailing axis has length ``N``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != N:
        raise ValueError(f"expected points with trailing dimension {N}, got shape {x.shape}")
    return x


def check_finite(value: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        bad = np.argwhere(~np.isfinite(np.atleast_1d(value)))
        comp = tuple(int(i) for i in bad[0]) if bad.size else None
        raise NumericOverflowError(f"non-finite value in {what} at index {comp}", component=comp)
    return value


def parse_word(text: str) -> tuple[int, ...]:
    """Parse ``"1,2,1"`` (or ``"121"`` for single-digit letters) into a word."""
    text = text.strip()
    if not text:
        return ()
    if "," in text:
        return tuple(int(t) for t in text.split(","))
    return tuple(int(c) for c in text)
