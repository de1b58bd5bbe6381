"""Truncated signatures of piecewise-linear paths.

Levels are stored densely: level ``n`` is a flat array of ``d**n`` floats in
lexicographic word order. Words are tuples of 1-based letters.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ._validation import check_level, check_word

__all__ = [
    "TruncatedTensor",
    "PiecewiseLinearPath",
    "words",
    "word_index",
    "segment_signature",
    "chen_concat",
    "path_signature",
    "get_coefficient",
    "shuffle",
    "random_walk_path",
]

MAX_LEVEL = 20


def words(d: int, n: int) -> Iterator[tuple[int, ...]]:
    """All words of length ``n`` over ``{1..d}`` in lexicographic order."""
    return itertools.product(range(1, d + 1), repeat=n)


def word_index(w: Sequence[int], d: int) -> int:
    idx = 0
    for letter in w:
        idx = idx * d + (letter - 1)
    return idx


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """Element of the truncated tensor algebra ``T^L(R^d)``."""

    d: int
    L: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        check_level(self.L, MAX_LEVEL)
        if len(self.levels) != self.L + 1:
            raise ValueError(f"expected {self.L + 1} levels, got {len(self.levels)}")
        frozen = []
        for n, block in enumerate(self.levels):
            block = np.asarray(block, dtype=float).reshape(-1)
            if block.size != self.d**n:
                raise ValueError(f"level {n} has {block.size} entries, expected {self.d ** n}")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"level {n} contains non-finite entries")
            frozen.append(_freeze(block))
        object.__setattr__(self, "levels", tuple(frozen))

    @classmethod
    def identity(cls, d: int, L: int) -> "TruncatedTensor":
        levels = [np.ones(1)] + [np.zeros(d**n) for n in range(1, L + 1)]
        return cls(d, L, tuple(levels))

    def level(self, n: int) -> np.ndarray:
        return self.levels[n]

    def flat(self) -> np.ndarray:
        return np.concatenate(self.levels)

    def allclose(self, other: "TruncatedTensor", atol: float = 0.0, rtol: float = 0.0) -> bool:
        _check_compatible(self, other)
        return all(np.allclose(a, b, atol=atol, rtol=rtol) for a, b in zip(self.levels, other.levels))

    def max_abs_diff(self, other: "TruncatedTensor") -> float:
        _check_compatible(self, other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.levels, other.levels))

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "levels": [block.tolist() for block in self.levels]}

    @classmethod
    def from_dict(cls, data: dict) -> "TruncatedTensor":
        return cls(int(data["d"]), int(data["L"]), tuple(np.asarray(b, dtype=float) for b in data["levels"]))


@dataclass(frozen=True, eq=False)
class PiecewiseLinearPath:
    """Driver path: strictly increasing ``times`` and matching ``points`` in R^d."""

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2:
            raise ValueError("points must be a (K+1, d) array")
        if times.size < 2:
            raise ValueError("a path needs at least one segment")
        if points.shape[0] != times.size:
            raise ValueError(f"{times.size} times but {points.shape[0]} points")
        if not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(points))):
            raise ValueError("path contains non-finite values")
        object.__setattr__(self, "times", _freeze(times))
        object.__setattr__(self, "points", _freeze(points))

    @classmethod
    def from_points(cls, points) -> "PiecewiseLinearPath":
        points = np.asarray(points, dtype=float)
        return cls(np.arange(points.shape[0], dtype=float), points)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def n_segments(self) -> int:
        return self.times.size - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.points, axis=0)

    def split(self, index: int) -> tuple["PiecewiseLinearPath", "PiecewiseLinearPath"]:
        """Split at an interior vertex ``0 < index < K``."""
        if not 0 < index < self.n_segments:
            raise ValueError(f"split index must be interior, got {index}")
        left = PiecewiseLinearPath(self.times[: index + 1], self.points[: index + 1])
        right = PiecewiseLinearPath(self.times[index:], self.points[index:])
        return left, right

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseLinearPath":
        if "times" in data:
            return cls(data["times"], data["points"])
        return cls.from_points(data["points"])


def _check_compatible(a: TruncatedTensor, b: TruncatedTensor) -> None:
    if a.d != b.d or a.L != b.L:
        raise ValueError(f"shape mismatch: (d={a.d}, L={a.L}) vs (d={b.d}, L={b.L})")


def segment_signature(increment, L: int) -> TruncatedTensor:
    """Signature of a straight line: level ``n`` is ``increment^{(x)n} / n!``."""
    increment = np.asarray(increment, dtype=float).reshape(-1)
    check_level(L, MAX_LEVEL)
    levels = [np.ones(1)]
    power = np.ones(1)
    for n in range(1, L + 1):
        power = np.multiply.outer(power, increment).reshape(-1)
        levels.append(power / math.factorial(n))
    return TruncatedTensor(increment.size, L, tuple(levels))


def chen_concat(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product ``a (x) b``."""
    _check_compatible(a, b)
    levels = []
    for n in range(a.L + 1):
        block = np.zeros(a.d**n)
        for p in range(n + 1):
            block += np.multiply.outer(a.levels[p], b.levels[n - p]).reshape(-1)
        levels.append(block)
    return TruncatedTensor(a.d, a.L, tuple(levels))


def path_signature(path: PiecewiseLinearPath, L: int) -> TruncatedTensor:
    incs = path.increments
    sig = segment_signature(incs[0], L)
    for inc in incs[1:]:
        sig = chen_concat(sig, segment_signature(inc, L))
    return sig


def get_coefficient(S: TruncatedTensor, w: Sequence[int]) -> float:
    w = tuple(w)
    if len(w) > S.L:
        raise IndexError(f"word of length {len(w)} exceeds truncation level {S.L}")
    try:
        check_word(w, S.d)
    except ValueError as exc:
        raise IndexError(str(exc)) from None
    return float(S.levels[len(w)][word_index(w, S.d)])


def shuffle(u: Sequence[int], v: Sequence[int]) -> list[tuple[int, ...]]:
    """All order-preserving interleavings of ``u`` and ``v``, with multiplicity."""
    u, v = tuple(u), tuple(v)
    n = len(u) + len(v)
    out = []
    for positions in itertools.combinations(range(n), len(u)):
        pos = set(positions)
        iu, iv = iter(u), iter(v)
        out.append(tuple(next(iu) if k in pos else next(iv) for k in range(n)))
    return out


def random_walk_path(rng: np.random.Generator, d: int, segments: int, amplitude: float = 1.0,
                     box: float | None = None) -> PiecewiseLinearPath:
    """Random piecewise-linear path starting at the origin.

    With ``box`` set, vertices are drawn uniformly in ``[-box, box]^d`` instead of by
    accumulating Gaussian steps of scale ``amplitude``.
    """
    if box is not None:
        points = rng.uniform(-box, box, size=(segments + 1, d))
    else:
        steps = amplitude * rng.standard_normal((segments, d))
        points = np.vstack([np.zeros((1, d)), np.cumsum(steps, axis=0)])
    times = np.linspace(0.0, 1.0, segments + 1)
    return PiecewiseLinearPath(times, points)
