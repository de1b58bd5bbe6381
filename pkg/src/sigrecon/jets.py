"""Truncated multivariate Taylor arithmetic over square-zero generators.

A :class:`Jet` with ``k`` generators ``t_1..t_k`` (``t_a**2 == 0``) stores one
coefficient array per subset of generators, indexed by bitmask. The
coefficient of ``t_1 * ... * t_k`` of ``f(x + sum_a t_a v_a)`` is the mixed
directional derivative ``d^k f(x)[v_1, ..., v_k]``; propagating a jet through a
computation therefore yields exact mixed partials without finite differences.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = ["Jet"]


@lru_cache(maxsize=None)
def _supersets(k: int) -> tuple[np.ndarray, ...]:
    full = 1 << k
    masks = np.arange(full)
    return tuple(masks[(masks & t) == t] for t in range(full))


def _expand(coeffs: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Broadcast the value axes of ``coeffs`` to ``shape``, keeping the generator axis first."""
    own = coeffs.shape[1:]
    padded = coeffs.reshape(coeffs.shape[:1] + (1,) * (len(shape) - len(own)) + own)
    return np.broadcast_to(padded, coeffs.shape[:1] + shape)


class Jet:
    """Jet of arrays; ``coeffs[mask]`` multiplies the monomial of generators in ``mask``."""

    __array_priority__ = 100

    def __init__(self, coeffs: np.ndarray, k: int):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.k = k
        if self.coeffs.shape[0] != 1 << k:
            raise ValueError("coefficient array does not match the number of generators")

    @classmethod
    def constant(cls, value, k: int) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((1 << k,) + value.shape)
        coeffs[0] = value
        return cls(coeffs, k)

    @classmethod
    def seed(cls, x, directions: Sequence) -> "Jet":
        """``x + sum_a t_a * directions[a]``."""
        x = np.asarray(x, dtype=float)
        k = len(directions)
        coeffs = np.zeros((1 << k,) + x.shape)
        coeffs[0] = x
        for a, v in enumerate(directions):
            coeffs[1 << a] = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
        return cls(coeffs, k)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def top(self) -> np.ndarray:
        """Coefficient of the product of all generators."""
        return self.coeffs[-1]

    def coefficient(self, generators: Sequence[int]) -> np.ndarray:
        mask = 0
        for a in generators:
            mask |= 1 << a
        return self.coeffs[mask]

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.k != self.k:
                raise ValueError("jets carry different generator sets")
            return other
        return Jet.constant(other, self.k)

    def __add__(self, other):
        other = self._lift(other)
        shape = np.broadcast_shapes(self.shape, other.shape)
        return Jet(_expand(self.coeffs, shape) + _expand(other.coeffs, shape), self.k)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.k)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            shape = np.broadcast_shapes(self.shape, other.shape)
            return Jet(_expand(self.coeffs, shape) * other, self.k)
        other = self._lift(other)
        shape = np.broadcast_shapes(self.shape, other.shape)
        a, b = _expand(self.coeffs, shape), _expand(other.coeffs, shape)
        out = np.zeros((a.shape[0],) + shape)
        for t, sup in enumerate(_supersets(self.k)):
            at = a[t]
            if not np.any(at):
                continue
            out[sup] += at * b[sup ^ t]
        return Jet(out, self.k)

    __rmul__ = __mul__

    def __getitem__(self, index):
        if not isinstance(index, tuple):
            index = (index,)
        return Jet(self.coeffs[(slice(None),) + index], self.k)

    def linear(self, M: np.ndarray) -> "Jet":
        """Apply ``x -> M @ x`` along the last axis."""
        return Jet(self.coeffs @ np.asarray(M, dtype=float).T, self.k)

    def dot(self, c: np.ndarray) -> "Jet":
        return Jet(self.coeffs @ np.asarray(c, dtype=float), self.k)

    def sum(self, axis: int = -1) -> "Jet":
        axis = axis if axis < 0 else axis + 1
        return Jet(self.coeffs.sum(axis=axis), self.k)

    def compose(self, derivatives: Callable[[np.ndarray, int], list]) -> "Jet":
        """Elementwise ``f(self)`` given ``derivatives(x0, K) -> [f(x0), f'(x0), ..., f^(K)(x0)]``."""
        x0 = self.coeffs[0]
        nil = Jet(self.coeffs.copy(), self.k)
        nil.coeffs[0] = 0.0
        derivs = derivatives(x0, self.k)
        out = Jet.constant(derivs[0], self.k)
        power = None
        for p in range(1, self.k + 1):
            power = nil if power is None else power * nil
            out = out + power * (derivs[p] / math.factorial(p))
        return out

    def __pow__(self, p: int):
        if int(p) != p or p < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = Jet.constant(np.ones(self.shape), self.k)
        for _ in range(int(p)):
            out = out * self
        return out


def stack(jets: Sequence[Jet], axis: int = -1) -> Jet:
    axis = axis if axis < 0 else axis + 1
    return Jet(np.stack([j.coeffs for j in jets], axis=axis), jets[0].k)
