"""Scalar test functions ``g: R^N -> R`` with exact mixed partials of any order."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from typing import Callable, Sequence

import numpy as np

from ._validation import UnsupportedOrderError, check_point
from .jets import Jet

__all__ = [
    "Observable",
    "CoordinateProjection",
    "QuadraticForm",
    "ExpLinear",
    "Monomial",
    "GradientOnly",
    "observable_from_dict",
    "projections",
]


class Observable:
    N: int
    max_order: int | None = None

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def partial(self, dirs: Sequence[int], x) -> np.ndarray:
        """Mixed partial in 1-based directions ``dirs`` (empty -> value)."""
        dirs = tuple(int(j) for j in dirs)
        for j in dirs:
            if not 1 <= j <= self.N:
                raise ValueError(f"direction {j} out of range 1..{self.N}")
        if self.max_order is not None and len(dirs) > self.max_order:
            raise UnsupportedOrderError(
                f"{type(self).__name__} supplies derivatives up to order {self.max_order}, not {len(dirs)}")
        x = check_point(x, self.N)
        if not dirs:
            return self.value(x)
        return self._partial(tuple(j - 1 for j in dirs), x)

    def derivative_tensor(self, x, order: int) -> np.ndarray:
        x = check_point(x, self.N)
        if order == 0:
            return self.value(x)
        out = np.empty(x.shape[:-1] + (self.N,) * order)
        for combo in itertools.combinations_with_replacement(range(1, self.N + 1), order):
            value = self.partial(combo, x)
            for perm in set(itertools.permutations(combo)):
                out[(Ellipsis,) + tuple(j - 1 for j in perm)] = value
        return out

    def jet(self, x: Jet) -> Jet:
        raise NotImplementedError

    def _partial(self, dirs, x):
        raise NotImplementedError


class CoordinateProjection(Observable):
    """``g(x) = x_j`` (1-based ``j``)."""

    def __init__(self, j: int, N: int):
        if not 1 <= j <= N:
            raise ValueError(f"projection index {j} out of range 1..{N}")
        self.j, self.N = int(j), int(N)

    def value(self, x):
        return np.asarray(x)[..., self.j - 1]

    def _partial(self, dirs, x):
        if len(dirs) == 1 and dirs[0] == self.j - 1:
            return np.ones(x.shape[:-1])
        return np.zeros(x.shape[:-1])

    def jet(self, x):
        return x[..., self.j - 1]

    def to_dict(self):
        return {"type": "projection", "j": self.j, "N": self.N}

    def __repr__(self):
        return f"pi_{self.j}"


class QuadraticForm(Observable):
    """``g(x) = x^T Q x``."""

    def __init__(self, Q):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.N = self.Q.shape[0]
        self._S = self.Q + self.Q.T

    def value(self, x):
        return np.einsum("...i,ij,...j->...", x, self.Q, x)

    def _partial(self, dirs, x):
        if len(dirs) == 1:
            return x @ self._S[dirs[0]]
        if len(dirs) == 2:
            return np.full(x.shape[:-1], self._S[dirs[0], dirs[1]])
        return np.zeros(x.shape[:-1])

    def jet(self, x):
        return (x * x.linear(self.Q)).sum(-1)

    def to_dict(self):
        return {"type": "quadratic", "Q": self.Q.tolist()}


class ExpLinear(Observable):
    """``g(x) = exp(c . x)``."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float).reshape(-1)
        self.N = self.c.size

    def value(self, x):
        return np.exp(x @ self.c)

    def _partial(self, dirs, x):
        return np.prod(self.c[list(dirs)]) * self.value(x)

    def jet(self, x):
        return x.dot(self.c).compose(lambda v, K: [np.exp(v)] * (K + 1))

    def to_dict(self):
        return {"type": "exp_linear", "c": self.c.tolist()}


class Monomial(Observable):
    """``g(x) = prod_j x_j ** p_j``."""

    def __init__(self, exponents: Sequence[int]):
        self.p = tuple(int(e) for e in exponents)
        if any(e < 0 for e in self.p):
            raise ValueError("exponents must be non-negative")
        self.N = len(self.p)

    def value(self, x):
        return np.prod(np.asarray(x) ** np.asarray(self.p), axis=-1)

    def _partial(self, dirs, x):
        counts = Counter(dirs)
        out = np.ones(x.shape[:-1])
        for j, p in enumerate(self.p):
            n = counts.get(j, 0)
            if n > p:
                return np.zeros(x.shape[:-1])
            out = out * (math.perm(p, n) * x[..., j] ** (p - n))
        return out

    def jet(self, x):
        out = Jet.constant(np.ones(x.shape[:-1]), x.k)
        for j, p in enumerate(self.p):
            if p:
                out = out * x[..., j] ** p
        return out

    def to_dict(self):
        return {"type": "monomial", "exponents": list(self.p)}


class GradientOnly(Observable):
    """Wraps a user function with a gradient; higher derivatives are unavailable."""

    max_order = 1

    def __init__(self, fn: Callable, grad: Callable, N: int):
        self.fn, self.grad, self.N = fn, grad, int(N)

    def value(self, x):
        return np.asarray(self.fn(x), dtype=float)

    def _partial(self, dirs, x):
        return np.asarray(self.grad(x), dtype=float)[..., dirs[0]]

    def jet(self, x):
        if x.k > 1:
            raise UnsupportedOrderError("GradientOnly supports first-order jets only")
        coeffs = np.stack([self.value(x.value), np.sum(self.grad(x.value) * x.coeffs[1], axis=-1)]) \
            if x.k == 1 else self.value(x.value)[None]
        return Jet(coeffs, x.k)


def projections(N: int) -> list[CoordinateProjection]:
    return [CoordinateProjection(j, N) for j in range(1, N + 1)]


def observable_from_dict(data: dict) -> Observable:
    kind = data["type"]
    if kind == "projection":
        return CoordinateProjection(data["j"], data["N"])
    if kind == "quadratic":
        return QuadraticForm(data["Q"])
    if kind == "exp_linear":
        return ExpLinear(data["c"])
    if kind == "monomial":
        return Monomial(data["exponents"])
    raise ValueError(f"unknown observable type {kind!r}")
