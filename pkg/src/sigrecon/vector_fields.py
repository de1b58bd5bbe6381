"""Vector-field families ``V_1..V_d`` on ``R^N`` with exact mixed partials.

Every model evaluates on batches: points have shape ``(..., N)`` and fields
return the same shape. Letters are 1-based. Mixed partials are computed from
closed forms where they exist and otherwise by propagating a :class:`~sigrecon.jets.Jet`.
"""
from __future__ import annotations

import itertools
from collections import Counter
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from ._validation import NumericOverflowError, UnsupportedOrderError, check_finite, check_point
from .jets import Jet

__all__ = [
    "ACTIVATIONS",
    "VectorFieldModel",
    "LinearModel",
    "NeuralDepth1Model",
    "NeuralDepth2ExpModel",
    "ScalarPolynomialModel",
    "ScaledModel",
    "sample_model",
    "model_from_dict",
    "NumericOverflowError",
    "UnsupportedOrderError",
]

DEFAULT_JET_CAP = 8


# -- activations -------------------------------------------------------------

def _poly_derivatives(base: Callable, step: np.ndarray) -> Callable:
    """Derivatives of ``s = base(x)`` when ``s' = step(s)`` for a polynomial ``step``.

    Every derivative is then a polynomial in ``s``, ``p_{n+1} = p_n' * step``.
    """

    @lru_cache(maxsize=None)
    def table(K: int) -> tuple[np.ndarray, ...]:
        polys = [np.array([0.0, 1.0])]
        for _ in range(K):
            polys.append(P.polymul(P.polyder(polys[-1]), step))
        return tuple(polys)

    def derivatives(x, K):
        s = base(x)
        return [P.polyval(s, p) for p in table(K)]

    return derivatives


def _exp_derivatives(x, K):
    with np.errstate(over="ignore"):
        e = np.exp(x)
    return [e] * (K + 1)


def _sin_derivatives(x, K):
    return [np.sin(x + p * np.pi / 2) for p in range(K + 1)]


def _identity_derivatives(x, K):
    out = [np.asarray(x, dtype=float), np.ones_like(x)]
    return (out + [np.zeros_like(x)] * K)[: K + 1]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


ACTIVATIONS: dict[str, Callable] = {
    "tanh": _poly_derivatives(np.tanh, np.array([1.0, 0.0, -1.0])),
    "sigmoid": _poly_derivatives(_sigmoid, np.array([0.0, 1.0, -1.0])),
    "exp": _exp_derivatives,
    "sin": _sin_derivatives,
    "identity": _identity_derivatives,
}


def _activation(name: str) -> Callable:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


@lru_cache(maxsize=None)
def _stirling2(n: int) -> tuple[int, ...]:
    """Row ``S(n, 0..n)`` of Stirling numbers of the second kind."""
    row = [1]
    for m in range(1, n + 1):
        new = [0] * (m + 1)
        for b in range(1, m + 1):
            new[b] = b * (row[b] if b < len(row) else 0) + row[b - 1]
        row = new
    return tuple(row)


def _touchard(n: int, z: np.ndarray) -> np.ndarray:
    return sum(c * z**b for b, c in enumerate(_stirling2(n)) if c)


# -- models ------------------------------------------------------------------

class VectorFieldModel:
    """Common interface; subclasses implement ``_eval`` and ``_eval_jet``."""

    kind = "abstract"

    def __init__(self, d: int, N: int, seed: int | None = None, jet_cap: int = DEFAULT_JET_CAP):
        if d < 1 or N < 1:
            raise ValueError(f"d and N must be >= 1, got d={d}, N={N}")
        self.d = int(d)
        self.N = int(N)
        self.seed = seed
        self.jet_cap = int(jet_cap)

    def _check_letter(self, i: int) -> int:
        if not 1 <= i <= self.d:
            raise ValueError(f"letter {i} out of range 1..{self.d}")
        return i - 1

    def _check_dirs(self, dirs: Sequence[int]) -> tuple[int, ...]:
        dirs = tuple(int(j) for j in dirs)
        for j in dirs:
            if not 1 <= j <= self.N:
                raise ValueError(f"direction {j} out of range 1..{self.N}")
        if len(dirs) > self.jet_cap:
            raise UnsupportedOrderError(f"derivative order {len(dirs)} exceeds cap {self.jet_cap}")
        return dirs

    def eval(self, i: int, x) -> np.ndarray:
        """``V_i(x)``; raises :class:`NumericOverflowError` on non-finite output."""
        k = self._check_letter(i)
        x = check_point(x, self.N)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._eval(k, x)
        return check_finite(out, f"V_{i}")

    def eval_jet(self, i: int, x: Jet) -> Jet:
        k = self._check_letter(i)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self._eval_jet(k, x)
        check_finite(out.coeffs, f"jet of V_{i}")
        return out

    def mixed_partial(self, i: int, dirs: Sequence[int], x, method: str = "auto") -> np.ndarray:
        """``d^k V_i / dx_{j_k} ... dx_{j_1}`` at ``x`` (all components), 1-based directions."""
        k = self._check_letter(i)
        dirs = self._check_dirs(dirs)
        x = check_point(x, self.N)
        if not dirs:
            return self.eval(i, x)
        if method == "auto":
            method = "closed" if self.has_closed_form else "jet"
        with np.errstate(over="ignore", invalid="ignore"):
            if method == "closed":
                if not self.has_closed_form:
                    raise ValueError(f"{self.kind} has no closed-form partials")
                out = self._partial_closed(k, tuple(j - 1 for j in dirs), x)
            elif method == "jet":
                seed = Jet.seed(x, [np.eye(self.N)[j - 1] for j in dirs])
                out = self._eval_jet(k, seed).top()
            else:
                raise ValueError(f"unknown method {method!r}")
        return check_finite(np.broadcast_to(out, x.shape).copy(), f"partial of V_{i}")

    def derivative_tensor(self, i: int, x, order: int) -> np.ndarray:
        """Array ``T[..., c, j_1, ..., j_order]`` of all order-``order`` partials (0-based axes)."""
        x = check_point(x, self.N)
        if order == 0:
            return self.eval(i, x)
        out = np.empty(x.shape + (self.N,) * order)
        for combo in itertools.combinations_with_replacement(range(1, self.N + 1), order):
            value = self.mixed_partial(i, combo, x)
            for perm in set(itertools.permutations(combo)):
                out[(Ellipsis, slice(None)) + tuple(j - 1 for j in perm)] = value
        return out

    has_closed_form = False

    def _partial_closed(self, k, dirs, x):  # pragma: no cover - overridden
        raise NotImplementedError

    def _eval(self, k, x):  # pragma: no cover - overridden
        raise NotImplementedError

    def _eval_jet(self, k, x: Jet) -> Jet:  # pragma: no cover - overridden
        raise NotImplementedError

    def _base_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "N": self.N, "seed": self.seed}

    def __repr__(self):
        return f"{type(self).__name__}(d={self.d}, N={self.N}, seed={self.seed})"


class LinearModel(VectorFieldModel):
    """``V_i(x) = A_i x``."""

    kind = "linear"
    has_closed_form = True

    def __init__(self, A, seed=None, jet_cap=DEFAULT_JET_CAP):
        A = np.asarray(A, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A must have shape (d, N, N)")
        super().__init__(A.shape[0], A.shape[1], seed, jet_cap)
        self.A = A

    def _eval(self, k, x):
        return x @ self.A[k].T

    def _eval_jet(self, k, x):
        return x.linear(self.A[k])

    def _partial_closed(self, k, dirs, x):
        if len(dirs) == 1:
            return np.broadcast_to(self.A[k][:, dirs[0]], x.shape)
        return np.zeros(x.shape)

    def to_dict(self):
        return {**self._base_dict(), "A": self.A.tolist()}


class NeuralDepth1Model(VectorFieldModel):
    """``V_i(x) = sigma(A_i x + b_i)``; partials by jet propagation."""

    kind = "neural1"

    def __init__(self, A, b=None, activation: str = "tanh", seed=None, jet_cap=DEFAULT_JET_CAP):
        A = np.asarray(A, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A must have shape (d, N, N)")
        super().__init__(A.shape[0], A.shape[1], seed, jet_cap)
        self.A = A
        self.b = np.zeros(A.shape[:2]) if b is None else np.asarray(b, dtype=float).reshape(A.shape[:2])
        self.activation = activation
        self._sigma = _activation(activation)

    def _eval(self, k, x):
        return self._sigma(x @ self.A[k].T + self.b[k], 0)[0]

    def _eval_jet(self, k, x):
        return (x.linear(self.A[k]) + self.b[k]).compose(self._sigma)

    def to_dict(self):
        return {**self._base_dict(), "activation": self.activation, "A": self.A.tolist(), "b": self.b.tolist()}


class NeuralDepth2ExpModel(VectorFieldModel):
    """Nested exponential field ``V_i(x) = exp(A_i exp(D_i x))`` with diagonal ``D_i``."""

    kind = "neural2exp"
    has_closed_form = True

    def __init__(self, A, D, seed=None, jet_cap=DEFAULT_JET_CAP):
        A = np.asarray(A, dtype=float)
        D = np.asarray(D, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A must have shape (d, N, N)")
        if D.ndim == 3:
            off = D - np.einsum("kij,ij->kij", D, np.eye(D.shape[1]))
            if np.any(off != 0):
                raise ValueError("D_i must be diagonal")
            D = np.einsum("kii->ki", D)
        if D.shape != A.shape[:2]:
            raise ValueError("D must hold d diagonals of length N")
        super().__init__(A.shape[0], A.shape[1], seed, jet_cap)
        self.A = A
        self.D = D

    def _eval(self, k, x):
        return np.exp(np.exp(x * self.D[k]) @ self.A[k].T)

    def _eval_jet(self, k, x):
        return (x * self.D[k]).compose(_exp_derivatives).linear(self.A[k]).compose(_exp_derivatives)

    def _partial_closed(self, k, dirs, x):
        A, delta = self.A[k], self.D[k]
        inner = np.exp(x * delta)                       # (..., N)
        out = np.exp(inner @ A.T)                       # (..., N_out)
        for l, n in Counter(dirs).items():
            z = A[:, l] * inner[..., l : l + 1]         # alpha_{c l} exp(delta_l x_l)
            out = out * delta[l] ** n * _touchard(n, z)
        return out

    def to_dict(self):
        return {**self._base_dict(), "A": self.A.tolist(),
                "D": [np.diag(row).tolist() for row in self.D]}


class ScalarPolynomialModel(VectorFieldModel):
    """``N = 1`` fields ``V_i(x) = sum_p c_{i,p} x^p`` (coefficients in increasing degree)."""

    kind = "scalar_poly"
    has_closed_form = True

    def __init__(self, coeffs, seed=None, jet_cap=DEFAULT_JET_CAP):
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        super().__init__(coeffs.shape[0], 1, seed, jet_cap)
        self.coeffs = coeffs

    def _eval(self, k, x):
        return P.polyval(x, self.coeffs[k])

    def _eval_jet(self, k, x):
        c = self.coeffs[k]
        out = Jet.constant(np.full(x.shape, c[-1]), x.k)
        for a in c[-2::-1]:
            out = out * x + a
        return out

    def _partial_closed(self, k, dirs, x):
        return P.polyval(x, P.polyder(self.coeffs[k], len(dirs)))

    def to_dict(self):
        return {**self._base_dict(), "coeffs": self.coeffs.tolist()}


class ScaledModel(VectorFieldModel):
    """The fields ``r * V_i`` of a base model."""

    def __init__(self, base: VectorFieldModel, r: float):
        super().__init__(base.d, base.N, base.seed, base.jet_cap)
        self.base = base
        self.r = float(r)
        self.kind = base.kind
        self.has_closed_form = base.has_closed_form

    def _eval(self, k, x):
        return self.r * self.base._eval(k, x)

    def _eval_jet(self, k, x):
        return self.base._eval_jet(k, x) * self.r

    def _partial_closed(self, k, dirs, x):
        return self.r * self.base._partial_closed(k, dirs, x)

    def to_dict(self):
        return {**self.base.to_dict(), "r": self.r}


_KINDS = {
    "linear": "linear",
    "neural1": "neural1",
    "depth1": "neural1",
    "neural2exp": "neural2exp",
    "depth2exp": "neural2exp",
    "scalar_poly": "scalar_poly",
    "polynomial": "scalar_poly",
}


def _canonical_kind(kind: str) -> str:
    try:
        return _KINDS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(set(_KINDS.values()))}") from None


def sample_model(kind: str, d: int, N: int, seed: int, *, activation: str = "tanh",
                 shifts: bool = True, degree: int = 3, jet_cap: int = DEFAULT_JET_CAP) -> VectorFieldModel:
    """Draw a model with i.i.d. standard-normal coefficients from ``seed``.

    Nested-exponential coefficients are divided by ``N`` to keep evaluations on
    ``[-1, 1]^N`` in floating range.
    """
    kind = _canonical_kind(kind)
    if d < 1 or N < 1:
        raise ValueError(f"d and N must be >= 1, got d={d}, N={N}")
    rng = np.random.default_rng(seed)
    if kind == "linear":
        return LinearModel(rng.standard_normal((d, N, N)), seed=seed, jet_cap=jet_cap)
    if kind == "neural1":
        A = rng.standard_normal((d, N, N))
        b = rng.standard_normal((d, N)) if shifts else None
        return NeuralDepth1Model(A, b, activation=activation, seed=seed, jet_cap=jet_cap)
    if kind == "neural2exp":
        A = rng.standard_normal((d, N, N)) / N
        D = rng.standard_normal((d, N)) / N
        return NeuralDepth2ExpModel(A, D, seed=seed, jet_cap=jet_cap)
    if N != 1:
        raise ValueError("scalar polynomial models require N = 1")
    return ScalarPolynomialModel(rng.standard_normal((d, degree + 1)), seed=seed, jet_cap=jet_cap)


def model_from_dict(data: dict) -> VectorFieldModel:
    kind = _canonical_kind(data["kind"])
    seed = data.get("seed")
    if kind == "linear":
        model = LinearModel(data["A"], seed=seed)
    elif kind == "neural1":
        model = NeuralDepth1Model(data["A"], data.get("b"), activation=data.get("activation", "tanh"), seed=seed)
    elif kind == "neural2exp":
        model = NeuralDepth2ExpModel(data["A"], data["D"], seed=seed)
    else:
        model = ScalarPolynomialModel(data["coeffs"], seed=seed)
    if "r" in data:
        model = ScaledModel(model, data["r"])
    return model
