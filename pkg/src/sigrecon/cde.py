"""Controlled differential equations driven by piecewise-linear paths.

On a linear segment with increment ``dX`` the equation
``dY = r * sum_i V_i(Y) dX^i`` is the autonomous ODE
``dY/du = r * sum_i V_i(Y) dX^i`` on ``u in [0, 1]``, integrated here with
classical fourth-order Runge-Kutta.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._validation import NumericOverflowError
from .observables import Observable
from .signature import PiecewiseLinearPath, TruncatedTensor, get_coefficient, words
from .trees import apply_word_direct
from .vector_fields import ScaledModel, VectorFieldModel

__all__ = [
    "SolverConfig",
    "CDEProblem",
    "SolveResult",
    "SolverError",
    "solve",
    "solve_batch",
    "taylor_predict",
    "taylor_word_operator",
    "r_scaling_taylor_check",
    "trajectory_csv",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The integrator failed to converge or kept overflowing."""


@dataclass(frozen=True)
class SolverConfig:
    """Step doubling stops once successive terminal values differ by less than
    ``atol * max(1, |Y|_inf)``."""

    steps_per_segment: int = 8
    error_control: bool = True
    atol: float = 1e-12
    max_halvings: int = 12

    def __post_init__(self):
        if self.steps_per_segment < 1:
            raise ValueError("steps_per_segment must be >= 1")
        if not self.atol > 0:
            raise ValueError("atol must be positive")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be >= 0")


@dataclass(frozen=True, eq=False)
class CDEProblem:
    model: VectorFieldModel
    path: PiecewiseLinearPath
    y0: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        y0 = np.asarray(self.y0, dtype=float).reshape(-1)
        if y0.size != self.model.N:
            raise ValueError(f"y0 has dimension {y0.size}, model expects N={self.model.N}")
        if self.path.d != self.model.d:
            raise ValueError(f"path has dimension {self.path.d}, model has d={self.model.d} letters")
        object.__setattr__(self, "y0", y0)


@dataclass
class SolveResult:
    y_T: np.ndarray
    steps_per_segment: list[int]
    times: np.ndarray | None = None
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _rhs(model: VectorFieldModel, y: np.ndarray, inc: np.ndarray, r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    for i, dx in enumerate(inc, start=1):
        if dx != 0.0:
            out += dx * model.eval(i, y)
    return r[..., None] * out


def _rk4_segment(model, y, inc, r, n, keep=False):
    h = 1.0 / n
    states = [y] if keep else None
    for _ in range(n):
        k1 = _rhs(model, y, inc, r)
        k2 = _rhs(model, y + 0.5 * h * k1, inc, r)
        k3 = _rhs(model, y + 0.5 * h * k2, inc, r)
        k4 = _rhs(model, y + h * k3, inc, r)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NumericOverflowError("non-finite state during integration")
        if keep:
            states.append(y)
    return y, states


def _integrate_segment(model, y, inc, r, cfg: SolverConfig, keep: bool):
    n = cfg.steps_per_segment
    if not cfg.error_control:
        y_new, states = _rk4_segment(model, y, inc, r, n, keep)
        return y_new, n, states
    prev = None
    last_error = None
    for _ in range(cfg.max_halvings + 1):
        try:
            cur, states = _rk4_segment(model, y, inc, r, n, keep)
        except NumericOverflowError as exc:
            last_error = exc
            prev = None
            n *= 2
            continue
        if prev is not None:
            diff = float(np.max(np.abs(cur - prev)))
            if diff < cfg.atol * max(1.0, float(np.max(np.abs(cur)))):
                return cur, n, states
            last_error = f"successive terminal values differ by {diff:.3e}"
        prev = cur
        n *= 2
    raise SolverError(f"no convergence after {cfg.max_halvings} step halvings "
                      f"({n // 2} steps per segment): {last_error}")


def solve_batch(model: VectorFieldModel, path: PiecewiseLinearPath, y0, r=1.0,
                cfg: SolverConfig | None = None, trajectory: bool = False) -> SolveResult:
    """Integrate a batch of initial values ``y0`` of shape ``(B, N)`` with scales ``r`` of shape ``(B,)``.

    All rows share one step count per segment, so the result is a fixed smooth
    function of ``(y0, r)`` for a given configuration.
    """
    cfg = cfg or SolverConfig()
    y = np.atleast_2d(np.asarray(y0, dtype=float))
    if y.shape[-1] != model.N:
        raise ValueError(f"initial values have dimension {y.shape[-1]}, model expects N={model.N}")
    if path.d != model.d:
        raise ValueError(f"path has dimension {path.d}, model has d={model.d} letters")
    r = np.broadcast_to(np.asarray(r, dtype=float), y.shape[:-1]).copy()
    steps, times, states = [], [path.times[:1]], [y[None]]
    for s, inc in enumerate(path.increments):
        if not np.any(inc) or not np.any(r):
            steps.append(0)
            if trajectory:
                times.append(path.times[s + 1 : s + 2])
                states.append(y[None])
            continue
        y, n, seg_states = _integrate_segment(model, y, inc, r, cfg, trajectory)
        steps.append(n)
        if trajectory:
            t0, t1 = path.times[s], path.times[s + 1]
            times.append(t0 + (t1 - t0) * np.arange(1, n + 1) / n)
            states.append(np.stack(seg_states[1:]))
    log.debug("solved batch of %d with steps %s", y.shape[0], steps)
    result = SolveResult(y, steps)
    if trajectory:
        result.times = np.concatenate(times)
        result.states = np.concatenate(states)
    return result


def solve(problem: CDEProblem, cfg: SolverConfig | None = None, trajectory: bool = False) -> SolveResult:
    """Terminal value ``Y_T`` (and optionally the trajectory) of a single problem."""
    res = solve_batch(problem.model, problem.path, problem.y0[None], problem.r, cfg, trajectory)
    res.y_T = res.y_T[0]
    if trajectory:
        res.states = res.states[:, 0]
    return res


def taylor_word_operator(w: Sequence[int], g: Observable, model: VectorFieldModel, y) -> np.ndarray:
    """Coefficient of the iterated integral over ``w`` in the Taylor expansion of ``g(Y_T)``.

    The earliest letter of the iterated integral is the outermost derivation, i.e.
    ``V_{w_1}(V_{w_2}(... V_{w_k} g))``, which is the tree-calculus operator of the
    reversed word.
    """
    return apply_word_direct(tuple(reversed(tuple(w))), g, model, y)


def taylor_predict(model: VectorFieldModel, g: Observable, y, S: TruncatedTensor, K: int) -> float:
    """``g(y) + sum_{k<=K} sum_{|w|=k} (V_w g)(y) * S^w``."""
    if K > S.L:
        raise ValueError(f"truncation K={K} exceeds signature level {S.L}")
    y = np.asarray(y, dtype=float)
    total = float(g.value(y))
    for k in range(1, K + 1):
        for w in words(S.d, k):
            total += float(taylor_word_operator(w, g, model, y)) * get_coefficient(S, w)
    return total


def r_scaling_taylor_check(model: VectorFieldModel, g: Observable, y, S: TruncatedTensor, K: int,
                           r: float) -> float:
    """``|prediction with fields r V_i  -  sum_k r^k (level-k prediction term)|``."""
    scaled = taylor_predict(ScaledModel(model, r), g, y, S, K)
    y = np.asarray(y, dtype=float)
    rescaled = float(g.value(y))
    for k in range(1, K + 1):
        level = sum(float(taylor_word_operator(w, g, model, y)) * get_coefficient(S, w) for w in words(S.d, k))
        rescaled += r**k * level
    return abs(scaled - rescaled)


def trajectory_csv(times: np.ndarray, states: np.ndarray) -> str:
    N = states.shape[-1]
    lines = [",".join(["t"] + [f"Y_{j}" for j in range(1, N + 1)])]
    for t, row in zip(times, states):
        lines.append(",".join(repr(float(v)) for v in (t, *row)))
    return "\n".join(lines) + "\n"
