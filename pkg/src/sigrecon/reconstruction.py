"""Recover signature levels from CDE solutions across initial values and scales.

For each level ``m`` the ``m``-th derivative in ``r`` at ``r = 0`` of
``g(Y_T^{eta, r})`` equals ``m! * sum_{|w|=m} (V_w g)(eta) S^w``. Sampling enough
initial values ``eta`` (and test functions ``g``) gives a linear system for the
level-``m`` coefficients ``S^w``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .cde import SolverConfig, SolverError, solve_batch, taylor_word_operator
from .independence import numerical_rank
from .observables import Observable
from .signature import PiecewiseLinearPath, TruncatedTensor, path_signature, words
from .trees import FieldCache, sum_tree_field
from .vector_fields import VectorFieldModel

__all__ = [
    "ReconstructionConfig",
    "LevelResult",
    "ReconstructionReport",
    "RFitError",
    "SingularSystemError",
    "r_derivative_at_zero",
    "r_grid",
    "build_system",
    "reconstruct",
    "compare",
]

log = logging.getLogger(__name__)


class RFitError(ValueError):
    """Polynomial fit in ``r`` is too ill-conditioned even at the lowest admissible degree."""


class SingularSystemError(np.linalg.LinAlgError):
    """The word-operator system does not have full column rank."""


@dataclass(frozen=True)
class ReconstructionConfig:
    L: int = 3
    epsilon: float | tuple[float, ...] = 0.03
    nodes: int | None = None          # default 2 * degree + node_margin
    degree: int | None = None         # default m + degree_extra
    degree_extra: int = 4
    node_margin: int = 5
    eta_factor: int = 2               # etas per level = eta_factor * ceil(d^m / N)
    eta_scale: float = 1.0
    seed: int = 0
    vandermonde_cap: float = 1e10
    rank_tol: float = 1e-8
    max_resamples: int = 3
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.node_margin < 1:
            raise ValueError("node_margin must be >= 1")
        eps = self.epsilon if isinstance(self.epsilon, tuple) else (self.epsilon,)
        if any(not e > 0 for e in eps):
            raise ValueError("epsilon must be positive")
        for m in range(1, self.L + 1):
            nodes, degree = self.nodes_for(m), self.degree_for(m)
            if degree < m + 2 or nodes < degree + 1:
                raise ValueError(f"level {m}: need nodes >= degree + 1 >= m + 3, got nodes={nodes}, degree={degree}")
            if nodes % 2 == 0:
                raise ValueError(f"level {m}: the r-grid must contain 0, so nodes must be odd, got {nodes}")

    def epsilon_for(self, m: int) -> float:
        if isinstance(self.epsilon, tuple):
            return self.epsilon[min(m, len(self.epsilon)) - 1]
        return float(self.epsilon)

    def nodes_for(self, m: int) -> int:
        return self.nodes if self.nodes is not None else 2 * self.degree_for(m) + self.node_margin

    def degree_for(self, m: int) -> int:
        return self.degree if self.degree is not None else m + self.degree_extra

    def to_dict(self) -> dict:
        out = asdict(self)
        out["epsilon"] = list(self.epsilon) if isinstance(self.epsilon, tuple) else self.epsilon
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ReconstructionConfig":
        data = dict(data)
        if isinstance(data.get("epsilon"), list):
            data["epsilon"] = tuple(data["epsilon"])
        if isinstance(data.get("solver"), dict):
            data["solver"] = SolverConfig(**data["solver"])
        return cls(**data)


def r_grid(epsilon: float, nodes: int) -> np.ndarray:
    """Symmetric grid on ``[-epsilon, epsilon]``; includes 0 when ``nodes`` is odd."""
    return np.linspace(-epsilon, epsilon, nodes)


def r_derivative_at_zero(samples, m: int, degree: int | None = None, cond_cap: float = 1e10) -> np.ndarray:
    """``m!`` times the ``r^m`` coefficient of a least-squares polynomial fit.

    ``samples`` is ``(r, value)`` pairs or a tuple ``(r_array, values)`` whose first
    axis runs over ``r``; vector values are fitted column by column. When the
    scaled Vandermonde matrix is worse conditioned than ``cond_cap`` the degree is
    lowered, down to ``m``.
    """
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 1:
        r, values = np.asarray(samples[0], dtype=float), np.asarray(samples[1], dtype=float)
    else:
        r = np.array([s[0] for s in samples], dtype=float)
        values = np.array([s[1] for s in samples], dtype=float)
    degree = m + 2 if degree is None else degree
    if r.size < degree + 1:
        raise RFitError(f"{r.size} samples cannot support a degree-{degree} fit")
    scale = float(np.max(np.abs(r)))
    if scale == 0:
        raise RFitError("r samples must not all be zero")
    t = r / scale
    while True:
        V = np.vander(t, degree + 1, increasing=True)
        if np.linalg.cond(V) <= cond_cap:
            break
        if degree <= m:
            raise RFitError(f"Vandermonde condition exceeds {cond_cap:g} at degree {degree}")
        degree -= 1
    flat = values.reshape(r.size, -1)
    coef, *_ = np.linalg.lstsq(V, flat, rcond=None)
    out = math.factorial(m) * coef[m] / scale**m
    return out.reshape(values.shape[1:]) if values.ndim > 1 else float(out[0])


def _system_rows(model, m, etas, gs):
    """Rows ``(eta, g)`` by columns ``w`` in lexicographic order."""
    ws = list(words(model.d, m))
    if gs is None:
        cache = FieldCache(model, etas)
        # first-order part of V_w, one row per coordinate projection
        cols = [sum_tree_field(tuple(reversed(w)), model, etas, cache) for w in ws]
        M = np.stack(cols, axis=-1).reshape(-1, len(ws))
        meta = [(e, j) for e in range(etas.shape[0]) for j in range(1, model.N + 1)]
        return M, meta
    rows = np.stack([np.stack([np.asarray(taylor_word_operator(w, g, model, etas)) for w in ws], axis=-1)
                     for g in gs], axis=1)
    meta = [(e, k) for e in range(etas.shape[0]) for k in range(len(gs))]
    return rows.reshape(-1, len(ws)), meta


def build_system(model: VectorFieldModel, m: int, etas, gs: Sequence[Observable] | None = None,
                 rng: np.random.Generator | None = None, retries: int = 3, tol: float = 1e-8,
                 eta_scale: float = 1.0):
    """Matrix ``M[(eta, g), w] = (V_w g)(eta)`` for the Taylor coefficient of ``S^w``.

    ``gs=None`` uses all coordinate projections through the tree-field fast path.
    Returns ``(M, row_meta, etas)``. With ``rng`` given, rank-deficient systems are
    retried with fresh initial values before :class:`SingularSystemError` is raised.
    """
    etas = np.array(etas, dtype=float, ndmin=2)
    n_rows_per_eta = model.N if gs is None else len(gs)
    if etas.shape[0] * n_rows_per_eta < model.d**m:
        raise ValueError(f"{etas.shape[0]} initial values x {n_rows_per_eta} functions < {model.d ** m} unknowns")
    for attempt in range(retries + 1):
        M, meta = _system_rows(model, m, etas, gs)
        norms = np.linalg.norm(M, axis=0)
        report = numerical_rank(M / np.where(norms > 0, norms, 1.0), tol)
        if report.rank == M.shape[1]:
            return M, meta, etas
        log.info("level %d system rank %d < %d (attempt %d)", m, report.rank, M.shape[1], attempt)
        if rng is None or attempt == retries:
            break
        etas = eta_scale * rng.standard_normal(etas.shape)
    raise SingularSystemError(
        f"level-{m} system has numerical rank {report.rank} < {M.shape[1]} unknowns "
        f"(smallest relative singular value {report.singular_values[-1] / max(report.singular_values[0], 1e-300):.2e})")


@dataclass
class LevelResult:
    level: int
    truth: np.ndarray
    estimated: np.ndarray | None = None
    max_abs_err: float | None = None
    max_rel_err: float | None = None
    cond: float | None = None
    residual: float | None = None
    n_etas: int | None = None
    steps_per_segment: list[int] | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def within(self, rtol: float, atol: float) -> bool:
        """Every entry within ``max(rtol * |truth|, atol)``."""
        if self.estimated is None:
            return False
        return bool(np.all(np.abs(self.estimated - self.truth) <= np.maximum(rtol * np.abs(self.truth), atol)))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["truth"] = self.truth.tolist()
        out["estimated"] = None if self.estimated is None else self.estimated.tolist()
        return out


@dataclass
class ReconstructionReport:
    d: int
    L: int
    levels: list[LevelResult]
    config: dict = field(default_factory=dict)

    def level(self, m: int) -> LevelResult:
        return self.levels[m - 1]

    def estimated_tensor(self) -> TruncatedTensor:
        if not all(lv.ok for lv in self.levels):
            raise ValueError("some levels failed; no complete estimate")
        return TruncatedTensor(self.d, self.L, (np.ones(1),) + tuple(lv.estimated for lv in self.levels))

    def to_dict(self) -> dict:
        return {"d": self.d, "L": self.L, "config": self.config, "levels": [lv.to_dict() for lv in self.levels]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["level", "max_abs_err", "max_rel_err", "cond", "residual", "error"])
        for lv in self.levels:
            writer.writerow([lv.level] + [("" if v is None else repr(float(v)))
                                          for v in (lv.max_abs_err, lv.max_rel_err, lv.cond, lv.residual)]
                            + [lv.error or ""])
        return buf.getvalue()


def _recover_level(model, path, m, cfg: ReconstructionConfig, rng, truth):
    n_etas = cfg.eta_factor * math.ceil(model.d**m / model.N)
    rs = r_grid(cfg.epsilon_for(m), cfg.nodes_for(m))
    scale = cfg.eta_scale
    for attempt in range(cfg.max_resamples + 1):
        etas = scale * rng.standard_normal((n_etas, model.N))
        M, meta, etas = build_system(model, m, etas, rng=rng, retries=cfg.max_resamples, tol=cfg.rank_tol,
                                     eta_scale=scale)
        y0 = np.tile(etas, (rs.size, 1))
        scales = np.repeat(rs, etas.shape[0])
        try:
            sol = solve_batch(model, path, y0, scales, cfg.solver)
            break
        except SolverError as exc:
            # blow-up along some initial value: redraw closer to the origin
            if attempt == cfg.max_resamples:
                raise
            log.info("level %d solve failed (%s); redrawing initial values", m, exc)
            scale *= 0.5
    Y = sol.y_T.reshape(rs.size, etas.shape[0], model.N)
    deriv = r_derivative_at_zero((rs, Y), m, cfg.degree_for(m), cfg.vandermonde_cap)
    rhs = deriv.reshape(-1) / math.factorial(m)
    est, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    err = compare_level(est, truth)
    return LevelResult(m, truth, est, err["max_abs_err"], err["max_rel_err"], float(np.linalg.cond(M)),
                       float(np.linalg.norm(M @ est - rhs)), etas.shape[0], sol.steps_per_segment)


def reconstruct(model: VectorFieldModel, path: PiecewiseLinearPath,
                cfg: ReconstructionConfig | None = None) -> ReconstructionReport:
    """Recover levels ``1..L`` of the signature of ``path`` and compare with the exact one.

    Failures at one level (singular system, fit or solver failure) are recorded on
    that level and do not stop the others.
    """
    cfg = cfg or ReconstructionConfig()
    if path.d != model.d:
        raise ValueError(f"path has dimension {path.d}, model has d={model.d} letters")
    truth = path_signature(path, cfg.L)
    results = []
    for m in range(1, cfg.L + 1):
        rng = np.random.default_rng([cfg.seed, m])
        try:
            results.append(_recover_level(model, path, m, cfg, rng, truth.levels[m]))
        except (SingularSystemError, RFitError, SolverError) as exc:
            log.warning("level %d failed: %s", m, exc)
            results.append(LevelResult(m, truth.levels[m], error=f"{type(exc).__name__}: {exc}"))
    return ReconstructionReport(model.d, cfg.L, results, cfg.to_dict())


def compare_level(estimated: np.ndarray, truth: np.ndarray) -> dict:
    diff = np.abs(np.asarray(estimated) - np.asarray(truth))
    rel = diff / np.maximum(np.abs(truth), 1e-12)
    worst = int(np.argmax(diff)) if diff.size else 0
    return {"max_abs_err": float(diff.max(initial=0.0)), "max_rel_err": float(rel.max(initial=0.0)),
            "worst_index": worst}


def compare(estimated: TruncatedTensor, truth: TruncatedTensor) -> list[dict]:
    """Per-level error table (level 0 included)."""
    if estimated.d != truth.d or estimated.L != truth.L:
        raise ValueError(f"shape mismatch: (d={estimated.d}, L={estimated.L}) vs (d={truth.d}, L={truth.L})")
    table = []
    for n, (a, b) in enumerate(zip(estimated.levels, truth.levels)):
        row = {"level": n, **compare_level(a, b)}
        row["worst_word"] = list(next(w for k, w in enumerate(words(truth.d, n)) if k == row["worst_index"]))
        table.append(row)
    return table
