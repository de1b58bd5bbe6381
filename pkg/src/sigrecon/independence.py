"""Numerical certificates of linear (in)dependence for families of vector fields.

Functions are compared through their values at sampled points: each family
member becomes one column, each (point, component) pair one row. Rank is read
off the singular values relative to the largest one.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._validation import NumericOverflowError
from .observables import Observable, projections
from .signature import words
from .trees import (
    FieldCache,
    LabeledRecursiveTree,
    apply_word_direct,
    canonical_form,
    enumerate_trees,
    eval_tree_vf,
    eval_tree_vf_fixed_directions,
    sum_tree_field,
)
from .vector_fields import VectorFieldModel

__all__ = [
    "TreeField",
    "FixedDirectionField",
    "WordOperator",
    "WordField",
    "ConstantField",
    "FieldFamily",
    "RankReport",
    "LadderReport",
    "CertificateConfig",
    "sample_points",
    "sample_matrix",
    "numerical_rank",
    "stable_rank",
    "cubic_word_operator_matrix",
    "check_cyclic_word_identity",
    "check_ladder_collision",
    "independence_certificate",
    "BudgetError",
]

CYCLIC_WORDS = ((1, 2, 3), (2, 3, 1), (3, 1, 2))
ANTICYCLIC_WORDS = ((1, 3, 2), (2, 1, 3), (3, 2, 1))


class BudgetError(ValueError):
    """The requested family is larger than the configured guard."""


# -- family members ------------------------------------------------------------

@dataclass(frozen=True)
class TreeField:
    tree: LabeledRecursiveTree

    def evaluate(self, model, x, cache):
        return eval_tree_vf(self.tree, model, x, cache)


@dataclass(frozen=True)
class FixedDirectionField:
    tree: LabeledRecursiveTree
    dirs: tuple[int, ...]

    def evaluate(self, model, x, cache):
        return eval_tree_vf_fixed_directions(self.tree, self.dirs, model, x)


@dataclass(frozen=True)
class WordOperator:
    """Scalar function ``x -> V_w g(x)``."""

    word: tuple[int, ...]
    g: Observable

    def evaluate(self, model, x, cache):
        return np.asarray(apply_word_direct(self.word, self.g, model, x))[..., None]


@dataclass(frozen=True)
class WordField:
    """``sum_{tau in T_w} V_tau``, the first-order part of ``V_w``."""

    word: tuple[int, ...]

    def evaluate(self, model, x, cache):
        return sum_tree_field(self.word, model, x, cache)


@dataclass(frozen=True, eq=False)
class ConstantField:
    vector: np.ndarray

    def evaluate(self, model, x, cache):
        v = np.asarray(self.vector, dtype=float)
        return np.broadcast_to(v, x.shape[:-1] + v.shape).copy()


class FieldFamily(list):
    """List of family members; constructors cover the families used in the analysis."""

    @classmethod
    def trees(cls, d: int, m: int) -> "FieldFamily":
        return cls(TreeField(t) for w in words(d, m) for t in enumerate_trees(w))

    @classmethod
    def distinct_trees(cls, d: int, m: int) -> "FieldFamily":
        """One tree per unordered labelled shape over all words of length ``m``."""
        seen, out = set(), cls()
        for w in words(d, m):
            for t in enumerate_trees(w):
                key = canonical_form(t)
                if key not in seen:
                    seen.add(key)
                    out.append(TreeField(t))
        return out

    @classmethod
    def word_fields(cls, d: int, m: int) -> "FieldFamily":
        return cls(WordField(w) for w in words(d, m))

    @classmethod
    def word_operators(cls, d: int, m: int, g: Observable) -> "FieldFamily":
        return cls(WordOperator(w, g) for w in words(d, m))

    @classmethod
    def fixed_direction_trees(cls, d: int, m: int, N: int, distinct: bool = True) -> "FieldFamily":
        dirs = (itertools.permutations(range(1, N + 1), m - 1) if distinct
                else itertools.product(range(1, N + 1), repeat=m - 1))
        dirs = list(dirs)
        return cls(FixedDirectionField(t, j) for w in words(d, m) for t in enumerate_trees(w) for j in dirs)


# -- sampling and rank -----------------------------------------------------------

def sample_points(rng: np.random.Generator, n: int, N: int, box: float = 1.0) -> np.ndarray:
    return rng.uniform(-box, box, size=(n, N))


def _evaluate_family(family, model, points):
    cache = FieldCache(model, points)
    cols = [np.asarray(member.evaluate(model, points, cache), dtype=float) for member in family]
    return np.stack([c.reshape(points.shape[0], -1) for c in cols], axis=-1)


def sample_matrix(family: Sequence, model: VectorFieldModel, points, normalize: bool = True,
                  rng: np.random.Generator | None = None, retries: int = 5, box: float = 1.0) -> np.ndarray:
    """Matrix with one column per member and one row per (point, component) pair.

    Points whose evaluation overflows are redrawn uniformly from ``[-box, box]^N``
    when ``rng`` is given (at most ``retries`` rounds).
    """
    points = np.array(points, dtype=float, ndmin=2)
    if len(family) == 0:
        raise ValueError("empty family")
    for attempt in range(retries + 1):
        try:
            values = _evaluate_family(family, model, points)
            break
        except NumericOverflowError:
            if rng is None or attempt == retries:
                raise
            bad = [k for k in range(points.shape[0]) if not _point_ok(family, model, points[k])]
            points[bad] = sample_points(rng, len(bad), model.N, box)
    M = values.reshape(-1, len(family))
    if normalize:
        norms = np.linalg.norm(M, axis=0)
        M = M / np.where(norms > 0, norms, 1.0)
    return M


def _point_ok(family, model, x) -> bool:
    try:
        _evaluate_family(family, model, x[None])
        return True
    except NumericOverflowError:
        return False


@dataclass
class RankReport:
    shape: tuple[int, int]
    singular_values: list[float]
    rank: int
    tol: float
    verdict: str
    points: list | None = None
    stability: list[dict] = field(default_factory=list)

    @property
    def independent(self) -> bool:
        return self.verdict == "independent"

    def to_dict(self, include_points: bool = False) -> dict:
        out = {"shape": list(self.shape), "singular_values": self.singular_values, "rank": self.rank,
               "tol": self.tol, "verdict": self.verdict}
        if self.stability:
            out["stability"] = self.stability
        if include_points and self.points is not None:
            out["points"] = self.points
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), indent=2)


def numerical_rank(matrix, tol: float = 1e-8) -> RankReport:
    """Count singular values above ``tol * sigma_1``."""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    s = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > tol * s[0]))
    verdict = "independent" if rank == M.shape[1] else "dependent"
    return RankReport(tuple(M.shape), s.tolist(), rank, tol, verdict)


def stable_rank(matrices: Sequence[np.ndarray], tols: Sequence[float] = (1e-6, 1e-8, 1e-10),
                reference_tol: float = 1e-8) -> RankReport:
    """Rank report of ``matrices[0]`` at ``reference_tol``; ``inconclusive`` if any verdict differs."""
    report = numerical_rank(matrices[0], reference_tol)
    verdicts = set()
    for k, M in enumerate(matrices):
        for tol in tols:
            r = numerical_rank(M, tol)
            report.stability.append({"point_set": k, "tol": tol, "rank": r.rank, "verdict": r.verdict})
            verdicts.add(r.verdict)
    if len(verdicts) > 1:
        report.verdict = "inconclusive"
    return report


# -- known dependencies --------------------------------------------------------

def cubic_word_operator_matrix(model: VectorFieldModel, points, gs: Sequence[Observable],
                             normalize: bool = True) -> np.ndarray:
    """Columns ``V_w g`` for all ``w`` of length 3, rows (g, point)."""
    family_rows = [sample_matrix(FieldFamily.word_operators(model.d, 3, g), model, points, normalize=False)
                   for g in gs]
    M = np.vstack(family_rows)
    if normalize:
        norms = np.linalg.norm(M, axis=0)
        M = M / np.where(norms > 0, norms, 1.0)
    return M


def check_cyclic_word_identity(model: VectorFieldModel, points, gs: Sequence[Observable] | None = None) -> float:
    """Normalised residual of ``V_123 + V_231 + V_312 - V_132 - V_213 - V_321`` on ``gs``.

    Returns ``max |sum| / max |term|`` over points and test functions (0 if every term vanishes).
    """
    if model.N != 1 or model.d != 3:
        raise ValueError("the identity concerns scalar fields (N = 1) with d = 3")
    points = np.array(points, dtype=float).reshape(-1, 1)
    if gs is None:
        from .observables import ExpLinear, Monomial, QuadraticForm
        gs = [projections(1)[0], QuadraticForm([[1.0]]), Monomial([3]), ExpLinear([0.7])]
    residual, scale = 0.0, 0.0
    for g in gs:
        lhs = [apply_word_direct(w, g, model, points) for w in CYCLIC_WORDS]
        rhs = [apply_word_direct(w, g, model, points) for w in ANTICYCLIC_WORDS]
        diff = np.abs(sum(lhs) - sum(rhs))
        residual = max(residual, float(np.max(diff)))
        scale = max(scale, max(float(np.max(np.abs(t))) for t in lhs + rhs))
    return residual / scale if scale > 0 else 0.0


@dataclass
class LadderReport:
    word: tuple[int, ...]
    word_prime: tuple[int, ...]
    dirs: tuple[int, ...]
    dirs_prime: tuple[int, ...]
    component_similarity: float
    vector_similarity: float
    identical: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return float(abs(a @ b) / (na * nb))


def check_ladder_collision(model: VectorFieldModel, m: int, points, word: Sequence[int] | None = None) -> LadderReport:
    """Compare the ladder terms ``V_tau^j`` and ``V_tau'^j'`` built from reversed inner letters.

    ``component_similarity`` is the smallest ``|cos|`` between matching components
    (scalar maps ``pi_{j0} V``); ``vector_similarity`` compares the stacked vectors.
    """
    if m < 3:
        raise ValueError("the construction needs m >= 3")
    if m - 1 > model.N:
        raise ValueError(f"distinct edge directions need N >= m-1 = {m - 1}, got N={model.N}")
    if word is None:
        word = tuple(k % model.d + 1 for k in range(m))
    w = tuple(int(a) for a in word)
    if len(w) != m:
        raise ValueError(f"word must have length m={m}")
    w_prime = (w[0],) + tuple(reversed(w[1 : m - 1])) + (w[-1],)
    j = tuple(range(1, m))
    j_prime = tuple(range(m - 2, 0, -1)) + (m - 1,)
    ladder = tuple(range(1, m))
    tau = LabeledRecursiveTree(ladder, w)
    tau_prime = LabeledRecursiveTree(ladder, w_prime)
    points = np.array(points, dtype=float, ndmin=2)
    a = eval_tree_vf_fixed_directions(tau, j, model, points)
    b = eval_tree_vf_fixed_directions(tau_prime, j_prime, model, points)
    comp = min(_cosine(a[:, c], b[:, c]) for c in range(model.N))
    vec = _cosine(a.reshape(-1), b.reshape(-1))
    return LadderReport(w, w_prime, j, j_prime, comp, vec, bool(w == w_prime and j == j_prime))


# -- certificate -----------------------------------------------------------------

@dataclass(frozen=True)
class CertificateConfig:
    n_point_sets: int = 3
    row_factor: float = 2.0
    tols: tuple[float, ...] = (1e-6, 1e-8, 1e-10)
    tol: float = 1e-8
    seed: int = 0
    box: float = 1.0
    normalize: bool = True
    budget: int = 5000


def independence_certificate(model: VectorFieldModel, m: int, config: CertificateConfig | None = None,
                             distinct: bool = False) -> tuple[RankReport, RankReport]:
    """Rank reports for the tree family ``{V_tau}`` and the word family ``{sum_tree_field(w)}``.

    ``distinct=True`` keeps one tree per unordered labelled shape, dropping
    columns that coincide identically.
    """
    config = config or CertificateConfig()
    n_trees = model.d**m * math.factorial(m - 1)
    if n_trees > config.budget:
        raise BudgetError(f"{model.d}^{m} words x {m - 1}! trees = {n_trees} columns exceeds budget {config.budget}")
    rng = np.random.default_rng(config.seed)
    n_points = max(1, math.ceil(config.row_factor * n_trees / model.N))
    point_sets = [sample_points(rng, n_points, model.N, config.box) for _ in range(config.n_point_sets)]
    reports = []
    trees = FieldFamily.distinct_trees(model.d, m) if distinct else FieldFamily.trees(model.d, m)
    for family in (trees, FieldFamily.word_fields(model.d, m)):
        mats, used = [], []
        for pts in point_sets:
            pts = pts.copy()
            mats.append(sample_matrix(family, model, pts, normalize=config.normalize, rng=rng, box=config.box))
            used.append(pts)
        report = stable_rank(mats, config.tols, config.tol)
        report.points = used[0].tolist()
        reports.append(report)
    return reports[0], reports[1]
