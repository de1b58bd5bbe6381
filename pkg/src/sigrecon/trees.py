"""Letter-labeled recursive trees, tree-like vector fields and tree-like operators.

Trees use the parent-vector encoding: ``parents[k-1]`` is the vertex that
vertex ``k+1`` attaches to, so ``parents[k-1] <= k``. Edge ``k`` is the edge
into vertex ``k+1``. Rooted operator trees add a root ``0`` and attach vertex
``l+1`` to ``parents[l] in {0..l}``.

Word operators follow the recursion ``V_{wi} phi = V_i(V_w phi)``: the last
letter is the outermost derivation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._validation import check_point
from .jets import Jet
from .observables import CoordinateProjection, Observable
from .vector_fields import VectorFieldModel

__all__ = [
    "MAX_WORD_LENGTH",
    "LabeledRecursiveTree",
    "RootedOpTree",
    "enumerate_trees",
    "enumerate_rooted_ops",
    "brute_force_tree_count",
    "canonical_form",
    "eval_tree_vf",
    "eval_tree_vf_fixed_directions",
    "apply_rooted_op",
    "apply_word_direct",
    "apply_word_via_trees",
    "sum_tree_field",
    "FieldCache",
]

MAX_WORD_LENGTH = 8


def _check_word_length(w: Sequence[int]) -> tuple[int, ...]:
    w = tuple(int(a) for a in w)
    if not w:
        raise ValueError("word must be non-empty")
    if len(w) > MAX_WORD_LENGTH:
        raise ValueError(f"word length {len(w)} exceeds guard {MAX_WORD_LENGTH} ({math.factorial(len(w))} trees)")
    return w


@dataclass(frozen=True)
class LabeledRecursiveTree:
    parents: tuple[int, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        object.__setattr__(self, "labels", tuple(int(a) for a in self.labels))
        if len(self.parents) != len(self.labels) - 1:
            raise ValueError("a tree on m vertices needs m-1 parent entries")
        for k, p in enumerate(self.parents, start=1):
            if not 1 <= p <= k:
                raise ValueError(f"vertex {k + 1} must attach to one of 1..{k}, got {p}")

    @property
    def m(self) -> int:
        return len(self.labels)

    def children(self) -> dict[int, list[int]]:
        out = {v: [] for v in range(1, self.m + 1)}
        for k, p in enumerate(self.parents, start=1):
            out[p].append(k + 1)
        return out

    def out_directions(self, j: Sequence[int]) -> dict[int, tuple[int, ...]]:
        """Directions of edges leaving each vertex, in construction order."""
        out = {v: [] for v in range(1, self.m + 1)}
        for k, p in enumerate(self.parents, start=1):
            out[p].append(j[k - 1])
        return {v: tuple(ds) for v, ds in out.items()}

    def to_dict(self) -> dict:
        return {"parents": list(self.parents), "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, data: dict) -> "LabeledRecursiveTree":
        return cls(tuple(data["parents"]), tuple(data["labels"]))

    def __str__(self):
        return _bracket(1, self.children(), {v: self.labels[v - 1] for v in range(1, self.m + 1)})


@dataclass(frozen=True)
class RootedOpTree:
    parents: tuple[int, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))
        object.__setattr__(self, "labels", tuple(int(a) for a in self.labels))
        if len(self.parents) != len(self.labels):
            raise ValueError("a rooted operator tree over a word of length m needs m parent entries")
        for l, p in enumerate(self.parents):
            if not 0 <= p <= l:
                raise ValueError(f"vertex {l + 1} must attach to one of 0..{l}, got {p}")

    @property
    def m(self) -> int:
        return len(self.labels)

    @property
    def root_degree(self) -> int:
        return self.parents.count(0)

    def children(self) -> dict[int, list[int]]:
        out = {v: [] for v in range(0, self.m + 1)}
        for l, p in enumerate(self.parents):
            out[p].append(l + 1)
        return out

    def to_dict(self) -> dict:
        return {"root": 0, "parents": list(self.parents), "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, data: dict) -> "RootedOpTree":
        return cls(tuple(data["parents"]), tuple(data["labels"]))

    def __str__(self):
        labels = {0: 0, **{v: self.labels[v - 1] for v in range(1, self.m + 1)}}
        return _bracket(0, self.children(), labels)


def _bracket(v, children, labels) -> str:
    if not children[v]:
        return f"*{labels[v]}"
    inner = " ".join(_bracket(c, children, labels) for c in children[v])
    return f"[{inner}]*{labels[v]}"


def enumerate_trees(w: Sequence[int]) -> list[LabeledRecursiveTree]:
    """All trees of ``T_w``: ``(m-1)!`` of them, ordered lexicographically by parent vector."""
    w = _check_word_length(w)
    ranges = [range(1, k + 1) for k in range(1, len(w))]
    return [LabeledRecursiveTree(p, w) for p in itertools.product(*ranges)]


def enumerate_rooted_ops(w: Sequence[int]) -> list[RootedOpTree]:
    """All trees of ``T_w^0``: ``m!`` of them."""
    w = _check_word_length(w)
    ranges = [range(0, l + 1) for l in range(len(w))]
    return [RootedOpTree(p, w) for p in itertools.product(*ranges)]


def brute_force_tree_count(m: int, rooted: bool = False) -> int:
    """Count recursive trees by growing them one vertex at a time.

    Each tree is kept as an explicit edge set; a new vertex is attached to every
    existing vertex in turn. Independent of the parent-vector enumeration.
    """
    start = frozenset()
    trees = {start}
    vertices = [0] if rooted else [1]
    new_vertices = range(1, m + 1) if rooted else range(2, m + 1)
    for v in new_vertices:
        grown = set()
        for edges in trees:
            for u in vertices:
                grown.add(edges | {(u, v)})
        trees = grown
        vertices.append(v)
    return len(trees)


def canonical_form(tree: LabeledRecursiveTree | RootedOpTree) -> tuple:
    """Unordered labelled shape: equal forms give identical fields and operators."""
    children = tree.children()
    root = 0 if isinstance(tree, RootedOpTree) else 1
    labels = {0: 0, **{v: tree.labels[v - 1] for v in range(1, tree.m + 1)}}

    def form(v):
        return (labels[v], tuple(sorted(form(c) for c in children[v])))

    return form(root)


class FieldCache:
    """Memoised derivative tensors of a model at fixed points."""

    def __init__(self, model: VectorFieldModel, x):
        self.model = model
        self.x = check_point(x, model.N)
        self._tensors: dict[tuple[int, int], np.ndarray] = {}

    def tensor(self, i: int, order: int) -> np.ndarray:
        key = (i, order)
        if key not in self._tensors:
            self._tensors[key] = self.model.derivative_tensor(i, self.x, order)
        return self._tensors[key]


def _contract(T: np.ndarray, vectors: Iterable[np.ndarray], nbatch: int) -> np.ndarray:
    """Contract trailing direction axes of ``T`` with ``vectors`` (last axis first)."""
    for u in vectors:
        ones = T.ndim - nbatch - 1
        T = np.sum(T * u.reshape(u.shape[:-1] + (1,) * ones + (u.shape[-1],)), axis=-1)
    return T


def _vertex_field(v: int, children, labels, cache: FieldCache) -> np.ndarray:
    kids = children[v]
    T = cache.tensor(labels[v], len(kids))
    if not kids:
        return T
    vecs = [_vertex_field(c, children, labels, cache) for c in kids]
    return _contract(T, reversed(vecs), cache.x.ndim - 1)


def eval_tree_vf(tree: LabeledRecursiveTree, model: VectorFieldModel, x, cache: FieldCache | None = None):
    """``V_tau(x)`` by recursive multilinear-derivative evaluation."""
    cache = cache if cache is not None else FieldCache(model, x)
    labels = {v: tree.labels[v - 1] for v in range(1, tree.m + 1)}
    return _vertex_field(1, tree.children(), labels, cache)


def eval_tree_vf_fixed_directions(tree: LabeledRecursiveTree, j: Sequence[int], model: VectorFieldModel, x):
    """The single summand ``V_tau^j`` in which edge ``k`` carries direction ``j[k-1]``."""
    j = tuple(int(a) for a in j)
    if len(j) != tree.m - 1:
        raise ValueError(f"expected {tree.m - 1} edge directions, got {len(j)}")
    for a in j:
        if not 1 <= a <= model.N:
            raise ValueError(f"direction {a} out of range 1..{model.N}")
    x = check_point(x, model.N)
    outs = tree.out_directions(j)
    value = model.mixed_partial(tree.labels[0], outs[1], x)
    for v in range(2, tree.m + 1):
        incoming = j[v - 2]
        value = value * model.mixed_partial(tree.labels[v - 1], outs[v], x)[..., incoming - 1 : incoming]
    return value


def apply_rooted_op(op: RootedOpTree, g: Observable, model: VectorFieldModel, x,
                    cache: FieldCache | None = None) -> np.ndarray:
    """``V_{tau^0} g(x)``: root-degree partials of ``g`` contracted with the subtree fields."""
    cache = cache if cache is not None else FieldCache(model, x)
    children = op.children()
    labels = {v: op.labels[v - 1] for v in range(1, op.m + 1)}
    kids = children[0]
    G = g.derivative_tensor(cache.x, len(kids))
    vecs = [_vertex_field(c, children, labels, cache) for c in kids]
    nbatch = cache.x.ndim - 1
    for u in reversed(vecs):
        ones = G.ndim - nbatch - 1
        G = np.sum(G * u.reshape(u.shape[:-1] + (1,) * ones + (u.shape[-1],)), axis=-1)
    return G


def apply_word_direct(w: Sequence[int], g: Observable, model: VectorFieldModel, x) -> np.ndarray:
    """``V_w g(x)`` by nested directional differentiation with jets (no trees).

    With square-zero generators ``t_1..t_m`` build ``y_m = x + t_m V_{w_m}(x)`` and
    ``y_l = y_{l+1} + t_l V_{w_l}(y_{l+1})``; the coefficient of ``t_1...t_m`` in
    ``g(y_1)`` is ``V_{w_m}(...(V_{w_1} g))(x)``.
    """
    w = _check_word_length(w)
    x = check_point(x, model.N)
    m = len(w)
    y = Jet.constant(x, m)
    for l in range(m - 1, -1, -1):
        gen = Jet.constant(np.zeros(()), m)
        gen.coeffs[1 << l] = 1.0
        y = y + gen * model.eval_jet(w[l], y)
    return g.jet(y).top()


def apply_word_via_trees(w: Sequence[int], g: Observable, model: VectorFieldModel, x) -> np.ndarray:
    """``V_w g(x)`` as the sum of tree-like operators over ``T_w^0``."""
    cache = FieldCache(model, x)
    ops = enumerate_rooted_ops(w)
    return sum(apply_rooted_op(op, g, model, x, cache) for op in ops)


def sum_tree_field(w: Sequence[int], model: VectorFieldModel, x, cache: FieldCache | None = None) -> np.ndarray:
    """``sum_{tau in T_w} V_tau(x)``; its ``j``-th component is ``V_w pi_j(x)``."""
    cache = cache if cache is not None else FieldCache(model, x)
    return sum(eval_tree_vf(t, model, x, cache) for t in enumerate_trees(w))


def word_projection(w: Sequence[int], j: int, model: VectorFieldModel, x) -> np.ndarray:
    return apply_word_direct(w, CoordinateProjection(j, model.N), model, x)
