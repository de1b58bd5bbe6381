"""scikit-learn style wrappers over the signature and CDE machinery.

Every transformer takes a batch of sampled paths ``X`` of shape
``(n_paths, n_points, d)``; vertices are joined linearly.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .cde import SolverConfig, solve_batch
from .reconstruction import ReconstructionConfig, reconstruct
from .signature import PiecewiseLinearPath, path_signature
from .vector_fields import sample_model

__all__ = [
    "check_paths",
    "SignatureTransformer",
    "RandomizedSignatureTransformer",
    "SignatureReconstructor",
]


def check_paths(X, d: int | None = None) -> np.ndarray:
    """Validate a path batch: finite floats of shape ``(n_paths, n_points >= 2, d)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected paths of shape (n_paths, n_points, d), got {X.shape}")
    if X.shape[1] < 2:
        raise ValueError("each path needs at least two points")
    if not np.all(np.isfinite(X)):
        raise ValueError("paths contain non-finite values")
    if d is not None and X.shape[2] != d:
        raise ValueError(f"paths have dimension {X.shape[2]}, estimator was fitted with d={d}")
    return X


def _as_path(points: np.ndarray) -> PiecewiseLinearPath:
    return PiecewiseLinearPath(np.linspace(0.0, 1.0, points.shape[0]), points)


class SignatureTransformer(TransformerMixin, BaseEstimator):
    """Flattened truncated signature, levels ``1..level`` in lexicographic word order."""

    def __init__(self, level: int = 2):
        self.level = level

    def fit(self, X, y=None):
        X = check_paths(X)
        if int(self.level) != self.level or self.level < 1:
            raise ValueError(f"level must be a positive integer, got {self.level!r}")
        self.n_dims_ = X.shape[2]
        self.n_features_out_ = sum(self.n_dims_**n for n in range(1, self.level + 1))
        return self

    def transform(self, X):
        check_is_fitted(self, "n_dims_")
        X = check_paths(X, self.n_dims_)
        return np.stack([path_signature(_as_path(p), self.level).flat()[1:] for p in X])


class RandomizedSignatureTransformer(TransformerMixin, BaseEstimator):
    """Terminal values of a random CDE driven by each path (a random reservoir)."""

    def __init__(self, n_components: int = 8, kind: str = "neural1", r: float = 1.0,
                 steps_per_segment: int = 8, random_state: int = 0):
        self.n_components = n_components
        self.kind = kind
        self.r = r
        self.steps_per_segment = steps_per_segment
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_paths(X)
        rng = np.random.default_rng([self.random_state, 1])
        self.n_dims_ = X.shape[2]
        self.model_ = sample_model(self.kind, self.n_dims_, self.n_components, self.random_state)
        self.y0_ = rng.standard_normal(self.n_components)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_paths(X, self.n_dims_)
        cfg = SolverConfig(steps_per_segment=self.steps_per_segment, error_control=False)
        return np.stack([solve_batch(self.model_, _as_path(p), self.y0_[None], self.r, cfg).y_T[0] for p in X])


class SignatureReconstructor(TransformerMixin, BaseEstimator):
    """Signature estimated from CDE solutions of a random model, flattened like
    :class:`SignatureTransformer`.

    Per-path reports (with errors against the exact signature) are kept in
    ``reports_`` after :meth:`transform`.
    """

    def __init__(self, level: int = 3, n_state: int = 2, kind: str = "neural2exp", epsilon: float = 0.03,
                 random_state: int = 0):
        self.level = level
        self.n_state = n_state
        self.kind = kind
        self.epsilon = epsilon
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_paths(X)
        self.n_dims_ = X.shape[2]
        self.model_ = sample_model(self.kind, self.n_dims_, self.n_state, self.random_state)
        self.config_ = ReconstructionConfig(L=self.level, epsilon=self.epsilon, seed=self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_paths(X, self.n_dims_)
        self.reports_ = [reconstruct(self.model_, _as_path(p), self.config_) for p in X]
        return np.stack([rep.estimated_tensor().flat()[1:] for rep in self.reports_])
