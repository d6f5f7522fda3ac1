"""scikit-learn style wrappers so the pipeline stages compose with sklearn tooling."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .aggregate import ThresholdRule
from .matrices import daily_channel_correlations, fisher_reduce
from .structure import DistanceMatrix, classical_mds, cut, upgma


def check_distance_matrix(X) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_min_samples=2, ensure_min_features=2)
    if X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square distance matrix, got shape {X.shape}")
    if not np.allclose(X, X.T, rtol=0, atol=1e-12):
        raise ValueError("distance matrix must be symmetric")
    X = (X + X.T) / 2
    np.fill_diagonal(X, 0.0)
    if np.any(X < 0):
        raise ValueError("distances must be non-negative")
    return X


def check_correlation_stack(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[1] != X.shape[2]:
        raise ValueError("expected an (M, n, n) stack of correlation matrices")
    present = X[~np.isnan(X)]
    if present.size and (present.min() < -1 or present.max() > 1):
        raise ValueError("correlations must lie in [-1, 1]")
    return X


class DailySpearman(BaseEstimator):
    """Fisher-averaged daily Spearman correlation between the columns of X.

    Rows are consecutive 10-minute samples starting at a day boundary; NaN
    marks a missing sample. ``correlation_`` holds NaN where no day qualified.
    """

    def __init__(self, samples_per_day=144, min_pairs=72, clamp_eps=1e-7):
        self.samples_per_day = samples_per_day
        self.min_pairs = min_pairs
        self.clamp_eps = clamp_eps

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_all_finite="allow-nan", ensure_min_samples=1)
        n, f = X.shape
        days = -(-n // self.samples_per_day)
        padded = np.full((days * self.samples_per_day, f), np.nan)
        padded[:n] = X
        cube = padded.T.reshape(f, days, self.samples_per_day)
        mask = ~np.isnan(cube)
        r, pairs = daily_channel_correlations(np.nan_to_num(cube), mask, self.min_pairs)
        self.daily_ = r
        self.n_pairs_ = pairs
        self.correlation_, self.n_days_ = fisher_reduce(r, 0, self.clamp_eps)
        np.fill_diagonal(self.correlation_, 1.0)
        self.n_features_in_ = f
        return self


class SignificanceAggregator(TransformerMixin, BaseEstimator):
    """Counts of significant entries across a stack of correlation matrices."""

    def __init__(self, tau=0.7, sense="positive"):
        self.tau = tau
        self.sense = sense

    def fit(self, X, y=None):
        X = check_correlation_stack(X)
        rule = ThresholdRule(self.tau, self.sense)
        self.counts_ = rule.indicator(X).sum(axis=0)
        self.M_ = X.shape[0]
        self.shares_ = self.counts_ / self.M_
        return self

    def transform(self, X=None):
        check_is_fitted(self, "shares_")
        return self.shares_


class AverageLinkage(ClusterMixin, BaseEstimator):
    """Average-linkage (UPGMA) clustering on a precomputed distance matrix."""

    def __init__(self, n_clusters=2):
        self.n_clusters = n_clusters

    def fit(self, X, y=None):
        D = check_distance_matrix(X)
        self.dendrogram_ = upgma(DistanceMatrix([str(i) for i in range(len(D))], D))
        self.labels_ = cut(self.dendrogram_, self.n_clusters)
        return self


class ClassicalMDS(TransformerMixin, BaseEstimator):
    """Torgerson scaling of a precomputed distance matrix."""

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y=None):
        D = check_distance_matrix(X)
        emb = classical_mds(DistanceMatrix([str(i) for i in range(len(D))], D), self.n_components)
        self.embedding_ = emb.coordinates
        self.eigenvalues_ = emb.eigenvalues
        self.stress_ = emb.stress
        self.negative_eigenvalue_flag_ = emb.negative_eigenvalue_flag
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X=None):
        check_is_fitted(self, "embedding_")
        return self.embedding_
