"""scikit-learn style selectors.

Each selector picks ``n_select`` rows of ``X`` with (approximately) maximal
volume. ``transform`` returns the chosen rows of the training matrix, so
``fit_transform`` is the usual entry point.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .algorithms import DEFAULT_CAP, DEFAULT_EPS, brute_force, greedy, local_search
from .coreset import PipelineConfig, run_pipeline
from .geometry import PointSet, rbf_kernelize

KERNELS = ("linear", "rbf", "precomputed")


def _precomputed(K: np.ndarray) -> PointSet:
    def block(rows, cols):
        return K[np.ix_(rows, cols)]

    def diag(rows):
        return K[rows, rows]

    return PointSet.from_oracle(block, K.shape[0], diag=diag, description="precomputed")


def as_point_set(X, kernel="linear", sigma=1.0) -> PointSet:
    """Validate ``X`` and wrap it according to ``kernel``."""
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if kernel == "precomputed":
        if X.shape[0] != X.shape[1]:
            raise ValueError(f"precomputed kernel must be square, got {X.shape}")
        if not np.allclose(X, X.T):
            raise ValueError("precomputed kernel must be symmetric")
        return _precomputed(X)
    ps = PointSet(X)
    return rbf_kernelize(ps, sigma) if kernel == "rbf" else ps


class _VolumeSelector(TransformerMixin, BaseEstimator):

    def _fit_coreset(self, ps):
        raise NotImplementedError

    def fit(self, X, y=None):
        if self.n_select < 1:
            raise ValueError(f"n_select must be >= 1, got {self.n_select}")
        ps = as_point_set(X, self.kernel, self.sigma)
        self.n_features_in_ = np.shape(X)[1]
        self.n_samples_fit_ = ps.n
        self.coreset_ = self._fit_coreset(ps)
        self.indices_ = np.asarray(self.coreset_.indices, dtype=np.intp)
        self.log_volume_ = self.coreset_.log_volume
        self.degenerate_ = self.coreset_.degenerate
        return self

    def get_support(self, indices=False):
        """Mask (or index array) of the selected rows."""
        check_is_fitted(self, "indices_")
        if indices:
            return self.indices_.copy()
        mask = np.zeros(self.n_samples_fit_, dtype=bool)
        mask[self.indices_] = True
        return mask

    def transform(self, X):
        check_is_fitted(self, "indices_")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] != self.n_samples_fit_:
            raise ValueError(f"X has {X.shape[0]} rows; the selector was fit on "
                             f"{self.n_samples_fit_}")
        return X[self.indices_]


class GreedyVolumeSelector(_VolumeSelector):
    """Farthest-point greedy: add the row farthest from the current span."""

    def __init__(self, n_select=10, kernel="linear", sigma=1.0):
        self.n_select = n_select
        self.kernel = kernel
        self.sigma = sigma

    def _fit_coreset(self, ps):
        return greedy(ps, self.n_select)


class LocalSearchVolumeSelector(_VolumeSelector):
    """Greedy start improved by (1+eps)-swaps.

    Attributes
    ----------
    indices_ : ndarray of shape (n_select,)
    log_volume_ : float
    n_swaps_ : int
    """

    def __init__(self, n_select=10, eps=DEFAULT_EPS, kernel="linear", sigma=1.0):
        self.n_select = n_select
        self.eps = eps
        self.kernel = kernel
        self.sigma = sigma

    def _fit_coreset(self, ps):
        cs = local_search(ps, self.n_select, self.eps)
        self.n_swaps_ = cs.swap_count
        return cs


class BruteForceVolumeSelector(_VolumeSelector):
    def __init__(self, n_select=2, kernel="linear", sigma=1.0, cap=DEFAULT_CAP):
        self.n_select = n_select
        self.kernel = kernel
        self.sigma = sigma
        self.cap = cap

    def _fit_coreset(self, ps):
        return brute_force(ps, self.n_select, cap=self.cap)


class ComposableCoresetSelector(_VolumeSelector):
    """Simulated distributed selection.

    Rows are split at random into ``n_parts`` parts, each part is summarized
    by ``coreset_alg`` and ``aggregation_alg`` picks the final rows from the
    union of the summaries. With ``n_repeats > 1`` the run with the largest
    volume is kept; all runs are available in ``reports_``.
    """

    def __init__(self, n_select=10, n_parts=10, coreset_alg="local-search",
                 aggregation_alg="local-search", eps=DEFAULT_EPS, n_repeats=1,
                 kernel="linear", sigma=1.0, random_state=None):
        self.n_select = n_select
        self.n_parts = n_parts
        self.coreset_alg = coreset_alg
        self.aggregation_alg = aggregation_alg
        self.eps = eps
        self.n_repeats = n_repeats
        self.kernel = kernel
        self.sigma = sigma
        self.random_state = random_state

    def _fit_coreset(self, ps):
        seed = self.random_state
        if not isinstance(seed, (int, np.integer)):
            seed = int(check_random_state(seed).randint(np.iinfo(np.int32).max))
        cfg = PipelineConfig(k=self.n_select, m=self.n_parts, eps=self.eps,
                             coreset_alg=self.coreset_alg,
                             aggregation_alg=self.aggregation_alg,
                             master_seed=int(seed), repetitions=self.n_repeats)
        self.reports_ = run_pipeline(ps, cfg)
        best = max(self.reports_, key=lambda r: r.final_log_volume)
        self.union_ = np.asarray(best.union, dtype=np.intp)
        return best.final
