"""scikit-learn style front ends.

These wrap the functional API so that scans compose with ``Pipeline``,
``clone`` and ``get_params``/``set_params``.  Inputs follow sklearn
conventions: ``X`` is either a precomputed square distance matrix
(``metric="precomputed"``) or a point cloud of shape ``(n_samples, n_features)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import spaces
from .convexity import check_finite_busemann
from .four_point import DEFAULT_PASS_TOL, canonical_functional, scan_finite
from .infinitesimal import ScaleSchedule, estimate_liminf
from .metric_core import FiniteMetricSpace, InputError
from .pretangent import (DEFAULT_WINDOW, TAIL_FRACTION, TAU_STAB, TAU_UNSTAB, TAU_ZERO,
                         analyze_pretangent, build_pretangent, curated_pool, load_pool)

_POINT_METRICS = {"euclidean": spaces.euclidean_distance, "l1": spaces.l1_distance,
                  "linf": spaces.linf_distance}


def as_finite_space(X, metric: str = "precomputed") -> FiniteMetricSpace:
    """Validate ``X`` and return the finite metric space it describes."""
    if isinstance(X, FiniteMetricSpace):
        return X
    X = check_array(X, dtype=float, ensure_min_samples=1)
    if metric == "precomputed":
        if X.shape[0] != X.shape[1]:
            raise InputError(f"precomputed distances must be square, got {X.shape}")
        return FiniteMetricSpace(X)
    if metric not in _POINT_METRICS:
        raise InputError(f"unknown metric {metric!r}")
    return FiniteMetricSpace(_POINT_METRICS[metric](X[:, None, :], X[None, :, :]))


class FourPointScanner(BaseEstimator):
    """Exhaustive four-point scan of a finite metric space.

    Parameters
    ----------
    functional : {"quadrilateral", "lebedeva_petrunin", "ptolemy"} or alias
    metric : "precomputed" or a point-cloud metric ("euclidean", "l1", "linf")
    tol : pass tolerance on the minimum defect
    n_jobs : worker threads; the result does not depend on it

    Attributes
    ----------
    report_ : QuadrupleDefectReport
    min_defect_ : float or None (None for fewer than four points)
    witness_ : tuple of point indices in functional argument order
    passed_ : bool
    """

    def __init__(self, functional="quadrilateral", metric="precomputed", tol=DEFAULT_PASS_TOL,
                 n_jobs=1):
        self.functional = functional
        self.metric = metric
        self.tol = tol
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        space = as_finite_space(X, self.metric)
        self.report_ = scan_finite(space, canonical_functional(self.functional), self.tol,
                                   self.n_jobs)
        self.min_defect_ = self.report_.min_defect
        self.witness_ = self.report_.witness_indices
        self.passed_ = self.report_.passed
        return self

    def score(self, X, y=None):
        """Minimum defect of ``X`` (``+inf`` when vacuous); larger is better."""
        report = scan_finite(as_finite_space(X, self.metric),
                             canonical_functional(self.functional), self.tol, self.n_jobs)
        return float("inf") if report.vacuous else report.min_defect


class LiminfEstimator(BaseEstimator):
    """Tail-infimum estimate of a normalized functional at the base point.

    ``fit()`` without data uses the built-in ``space``; ``fit(X)`` treats the
    rows of ``X`` as a point cloud with base point ``base_point``.
    """

    def __init__(self, functional="A1", space="euclidean:2", scales="geometric:0.5,0.5,10",
                 samples=60, seed=0, eps=None, metric="euclidean", base_point=0, n_jobs=1):
        self.functional = functional
        self.space = space
        self.scales = scales
        self.samples = samples
        self.seed = seed
        self.eps = eps
        self.metric = metric
        self.base_point = base_point
        self.n_jobs = n_jobs

    def _oracle(self, X):
        if X is None:
            return spaces.make_oracle(self.space)
        fs = as_finite_space(X, self.metric)
        return spaces.cloud_oracle(fs.dist, self.base_point)

    def fit(self, X=None, y=None):
        oracle = self._oracle(X)
        schedule = ScaleSchedule.parse(self.scales, self.samples)
        self.estimate_ = estimate_liminf(self.functional, oracle, schedule, self.seed,
                                         self.eps, n_jobs=self.n_jobs)
        self.per_scale_min_ = np.asarray(self.estimate_.per_scale_min)
        self.tail_inf_ = self.estimate_.tail_inf
        self.passed_ = self.estimate_.passed
        return self


class PretangentTransformer(TransformerMixin, BaseEstimator):
    """Builds a pretangent approximation from a pool of sequences.

    ``fit(pool)`` accepts a pool dict (the JSON pool format), a path to one, or
    ``None`` for the curated pool of ``space``.  ``transform`` returns the
    quotient distance matrix.
    """

    def __init__(self, space="euclidean:2", window=DEFAULT_WINDOW, tau_stab=TAU_STAB,
                 tau_unstab=TAU_UNSTAB, tau_zero=TAU_ZERO, tail_fraction=TAIL_FRACTION,
                 tol=DEFAULT_PASS_TOL, n_jobs=1):
        self.space = space
        self.window = window
        self.tau_stab = tau_stab
        self.tau_unstab = tau_unstab
        self.tau_zero = tau_zero
        self.tail_fraction = tail_fraction
        self.tol = tol
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        oracle = spaces.make_oracle(self.space)
        pool = curated_pool(oracle) if X is None else X
        r, seqs = load_pool(pool, oracle, self.window)
        self.normalizing_ = r
        self.family_, self.approximation_ = build_pretangent(
            seqs, r, oracle, self.tau_stab, self.tau_unstab, self.tau_zero, self.tail_fraction,
            self.n_jobs)
        self.quotient_ = self.approximation_.quotient
        return self

    def transform(self, X=None):
        check_is_fitted(self, "approximation_")
        return np.array(self.quotient_.dist)

    def analyze(self):
        check_is_fitted(self, "approximation_")
        reports = analyze_pretangent(self.approximation_, self.tol, self.n_jobs)
        reports["busemann"] = check_finite_busemann(self.quotient_, self.tol)
        return reports
