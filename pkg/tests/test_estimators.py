import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from curvature_lab.estimators import (FourPointScanner, LiminfEstimator, PretangentTransformer,
                                      as_finite_space)
from curvature_lab.metric_core import InputError


def test_get_params_round_trip():
    est = FourPointScanner(functional="lp", tol=1e-6)
    assert est.get_params() == {"functional": "lp", "metric": "precomputed", "tol": 1e-6,
                                "n_jobs": 1}
    twin = clone(est).set_params(n_jobs=4)
    assert twin.n_jobs == 4 and est.n_jobs == 1


def test_scanner_on_points_and_matrix(plane_points, star):
    fitted = FourPointScanner("quad", metric="euclidean").fit(plane_points)
    assert fitted.passed_ and fitted.min_defect_ >= -1e-9
    lp = FourPointScanner("lp").fit(star.dist)
    assert lp.min_defect_ == -1.0 and not lp.passed_
    assert lp.score(star.dist) == -1.0


def test_scanner_vacuous_score():
    assert FourPointScanner().score(np.zeros((2, 2))) == float("inf")


@pytest.mark.parametrize("X,metric", [
    (np.zeros((2, 3)), "precomputed"),
    (np.array([[0, np.nan], [np.nan, 0]]), "precomputed"),
    (np.zeros((3, 2)), "cosine"),
])
def test_input_validation(X, metric):
    with pytest.raises(ValueError):
        as_finite_space(X, metric)


def test_input_error_is_value_error():
    assert issubclass(InputError, ValueError)


def test_liminf_estimator():
    est = LiminfEstimator("A2", space="tripod:1,1,1", scales="geometric:0.5,0.5,4", samples=12)
    est.fit()
    assert est.tail_inf_ == -1.0 and not est.passed_
    assert est.per_scale_min_.shape == (4,)


def test_liminf_estimator_on_cloud():
    grid = np.array([[i, j] for i in range(-3, 4) for j in range(-3, 4)], dtype=float)
    base = int(np.flatnonzero((grid == 0).all(axis=1))[0])
    est = LiminfEstimator("A1", scales="3,2,1", samples=20, base_point=base).fit(grid)
    assert est.passed_


def test_pretangent_transformer_in_pipeline():
    pipe = make_pipeline(PretangentTransformer(space="euclidean:2", window=128))
    Q = pipe.fit_transform(None)
    assert Q.shape[0] == Q.shape[1] >= 4
    tr = pipe.steps[0][1]
    reports = tr.analyze()
    assert all(r.passed for r in reports.values())
