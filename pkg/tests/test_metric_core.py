import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from curvature_lab._util import derive_rng, split_range, tail_window
from curvature_lab.metric_core import (FiniteMetricSpace, InputError, load_finite_space,
                                       spot_check_oracle, validate_metric)
from curvature_lab.spaces import euclidean_distance, make_oracle


class TestIngestion:

    @pytest.mark.parametrize("bad", [
        [[0, 1], [1, 0], [2, 2]],
        [[0, np.nan], [np.nan, 0]],
        [[0, np.inf], [np.inf, 0]],
        [[0, -1], [-1, 0]],
        [1, 2, 3],
    ])
    def test_rejects(self, bad):
        with pytest.raises(InputError):
            FiniteMetricSpace(bad)

    def test_label_checks(self):
        with pytest.raises(InputError):
            FiniteMetricSpace(np.zeros((2, 2)), ["a"])
        with pytest.raises(InputError):
            FiniteMetricSpace(np.zeros((2, 2)), ["a", "a"])

    def test_matrix_is_read_only(self, star):
        with pytest.raises(ValueError):
            star.dist[0, 1] = 5.0

    def test_label_lookup(self, star):
        assert star.distance("a", "b") == 2.0
        assert star.index("e") == 3
        with pytest.raises(InputError):
            star.index("zz")

    def test_round_trip(self, star, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(star.to_dict()))
        back = load_finite_space(str(path))
        assert back.labels == star.labels
        assert np.array_equal(back.dist, star.dist)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_finite_space(str(tmp_path / "nope.json"))
        with pytest.raises(InputError):
            load_finite_space({"labels": ["a"]})


class TestValidate:

    def test_euclidean_passes(self, plane_space):
        assert validate_metric(plane_space).passed

    def test_triangle_witness(self):
        D = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
        rep = validate_metric(FiniteMetricSpace(D))
        assert not rep.passed
        axiom, (i, j, k), excess = rep.violations[0]
        assert axiom == "triangle"
        assert D[i, j] > D[i, k] + D[k, j]
        assert excess == pytest.approx(3.0)

    def test_symmetry_and_identity(self):
        D = np.array([[0.5, 1], [2, 0]], dtype=float)
        kinds = {v[0] for v in validate_metric(FiniteMetricSpace(D)).violations}
        assert kinds == {"identity", "symmetry"}

    def test_tolerance_absorbs_rounding(self):
        D = np.array([[0, 1, 2 + 1e-12], [1, 0, 1], [2 + 1e-12, 1, 0]])
        assert validate_metric(FiniteMetricSpace(D), 1e-9).passed
        assert not validate_metric(FiniteMetricSpace(D), 0.0).passed

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(0, 10), min_size=15, max_size=15))
    def test_agrees_with_brute_force(self, vals):
        # 6x6 symmetric matrix with zero diagonal from 15 upper entries
        D = np.zeros((6, 6))
        D[np.triu_indices(6, 1)] = vals
        D = D + D.T
        expected = oracles.brute_triangle_ok(D.tolist(), 1e-9)
        assert validate_metric(FiniteMetricSpace(D), 1e-9).passed == expected


@pytest.mark.parametrize("spec", ["euclidean:3", "l1", "linf", "hyperbolic", "sphere:2",
                                  "tripod:1,2,0.5", "snowflake:0.5"])
def test_builtin_oracles_pass_spot_check(spec):
    oracle = make_oracle(spec)
    rep = spot_check_oracle(oracle, derive_rng(0, "spot"), 10_000, scale=0.7)
    assert rep.passed, rep.violations[:3]


def test_pairwise_is_exactly_symmetric():
    oracle = make_oracle("hyperbolic")
    P = oracle.sample_at_scale(2.0, derive_rng(1), 40)
    D = oracle.pairwise(P)
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)


def test_from_points_matches_loop():
    P = np.random.default_rng(3).normal(size=(7, 3))
    space = FiniteMetricSpace.from_points(P, euclidean_distance)
    ref = oracles.dist_matrix(P.tolist(), oracles.euclid)
    assert np.allclose(space.dist, ref, atol=1e-14)


class TestStreams:

    def test_label_streams_are_fixed(self):
        a = derive_rng(7, "liminf", 3).random(4)
        b = derive_rng(7, "liminf", 3).random(4)
        c = derive_rng(7, "liminf", 4).random(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_split_range_covers(self):
        for n in (0, 1, 7, 100):
            for parts in (1, 3, 16):
                bounds = split_range(n, parts)
                covered = [i for lo, hi in bounds for i in range(lo, hi)]
                assert covered == list(range(n))

    def test_tail_window(self):
        assert tail_window(10, 1 / 3) == slice(6, 10)
        assert tail_window(1, 0.5) == slice(0, 1)
