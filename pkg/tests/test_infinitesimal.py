from itertools import combinations, permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from curvature_lab._util import derive_rng
from curvature_lab.infinitesimal import (A1, A2, A3, ScaleSchedule, estimate_liminf, evaluate,
                                         get_functional, matrix_evaluator, minimize_at_scale,
                                         scale_profile, witness_values_consistent)
from curvature_lab.metric_core import InputError
from curvature_lab.spaces import euclidean_distance, make_oracle

P0 = np.zeros(2)
pt = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


def brute_normalized(name, D, p, idx):
    w, x, y, z = idx
    dlt = oracles.delta(D, p, idx)
    if dlt == 0:
        return 0.0
    if name == "A1":
        num = oracles.quad(D, w, x, y, z)
    elif name == "A2":
        num = oracles.lp(D, w, x, y, z)
    else:
        num = D[x][w] * D[y][z] + D[x][z] * D[y][w] - D[x][y] * D[w][z]
    return num / dlt ** 2


class TestEvaluate:

    @pytest.mark.parametrize("f", [A1, A2, A3, "a1", "A2", "a3"])
    def test_all_at_base_is_zero(self, f):
        assert evaluate(f, P0, P0, P0, P0, P0, euclidean_distance) == 0.0

    def test_unknown(self):
        with pytest.raises(InputError):
            get_functional("A4")

    @settings(max_examples=50, deadline=None)
    @given(pt, pt, pt, pt, st.floats(1e-3, 1e3))
    def test_scale_invariant(self, w, x, y, z, lam):
        pts = [np.array(q) for q in (w, x, y, z)]
        for f in (A1, A2, A3):
            a = evaluate(f, *pts, P0, euclidean_distance)
            b = evaluate(f, *(lam * q for q in pts), P0, euclidean_distance)
            assert b == pytest.approx(a, rel=1e-9, abs=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(pt, min_size=5, max_size=5))
    def test_matches_brute_force(self, pts):
        P = np.array([[0.0, 0.0]] + list(pts))
        D = oracles.dist_matrix(P.tolist(), oracles.euclid)
        for f in (A1, A2, A3):
            for idx in [(1, 2, 3, 4), (2, 0, 4, 5), (5, 3, 1, 2)]:
                got = evaluate(f, *P[list(idx)], P0, euclidean_distance)
                assert got == pytest.approx(brute_normalized(f.id, D, 0, idx), abs=1e-9)

    def test_matrix_evaluator_orderings_reach_minimum(self):
        # the reduced ordering tables find the same minimum as all 24 orders
        rng = np.random.default_rng(1)
        P = np.vstack([np.zeros(2), rng.normal(size=(6, 2))])
        D = euclidean_distance(P[:, None], P[None, :])
        Dl = D.tolist()
        for f in (A1, A2, A3):
            ev = matrix_evaluator(f, D, D[0])
            best_reduced = min(ev(np.array([[s[i] for i in o] for o in f.orderings])).min()
                               for s in combinations(range(7), 4))
            best_all = min(brute_normalized(f.id, Dl, 0, q) for q in permutations(range(7), 4))
            assert best_reduced == pytest.approx(best_all, abs=1e-12)


class TestSchedule:

    def test_geometric(self):
        s = ScaleSchedule.parse("geometric:0.5,0.5,10", 60)
        assert s.radii[0] == 0.5 and s.radii[-1] == 0.5 ** 10
        assert s.tail_size == 4

    def test_explicit(self):
        assert ScaleSchedule.parse("1,0.1,0.01", 8).radii == (1.0, 0.1, 0.01)

    @pytest.mark.parametrize("text", ["", "1,2", "0.5,0", "geometric:1,2,3", "geometric:1,0.5",
                                      "a,b"])
    def test_rejects(self, text):
        with pytest.raises(InputError):
            ScaleSchedule.parse(text, 10)

    def test_too_few_samples(self):
        with pytest.raises(InputError):
            ScaleSchedule.parse("1", 3)


class TestLiminf:

    def test_euclidean_nonnegative(self):
        sched = ScaleSchedule.geometric(0.5, 0.5, 6, 30)
        for f in ("A1", "A2", "A3"):
            est = estimate_liminf(f, make_oracle("euclidean:2"), sched, seed=0)
            assert est.passed, (f, est.tail_inf)
            assert witness_values_consistent(est, make_oracle("euclidean:2"))

    def test_tripod_a2_is_minus_one(self):
        oracle = make_oracle("tripod:1,1,1")
        est = estimate_liminf("A2", oracle, ScaleSchedule.geometric(0.5, 0.5, 6, 20), seed=3)
        assert est.per_scale_min == [-1.0] * 6
        assert not est.passed

    def test_threads_do_not_change_result(self):
        oracle = make_oracle("hyperbolic")
        sched = ScaleSchedule.geometric(1.0, 0.5, 5, 40)
        a = estimate_liminf("A2", oracle, sched, seed=11, n_jobs=1).to_dict()
        b = estimate_liminf("A2", oracle, sched, seed=11, n_jobs=8).to_dict()
        assert a == b

    def test_more_samples_never_raise_the_minimum(self):
        oracle = make_oracle("hyperbolic")
        prev = None
        for m in (10, 20, 40):
            est = estimate_liminf("A2", oracle, ScaleSchedule.geometric(1.0, 0.5, 3, m), seed=2)
            if prev is not None:
                assert all(b <= a for a, b in zip(prev, est.per_scale_min))
            prev = est.per_scale_min

    def test_default_eps(self):
        sched = ScaleSchedule.geometric(0.5, 0.5, 3, 8)
        assert estimate_liminf("A1", make_oracle("hyperbolic"), sched, 0).eps == 1e-3
        assert estimate_liminf("A1", make_oracle("l1"), sched, 0).eps == 1e-6
        assert estimate_liminf("A1", make_oracle("l1"), sched, 0, eps=0.5).eps == 0.5

    def test_csv_rows(self):
        est = estimate_liminf("A1", make_oracle("l1"), ScaleSchedule.geometric(1, 0.5, 4, 8), 0)
        rows = est.csv_rows()
        assert len(rows) == 4 and rows[0] == (1.0, est.per_scale_min[0])

    def test_truncated_scale_keeps_anchor_subsets(self):
        oracle = make_oracle("tripod:1,1,1")
        value, roles, P, examined, truncated = minimize_at_scale(
            "A2", oracle, 0.5, 40, derive_rng(0), derive_rng(1), max_quadruples=100)
        assert truncated and value == -1.0


def test_scale_profile_of_fixed_square_is_constant():
    oracle = make_oracle("l1")
    cfg = lambda t: [np.array(v) * t for v in ([1, 0], [0, 1], [-1, 0], [0, -1])]
    vals = scale_profile("A3", oracle, cfg, [1.0, 0.1, 1e-3])
    assert vals[0] == pytest.approx(vals[1]) == pytest.approx(vals[2])
