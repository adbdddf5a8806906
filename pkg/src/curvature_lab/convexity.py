"""Midpoint and Busemann convexity at the base point, plus the finite-space midpoint test.

Profiles are evaluated index by index along finite windows of sequences
converging to ``p``.  When ``x_n = y_n = p`` the midpoint defect is 0 if also
``z_n = p`` and unbounded otherwise; the unbounded case is the
:data:`UNBOUNDED` sentinel, never a float infinity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._util import derive_rng, tail_window
from .metric_core import FiniteMetricSpace, InputError, MetricOracle
from .pretangent import TAIL_FRACTION, PointSequence

EPS_HOOK = 1e-6
EPS_SEARCH = 1e-2


class _Unbounded:
    """Sentinel for the unbounded midpoint defect (``x = y = p``, ``z != p``)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __reduce__(self):
        return (_Unbounded, ())


UNBOUNDED = _Unbounded()


class PreconditionError(ValueError):
    """A certified input (midpoint, convergence to ``p``) failed its certificate."""


def positive_part(t):
    """``(|t| + t) / 2``; works elementwise on arrays."""
    if np.ndim(t):
        t = np.asarray(t, dtype=float)
        return (np.abs(t) + t) / 2
    return (abs(t) + t) / 2


def midpoint_defect(x, y, z, p, d: Callable):
    """Normalized deviation of ``z`` from being a midpoint of ``x`` and ``y``.

    ``max(|d(x,z) - d(x,y)/2|, |d(y,z) - d(x,y)/2|) / max(d(x,p), d(y,p))``.
    """
    delta = max(float(d(x, p)), float(d(y, p)))
    if delta == 0:
        return 0.0 if float(d(z, p)) == 0 else UNBOUNDED
    half = 0.5 * float(d(x, y))
    return max(abs(float(d(x, z)) - half), abs(float(d(y, z)) - half)) / delta


def midpoint_profile(x: np.ndarray, y: np.ndarray, z: np.ndarray, p, d: Callable):
    """Vectorised defects along a window; returns ``(values, unbounded_mask)``.

    Entries under the mask carry no numeric value (they are reported as
    :data:`UNBOUNDED`); their slot in ``values`` is 0.
    """
    p = np.asarray(p, dtype=float)[None, :]
    delta = np.maximum(d(x, p), d(y, p))
    half = 0.5 * d(x, y)
    num = np.maximum(np.abs(d(x, z) - half), np.abs(d(y, z) - half))
    degenerate = delta == 0
    values = np.zeros(len(x))
    values[~degenerate] = num[~degenerate] / delta[~degenerate]
    unbounded = degenerate & (d(z, p) > 0)
    return values, unbounded


def _profile_list(values: np.ndarray, unbounded: np.ndarray) -> list:
    return [UNBOUNDED if u else float(v) for v, u in zip(values, unbounded)]


def profile_to_json(profile: list) -> list:
    return ["unbounded" if v is UNBOUNDED else v for v in profile]


def _tail_stats(values: np.ndarray, unbounded: np.ndarray, tail_fraction: float):
    sl = tail_window(len(values), tail_fraction)
    if unbounded[sl].any():
        return UNBOUNDED, float(values[sl][~unbounded[sl]].min()) if (~unbounded[sl]).any() else UNBOUNDED
    return float(values[sl].max()), float(values[sl].min())


def check_converges(seq: PointSequence, oracle: MetricOracle, rel_slack: float = 1e-12):
    """Certificate that ``d(x_n, p)`` is nonincreasing over the tail half and ends no larger than it starts."""
    dist = np.asarray(oracle.dist(seq.points, oracle.base_point[None, :]), dtype=float)
    tail = dist[len(dist) // 2:]
    ok = dist[-1] <= dist[0] and np.all(np.diff(tail) <= rel_slack * np.maximum(tail[:-1], 1e-300))
    if not ok:
        raise PreconditionError(f"sequence {seq.label!r} is not certified to converge to the base point")


@dataclass
class MidpointSearchResult:
    midpoint: PointSequence
    profile: list
    tail_max: object
    tail_min: object
    method: str
    eps: float

    @property
    def passed(self) -> bool:
        return self.tail_max is not UNBOUNDED and self.tail_max <= self.eps

    @property
    def verdict(self) -> str:
        return "midpoint-convex evidence" if self.passed else "counterexample evidence"

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "profile": profile_to_json(self.profile),
            "tail_max": "unbounded" if self.tail_max is UNBOUNDED else self.tail_max,
            "tail_min": "unbounded" if self.tail_min is UNBOUNDED else self.tail_min,
            "eps_mid": self.eps,
            "verdict": self.verdict,
        }


def search_infinitesimal_midpoint(oracle: MetricOracle, x: PointSequence, y: PointSequence,
                                  budget: int, seed: int, use_hook: bool = True,
                                  eps: Optional[float] = None,
                                  tail_fraction: float = TAIL_FRACTION,
                                  stream_label: str = "") -> MidpointSearchResult:
    """Per-index best midpoint candidate for ``x_n, y_n`` and the resulting defect profile.

    Uses the oracle's analytic midpoint when available (and ``use_hook``),
    otherwise ``budget`` random candidates from ``B(p, 2 delta_p(x_n, y_n))``
    drawn from the stream ``(seed, "midpoint", stream_label, n)``.  Indices
    with ``x_n = y_n = p`` take ``z_n = p``.
    """
    if budget < 1:
        raise InputError("search budget must be at least 1")
    if len(x) != len(y):
        raise InputError("sequence windows differ in length")
    check_converges(x, oracle)
    check_converges(y, oracle)
    d = oracle.dist
    p = oracle.base_point
    X, Y = x.points, y.points
    delta = np.maximum(d(X, p[None, :]), d(Y, p[None, :]))
    Z = np.tile(p, (len(X), 1)).astype(float)
    hook = oracle.midpoint if use_hook else None
    live = delta > 0
    if hook is not None:
        Z[live] = np.asarray(hook(X[live], Y[live]), dtype=float).reshape(-1, oracle.dim)
        method = "analytic"
    else:
        method = "random-search"
        for n in np.flatnonzero(live):
            rng = derive_rng(seed, "midpoint", stream_label, int(n))
            cand = oracle.sample_at_scale(2.0 * delta[n], rng, budget)
            xs = np.broadcast_to(X[n], cand.shape)
            ys = np.broadcast_to(Y[n], cand.shape)
            vals, _ = midpoint_profile(xs, ys, cand, p, d)
            Z[n] = cand[int(np.argmin(vals))]
    if eps is None:
        eps = EPS_HOOK if method == "analytic" else EPS_SEARCH
    values, unbounded = midpoint_profile(X, Y, Z, p, d)
    tail_max, tail_min = _tail_stats(values, unbounded, tail_fraction)
    return MidpointSearchResult(PointSequence(Z, f"mid({x.label},{y.label})"),
                                _profile_list(values, unbounded), tail_max, tail_min, method, eps)


@dataclass
class BusemannProfile:
    profile: list
    tail_max: float
    eps: float
    midpoint_tail: float

    @property
    def passed(self) -> bool:
        return self.tail_max <= self.eps

    @property
    def verdict(self) -> str:
        return "Busemann-convex evidence at p" if self.passed else "counterexample evidence"

    def to_dict(self) -> dict:
        return {"profile": self.profile, "tail_max": self.tail_max, "eps_bus": self.eps,
                "midpoint_tail_max": self.midpoint_tail, "verdict": self.verdict}


def busemann_defect_profile(oracle: MetricOracle, x0: PointSequence, x1: PointSequence,
                            y: PointSequence, m: PointSequence, eps_mid: float = EPS_HOOK,
                            eps_bus: float = EPS_HOOK,
                            tail_fraction: float = TAIL_FRACTION) -> BusemannProfile:
    """Positive part of ``d(m_n, y_n) - (d(x0_n, y_n) + d(x1_n, y_n)) / 2`` over ``delta_p(x0_n, y_n, x1_n)``.

    ``m`` must be certified as an infinitesimal midpoint of ``x0, x1``
    (midpoint tail max within ``eps_mid``); otherwise :class:`PreconditionError`.
    """
    if not len(x0) == len(x1) == len(y) == len(m):
        raise InputError("sequence windows differ in length")
    d = oracle.dist
    p = oracle.base_point[None, :]
    mv, mu = midpoint_profile(x0.points, x1.points, m.points, oracle.base_point, d)
    mid_tail, _ = _tail_stats(mv, mu, tail_fraction)
    if mid_tail is UNBOUNDED or mid_tail > eps_mid:
        raise PreconditionError(f"{m.label!r} is not a certified midpoint of "
                                f"{x0.label!r} and {x1.label!r} (tail defect {mid_tail})")
    gap = d(m.points, y.points) - 0.5 * (d(x0.points, y.points) + d(x1.points, y.points))
    delta = np.maximum(np.maximum(d(x0.points, p), d(y.points, p)), d(x1.points, p))
    values = np.zeros(len(gap))
    nz = delta > 0
    values[nz] = positive_part(gap[nz]) / delta[nz]
    sl = tail_window(len(values), tail_fraction)
    return BusemannProfile([float(v) for v in values], float(values[sl].max()), eps_bus,
                           float(mid_tail))


@dataclass
class FiniteBusemannReport:
    midpoint_triples: int
    max_violation: Optional[float]
    witness: Optional[dict]
    tolerance: float

    @property
    def vacuous(self) -> bool:
        return self.midpoint_triples == 0

    @property
    def passed(self) -> bool:
        return self.vacuous or self.max_violation <= self.tolerance

    @property
    def verdict(self) -> str:
        if self.vacuous:
            return "vacuous pass"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {"midpoint_triples": self.midpoint_triples, "max_violation": self.max_violation,
                "witness": self.witness, "tolerance": self.tolerance, "verdict": self.verdict}


def check_finite_busemann(space: FiniteMetricSpace, tol: float = 1e-9) -> FiniteBusemannReport:
    """Midpoint inequality ``d(m, y) <= (d(x0, y) + d(x1, y)) / 2`` over all discrete midpoints.

    ``m`` is a discrete midpoint of ``x0 != x1`` when both ``d(x0, m)`` and
    ``d(x1, m)`` are within ``tol`` of ``d(x0, x1) / 2``.  Ties in the maximum
    violation go to the lexicographically smallest ``(x0, x1, m, y)``.
    """
    D = space.dist
    n = len(D)
    count = 0
    best = None
    for x0 in range(n):
        for x1 in range(x0 + 1, n):
            half = 0.5 * D[x0, x1]
            ms = np.flatnonzero((np.abs(D[x0] - half) <= tol) & (np.abs(D[x1] - half) <= tol))
            for mm in ms:
                count += 1
                viol = D[mm] - 0.5 * (D[x0] + D[x1])
                yy = int(np.argmax(viol))
                cand = (float(viol[yy]), (x0, x1, int(mm), yy))
                if best is None or cand[0] > best[0]:
                    best = cand
    if best is None:
        return FiniteBusemannReport(0, None, None, tol)
    value, (a, b, mm, yy) = best
    lab = space.labels
    return FiniteBusemannReport(count, value, {"x0": lab[a], "x1": lab[b], "midpoint": lab[mm],
                                               "y": lab[yy]}, tol)
