"""Normalized four-point functionals at a base point and their liminf estimates.

Each functional divides a four-point defect by the squared largest distance of
the quadruple to the base point ``p``; both are homogeneous of degree two, so
the ratio is scale free.  At ``(p, p, p, p)`` the value is defined to be 0.

``estimate_liminf`` approximates the liminf as all four points approach ``p``
by minimising over sampled quadruples of ``B(p, t_k)`` on a decreasing scale
schedule and taking the infimum over the last third of the scales.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from math import ceil
from typing import Callable, Optional, Sequence

import numpy as np

from ._util import chunked_map, derive_rng
from .four_point import (DEFAULT_MAX_QUADRUPLES, lp_defect, minimize_quadruples, orderings,
                         ptolemy_defect, quadrilateral_defect)
from .metric_core import InputError, MetricOracle

EPS_EXACT = 1e-6
EPS_CURVED = 1e-3
CURVED_SPACES = ("hyperbolic", "sphere")


def delta_p(points, p, d: Callable) -> float:
    """Largest distance from ``p`` among ``points``."""
    points = list(points)
    if not points:
        raise InputError("delta_p needs at least one point")
    return max(float(d(x, p)) for x in points)


def _a3_numerator(w, x, y, z, d):
    # pairs (x, y) and (w, z), exactly as A3 is written
    return ptolemy_defect(x, y, w, z, d)


@dataclass(frozen=True)
class NormalizedFunctional:
    """A degree-2 homogeneous four-point numerator divided by ``delta_p**2``.

    ``orderings`` lists the argument orders (as positions into a sorted
    4-subset) that a scan must try; builtins use the symmetry-reduced tables of
    the underlying defect, user functionals default to all 24 permutations.
    """

    id: str
    numerator: Callable
    orderings: np.ndarray = field(default_factory=lambda: np.array(list(permutations(range(4)))))
    degree: int = 2

    def __call__(self, w, x, y, z, p, d: Callable) -> float:
        return evaluate(self, w, x, y, z, p, d)


A1 = NormalizedFunctional("A1", quadrilateral_defect, orderings("quadrilateral"))
A2 = NormalizedFunctional("A2", lp_defect, orderings("lebedeva_petrunin"))
# sorted subset (a,b,c,d) -> (w,x,y,z) so that {x,y} runs over the three pairings
A3 = NormalizedFunctional("A3", _a3_numerator, np.array([[2, 0, 1, 3], [1, 0, 2, 3], [1, 0, 3, 2]]))

BUILTIN_FUNCTIONALS = {"A1": A1, "A2": A2, "A3": A3}


def get_functional(name) -> NormalizedFunctional:
    if isinstance(name, NormalizedFunctional):
        return name
    key = str(name).upper()
    if key not in BUILTIN_FUNCTIONALS:
        raise InputError(f"unknown normalized functional {name!r}; expected a1, a2 or a3")
    return BUILTIN_FUNCTIONALS[key]


def evaluate(functional, w, x, y, z, p, d: Callable) -> float:
    """Normalized value of ``functional`` at ``(w, x, y, z)``; exactly 0 when ``delta_p = 0``."""
    functional = get_functional(functional)
    delta = delta_p((w, x, y, z), p, d)
    if delta == 0:
        return 0.0
    return float(functional.numerator(w, x, y, z, d)) / (delta * delta)


def matrix_evaluator(functional: NormalizedFunctional, D: np.ndarray, to_base: np.ndarray):
    """Vectorised ``roles -> values`` for a sample with distance matrix ``D``."""
    def lookup(i, j):
        return D[i, j]

    def evaluate_roles(roles):
        w, x, y, z = roles[:, 0], roles[:, 1], roles[:, 2], roles[:, 3]
        num = functional.numerator(w, x, y, z, lookup)
        delta = np.maximum(np.maximum(to_base[w], to_base[x]), np.maximum(to_base[y], to_base[z]))
        out = np.zeros(len(roles))
        nz = delta > 0
        out[nz] = num[nz] / (delta[nz] * delta[nz])
        return out

    return evaluate_roles


@dataclass(frozen=True)
class ScaleSchedule:
    radii: tuple
    samples_per_scale: int

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or len(r) == 0:
            raise InputError("schedule needs at least one scale")
        if not np.all(np.isfinite(r)) or r[-1] <= 0:
            raise InputError("scales must be finite and positive")
        if np.any(np.diff(r) >= 0):
            raise InputError("scales must be strictly decreasing")
        if self.samples_per_scale < 4:
            raise InputError("need at least 4 samples per scale")
        object.__setattr__(self, "radii", tuple(float(v) for v in r))

    @classmethod
    def geometric(cls, start: float, ratio: float, count: int, samples: int) -> "ScaleSchedule":
        if not 0 < ratio < 1:
            raise InputError("geometric ratio must lie in (0, 1)")
        return cls(tuple(start * ratio ** k for k in range(int(count))), samples)

    @classmethod
    def parse(cls, text: str, samples: int) -> "ScaleSchedule":
        """``"t1,t2,..."`` or ``"geometric:start,ratio,K"``."""
        try:
            if text.startswith("geometric:"):
                start, ratio, count = text.split(":", 1)[1].split(",")
                return cls.geometric(float(start), float(ratio), int(count), samples)
            return cls(tuple(float(v) for v in text.split(",")), samples)
        except ValueError as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"bad scale schedule {text!r}: {exc}") from exc

    @property
    def tail_size(self) -> int:
        return ceil(len(self.radii) / 3)


@dataclass
class LiminfEstimate:
    functional: str
    scales: list
    per_scale_min: list
    witness_per_scale: list
    witness_indices: list
    tail_inf: float
    eps: float
    truncated: list
    quadruples_examined: list

    @property
    def passed(self) -> bool:
        return self.tail_inf >= -self.eps

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "scales": self.scales,
            "per_scale_min": self.per_scale_min,
            "witness_per_scale": self.witness_per_scale,
            "witness_indices": self.witness_indices,
            "tail_inf": self.tail_inf,
            "tail_window": ceil(len(self.scales) / 3),
            "eps": self.eps,
            "truncated": self.truncated,
            "quadruples_examined": self.quadruples_examined,
            "verdict": self.verdict,
        }

    def csv_rows(self):
        return [(t, v) for t, v in zip(self.scales, self.per_scale_min)]


def default_eps(oracle: MetricOracle) -> float:
    return EPS_CURVED if oracle.name.startswith(CURVED_SPACES) else EPS_EXACT


def minimize_at_scale(functional, oracle: MetricOracle, t: float, m: int,
                      point_rng: np.random.Generator, subset_rng: np.random.Generator,
                      max_quadruples: Optional[int] = DEFAULT_MAX_QUADRUPLES,
                      use_anchors: bool = True, n_jobs: int = 1):
    """Minimum of a normalized functional over quadruples from ``m`` points of ``B(p, t)``."""
    functional = get_functional(functional)
    P = oracle.sample_at_scale(t, point_rng, m, use_anchors=use_anchors)
    D = oracle.pairwise(P)
    to_base = np.asarray(oracle.dist(P, oracle.base_point[None, :]), dtype=float)
    n_anchor = min(len(oracle.anchors(t)), m) if (use_anchors and oracle.anchors is not None) else 0
    best, examined, truncated = minimize_quadruples(
        len(P), functional.orderings, matrix_evaluator(functional, D, to_base),
        rng=subset_rng, max_quadruples=max_quadruples, n_forced=n_anchor, n_jobs=n_jobs)
    value, roles = best
    return value, roles, P, examined, truncated


def estimate_liminf(functional, oracle: MetricOracle, schedule: ScaleSchedule, seed: int,
                    eps: Optional[float] = None,
                    max_quadruples: Optional[int] = DEFAULT_MAX_QUADRUPLES,
                    use_anchors: bool = True, n_jobs: int = 1) -> LiminfEstimate:
    """Per-scale minima of a normalized functional and their tail infimum.

    Scale ``k`` draws its points from ``derive_rng(seed, "liminf", k, "points")``
    and its quadruple subset from a sibling stream, so results do not depend on
    ``n_jobs`` and a larger ``samples_per_scale`` extends the same draws.
    """
    functional = get_functional(functional)
    if eps is None:
        eps = default_eps(oracle)
    m = schedule.samples_per_scale

    def one_scale(k):
        t = schedule.radii[k]
        return minimize_at_scale(functional, oracle, t, m,
                                 derive_rng(seed, "liminf", k, "points"),
                                 derive_rng(seed, "liminf", k, "subsets"),
                                 max_quadruples, use_anchors)

    results = chunked_map(one_scale, list(range(len(schedule.radii))), n_jobs)
    mins = [r[0] for r in results]
    tail = mins[-schedule.tail_size:]
    return LiminfEstimate(
        functional=functional.id,
        scales=list(schedule.radii),
        per_scale_min=mins,
        witness_per_scale=[[r[2][i].tolist() for i in r[1]] for r in results],
        witness_indices=[list(r[1]) for r in results],
        tail_inf=float(min(tail)),
        eps=float(eps),
        truncated=[bool(r[4]) for r in results],
        quadruples_examined=[int(r[3]) for r in results],
    )


def witness_values_consistent(estimate: LiminfEstimate, oracle: MetricOracle,
                              rel_tol: float = 1e-12) -> bool:
    """Re-evaluate every recorded witness with the scalar path."""
    f = get_functional(estimate.functional)
    p = oracle.base_point
    for value, pts in zip(estimate.per_scale_min, estimate.witness_per_scale):
        w, x, y, z = (np.asarray(q) for q in pts)
        again = evaluate(f, w, x, y, z, p, oracle.dist)
        if abs(again - value) > rel_tol * max(1.0, abs(value)):
            return False
    return True


def scale_profile(functional, oracle: MetricOracle, configuration: Callable[[float], Sequence],
                  scales: Sequence[float]) -> list:
    """Functional values of a deterministic configuration ``t -> (w, x, y, z)`` across scales."""
    functional = get_functional(functional)
    return [evaluate(functional, *configuration(t), oracle.base_point, oracle.dist) for t in scales]
