"""Four-point defects and exhaustive / sampled quadruple scans.

Three signed defects are provided; each is nonnegative exactly when the
corresponding inequality holds for the given quadruple:

* quadrilateral  -- sum of the four squared sides minus the two squared diagonals
  (characterises CAT(0) among geodesic spaces),
* lebedeva_petrunin -- squared distances from an apex minus a third of the
  squared perimeter of the opposite triangle (nonnegative curvature among
  complete geodesic spaces),
* ptolemy -- the Ptolemy inequality.

Scans enumerate 4-subsets ``a < b < c < d`` together with a *variant*
selecting the ordering that matters for the functional, so each distinct
inequality instance is evaluated exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations
from math import comb
from typing import Callable, Optional

import numpy as np

from ._util import chunked_map, split_range
from .metric_core import FiniteMetricSpace, InputError, MetricOracle

DEFAULT_PASS_TOL = 1e-9
DEFAULT_MAX_QUADRUPLES = 200_000

FUNCTIONALS = ("quadrilateral", "lebedeva_petrunin", "ptolemy")
_ALIASES = {"quad": "quadrilateral", "lp": "lebedeva_petrunin", "a1": "quadrilateral",
            "a2": "lebedeva_petrunin", "a3": "ptolemy"}
# orderings per 4-subset after factoring out each functional's symmetry group
VARIANTS = {"quadrilateral": 3, "lebedeva_petrunin": 4, "ptolemy": 3}


def canonical_functional(name: str) -> str:
    key = str(name).lower()
    key = _ALIASES.get(key, key)
    if key not in FUNCTIONALS:
        raise InputError(f"unknown functional {name!r}; expected one of {FUNCTIONALS}")
    return key


def quadrilateral_defect(w, x, y, z, d: Callable) -> float:
    return (d(w, x) ** 2 + d(x, y) ** 2 + d(y, z) ** 2 + d(z, w) ** 2
            - d(w, y) ** 2 - d(x, z) ** 2)


def lp_defect(w, x, y, z, d: Callable) -> float:
    return (d(w, x) ** 2 + d(w, y) ** 2 + d(w, z) ** 2
            - (d(x, y) ** 2 + d(y, z) ** 2 + d(z, x) ** 2) / 3.0)


def ptolemy_defect(x, y, u, v, d: Callable) -> float:
    return d(x, u) * d(y, v) + d(x, v) * d(y, u) - d(x, y) * d(u, v)


DEFECTS = {
    "quadrilateral": quadrilateral_defect,
    "lebedeva_petrunin": lp_defect,
    "ptolemy": ptolemy_defect,
}


def defect(functional: str, w, x, y, z, d: Callable) -> float:
    return DEFECTS[canonical_functional(functional)](w, x, y, z, d)


# -- vectorised evaluation on a distance matrix -------------------------------

Evaluator = Callable[[np.ndarray], np.ndarray]

# position maps from the sorted 4-subset (a, b, c, d) to the role tuple
_ROLE_ORDER = {
    "quadrilateral": np.array([[0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3]]),
    "lebedeva_petrunin": np.array([[0, 1, 2, 3], [1, 0, 2, 3], [2, 0, 1, 3], [3, 0, 1, 2]]),
    "ptolemy": np.array([[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2]]),
}


def orderings(functional: str) -> np.ndarray:
    return _ROLE_ORDER[canonical_functional(functional)]


def evaluate_roles(functional: str, D: np.ndarray, roles: np.ndarray) -> np.ndarray:
    """Defect values for rows of ``roles`` (shape ``(k, 4)``) under matrix ``D``."""
    w, x, y, z = roles[:, 0], roles[:, 1], roles[:, 2], roles[:, 3]
    if functional == "quadrilateral":
        S = D * D
        return S[w, x] + S[x, y] + S[y, z] + S[z, w] - S[w, y] - S[x, z]
    if functional == "lebedeva_petrunin":
        S = D * D
        return S[w, x] + S[w, y] + S[w, z] - (S[x, y] + S[y, z] + S[z, x]) / 3.0
    return D[w, y] * D[x, z] + D[w, z] * D[x, y] - D[w, x] * D[y, z]


def _triples(n: int) -> np.ndarray:
    """All 3-subsets of ``range(n)`` in lexicographic order."""
    if n < 3:
        return np.empty((0, 3), dtype=np.int64)
    flat = np.fromiter(chain.from_iterable(combinations(range(n), 3)), dtype=np.int64,
                       count=3 * comb(n, 3))
    return flat.reshape(-1, 3)


def subsets_with_first(a: int, triples: np.ndarray) -> np.ndarray:
    start = np.searchsorted(triples[:, 0], a, side="right")
    rest = triples[start:]
    return np.column_stack([np.full(len(rest), a, dtype=np.int64), rest])


def _best(values: np.ndarray, roles: np.ndarray):
    """Minimum value and the lexicographically smallest role tuple attaining it."""
    if len(values) == 0:
        return None
    vmin = values.min()
    hit = np.flatnonzero(values == vmin)
    cand = roles[hit]
    pick = np.lexsort(cand.T[::-1])[0]
    return float(vmin), tuple(int(v) for v in cand[pick])


def _reduce(parts):
    parts = [p for p in parts if p is not None]
    if not parts:
        return None
    return min(parts, key=lambda vw: (vw[0], vw[1]))


@dataclass
class QuadrupleDefectReport:
    functional: str
    min_defect: Optional[float]
    witness: Optional[list]
    witness_indices: Optional[tuple]
    quadruples_examined: int
    mode: str
    tolerance: float = DEFAULT_PASS_TOL
    truncated: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return self.min_defect is None

    @property
    def passed(self) -> bool:
        return self.vacuous or self.min_defect >= -self.tolerance

    @property
    def verdict(self) -> str:
        if self.vacuous:
            return "vacuous pass"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        out = {
            "functional": self.functional,
            "min_defect": self.min_defect,
            "witness": self.witness,
            "witness_indices": list(self.witness_indices) if self.witness_indices else None,
            "quadruples_examined": self.quadruples_examined,
            "mode": self.mode,
            "truncated": self.truncated,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
        }
        out.update(self.extra)
        return out


def exhaustive_count(n: int, functional: str) -> int:
    return comb(n, 4) * VARIANTS[canonical_functional(functional)] if n >= 4 else 0


def _scan_exhaustive(n: int, orderings: np.ndarray, evaluate: Evaluator, n_jobs: int = 1):
    """Exhaustive minimum over every (4-subset, ordering) of ``range(n)``."""
    if n < 4:
        return None, 0
    triples = _triples(n)
    v = len(orderings)
    firsts = list(range(n - 3))

    def work(bounds):
        lo, hi = bounds
        best = []
        for a in firsts[lo:hi]:
            sub = subsets_with_first(a, triples)
            subs = np.repeat(sub, v, axis=0)
            variants = np.tile(np.arange(v), len(sub))
            roles = np.take_along_axis(subs, orderings[variants], axis=1)
            best.append(_best(evaluate(roles), roles))
        return _reduce(best)

    parts = chunked_map(work, split_range(len(firsts), max(1, n_jobs) * 4), n_jobs)
    return _reduce(parts), comb(n, 4) * v


def random_subsets(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """``k`` uniformly random sorted 4-subsets of ``range(n)``."""
    chosen = np.empty((k, 0), dtype=np.int64)
    for j in range(4):
        r = rng.integers(0, n - j, size=k)
        for c in np.sort(chosen, axis=1).T:
            r = r + (r >= c)
        chosen = np.column_stack([chosen, r])
    return np.sort(chosen, axis=1)


def _scan_random(n: int, orderings: np.ndarray, evaluate: Evaluator, budget: int,
                 rng: np.random.Generator, n_jobs: int = 1):
    subs = random_subsets(rng, n, budget)
    variants = rng.integers(0, len(orderings), size=budget)
    roles = np.take_along_axis(subs, orderings[variants], axis=1)

    def work(bounds):
        lo, hi = bounds
        return _best(evaluate(roles[lo:hi]), roles[lo:hi])

    return _reduce(chunked_map(work, split_range(budget, max(1, n_jobs) * 4), n_jobs))


def minimize_quadruples(n: int, orderings: np.ndarray, evaluate: Evaluator, *,
                        rng: Optional[np.random.Generator] = None,
                        max_quadruples: Optional[int] = None, n_forced: int = 0,
                        n_jobs: int = 1):
    """Minimise ``evaluate`` over role tuples drawn from ``range(n)``.

    Exhaustive when ``C(n, 4) * len(orderings)`` is within ``max_quadruples``
    (or no budget is given).  Otherwise every instance supported on the first
    ``n_forced`` points is still evaluated, plus a seeded uniform subset of
    ``max_quadruples`` instances.  Ties go to the lexicographically smallest
    role tuple, so the result does not depend on ``n_jobs``.

    Returns ``(best, examined, truncated)`` with ``best = (value, roles)`` or None.
    """
    orderings = np.asarray(orderings, dtype=np.int64)
    total = comb(n, 4) * len(orderings) if n >= 4 else 0
    if max_quadruples is None or total <= max_quadruples:
        best, examined = _scan_exhaustive(n, orderings, evaluate, n_jobs)
        return best, examined, False
    if rng is None:
        raise InputError("a random stream is required for budgeted scans")
    forced, n_f = _scan_exhaustive(min(n_forced, n), orderings, evaluate, n_jobs)
    sampled = _scan_random(n, orderings, evaluate, max_quadruples, rng, n_jobs)
    return _reduce([forced, sampled]), n_f + max_quadruples, True


def scan_matrix(D: np.ndarray, functional: str, **kwargs):
    functional = canonical_functional(functional)
    return minimize_quadruples(D.shape[0], _ROLE_ORDER[functional],
                               lambda roles: evaluate_roles(functional, D, roles), **kwargs)


def scan_finite(space: FiniteMetricSpace, functional: str, tol: float = DEFAULT_PASS_TOL,
                n_jobs: int = 1) -> QuadrupleDefectReport:
    """Exhaustive scan of a finite space; fewer than four points is a vacuous pass."""
    if not isinstance(space, FiniteMetricSpace):
        raise InputError("scan_finite needs a FiniteMetricSpace")
    functional = canonical_functional(functional)
    best, examined, _ = scan_matrix(space.dist, functional, n_jobs=n_jobs)
    if best is None:
        return QuadrupleDefectReport(functional, None, None, None, 0, "exhaustive", tol)
    value, roles = best
    return QuadrupleDefectReport(functional, value, [space.labels[i] for i in roles], roles,
                                 examined, "exhaustive", tol)


def scan_sampled(oracle: MetricOracle, t: float, m: int, functional: str,
                 rng: np.random.Generator, tol: float = DEFAULT_PASS_TOL,
                 max_quadruples: int = DEFAULT_MAX_QUADRUPLES, n_jobs: int = 1,
                 use_anchors: bool = True, points: Optional[np.ndarray] = None) -> QuadrupleDefectReport:
    """Draw ``m`` points of ``B(p, t)`` and minimise the defect over their quadruples.

    The sampling stream and the subset stream are split from ``rng`` up front so
    that the point draws do not depend on ``max_quadruples``.
    """
    if not t > 0:
        raise InputError("scale must be positive")
    if m < 4:
        raise InputError("need at least 4 samples")
    functional = canonical_functional(functional)
    point_rng, subset_rng = rng.spawn(2)
    if points is None:
        points = oracle.sample_at_scale(t, point_rng, m, use_anchors=use_anchors)
    n_anchor = 0
    if use_anchors and oracle.anchors is not None:
        n_anchor = min(len(oracle.anchors(t)), m)
    D = oracle.pairwise(points)
    best, examined, truncated = scan_matrix(D, functional, rng=subset_rng,
                                            max_quadruples=max_quadruples,
                                            n_forced=n_anchor, n_jobs=n_jobs)
    value, roles = best
    witness = [points[i].tolist() for i in roles]
    return QuadrupleDefectReport(functional, value, witness, roles, examined, "sampled", tol,
                                 truncated, {"scale": t, "samples": m, "space": oracle.name})


def find_violation(oracle: MetricOracle, functional: str, t: float, max_draws: int,
                   rng: np.random.Generator, threshold: float = 0.0, batch: int = 4096):
    """Draw random quadruples from ``B(p, t)`` until a defect below ``threshold`` appears.

    Returns ``(draws_used, points, value)`` for the first violating quadruple in
    draw order, or ``(max_draws, None, None)``.  Each draw is four fresh points
    in functional argument order.
    """
    functional = canonical_functional(functional)
    f = DEFECTS[functional]
    used = 0
    while used < max_draws:
        k = min(batch, max_draws - used)
        P = oracle.sampler(t, rng, 4 * k).reshape(k, 4, oracle.dim)
        vals = f(P[:, 0], P[:, 1], P[:, 2], P[:, 3], oracle.dist)
        bad = np.flatnonzero(vals < threshold)
        if len(bad):
            i = bad[0]
            return int(used + i + 1), P[i], float(vals[i])
        used += k
    return used, None, None
