"""Finite metric spaces, pointed metric oracles and metric-axiom validation.

Every other module talks to distances through the two containers defined
here.  ``FiniteMetricSpace`` is a labelled symmetric distance matrix;
``MetricOracle`` is a vectorised distance function on coordinate arrays
together with a marked base point and a ball sampler.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike
from typing import Callable, Optional, Sequence, Union

import numpy as np

DEFAULT_METRIC_TOL = 1e-9
SAMPLE_TOL = 1e-12


class InputError(ValueError):
    """Malformed user input (shapes, labels, non-finite entries, bad parameters)."""


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: list = field(default_factory=list)
    tolerance: float = DEFAULT_METRIC_TOL

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "violations": [
                {"axiom": axiom, "indices": list(idx), "excess": excess}
                for axiom, idx, excess in self.violations
            ],
        }


class FiniteMetricSpace:
    """Immutable labelled distance matrix.

    Only ingestion-level checks happen here (square shape, label count,
    finite nonnegative entries).  Metric axioms are checked separately by
    :func:`validate_metric` so that near-metrics can still be represented and
    diagnosed.
    """

    __slots__ = ("labels", "dist", "_index")

    def __init__(self, dist, labels: Optional[Sequence] = None):
        D = np.array(dist, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise InputError(f"distance matrix must be square, got shape {D.shape}")
        n = D.shape[0]
        if labels is None:
            labels = [str(i) for i in range(n)]
        labels = tuple(str(lab) for lab in labels)
        if len(labels) != n:
            raise InputError(f"{len(labels)} labels for a {n}x{n} matrix")
        if len(set(labels)) != n:
            raise InputError("labels must be unique")
        if np.isnan(D).any():
            raise InputError("distance matrix contains NaN")
        if np.isinf(D).any():
            raise InputError("distance matrix contains infinite entries")
        if (D < 0).any():
            i, j = np.argwhere(D < 0)[0]
            raise InputError(f"negative distance at ({i}, {j})")
        D.setflags(write=False)
        self.dist = D
        self.labels = labels
        self._index = {lab: i for i, lab in enumerate(labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def __repr__(self) -> str:
        return f"FiniteMetricSpace(n={len(self)})"

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise InputError(f"unknown label {label!r}") from None

    def distance(self, a, b) -> float:
        return float(self.dist[self.index(a), self.index(b)])

    def subspace(self, indices: Sequence[int]) -> "FiniteMetricSpace":
        idx = np.asarray(indices, dtype=int)
        return FiniteMetricSpace(self.dist[np.ix_(idx, idx)], [self.labels[i] for i in idx])

    def permuted(self, order: Sequence[int]) -> "FiniteMetricSpace":
        return self.subspace(order)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "dist": self.dist.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteMetricSpace":
        if "dist" not in data:
            raise InputError("finite space JSON needs a 'dist' field")
        return cls(data["dist"], data.get("labels"))

    @classmethod
    def from_points(cls, points, metric: Callable, labels=None) -> "FiniteMetricSpace":
        P = np.asarray(points, dtype=float)
        return cls(metric(P[:, None, :], P[None, :, :]), labels)


def load_finite_space(source: Union[str, PathLike, dict]) -> FiniteMetricSpace:
    if isinstance(source, dict):
        return FiniteMetricSpace.from_dict(source)
    try:
        with open(source) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read finite space from {source}: {exc}") from exc
    return FiniteMetricSpace.from_dict(data)


def validate_metric(space: FiniteMetricSpace, tol: float = DEFAULT_METRIC_TOL,
                    max_violations: int = 100) -> ValidationReport:
    """Check identity, symmetry and the triangle inequality within ``tol``.

    Nonnegativity and finiteness are enforced when the space is built.
    Violations are reported as ``(axiom, indices, excess)``; triangle
    witnesses ``(i, j, k)`` mean ``d(i, j) > d(i, k) + d(k, j) + tol``.
    """
    if tol < 0:
        raise InputError("tolerance must be nonnegative")
    D = space.dist
    n = D.shape[0]
    violations = []

    diag = np.abs(np.diag(D))
    for i in np.flatnonzero(diag > tol):
        violations.append(("identity", (int(i),), float(diag[i])))

    asym = np.abs(D - D.T)
    for i, j in np.argwhere(np.triu(asym > tol, 1)):
        violations.append(("symmetry", (int(i), int(j)), float(asym[i, j])))

    for k in range(n):
        excess = D - (D[:, k, None] + D[None, k, :])
        bad = np.argwhere(excess > tol)
        for i, j in bad:
            if len(violations) >= max_violations:
                break
            violations.append(("triangle", (int(i), int(j), k), float(excess[i, j])))
        if len(violations) >= max_violations:
            break

    return ValidationReport(not violations, violations, tol)


Points = np.ndarray
DistanceFn = Callable[[Points, Points], np.ndarray]


@dataclass(frozen=True)
class MetricOracle:
    """A pointed metric space given by a vectorised distance function.

    Points are float coordinate vectors of length ``dim``; ``dist`` must
    broadcast over leading axes.  ``sampler(t, rng, m)`` returns ``m`` points
    of the closed ball ``B(base_point, t)`` and must consume the stream so that
    a longer draw extends a shorter one.  ``anchors(t)`` optionally returns a
    deterministic scale-``t`` configuration placed in front of random draws.
    """

    name: str
    dim: int
    dist: DistanceFn
    base_point: np.ndarray
    sampler: Callable[[float, np.random.Generator, int], np.ndarray]
    anchors: Optional[Callable[[float], np.ndarray]] = None
    midpoint: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    radial: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    def distance(self, a, b) -> float:
        a = self._as_point(a)
        b = self._as_point(b)
        return float(self.dist(a, b))

    def pairwise(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float).reshape(-1, self.dim)
        D = np.asarray(self.dist(P[:, None, :], P[None, :, :]), dtype=float)
        # exact symmetry and zero diagonal regardless of formula rounding
        D = np.triu(D, 1)
        return D + D.T

    def to_finite(self, points, labels=None) -> FiniteMetricSpace:
        return FiniteMetricSpace(self.pairwise(points), labels)

    def sample_at_scale(self, t: float, rng: np.random.Generator, m: int,
                        use_anchors: bool = True) -> np.ndarray:
        """Draw ``m`` points of ``B(p, t)``; anchors (if any) come first."""
        if not t > 0:
            raise InputError(f"scale must be positive, got {t}")
        head = np.empty((0, self.dim))
        if use_anchors and self.anchors is not None:
            head = np.asarray(self.anchors(t), dtype=float).reshape(-1, self.dim)[:m]
        rest = m - len(head)
        tail = (np.asarray(self.sampler(t, rng, rest), dtype=float).reshape(rest, self.dim)
                if rest > 0 else np.empty((0, self.dim)))
        return np.vstack([head, tail])

    def _as_point(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float).reshape(-1)
        if a.shape[0] != self.dim:
            raise InputError(f"{self.name}: expected a point of dimension {self.dim}, got {a.shape[0]}")
        return a


def distance(space: Union[FiniteMetricSpace, MetricOracle], a, b) -> float:
    """Distance between two labels of a finite space or two oracle points."""
    return space.distance(a, b)


def spot_check_oracle(oracle: MetricOracle, rng: np.random.Generator, n_triples: int = 10_000,
                      scale: float = 1.0, rel_tol: float = 1e-12) -> ValidationReport:
    """Random-triple check of the metric axioms on points sampled from ``B(p, scale)``."""
    P = oracle.sampler(scale, rng, 3 * n_triples).reshape(n_triples, 3, oracle.dim)
    a, b, c = P[:, 0], P[:, 1], P[:, 2]
    dab, dbc, dac = oracle.dist(a, b), oracle.dist(b, c), oracle.dist(a, c)
    dba = oracle.dist(b, a)
    daa = oracle.dist(a, a)
    violations = []
    for i in np.flatnonzero(np.abs(daa) > rel_tol * scale):
        violations.append(("identity", (int(i),), float(daa[i])))
    for i in np.flatnonzero(np.abs(dab - dba) > rel_tol * np.maximum(dab, 1.0)):
        violations.append(("symmetry", (int(i),), float(abs(dab[i] - dba[i]))))
    for i in np.flatnonzero(dab < 0):
        violations.append(("nonnegativity", (int(i),), float(-dab[i])))
    excess = dac - (dab + dbc)
    for i in np.flatnonzero(excess > rel_tol * np.maximum(dab + dbc, 1e-300)):
        violations.append(("triangle", (int(i),), float(excess[i])))
    return ValidationReport(not violations, violations[:100], rel_tol)
