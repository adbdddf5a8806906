"""Finite-window approximations of pretangent spaces.

A pool of point sequences converging to the base point is blown up by a
normalizing sequence ``r_n -> 0``.  Pairs whose ratios ``d(x_n, y_n) / r_n``
settle on the tail of the window are *stable*; a greedy pass keeps a family
that is pairwise stable, and the zero-distance classes of that family form a
finite metric space (the quotient).

Sequence positions are 0-based arrays, while the sequence index ``n`` used by
the generators starts at 1 (``r_n = 1/n`` has ``r[0] = 1``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ._util import chunked_map, tail_window
from .four_point import FUNCTIONALS, scan_finite
from .metric_core import FiniteMetricSpace, InputError, MetricOracle, validate_metric

TAU_STAB = 1e-6
TAU_UNSTAB = 1e-3
TAU_ZERO = 1e-6
TAIL_FRACTION = 0.5
DEFAULT_WINDOW = 512


class CertificateError(Exception):
    """The quotient built under tolerance is not a metric space (or misfits its limits)."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class NormalizingSequence:
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.values, dtype=float).reshape(-1)
        if len(r) < 2:
            raise InputError("normalizing window needs at least two entries")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise InputError("normalizing values must be finite and positive")
        if not r[-1] < r[0]:
            raise InputError("normalizing sequence must decrease over the window")
        tail = r[len(r) // 2:]
        if np.any(np.diff(tail) > 0):
            raise InputError("normalizing sequence tail must be monotone decreasing")
        object.__setattr__(self, "values", r)

    def __len__(self):
        return len(self.values)

    @classmethod
    def one_over_n(cls, N: int) -> "NormalizingSequence":
        return cls(1.0 / np.arange(1, N + 1))

    @classmethod
    def geometric(cls, start: float, ratio: float, N: int) -> "NormalizingSequence":
        return cls(start * ratio ** np.arange(N))


@dataclass(frozen=True)
class PointSequence:
    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        object.__setattr__(self, "points", P)

    def __len__(self):
        return len(self.points)

    @classmethod
    def constant(cls, point, N: int, label: str = "p") -> "PointSequence":
        return cls(np.tile(np.asarray(point, dtype=float).reshape(1, -1), (N, 1)), label)


@dataclass(frozen=True)
class StabilityEstimate:
    status: str
    limit: Optional[float]
    oscillation: float
    tail_mean: float

    @property
    def stable(self) -> bool:
        return self.status == "stable"

    def to_dict(self) -> dict:
        return {"status": self.status, "limit": self.limit, "oscillation": self.oscillation}


def ratio_profile(x: PointSequence, y: PointSequence, r: NormalizingSequence, d: Callable) -> np.ndarray:
    if not len(x) == len(y) == len(r):
        raise InputError(f"window lengths differ: {len(x)}, {len(y)}, {len(r)}")
    return np.asarray(d(x.points, y.points), dtype=float) / r.values


def estimate_mutual_limit(x: PointSequence, y: PointSequence, r: NormalizingSequence, d: Callable,
                          tail_fraction: float = TAIL_FRACTION, tau_stab: float = TAU_STAB,
                          tau_unstab: float = TAU_UNSTAB) -> StabilityEstimate:
    """Tail-oscillation certificate for the limit of ``d(x_n, y_n) / r_n``."""
    if not 0 < tail_fraction <= 1:
        raise InputError("tail_fraction must lie in (0, 1]")
    if tau_unstab < tau_stab:
        raise InputError("tau_unstab must be >= tau_stab")
    q = ratio_profile(x, y, r, d)[tail_window(len(r), tail_fraction)]
    osc = float(q.max() - q.min())
    mean = float(q.mean())
    if osc <= tau_stab:
        return StabilityEstimate("stable", mean, osc, mean)
    if osc > tau_unstab:
        return StabilityEstimate("unstable", None, osc, mean)
    return StabilityEstimate("undecided", None, osc, mean)


@dataclass
class SelfStableFamily:
    sequences: list
    accepted: list
    rejected: dict
    estimates: dict

    def limit_matrix(self) -> np.ndarray:
        k = len(self.accepted)
        L = np.zeros((k, k))
        for a in range(k):
            for b in range(a + 1, k):
                i, j = self.accepted[a], self.accepted[b]
                L[a, b] = L[b, a] = self.estimates[(min(i, j), max(i, j))].limit
        return L


def build_self_stable_family(pool: Sequence[PointSequence], r: NormalizingSequence, d: Callable,
                             base_point, tau_stab: float = TAU_STAB, tau_unstab: float = TAU_UNSTAB,
                             tail_fraction: float = TAIL_FRACTION, n_jobs: int = 1) -> SelfStableFamily:
    """Greedy maximal self-stable family over ``[p~] + pool`` in pool order.

    Index 0 of the returned ``sequences`` is the constant sequence at the base
    point, which is always accepted.  A pool sequence is accepted iff it is
    stable against every sequence accepted before it.
    """
    N = len(r)
    seqs = [PointSequence.constant(base_point, N, "p")] + list(pool)
    for s in seqs:
        if len(s) != N:
            raise InputError(f"sequence {s.label!r} has window {len(s)}, expected {N}")

    pairs = [(i, j) for i in range(len(seqs)) for j in range(i + 1, len(seqs))]
    results = chunked_map(
        lambda ij: estimate_mutual_limit(seqs[ij[0]], seqs[ij[1]], r, d, tail_fraction,
                                         tau_stab, tau_unstab),
        pairs, n_jobs)
    estimates = dict(zip(pairs, results))

    accepted = [0]
    rejected = {}
    for j in range(1, len(seqs)):
        blocker = next((i for i in accepted if not estimates[(i, j)].stable), None)
        if blocker is None:
            accepted.append(j)
        else:
            rejected[j] = {"against": blocker, "status": estimates[(blocker, j)].status}
    return SelfStableFamily(seqs, accepted, rejected, estimates)


@dataclass
class PretangentApproximation:
    quotient: FiniteMetricSpace
    projection: list
    classes: list
    tau_stab: float
    tau_zero: float
    contains_base_class: bool
    max_limit_error: float
    labels: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "quotient": self.quotient.to_dict(),
            "projection": self.projection,
            "classes": self.classes,
            "sequence_labels": self.labels,
            "tolerances": {"tau_stab": self.tau_stab, "tau_zero": self.tau_zero,
                           "metric_certificate": 3 * self.tau_zero},
            "contains_base_class": self.contains_base_class,
            "max_limit_error": self.max_limit_error,
        }


def _single_linkage(L: np.ndarray, tau: float) -> list:
    k = len(L)
    parent = list(range(k))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(*np.nonzero(np.triu(L <= tau, 1))):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = {}
    for a in range(k):
        roots.setdefault(find(a), []).append(a)
    return sorted(roots.values(), key=lambda c: c[0])


def metric_identify(limits, tau_zero: float = TAU_ZERO, labels: Optional[Sequence[str]] = None,
                    tau_stab: float = TAU_STAB) -> PretangentApproximation:
    """Quotient of the accepted family by the relation ``limit <= tau_zero``.

    Row/column 0 of ``limits`` must be the base sequence.  Classes are closed
    under single linkage; the distance between classes is the mean of the
    cross-class limits.  Raises :class:`CertificateError` when the quotient is
    not a metric within ``3 * tau_zero`` or misfits a cross-class limit by more
    than ``tau_zero``.
    """
    L = np.asarray(limits, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or len(L) == 0:
        raise InputError("limit matrix must be square and non-empty")
    if not np.all(np.isfinite(L)):
        raise InputError("limit matrix must be complete (finite entries)")
    k = len(L)
    labels = list(labels) if labels is not None else [str(i) for i in range(k)]
    classes = _single_linkage(L, tau_zero)
    projection = [0] * k
    for c, members in enumerate(classes):
        for a in members:
            projection[a] = c
    q = len(classes)
    Q = np.zeros((q, q))
    for a in range(q):
        for b in range(a + 1, q):
            Q[a, b] = Q[b, a] = L[np.ix_(classes[a], classes[b])].mean()

    cross = np.array(projection)[:, None] != np.array(projection)[None, :]
    err = np.abs(Q[np.ix_(projection, projection)] - L)
    max_err = float(err[cross].max()) if cross.any() else 0.0

    quotient = FiniteMetricSpace(Q, ["{" + ",".join(labels[a] for a in c) + "}" for c in classes])
    report = validate_metric(quotient, 3 * tau_zero)
    if not report.passed:
        axiom, idx, excess = report.violations[0]
        raise CertificateError(f"quotient fails {axiom} at classes {idx} by {excess:.3g}",
                               witness={"axiom": axiom, "classes": list(idx), "excess": excess})
    if max_err > tau_zero:
        a, b = np.argwhere(cross & (err == max_err))[0]
        raise CertificateError(f"quotient distance misfits limit of ({labels[a]}, {labels[b]}) by {max_err:.3g}",
                               witness={"sequences": [labels[a], labels[b]], "error": max_err})
    return PretangentApproximation(quotient, projection, [list(c) for c in classes], tau_stab,
                                   tau_zero, projection[0] == 0, max_err, labels)


def build_pretangent(pool: Sequence[PointSequence], r: NormalizingSequence, oracle: MetricOracle,
                     tau_stab: float = TAU_STAB, tau_unstab: float = TAU_UNSTAB,
                     tau_zero: float = TAU_ZERO, tail_fraction: float = TAIL_FRACTION,
                     n_jobs: int = 1):
    """Family construction followed by metric identification."""
    family = build_self_stable_family(pool, r, oracle.dist, oracle.base_point, tau_stab,
                                      tau_unstab, tail_fraction, n_jobs)
    labels = [family.sequences[i].label or f"seq{i}" for i in family.accepted]
    approx = metric_identify(family.limit_matrix(), tau_zero, labels, tau_stab)
    return family, approx


def restrict_to_subsequence(x: PointSequence, r: NormalizingSequence, indices):
    """Restrict a sequence and its normalizer to strictly increasing window positions."""
    idx = np.asarray(indices, dtype=int).reshape(-1)
    if len(idx) == 0:
        raise InputError("empty index set")
    if np.any(np.diff(idx) <= 0):
        raise InputError("subsequence indices must be strictly increasing")
    if idx[0] < 0 or idx[-1] >= len(r):
        raise InputError("subsequence indices outside the window")
    return PointSequence(x.points[idx], x.label), NormalizingSequence(r.values[idx])


def parse_restriction(spec: Union[str, Sequence[int]], N: int) -> np.ndarray:
    """``even`` / ``odd`` select by sequence index ``n`` (1-based); otherwise explicit positions."""
    if isinstance(spec, str):
        if spec == "even":
            return np.arange(1, N, 2)
        if spec == "odd":
            return np.arange(0, N, 2)
        try:
            return np.array([int(v) for v in spec.split(",")])
        except ValueError as exc:
            raise InputError(f"bad restriction {spec!r}") from exc
    return np.asarray(spec, dtype=int)


def restriction_check(family: SelfStableFamily, r: NormalizingSequence, d: Callable, indices,
                      tail_fraction: float = TAIL_FRACTION, tau_stab: float = TAU_STAB,
                      tau_unstab: float = TAU_UNSTAB) -> dict:
    """Re-estimate every accepted pair on a subsequence and compare limits."""
    rows = []
    max_change = 0.0
    preserved = True
    acc = family.accepted
    for a in range(len(acc)):
        for b in range(a + 1, len(acc)):
            i, j = acc[a], acc[b]
            xi, ri = restrict_to_subsequence(family.sequences[i], r, indices)
            xj, _ = restrict_to_subsequence(family.sequences[j], r, indices)
            before = family.estimates[(i, j)]
            after = estimate_mutual_limit(xi, xj, ri, d, tail_fraction, tau_stab, tau_unstab)
            change = abs(after.limit - before.limit) if after.stable else None
            if change is None:
                preserved = False
            else:
                max_change = max(max_change, change)
            rows.append({"pair": [family.sequences[i].label, family.sequences[j].label],
                         "before": before.limit, "after": after.limit,
                         "status_after": after.status})
    return {"pairs": rows, "max_limit_change": max_change, "stability_preserved": preserved,
            "passed": preserved and max_change <= 2 * tau_stab}


def analyze_pretangent(approx: PretangentApproximation, tol: float = 1e-9, n_jobs: int = 1) -> dict:
    """The three four-point scans on the quotient space."""
    return {f: scan_finite(approx.quotient, f, tol, n_jobs) for f in FUNCTIONALS}


# -- pool files ----------------------------------------------------------------

def normalizing_from_spec(spec: dict, N: int) -> NormalizingSequence:
    kind = spec.get("kind")
    if kind == "one_over_n":
        return NormalizingSequence.one_over_n(N)
    if kind == "geometric":
        return NormalizingSequence.geometric(float(spec.get("start", 1.0)),
                                             float(spec.get("ratio", 0.5)), N)
    if kind == "explicit":
        vals = np.asarray(spec.get("values", []), dtype=float)
        if len(vals) < N:
            raise InputError(f"explicit normalizing sequence has {len(vals)} values, window is {N}")
        return NormalizingSequence(vals[:N])
    raise InputError(f"unknown normalizing kind {kind!r}")


def sequence_from_spec(spec: dict, r: NormalizingSequence, oracle: MetricOracle) -> PointSequence:
    label = str(spec.get("label", ""))
    kind = spec.get("kind")
    N = len(r)
    if kind == "radial":
        if oracle.radial is None:
            raise InputError(f"{oracle.name} has no radial sequence generator")
        pts = np.asarray(oracle.radial(np.asarray(spec["direction"], dtype=float), r.values),
                         dtype=float).reshape(N, oracle.dim)
        pert = spec.get("perturbation")
        if pert:
            vec = np.asarray(pert["direction"], dtype=float).reshape(oracle.dim)
            pts = pts + np.outer(r.values ** float(pert["power"]), vec)
        return PointSequence(pts, label)
    if kind == "explicit":
        pts = np.asarray(spec["points"], dtype=float).reshape(-1, oracle.dim)
        if len(pts) < N:
            raise InputError(f"explicit sequence {label!r} has {len(pts)} points, window is {N}")
        return PointSequence(pts[:N], label)
    raise InputError(f"unknown sequence kind {kind!r}")


def load_pool(source, oracle: MetricOracle, N: int = DEFAULT_WINDOW):
    """Parse a pool file into ``(r, [PointSequence, ...])``."""
    if isinstance(source, dict):
        data = source
    else:
        try:
            with open(source) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read pool {source}: {exc}") from exc
    if "normalizing" not in data or "sequences" not in data:
        raise InputError("pool JSON needs 'normalizing' and 'sequences'")
    r = normalizing_from_spec(data["normalizing"], N)
    seqs = []
    for i, spec in enumerate(data["sequences"]):
        try:
            seqs.append(sequence_from_spec(spec, r, oracle))
        except KeyError as exc:
            raise InputError(f"sequence {i} lacks field {exc}") from exc
    return r, seqs


def curated_pool(oracle: MetricOracle) -> dict:
    """A default pool for a built-in oracle (radial sequences under ``r_n = 1/n``)."""
    name = oracle.name
    if name.startswith("tripod"):
        dirs = [[0, 1], [1, 1], [2, 1], [0, 0.5]]
    elif name.startswith("snowflake"):
        dirs = [[1.0], [-1.0], [0.5]]
    elif oracle.radial is None:
        raise InputError(f"no curated pool for {name}; pass --pool")
    elif oracle.dim == 1:
        dirs = [[1.0], [-1.0], [2.0]]
    else:
        base = [[1, 0], [0, 1], [1, 1], [-1, 0], [0.5, -1], [-1, 2]]
        dirs = [v + [0.0] * (oracle.dim - 2) if oracle.name.startswith("euclidean") else v
                for v in base]
    return {
        "normalizing": {"kind": "one_over_n"},
        "sequences": [{"label": f"v{i}", "kind": "radial", "direction": v}
                      for i, v in enumerate(dirs)],
    }
