"""Built-in pointed metric spaces and the doubling-constant estimator.

Each builder returns a :class:`~curvature_lab.metric_core.MetricOracle`.
Samplers draw a fixed number of uniforms per point from a single
``rng.random((m, k))`` call, so the first ``m`` points of a draw of size
``m' > m`` coincide with a draw of size ``m`` from the same stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .metric_core import FiniteMetricSpace, InputError, MetricOracle

KINDS = ("euclidean", "l1_plane", "linf_plane", "hyperbolic_plane", "sphere",
         "tripod", "snowflake", "point_cloud")


@dataclass(frozen=True)
class BuiltinSpace:
    kind: str
    params: dict = field(default_factory=dict)
    base: Optional[str] = None

    def describe(self) -> str:
        if self.params:
            inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()) if k != "matrix")
            return f"{self.kind}({inner})"
        return self.kind


def parse_space_spec(spec: str) -> BuiltinSpace:
    """Parse a CLI space string such as ``euclidean:2`` or ``tripod:1,1,1``."""
    if not isinstance(spec, str) or not spec:
        raise InputError("empty space specifier")
    head, _, arg = spec.partition(":")
    try:
        if head == "euclidean":
            return BuiltinSpace("euclidean", {"dim": int(arg) if arg else 2})
        if head == "l1" and not arg:
            return BuiltinSpace("l1_plane")
        if head == "linf" and not arg:
            return BuiltinSpace("linf_plane")
        if head == "hyperbolic" and not arg:
            return BuiltinSpace("hyperbolic_plane")
        if head == "sphere":
            return BuiltinSpace("sphere", {"radius": float(arg) if arg else 1.0})
        if head == "tripod":
            edges = [float(s) for s in arg.split(",")] if arg else [1.0, 1.0, 1.0]
            if len(edges) != 3:
                raise InputError("tripod needs three edge lengths")
            return BuiltinSpace("tripod", {"edges": tuple(edges)})
        if head == "snowflake":
            return BuiltinSpace("snowflake", {"alpha": float(arg) if arg else 0.5})
        if head == "cloud" and arg:
            return BuiltinSpace("point_cloud", {"path": arg})
    except ValueError as exc:
        raise InputError(f"bad space specifier {spec!r}: {exc}") from exc
    raise InputError(f"unknown space specifier {spec!r}")


def make_oracle(space: Union[BuiltinSpace, str]) -> MetricOracle:
    if isinstance(space, str):
        space = parse_space_spec(space)
    if space.kind not in KINDS:
        raise InputError(f"unknown space kind {space.kind!r}")
    builder = _BUILDERS[space.kind]
    return builder(space)


# -- distance formulas ---------------------------------------------------------

def euclidean_distance(a, b):
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def l1_distance(a, b):
    return np.sum(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), axis=-1)


def linf_distance(a, b):
    return np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), axis=-1)


def poincare_distance(u, v):
    """Hyperbolic distance on the unit disk.

    Uses ``2 asinh(|u-v| / sqrt((1-|u|^2)(1-|v|^2)))``, algebraically equal to
    ``arccosh(1 + 2|u-v|^2 / ((1-|u|^2)(1-|v|^2)))`` but accurate at short range.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = 1.0 - np.sum(u * u, axis=-1)
    nv = 1.0 - np.sum(v * v, axis=-1)
    return 2.0 * np.arcsinh(euclidean_distance(u, v) / np.sqrt(nu * nv))


def _sphere_distance(radius):
    def dist(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        cross = np.cross(a, b)
        sin_part = np.sqrt(np.sum(cross * cross, axis=-1))
        cos_part = np.sum(a * b, axis=-1)
        return radius * np.arctan2(sin_part, cos_part)
    return dist


def tripod_distance(a, b):
    """Tree metric on three half-edges glued at the center.

    Points are ``(branch, r)`` with ``r`` the distance to the center.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    same = a[..., 0] == b[..., 0]
    return np.where(same, np.abs(a[..., 1] - b[..., 1]), a[..., 1] + b[..., 1])


def _snowflake_distance(alpha):
    def dist(a, b):
        diff = np.abs(np.asarray(a, dtype=float)[..., 0] - np.asarray(b, dtype=float)[..., 0])
        return diff ** alpha
    return dist


# -- helpers -------------------------------------------------------------------

def _box_muller(U: np.ndarray, k: int) -> np.ndarray:
    """``k`` standard normals per row from ``2*ceil(k/2)`` uniforms per row."""
    pairs = (k + 1) // 2
    u1 = 1.0 - U[:, 0:2 * pairs:2]  # in (0, 1]
    u2 = U[:, 1:2 * pairs:2]
    rad = np.sqrt(-2.0 * np.log(u1))
    Z = np.concatenate([rad * np.cos(2 * np.pi * u2), rad * np.sin(2 * np.pi * u2)], axis=1)
    return Z[:, :k]


def _equilateral(t: float, dim: int) -> np.ndarray:
    ang = 2 * np.pi * np.arange(3) / 3
    P = np.zeros((3, dim))
    P[:, 0] = t * np.cos(ang)
    P[:, 1] = t * np.sin(ang)
    return P


def _check_scale(t):
    if not t > 0:
        raise InputError(f"scale must be positive, got {t}")


# -- builders ------------------------------------------------------------------

def _euclidean(space: BuiltinSpace) -> MetricOracle:
    dim = int(space.params.get("dim", 2))
    if dim < 1:
        raise InputError("euclidean dimension must be >= 1")
    p = np.zeros(dim)
    n_u = 2 * ((dim + 1) // 2) + 1

    def sampler(t, rng, m):
        _check_scale(t)
        U = rng.random((m, n_u))
        Z = _box_muller(U, dim)
        norms = np.sqrt(np.sum(Z * Z, axis=1, keepdims=True))
        norms[norms == 0] = 1.0
        radius = t * U[:, -1:] ** (1.0 / dim)
        return Z / norms * radius

    def anchors(t):
        if dim == 1:
            return np.array([[0.0], [t], [-t]])
        return np.vstack([p[None, :], _equilateral(t, dim)])

    def radial(direction, r):
        v = np.asarray(direction, dtype=float).reshape(dim)
        return np.outer(np.asarray(r, dtype=float), v)

    return MetricOracle(f"euclidean:{dim}", dim, euclidean_distance, p, sampler, anchors,
                        midpoint=lambda a, b: 0.5 * (np.asarray(a) + np.asarray(b)),
                        radial=radial, params={"dim": dim})


def _norm_plane(kind: str, dist) -> MetricOracle:
    p = np.zeros(2)

    def sampler(t, rng, m):
        _check_scale(t)
        U = 2.0 * rng.random((m, 2)) - 1.0
        if kind == "l1_plane":
            # the l1 ball is the max-norm ball rotated by 45 degrees
            return 0.5 * t * np.column_stack([U[:, 0] + U[:, 1], U[:, 0] - U[:, 1]])
        return t * U

    def anchors(t):
        return np.array([[0.0, 0.0], [t, 0.0], [0.0, t], [-t, 0.0], [0.0, -t]])

    def radial(direction, r):
        return np.outer(np.asarray(r, dtype=float), np.asarray(direction, dtype=float).reshape(2))

    name = "l1" if kind == "l1_plane" else "linf"
    return MetricOracle(name, 2, dist, p, sampler, anchors,
                        midpoint=lambda a, b: 0.5 * (np.asarray(a) + np.asarray(b)),
                        radial=radial)


def _l1(space):
    return _norm_plane("l1_plane", l1_distance)


def _linf(space):
    return _norm_plane("linf_plane", linf_distance)


def _mobius(z, a):
    """Disk automorphism sending ``a`` to 0 (complex arrays)."""
    return (z - a) / (1.0 - np.conj(a) * z)


def poincare_midpoint(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    zu = u[..., 0] + 1j * u[..., 1]
    zv = v[..., 0] + 1j * v[..., 1]
    w = _mobius(zv, zu)
    r = np.abs(w)
    # half the hyperbolic distance from the origin: tanh(rho/2) -> tanh(rho/4)
    half = np.tanh(0.5 * np.arctanh(np.minimum(r, 1 - 1e-16)))
    scale = np.divide(half, r, out=np.zeros_like(r), where=r > 0)
    m = _mobius(w * scale, -zu)
    return np.stack([m.real, m.imag], axis=-1)


def _hyperbolic(space) -> MetricOracle:
    p = np.zeros(2)

    def sampler(t, rng, m):
        _check_scale(t)
        U = rng.random((m, 2))
        # area measure sinh(rho); inverse CDF via sinh(rho/2) = sqrt(u) sinh(t/2)
        s = np.sqrt(U[:, 0]) * np.sinh(0.5 * t)
        r = s / np.sqrt(1.0 + s * s)
        ang = 2 * np.pi * U[:, 1]
        return np.column_stack([r * np.cos(ang), r * np.sin(ang)])

    def anchors(t):
        return np.vstack([p[None, :], _equilateral(np.tanh(0.5 * t), 2)])

    def radial(direction, r):
        v = np.asarray(direction, dtype=float).reshape(2)
        nv = np.linalg.norm(v)
        if nv == 0:
            return np.zeros((len(np.atleast_1d(r)), 2))
        rho = nv * np.asarray(r, dtype=float)
        return np.outer(np.tanh(0.5 * rho), v / nv)

    return MetricOracle("hyperbolic", 2, poincare_distance, p, sampler, anchors,
                        midpoint=poincare_midpoint, radial=radial)


def _sphere(space) -> MetricOracle:
    R = float(space.params.get("radius", 1.0))
    if not R > 0 or not np.isfinite(R):
        raise InputError("sphere radius must be positive")
    p = np.array([0.0, 0.0, R])

    def cap_points(theta, phi):
        st = np.sin(theta)
        return R * np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])

    def sampler(t, rng, m):
        _check_scale(t)
        U = rng.random((m, 2))
        theta_max = min(t / R, np.pi)
        # uniform area on the cap: 1 - cos(theta) uniform
        one_minus_cos = U[:, 0] * (1.0 - np.cos(theta_max))
        theta = 2.0 * np.arcsin(np.sqrt(0.5 * one_minus_cos))
        return cap_points(theta, 2 * np.pi * U[:, 1])

    def anchors(t):
        theta = min(t / R, np.pi)
        phi = 2 * np.pi * np.arange(3) / 3
        return np.vstack([p[None, :], cap_points(np.full(3, theta), phi)])

    def midpoint(a, b):
        s = np.asarray(a, dtype=float) + np.asarray(b, dtype=float)
        n = np.linalg.norm(s, axis=-1, keepdims=True)
        return R * s / np.where(n > 0, n, 1.0)

    def radial(direction, r):
        v = np.asarray(direction, dtype=float).reshape(2)
        nv = np.linalg.norm(v)
        r = np.asarray(r, dtype=float)
        if nv == 0:
            return np.tile(p, (len(r), 1))
        theta = np.minimum(nv * r / R, np.pi)
        phi = np.full_like(theta, np.arctan2(v[1], v[0]))
        return cap_points(theta, phi)

    return MetricOracle(f"sphere:{R:g}", 3, _sphere_distance(R), p, sampler, anchors,
                        midpoint=midpoint, radial=radial, params={"radius": R})


def _tripod(space) -> MetricOracle:
    edges = tuple(float(e) for e in space.params.get("edges", (1.0, 1.0, 1.0)))
    if len(edges) != 3 or not all(e > 0 and np.isfinite(e) for e in edges):
        raise InputError("tripod edge lengths must be three positive numbers")
    base = space.base or "center"
    if base == "center":
        p = np.array([0.0, 0.0])
    elif base.startswith("leaf") and base[4:].isdigit() and int(base[4:]) < 3:
        k = int(base[4:])
        p = np.array([float(k), edges[k]])
    else:
        raise InputError(f"tripod base must be 'center' or 'leaf0'..'leaf2', got {base!r}")
    kb, rb = int(p[0]), p[1]

    def ball_intervals(t):
        out = []
        for k in range(3):
            if rb == 0:
                out.append((k, 0.0, min(edges[k], t)))
            elif k == kb:
                out.append((k, max(0.0, rb - t), min(edges[k], rb + t)))
            elif t > rb:
                out.append((k, 0.0, min(edges[k], t - rb)))
        return out

    def sampler(t, rng, m):
        _check_scale(t)
        ivs = ball_intervals(t)
        lengths = np.array([hi - lo for _, lo, hi in ivs])
        total = lengths.sum()
        U = rng.random(m)
        if total == 0:
            return np.tile(p, (m, 1))
        pos = U * total
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        which = np.clip(np.searchsorted(cum, pos, side="right") - 1, 0, len(ivs) - 1)
        branch = np.array([ivs[i][0] for i in which], dtype=float)
        lo = np.array([ivs[i][1] for i in which])
        r = np.minimum(lo + (pos - cum[which]), np.array([ivs[i][2] for i in which]))
        return np.column_stack([branch, r])

    def anchors(t):
        pts = [p]
        for k, lo, hi in ball_intervals(t):
            far = lo if (k == kb and rb - lo > hi - rb) else hi
            pts.append(np.array([float(k), far]))
        return np.array(pts)

    def midpoint(a, b):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        a, b = np.broadcast_arrays(a, b)
        d = tripod_distance(a, b)
        half = 0.5 * d
        same = a[:, 0] == b[:, 0]
        out = np.empty_like(a)
        # different branches: walk from a toward the center, then out along b's branch
        on_a = half <= a[:, 1]
        out[:, 0] = np.where(same | on_a, a[:, 0], b[:, 0])
        out[:, 1] = np.where(same, 0.5 * (a[:, 1] + b[:, 1]),
                             np.where(on_a, a[:, 1] - half, half - a[:, 1]))
        return out

    def radial(direction, r):
        if base != "center":
            raise InputError("radial tripod sequences need the center as base point")
        k, s = np.asarray(direction, dtype=float).reshape(2)
        if k not in (0.0, 1.0, 2.0) or s < 0:
            raise InputError("tripod direction must be [branch in 0..2, length >= 0]")
        r = np.asarray(r, dtype=float)
        return np.column_stack([np.full_like(r, k), np.minimum(s * r, edges[int(k)])])

    return MetricOracle("tripod:" + ",".join(f"{e:g}" for e in edges), 2, tripod_distance, p,
                        sampler, anchors, midpoint=midpoint, radial=radial,
                        params={"edges": edges, "base": base})


def _snowflake(space) -> MetricOracle:
    alpha = float(space.params.get("alpha", 0.5))
    if not 0 < alpha < 1:
        raise InputError("snowflake exponent must lie strictly inside (0, 1)")
    p = np.zeros(1)

    def sampler(t, rng, m):
        _check_scale(t)
        reach = t ** (1.0 / alpha)
        return (reach * (2.0 * rng.random((m, 1)) - 1.0))

    def anchors(t):
        reach = t ** (1.0 / alpha)
        return np.array([[0.0], [reach], [-reach]])

    def radial(direction, r):
        s = float(np.asarray(direction, dtype=float).reshape(-1)[0])
        r = np.asarray(r, dtype=float)
        return (np.sign(s) * (abs(s) * r) ** (1.0 / alpha))[:, None]

    return MetricOracle(f"snowflake:{alpha:g}", 1, _snowflake_distance(alpha), p, sampler,
                        anchors, midpoint=None, radial=radial, params={"alpha": alpha})


_CLOUD_METRICS = {"euclidean": euclidean_distance, "l1": l1_distance, "linf": linf_distance}


def load_point_cloud(source) -> tuple[np.ndarray, int]:
    """Read ``{"metric", "points", "base_point"}``; returns (distance matrix, base index)."""
    if isinstance(source, dict):
        data = source
    else:
        try:
            with open(source) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read point cloud {source}: {exc}") from exc
    metric = data.get("metric")
    if "points" not in data:
        raise InputError("point cloud JSON needs a 'points' field")
    pts = np.asarray(data["points"], dtype=float)
    if metric == "custom-matrix":
        D = FiniteMetricSpace(pts).dist
    elif metric in _CLOUD_METRICS:
        if pts.ndim != 2 or len(pts) == 0:
            raise InputError("points must be a non-empty list of coordinate lists")
        D = _CLOUD_METRICS[metric](pts[:, None, :], pts[None, :, :])
    else:
        raise InputError(f"unknown cloud metric {metric!r}")
    base = int(data.get("base_point", 0))
    if not 0 <= base < len(D):
        raise InputError(f"base_point {base} out of range")
    return np.asarray(D, dtype=float), base


def _point_cloud(space) -> MetricOracle:
    if "matrix" in space.params:
        D = np.asarray(space.params["matrix"], dtype=float)
        base = int(space.params.get("base_point", 0))
    else:
        D, base = load_point_cloud(space.params["path"])
    n = len(D)

    def dist(a, b):
        ia = np.asarray(a, dtype=float)[..., 0].astype(int)
        ib = np.asarray(b, dtype=float)[..., 0].astype(int)
        return D[ia, ib]

    def sampler(t, rng, m):
        _check_scale(t)
        inside = np.flatnonzero(D[base] <= t)
        U = rng.random(m)
        idx = inside[np.minimum((U * len(inside)).astype(int), len(inside) - 1)]
        return idx[:, None].astype(float)

    return MetricOracle(f"cloud(n={n})", 1, dist, np.array([float(base)]), sampler,
                        anchors=lambda t: np.array([[float(base)]]),
                        params={"n": n, "base_point": base})


def cloud_oracle(dist_matrix, base_point: int = 0) -> MetricOracle:
    """Oracle over a finite distance matrix (carrier points are indices)."""
    D = FiniteMetricSpace(dist_matrix).dist
    return _point_cloud(BuiltinSpace("point_cloud", {"matrix": D, "base_point": base_point}))


_BUILDERS = {
    "euclidean": _euclidean,
    "l1_plane": _l1,
    "linf_plane": _linf,
    "hyperbolic_plane": _hyperbolic,
    "sphere": _sphere,
    "tripod": _tripod,
    "snowflake": _snowflake,
    "point_cloud": _point_cloud,
}


def estimate_doubling_constant(oracle: MetricOracle, t: float, budget: int,
                               rng: np.random.Generator) -> int:
    """Size of a greedy ``t/2``-net over ``budget`` points sampled from ``B(p, t)``.

    A lower estimate of the covering number at scale ``t``; nondecreasing in
    ``budget`` for a fixed stream because the draws are prefix-consistent.
    """
    if not t > 0:
        raise InputError("scale must be positive")
    if budget < 1:
        raise InputError("budget must be at least 1")
    P = oracle.sample_at_scale(t, rng, budget)
    net = [P[0]]
    net_arr = P[:1]
    for q in P[1:]:
        if np.all(oracle.dist(net_arr, q[None, :]) > 0.5 * t):
            net.append(q)
            net_arr = np.asarray(net)
    return len(net)
