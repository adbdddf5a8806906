"""Brute-force references used by the tests.

Everything here is written directly from the definitions with plain loops and
``math``; nothing imports the package.
"""

import math
from itertools import combinations, permutations


def dist_matrix(points, d):
    return [[d(a, b) for b in points] for a in points]


def euclid(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def l1(a, b):
    return sum(abs(x - y) for x, y in zip(a, b))


def arccosh_distance(u, v):
    nu = 1 - sum(x * x for x in u)
    nv = 1 - sum(x * x for x in v)
    duv = sum((x - y) ** 2 for x, y in zip(u, v))
    return math.acosh(1 + 2 * duv / (nu * nv))


def tripod(a, b):
    if a[0] == b[0]:
        return abs(a[1] - b[1])
    return a[1] + b[1]


def quad(D, w, x, y, z):
    s = lambda i, j: D[i][j] ** 2
    return s(w, x) + s(x, y) + s(y, z) + s(z, w) - s(w, y) - s(x, z)


def lp(D, w, x, y, z):
    s = lambda i, j: D[i][j] ** 2
    return s(w, x) + s(w, y) + s(w, z) - (s(x, y) + s(y, z) + s(z, x)) / 3


def ptolemy(D, x, y, u, v):
    return D[x][u] * D[y][v] + D[x][v] * D[y][u] - D[x][y] * D[u][v]


BRUTE = {"quadrilateral": quad, "lebedeva_petrunin": lp, "ptolemy": ptolemy}


def brute_min(D, functional):
    """Minimum over every ordered 4-tuple of distinct points."""
    f = BRUTE[functional]
    n = len(D)
    best = None
    for q in permutations(range(n), 4):
        v = f(D, *q)
        if best is None or v < best:
            best = v
    return best


def brute_triangle_ok(D, tol):
    n = len(D)
    for i, j, k in permutations(range(n), 3):
        if D[i][k] > D[i][j] + D[j][k] + tol:
            return False
    return True


def delta(D, p, idx):
    return max(D[i][p] for i in idx)


def snowflake_grid_defect(n, alpha=0.5, step=1e-4):
    """Best midpoint defect for x = 1/n, y = -1/n on the alpha-snowflake line by a grid over [-2/n, 2/n]."""
    x, y = 1.0 / n, -1.0 / n
    dxy = abs(x - y) ** alpha
    dp = abs(x) ** alpha
    lo, hi = -2.0 / n, 2.0 / n
    k = int(round((hi - lo) / (step / n)))
    best = math.inf
    for i in range(k + 1):
        z = lo + i * (hi - lo) / k
        v = max(abs(abs(x - z) ** alpha - dxy / 2), abs(abs(y - z) ** alpha - dxy / 2)) / dp
        best = min(best, v)
    return best


def all_subsets(n, k):
    return list(combinations(range(n), k))
