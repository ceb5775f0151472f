"""Brute-force reference values, written with plain numpy and no package code.

Each grid oracle evaluates the worst-case objectives and constraints of the
bundled examples directly from their formulas.
"""
import numpy as np

SQRT2 = np.sqrt(2.0)

# frozen outputs of the oracles below (regenerated and compared in test_oracles.py)
EX1_IDEAL = (0.0, -0.25)
EX2_IDEAL = (0.0, -0.5625)
BALL_R1_X2Y2 = 1.0 / 24.0  # E[x^2 y^2], uniform unit disk


def ex1_robust(x1, x2, nu=201):
    """(F1, F2) of the first example by maximizing over a u-grid of [0, 1]."""
    u = np.linspace(0.0, 1.0, nu)
    x1 = np.asarray(x1)[..., None]
    x2 = np.asarray(x2)[..., None]
    f1 = x1**2 * u**2 + x2**2 * u
    f2 = -x1**4 - 2 * x1**2 * x2**2 - x2**4 + x1**2 - u**2
    return f1.max(axis=-1), f2.max(axis=-1)


def ex1_constraint(x1, x2, nv=21):
    """inf over a v-grid of [1, sqrt2]^2 of the robust constraint."""
    v = np.linspace(1.0, SQRT2, nv)
    v1, v2 = np.meshgrid(v, v)
    v1, v2 = v1.ravel(), v2.ravel()
    x1 = np.asarray(x1)[..., None]
    x2 = np.asarray(x2)[..., None]
    return (-x1**2 * v2**2 - x2**2 * v1**2 + 1).min(axis=-1)


def ex1_grid(size=400):
    """Worst-case objective values on a size x size grid of the robust feasible set."""
    g = np.linspace(-SQRT2, SQRT2, size)
    X1, X2 = np.meshgrid(g, g)
    inside = X1**2 + X2**2 <= 2.0
    x1, x2 = X1[inside], X2[inside]
    # corners of V attain the infimum since g is monotone in v1^2 and v2^2;
    # the coarse grid above is checked against this in test_oracles
    feas = ex1_constraint(x1, x2, nv=2) >= 0
    F1, F2 = ex1_robust(x1[feas], x2[feas], nu=101)
    return np.column_stack([F1, F2])


def ex2_objectives(x1, x2):
    return x1 + x2, -x1**2 + 2 * x1 * x2 + 0.5 * x1 + 0.5 * x2 - 0.0625


def ex2_grid(size=400):
    g = np.linspace(0.0, 1.0, size)
    X1, X2 = np.meshgrid(g, g)
    x1, x2 = X1.ravel(), X2.ravel()
    feas = x1**2 + x2**2 + 2 * x1 * x2 - x1 - x2 >= 0
    F1, F2 = ex2_objectives(x1[feas], x2[feas])
    return np.column_stack([F1, F2])


def nondominated(points):
    """Pareto-minimal rows (brute force after sorting by the first coordinate)."""
    pts = points[np.lexsort((points[:, 1], points[:, 0]))]
    keep = []
    best = np.inf
    for p in pts:
        if p[1] < best:
            keep.append(p)
            best = p[1]
    return np.array(keep)


def sup_distance(value, points):
    return float(np.min(np.max(np.abs(points - np.asarray(value)), axis=1)))


def dominated_by_margin(value, points, margin):
    """Some point is better than ``value`` by at least ``margin`` in every coordinate."""
    return bool(np.any(np.all(points <= np.asarray(value) - margin, axis=1)))


def grid_min(f, lo, hi, size=401):
    """Minimum of a vectorised two-variable function over a box grid."""
    a = np.linspace(lo[0], hi[0], size)
    b = np.linspace(lo[1], hi[1], size)
    A, B = np.meshgrid(a, b)
    return float(np.min(f(A, B)))


def vandermonde(points, degree):
    """Rows of all monomials of total degree <= ``degree`` at each point."""
    import itertools
    pts = np.atleast_2d(points)
    n = pts.shape[1]
    exps = [e for k in range(degree + 1) for e in itertools.product(range(k + 1), repeat=n) if sum(e) == k]
    return np.array([[np.prod(p ** np.array(e)) for e in exps] for p in pts])


def generic_atoms(points, degree, floor=1e-2):
    """True when the points are far from any degree-``degree`` algebraic degeneracy
    (smallest singular value of their Vandermonde matrix at least ``floor``)."""
    sv = np.linalg.svd(vandermonde(points, degree), compute_uv=False)
    return sv[-1] >= floor
