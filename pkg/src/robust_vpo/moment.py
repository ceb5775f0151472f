"""Truncated moment sequences, moment/localizing matrices and atom extraction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .poly import Polynomial, add_exponents, basis, basis_index, num_monomials

RANK_RATIO = 1e-6
RANK_GAP = 1e-3
RANK_GAP_FLOOR = 1e-5
EXTRACTION_SEED = 20240607


class ExtractionError(RuntimeError):
    """Atom extraction failed (rank deficiency or ill-conditioned pivoting)."""


@dataclass(frozen=True)
class TruncatedMomentSequence:
    """Pseudo-moments ``y_alpha`` for ``alpha`` in ``basis(n, degree)``."""

    n: int
    degree: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (num_monomials(self.n, self.degree),):
            raise ValueError(
                f"expected {num_monomials(self.n, self.degree)} moments for n={self.n}, degree={self.degree}")

    @classmethod
    def from_atoms(cls, points, weights, degree: int) -> "TruncatedMomentSequence":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w = np.asarray(weights, dtype=float)
        n = pts.shape[1]
        exps = np.array(basis(n, degree))
        vals = (np.prod(pts[:, None, :] ** exps[None], axis=-1) * w[:, None]).sum(axis=0)
        return cls(n, degree, vals)

    def __getitem__(self, alpha) -> float:
        return float(self.values[basis_index(self.n, self.degree)[tuple(alpha)]])

    @property
    def half_degree(self) -> int:
        return self.degree // 2

    def first_moments(self) -> np.ndarray:
        return self.values[1:self.n + 1] / self.values[0]


@dataclass(frozen=True)
class AtomicMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)


def riesz(y: TruncatedMomentSequence, p: Polynomial) -> float:
    """``L_y(p) = sum_alpha p_alpha y_alpha``."""
    if p.nvars != y.n:
        raise ValueError("dimension mismatch")
    if p.degree > y.degree:
        raise ValueError(f"polynomial degree {p.degree} exceeds moment degree {y.degree}")
    idx = basis_index(y.n, y.degree)
    return float(sum(c * y.values[idx[m]] for m, c in p.items()))


def _index_table(n: int, d: int, maxdeg: int) -> np.ndarray:
    """``T[a, b]`` = index of ``basis(n,d)[a] + basis(n,d)[b]`` in ``basis(n, maxdeg)``."""
    mons = basis(n, d)
    idx = basis_index(n, maxdeg)
    s = len(mons)
    T = np.empty((s, s), dtype=int)
    for a in range(s):
        for b in range(a, s):
            T[a, b] = T[b, a] = idx[add_exponents(mons[a], mons[b])]
    return T


def moment_matrix(y: TruncatedMomentSequence, d: int) -> np.ndarray:
    if 2 * d > y.degree:
        raise ValueError(f"moment matrix of order {d} needs degree {2 * d}, have {y.degree}")
    return y.values[_index_table(y.n, d, y.degree)]


def localizing_matrix(y: TruncatedMomentSequence, g: Polynomial, d: int) -> np.ndarray:
    if g.nvars != y.n:
        raise ValueError("dimension mismatch")
    if 2 * d + g.degree > y.degree:
        raise ValueError(f"localizing matrix needs degree {2 * d + g.degree}, have {y.degree}")
    mons = basis(y.n, d)
    idx = basis_index(y.n, y.degree)
    s = len(mons)
    out = np.zeros((s, s))
    for kappa, gk in g.items():
        for a in range(s):
            for b in range(a, s):
                v = gk * y.values[idx[add_exponents(add_exponents(mons[a], mons[b]), kappa)]]
                out[a, b] += v
                if a != b:
                    out[b, a] += v
    return out


def numerical_rank(M: np.ndarray, ratio: float = RANK_RATIO) -> int:
    """Singular values above ``ratio * sigma_max``, or fewer when a sharp gap comes first.

    Solver noise near the accuracy floor can lift the zero singular values
    just above ``ratio``; a drop by ``RANK_GAP`` into the range below
    ``RANK_GAP_FLOOR`` marks the rank in that case.
    """
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] <= 0:
        return 0
    rank = int(np.sum(sv >= ratio * sv[0]))
    for k in range(1, rank):
        if sv[k] <= RANK_GAP * sv[k - 1] and sv[k] <= RANK_GAP_FLOOR * sv[0]:
            return k
    return rank


def flat_truncation(y: TruncatedMomentSequence, d0: int, ratio: float = RANK_RATIO) -> tuple[int, int] | None:
    """Smallest ``t`` with ``rank M_{t-d0}(y) = rank M_t(y)``, as ``(t, r)``."""
    d0 = max(int(d0), 1)
    d = y.half_degree
    for t in range(d0, d + 1):
        r_lo = numerical_rank(moment_matrix(y, t - d0), ratio)
        r_hi = numerical_rank(moment_matrix(y, t), ratio)
        if r_lo == r_hi and r_hi > 0:
            return t, r_hi
    return None


def _column_echelon(V: np.ndarray, tol: float) -> tuple[np.ndarray, list[int]]:
    """Reduced column echelon form with pivots chosen in row order."""
    U = V.copy()
    s, r = U.shape
    pivots: list[int] = []
    col = 0
    for row in range(s):
        if col == r:
            break
        j = col + int(np.argmax(np.abs(U[row, col:])))
        if abs(U[row, j]) <= tol:
            continue
        U[:, [col, j]] = U[:, [j, col]]
        U[:, col] /= U[row, col]
        for k in range(r):
            if k != col:
                U[:, k] -= U[row, k] * U[:, col]
        pivots.append(row)
        col += 1
    if len(pivots) < r:
        raise ExtractionError("column echelon form is rank deficient")
    return U, pivots


def extract_atoms(
    y: TruncatedMomentSequence,
    t: int,
    r: int,
    d0: int = 1,
    seed: int = EXTRACTION_SEED,
) -> AtomicMeasure:
    """Recover an ``r``-atomic representing measure from a flat ``M_t(y)``.

    Follows the Henrion-Lasserre procedure: factor ``M_t = V V^T``, bring
    ``V`` to column echelon form, build one multiplication matrix per
    variable and diagonalise a random combination of them.
    """
    n = y.n
    M = moment_matrix(y, t)
    evals, evecs = np.linalg.eigh(M)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order][:r], evecs[:, order][:, :r]
    if np.any(evals <= 0):
        raise ExtractionError("moment matrix has fewer positive eigenvalues than the rank")
    V = evecs * np.sqrt(evals)
    U, pivots = _column_echelon(V, tol=1e-6 * np.abs(V).max())
    mons = basis(n, t)
    idx = basis_index(n, t)
    base = [mons[p] for p in pivots]
    if any(sum(b) >= t for b in base):
        raise ExtractionError("pivot monomials reach the top degree; moment matrix not flat enough")
    Ns = []
    for i in range(n):
        rows = []
        for b in base:
            shifted = list(b)
            shifted[i] += 1
            rows.append(U[idx[tuple(shifted)]])
        Ns.append(np.array(rows))
    rng = np.random.default_rng(seed)
    rho = rng.random(n)
    rho /= rho.sum()
    Nmix = sum(c * Nk for c, Nk in zip(rho, Ns))
    T, Q = sla.schur(Nmix, output="real")
    if np.any(np.abs(np.diag(T, -1)) > 1e-8 * max(1.0, np.abs(T).max())):
        raise ExtractionError("multiplication matrices have complex eigenvalues")
    points = np.array([[Q[:, j] @ Nk @ Q[:, j] for Nk in Ns] for j in range(r)])
    # weights from moments up to degree 2(t - d0)
    deg_w = max(2 * (t - max(d0, 1)), 1)
    exps = np.array(basis(n, deg_w))
    A = np.prod(points[None, :, :] ** exps[:, None, :], axis=-1)
    target = y.values[: len(exps)]
    w, *_ = np.linalg.lstsq(A, target, rcond=None)
    if np.any(w <= 0):
        raise ExtractionError("nonpositive atom weight")
    return AtomicMeasure(points, w)


def synthesize(measure: AtomicMeasure, degree: int) -> TruncatedMomentSequence:
    return TruncatedMomentSequence.from_atoms(measure.points, measure.weights, degree)
