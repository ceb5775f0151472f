"""Moment relaxations of polynomial optimization over compact basic sets."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import sdp
from .moment import (
    EXTRACTION_SEED,
    RANK_RATIO,
    AtomicMeasure,
    ExtractionError,
    TruncatedMomentSequence,
    extract_atoms,
    flat_truncation,
)
from .poly import Polynomial, add_exponents, basis, basis_index, num_monomials
from .semialg import Ball, SetDescriptor

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6
VALUE_TOL = 1e-5
# solutions stalled at the double-precision floor are kept when their
# gap/infeasibility merit is below this; certification still needs atoms
ACCEPT_ACCURACY = 1e-6
SdpSink = Optional[Callable[[str, sdp.SdpProblem], None]]


class OrderTooSmall(ValueError):
    pass


class EmptyFeasibleSet(RuntimeError):
    """Every relaxation order was reported infeasible."""


class SolverFailure(RuntimeError):
    pass


@dataclass
class HierarchyResult:
    order: int
    bound: float
    minimizers: AtomicMeasure | None
    certified: bool
    candidates: np.ndarray
    history: list[tuple[int, float, str]] = field(default_factory=list)

    @property
    def points(self) -> np.ndarray:
        return self.candidates


def half_ceil(k: int) -> int:
    return (k + 1) // 2


def min_order(f: Polynomial, K: SetDescriptor) -> int:
    return max([half_ceil(f.degree), 1] + [half_ceil(h.degree) for h in K.inequalities])


def _shift_table(n: int, d: int, maxdeg: int) -> np.ndarray:
    mons = basis(n, d)
    idx = basis_index(n, maxdeg)
    return np.array([[idx[add_exponents(a, b)] for b in mons] for a in mons], dtype=int)


def moment_block(n: int, t: int, maxdeg: int, g: Polynomial | None = None) -> sdp.LmiBlock:
    """Linear map ``y -> M_t(g y)`` with ``y`` indexed by ``basis(n, maxdeg)``."""
    m = num_monomials(n, maxdeg)
    s = num_monomials(n, t)
    A = np.zeros((m, s, s))
    rows = np.arange(s)
    if g is None:
        T = _shift_table(n, t, maxdeg)
        A[T, rows[:, None], rows[None, :]] = 1.0
    else:
        mons = basis(n, t)
        idx = basis_index(n, maxdeg)
        for kappa, gk in g.items():
            T = np.array([[idx[add_exponents(add_exponents(a, b), kappa)] for b in mons] for a in mons])
            np.add.at(A, (T, rows[:, None], rows[None, :]), gk)
    return sdp.LmiBlock(np.zeros((s, s)), A)


def relax(f: Polynomial, K: SetDescriptor, t: int) -> sdp.SdpProblem:
    """Order-``t`` moment relaxation of ``min f`` over ``K``.

    Variables are the pseudo-moments indexed by ``basis(n, 2t)``.
    """
    if f.variables != K.variables:
        f = f.embed(K.variables)
    n = len(K.variables)
    if t < half_ceil(f.degree) or any(t < half_ceil(h.degree) for h in K.inequalities):
        raise OrderTooSmall(f"relaxation order {t} below the minimum {min_order(f, K)}")
    maxdeg = 2 * t
    m = num_monomials(n, maxdeg)
    blocks = [moment_block(n, t, maxdeg)]
    for h in K.inequalities:
        blocks.append(moment_block(n, t - half_ceil(h.degree), maxdeg, h))
    c = f.to_vector(maxdeg)
    E = np.zeros((1, m))
    E[0, 0] = 1.0
    return sdp.SdpProblem(c, blocks, E, np.array([1.0]))


def _project(K: SetDescriptor, x: np.ndarray) -> np.ndarray:
    if isinstance(K.shape, Ball):
        c = np.asarray(K.shape.center)
        r = np.linalg.norm(x - c)
        return x if r <= K.shape.radius else c + (x - c) * (K.shape.radius / r)
    try:
        lo, hi = K.bounding_box()
    except ValueError:
        return x
    return np.clip(x, lo, hi)


def _certify(f: Polynomial, K: SetDescriptor, atoms: AtomicMeasure, bound: float) -> bool:
    for x in atoms.points:
        if not all(h.eval(x) >= -FEAS_TOL for h in K.inequalities):
            return False
        if abs(f.eval(x) - bound) > VALUE_TOL * (1 + abs(bound)):
            return False
    return len(atoms) > 0


def minimize(
    f: Polynomial,
    K: SetDescriptor,
    t_min: int | None = None,
    t_max: int | None = None,
    tol: float = sdp.DEFAULT_TOL,
    rank_ratio: float = RANK_RATIO,
    seed: int = EXTRACTION_SEED,
    sdpa_sink: SdpSink = None,
    label: str = "lasserre",
) -> HierarchyResult:
    """Run the hierarchy from ``t_min`` to ``t_max``, stopping once certified."""
    if not K.is_archimedean:
        raise ValueError("set must be compact with an Archimedean description")
    if f.variables != K.variables:
        f = f.embed(K.variables)
    n = len(K.variables)
    t0 = min_order(f, K)
    t_min = t0 if t_min is None else max(t_min, t0)
    t_max = t_min + 3 if t_max is None else t_max
    d0 = max([1] + [half_ceil(h.degree) for h in K.inequalities])

    history: list[tuple[int, float, str]] = []
    best: HierarchyResult | None = None
    infeasible = 0
    for t in range(t_min, t_max + 1):
        P = relax(f, K, t)
        if sdpa_sink is not None:
            sdpa_sink(f"{label}_t{t}", P)
        sol = sdp.solve(P, tol=tol)
        history.append((t, sol.primal_objective, sol.status.value))
        log.debug("%s order %d: %s bound %.10g", label, t, sol.status.value, sol.primal_objective)
        if sol.status is sdp.SdpStatus.PRIMAL_INFEASIBLE:
            infeasible += 1
            continue
        if not sol.usable(ACCEPT_ACCURACY):
            continue
        bound = sol.primal_objective
        if best is not None:
            bound = max(bound, best.bound)
        y = TruncatedMomentSequence(n, 2 * t, sol.y)
        atoms = None
        certified = False
        ft = flat_truncation(y, d0, rank_ratio)
        if ft is not None:
            try:
                atoms = extract_atoms(y, ft[0], ft[1], d0, seed=seed)
                certified = _certify(f, K, atoms, bound)
            except ExtractionError as exc:
                log.debug("%s order %d: extraction failed (%s)", label, t, exc)
                atoms = None
        if atoms is not None and certified:
            cands = atoms.points
        else:
            cands = _project(K, y.first_moments())[None, :]
        best = HierarchyResult(t, bound, atoms if certified else None, certified, cands, history)
        if certified:
            break
    if best is None:
        if infeasible and infeasible == len(history):
            raise EmptyFeasibleSet(f"{label}: relaxation infeasible at every order {t_min}..{t_max}")
        raise SolverFailure(f"{label}: no relaxation order solved ({history})")
    best.history = history
    return best


def maximize(f: Polynomial, K: SetDescriptor, *args, **kwargs) -> HierarchyResult:
    res = minimize(-f, K, *args, **kwargs)
    res.bound = -res.bound
    res.history = [(t, -b, s) for t, b, s in res.history]
    return res
