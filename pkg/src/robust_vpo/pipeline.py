"""Robust vector optimization end to end.

Worst-case objectives ``F_i(x) = sup_u f_i(x, u)`` are replaced by upper
polynomial approximations, robust constraints ``G_j(x) = inf_v g_j(x, v) >= 0``
by lower ones, and the resulting vector problem is scanned with weighted
power distances to a utopia point.  Each minimizer is then re-evaluated
against the original worst-case objectives.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import jm, lasserre, sdp
from .jm import Direction, ValueApprox
from .lasserre import EmptyFeasibleSet, HierarchyResult, SdpSink
from .moment import EXTRACTION_SEED
from .poly import Polynomial, Variables, num_monomials
from .semialg import SetDescriptor, sample_uniform, uniform_moments

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-6
DOMINANCE_TOL = 1e-6
# largest moment matrix a scalarized cell may need
MAX_MOMENT_ROWS = 500
EPS_FACTOR = 0.05

CHEBYSHEV = math.inf

OBLIGATIONS = (
    "The robust feasible set is nonempty and compact.",
    "The robust feasible set is the closure of its interior.",
    "For every constraint, the set where its worst case equals zero has empty interior inside X.",
)


class CellTooLarge(RuntimeError):
    """The scalarized problem exceeds the moment-matrix size guard."""


# --------------------------------------------------------------------------
# data model
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """Objectives over ``(x, u)``, constraints over ``(x, v)``, and the sets.

    ``U`` or ``V`` may be ``None`` when no objective (constraint) carries
    uncertainty.
    """

    objectives: tuple[Polynomial, ...]
    constraints: tuple[Polynomial, ...]
    X: SetDescriptor
    U: SetDescriptor | None = None
    V: SetDescriptor | None = None

    def __post_init__(self):
        if not self.objectives:
            raise ValueError("need at least one objective")
        if set(self.X.variables.blocks) != {"x"}:
            raise ValueError("X must be described over the x block only")
        for S, bid in ((self.U, "u"), (self.V, "v")):
            if S is not None and set(S.variables.blocks) != {bid}:
                raise ValueError(f"{bid.upper()} must be described over the {bid} block only")
        fvars = self.X.variables + self.U.variables if self.U is not None else self.X.variables
        gvars = self.X.variables + self.V.variables if self.V is not None else self.X.variables
        # embed raises if a polynomial uses a variable outside its allowed blocks
        object.__setattr__(self, "objectives", tuple(f.embed(fvars) for f in self.objectives))
        object.__setattr__(self, "constraints", tuple(g.embed(gvars) for g in self.constraints))

    @property
    def l(self) -> int:
        return len(self.objectives)

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def n(self) -> int:
        return self.X.dim

    @property
    def x_variables(self) -> Variables:
        return self.X.variables


@dataclass(frozen=True)
class UtopiaPoint:
    y_U: np.ndarray
    bounds: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        if np.any(self.eps <= 0):
            raise ValueError("eps must be strictly positive")
        if not np.allclose(self.y_U, self.bounds - self.eps, rtol=0, atol=0):
            raise ValueError("y_U must equal bounds - eps")


@dataclass(frozen=True)
class ScalarizationConfig:
    """Weights in the open simplex and a power ``p`` (``CHEBYSHEV`` for the max form)."""

    lam: tuple[float, ...]
    p: float

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        object.__setattr__(self, "lam", lam)
        if any(v <= 0 for v in lam):
            raise ValueError("weights must be strictly positive")
        if abs(sum(lam) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {sum(lam)!r}")
        if self.p != CHEBYSHEV and (self.p != int(self.p) or self.p < 1):
            raise ValueError("p must be an integer >= 1 or CHEBYSHEV")

    @property
    def chebyshev(self) -> bool:
        return self.p == CHEBYSHEV


@dataclass(frozen=True)
class ParetoRecord:
    x_star: np.ndarray
    approx_values: np.ndarray
    robust_values: np.ndarray
    lam: tuple[float, ...]
    p: float
    certified: bool
    scalar_value: float = math.nan

    def key(self) -> tuple:
        return (self.p, self.lam)


@dataclass(frozen=True)
class CellFailure:
    lam: tuple[float, ...]
    p: float
    reason: str


@dataclass
class SweepResult:
    records: list[ParetoRecord]
    failures: list[CellFailure]
    utopia: UtopiaPoint
    upper: list[ValueApprox]
    lower: list[ValueApprox]
    history: list[dict] = field(default_factory=list)

    @property
    def certified(self) -> list[ParetoRecord]:
        return [r for r in self.records if r.certified]


# --------------------------------------------------------------------------
# value-function approximations
# --------------------------------------------------------------------------


def _x_only(p: Polynomial, X: Variables) -> Polynomial:
    return Polynomial(X, {m[:len(X)]: c for m, c in p.items()})


def _exact(p: Polynomial, X: SetDescriptor, direction: Direction) -> ValueApprox:
    q = _x_only(p, X.variables)
    try:
        integral = float(q.to_vector() @ uniform_moments(X, q.degree))
    except ValueError:
        integral = math.nan
    return ValueApprox(q, direction, q.degree, 0, integral)


def default_degrees(spec: ProblemSpec) -> tuple[list[int], list[int]]:
    """Approximation degree per objective and constraint: its degree in x (at least 1)."""
    d = [max(1, f.block_degree("x")) for f in spec.objectives]
    e = [max(1, g.block_degree("x")) for g in spec.constraints]
    return d, e


def approximate(
    spec: ProblemSpec,
    degrees: Sequence[int] | None = None,
    constraint_degrees: Sequence[int] | None = None,
    order: int | None = None,
    tol: float = sdp.DEFAULT_TOL,
    sdpa_sink: SdpSink = None,
) -> tuple[list[ValueApprox], list[ValueApprox]]:
    """Upper approximations of every worst-case objective and lower ones of every constraint."""
    d0, e0 = default_degrees(spec)
    degrees = list(d0 if degrees is None else degrees)
    constraint_degrees = list(e0 if constraint_degrees is None else constraint_degrees)
    if len(degrees) != spec.l or len(constraint_degrees) != spec.m:
        raise ValueError("one degree per objective and per constraint is required")
    if min(degrees + constraint_degrees, default=1) < 1:
        raise ValueError("approximation degrees must be at least 1")
    upper = []
    for i, (f, d) in enumerate(zip(spec.objectives, degrees)):
        if spec.U is None or not f.depends_on("u"):
            upper.append(_exact(f, spec.X, Direction.UPPER))
        else:
            upper.append(jm.upper_value_approx(f, spec.X, spec.U, d, order, tol, sdpa_sink, f"F{i + 1}"))
    lower = []
    for j, (g, e) in enumerate(zip(spec.constraints, constraint_degrees)):
        if spec.V is None or not g.depends_on("v"):
            lower.append(_exact(g, spec.X, Direction.LOWER))
        else:
            lower.append(jm.lower_value_approx(g, spec.X, spec.V, e, order, tol, sdpa_sink, f"G{j + 1}"))
    return upper, lower


# --------------------------------------------------------------------------
# utopia point
# --------------------------------------------------------------------------


def default_eps(bounds: np.ndarray) -> np.ndarray:
    return EPS_FACTOR * (1.0 + np.abs(bounds))


def utopia_point(
    spec: ProblemSpec,
    eps: Sequence[float] | float | None = None,
    order: int | None = None,
    tol: float = sdp.DEFAULT_TOL,
    seed: int = EXTRACTION_SEED,
    sdpa_sink: SdpSink = None,
) -> UtopiaPoint:
    """Strict lower bound on the ideal point.

    ``sup_u min_{x in X} f_i`` never exceeds the ideal value, so a lower
    polynomial approximation of ``u -> min_x f_i(x, u)`` maximised over U
    gives a valid bound.  Without uncertainty the bound is ``min_X f_i``.
    """
    bounds = np.empty(spec.l)
    for i, f in enumerate(spec.objectives):
        label = f"utopia{i + 1}"
        if spec.U is None or not f.depends_on("u"):
            res = lasserre.minimize(_x_only(f, spec.x_variables), spec.X, tol=tol, seed=seed,
                                    sdpa_sink=sdpa_sink, label=label)
            bounds[i] = res.bound
            continue
        e = max(1, f.block_degree("u"))
        # u plays the parameter and x the inner variable here
        q = jm.lower_value_approx(f, spec.U, spec.X, e, order, tol, sdpa_sink, label)
        res = lasserre.maximize(q.poly, spec.U, tol=tol, seed=seed, sdpa_sink=sdpa_sink, label=label)
        bounds[i] = res.bound
    if eps is None:
        eps_arr = default_eps(bounds)
    else:
        eps_arr = np.broadcast_to(np.asarray(eps, dtype=float), bounds.shape).copy()
    return UtopiaPoint(bounds - eps_arr, bounds, eps_arr)


# --------------------------------------------------------------------------
# scalarization
# --------------------------------------------------------------------------


def build_gamma(Fbar: Sequence[Polynomial], y_U: Sequence[float], cfg: ScalarizationConfig) -> Polynomial:
    """``sum_i (lam_i (F_i - y_i))^p``."""
    if cfg.chebyshev:
        raise ValueError("the max form has no polynomial objective; use chebyshev_scalarize")
    if len(Fbar) != len(cfg.lam) or len(y_U) != len(cfg.lam):
        raise ValueError("weights, approximations and utopia point differ in length")
    p = int(cfg.p)
    out = Polynomial.zero(Fbar[0].variables)
    for F, y, w in zip(Fbar, y_U, cfg.lam):
        out = out + ((F - float(y)).scale(w)) ** p
    return out


def _abs_bound(p: Polynomial, K: SetDescriptor) -> float:
    lo, hi = K.bounding_box()
    zmax = np.maximum(np.abs(lo), np.abs(hi))
    return float(sum(abs(c) * np.prod(zmax ** np.array(m)) for m, c in p.items()))


def chebyshev_scalarize(
    Fbar: Sequence[Polynomial],
    y_U: Sequence[float],
    lam: Sequence[float],
    K: SetDescriptor,
    t: int | None = None,
    tol: float = sdp.DEFAULT_TOL,
    seed: int = EXTRACTION_SEED,
    sdpa_sink: SdpSink = None,
) -> HierarchyResult:
    """Minimise ``max_i lam_i (F_i(x) - y_i)`` over K through its epigraph.

    An auxiliary variable ``s`` is bounded by ``|s| <= T`` with ``T`` an a
    priori bound on every weighted term, which keeps the lifted set compact.
    Candidates in the result are reported in x only.
    """
    lam = ScalarizationConfig(tuple(lam), CHEBYSHEV).lam
    X = K.variables
    aux = Variables(("s_aux",), ("aux",))
    joint = X + aux
    s = Polynomial.variable(joint, "s_aux")
    weighted = [(F - float(y)).scale(w) for F, y, w in zip(Fbar, y_U, lam)]
    T = max(_abs_bound(term, K) for term in weighted) + 1.0
    terms = [term.embed(joint) for term in weighted]
    ineqs = tuple(h.embed(joint) for h in K.inequalities)
    ineqs += tuple(s - term for term in terms) + ((s + T) * (T - s),)
    radius = K._radius()
    lifted = SetDescriptor(joint, ineqs, None, None,
                           bound_radius=None if radius is None else math.hypot(radius, T),
                           archimedean=K.is_archimedean)
    res = lasserre.minimize(s, lifted, t_min=t, tol=tol, seed=seed, sdpa_sink=sdpa_sink, label="chebyshev")
    return dataclasses.replace(res, candidates=res.candidates[:, :len(X)])


def omega_bar(X: SetDescriptor, lower: Sequence[ValueApprox]) -> SetDescriptor:
    """Inner approximation ``{x in X : G_j(x) >= 0}`` of the robust feasible set."""
    return X.with_constraints([a.poly for a in lower]) if lower else X


def moment_rows(gamma: Polynomial) -> int:
    return num_monomials(gamma.nvars, lasserre.half_ceil(gamma.degree))


def solve_scalarized(
    gamma: Polynomial,
    omega: SetDescriptor,
    t_range: tuple[int | None, int | None] = (None, None),
    tol: float = sdp.DEFAULT_TOL,
    seed: int = EXTRACTION_SEED,
    sdpa_sink: SdpSink = None,
    label: str = "scalarized",
) -> tuple[list[tuple[np.ndarray, bool]], HierarchyResult]:
    """Minimizers of ``gamma`` over ``omega`` with a certification flag each.

    Raises :class:`EmptyFeasibleSet` when every relaxation is infeasible and
    :class:`CellTooLarge` when the moment matrix would exceed the guard.
    """
    rows = moment_rows(gamma)
    if rows > MAX_MOMENT_ROWS:
        raise CellTooLarge(f"{label}: moment matrix needs {rows} rows (limit {MAX_MOMENT_ROWS})")
    res = lasserre.minimize(gamma, omega, t_range[0], t_range[1], tol=tol, seed=seed,
                            sdpa_sink=sdpa_sink, label=label)
    return [(np.array(x), res.certified) for x in res.candidates], res


def robust_value(
    spec: ProblemSpec,
    x_star: Sequence[float],
    i: int,
    tol: float = sdp.DEFAULT_TOL,
    seed: int = EXTRACTION_SEED,
) -> tuple[float, bool]:
    """``sup_u f_i(x*, u)`` and whether the hierarchy certified it."""
    f = spec.objectives[i]
    x_star = np.asarray(x_star, dtype=float)
    if spec.U is None or not f.depends_on("u"):
        return float(_x_only(f, spec.x_variables).eval(x_star)), True
    q = f.substitute_block("x", x_star)
    if q.degree == 0:
        return q.coefficient((0,) * q.nvars), True
    res = lasserre.maximize(q, spec.U, tol=tol, seed=seed, label=f"robust{i + 1}")
    if res.certified:
        return res.bound, True
    # no flat extension (e.g. a continuum of maximizers); the bound is still
    # certified when some point of U attains it
    pts = np.vstack([res.candidates, sample_uniform(spec.U, 256, np.random.default_rng(seed))])
    pts = pts[spec.U.contains(pts, FEASIBILITY_TOL)]
    attained = float(np.max(q.eval(pts))) if len(pts) else -math.inf
    return res.bound, attained >= res.bound - lasserre.VALUE_TOL * (1 + abs(res.bound))


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------


def simplex_lattice(l: int, k: int) -> list[tuple[float, ...]]:
    """Points of the open simplex with coordinates in ``{1/k, ..., (k-1)/k}``."""
    if l == 1:
        return [(1.0,)]
    out = []
    for parts in itertools.product(range(1, k), repeat=l - 1):
        last = k - sum(parts)
        if last >= 1:
            w = tuple(v / k for v in parts) + (last / k,)
            out.append(w[:-1] + (1.0 - sum(w[:-1]),))
    return out


def default_lambda_grid(l: int) -> list[tuple[float, ...]]:
    if l == 2:
        return lambda_range(0.05, 0.85, 0.05)
    return simplex_lattice(l, 6)


def lambda_range(a: float, b: float, step: float) -> list[tuple[float, float]]:
    """Two-objective weights ``(lam, 1 - lam)`` for ``lam`` from ``a`` to ``b`` inclusive."""
    if step <= 0 or b < a:
        raise ValueError("need a <= b and a positive step")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    grid = [round(a + k * step, 12) for k in range(count)]
    if any(not 0 < v < 1 for v in grid):
        raise ValueError("weights must lie strictly between 0 and 1")
    return [(v, 1.0 - v) for v in grid]


@dataclass(frozen=True)
class _Cell:
    spec: ProblemSpec
    Fbar: tuple[Polynomial, ...]
    Gbar: tuple[Polynomial, ...]
    y_U: tuple[float, ...]
    cfg: ScalarizationConfig
    tol: float
    seed: int


def _run_cell(cell: _Cell) -> tuple[list[ParetoRecord], CellFailure | None]:
    spec, cfg = cell.spec, cell.cfg
    label = f"cell_p{cfg.p:g}_l{cfg.lam[0]:.4g}"
    omega = spec.X.with_constraints(list(cell.Gbar)) if cell.Gbar else spec.X
    try:
        if cfg.chebyshev:
            res = chebyshev_scalarize(cell.Fbar, cell.y_U, cfg.lam, omega, tol=cell.tol, seed=cell.seed)
            cands = [(x, res.certified) for x in res.candidates]
        else:
            gamma = build_gamma(cell.Fbar, cell.y_U, cfg)
            cands, res = solve_scalarized(gamma, omega, tol=cell.tol, seed=cell.seed, label=label)
    except EmptyFeasibleSet as exc:
        return [], CellFailure(cfg.lam, cfg.p, f"empty feasible set: {exc}")
    except (CellTooLarge, lasserre.SolverFailure, lasserre.OrderTooSmall, np.linalg.LinAlgError) as exc:
        return [], CellFailure(cfg.lam, cfg.p, str(exc))

    records = []
    for x, ok in cands:
        approx = np.array([float(F.eval(x)) for F in cell.Fbar])
        robust = []
        for i in range(spec.l):
            try:
                v, c = robust_value(spec, x, i, cell.tol, cell.seed)
            except lasserre.SolverFailure:
                v, c = math.nan, False
            robust.append(v)
            ok = ok and c
        feasible = all(float(G.eval(x)) >= -FEASIBILITY_TOL for G in cell.Gbar)
        in_x = spec.X.membership(x, FEASIBILITY_TOL)
        records.append(ParetoRecord(
            np.asarray(x, dtype=float), approx, np.array(robust), cfg.lam, cfg.p,
            bool(ok and feasible and in_x and np.all(np.isfinite(robust))), float(res.bound),
        ))
    return records, None


def sweep(
    spec: ProblemSpec,
    lambda_grid: Sequence[Sequence[float]] | None = None,
    p_list: Sequence[float] = (1, 2, 3, 4),
    degrees: Sequence[int] | None = None,
    constraint_degrees: Sequence[int] | None = None,
    order: int | None = None,
    eps: Sequence[float] | float | None = None,
    seed: int = EXTRACTION_SEED,
    tol: float = sdp.DEFAULT_TOL,
    workers: int = 1,
    sdpa_sink: SdpSink = None,
    degree_levels: Sequence[Sequence[int]] | None = None,
) -> SweepResult:
    """Scan weights and powers, returning one record per extracted minimizer.

    The utopia point and the approximations are computed once.  With
    ``degree_levels`` each cell is solved for every listed set of objective
    degrees and the level with the smallest certified scalarized value is
    kept (falling back to the smallest value overall).  Cells that fail are
    listed in ``failures`` and never stop the sweep.  Records come back in
    ``(p, lambda)`` order whatever ``workers`` is.
    """
    grid = [tuple(float(v) for v in lam) for lam in (lambda_grid or default_lambda_grid(spec.l))]
    if not grid or not p_list:
        raise ValueError("weight grid and power list must be nonempty")
    cfgs = [ScalarizationConfig(lam, p) for p in p_list for lam in grid]

    levels = [list(degrees) if degrees is not None else None] if degree_levels is None else [list(d) for d in degree_levels]
    upper_levels = []
    lower = None
    for lvl in levels:
        up, lo = approximate(spec, lvl, constraint_degrees, order, tol, sdpa_sink)
        upper_levels.append(up)
        lower = lo
    utopia = utopia_point(spec, eps, order, tol, seed, sdpa_sink)
    y_U = tuple(float(v) for v in utopia.y_U)
    Gbar = tuple(a.poly for a in lower)

    cells = [
        _Cell(spec, tuple(a.poly for a in up), Gbar, y_U, cfg, tol, seed)
        for cfg in cfgs for up in upper_levels
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]

    records: list[ParetoRecord] = []
    failures: list[CellFailure] = []
    nlev = len(upper_levels)
    for k, cfg in enumerate(cfgs):
        per_level = outcomes[k * nlev:(k + 1) * nlev]
        solved = [recs for recs, fail in per_level if fail is None and recs]
        if not solved:
            failures.append(next((fail for _, fail in per_level if fail is not None),
                                 CellFailure(cfg.lam, cfg.p, "no candidate extracted")))
            continue
        certified = [recs for recs in solved if any(r.certified for r in recs)]
        pool_ = certified or solved
        records.extend(min(pool_, key=lambda recs: recs[0].scalar_value))
    records.sort(key=ParetoRecord.key)
    return SweepResult(records, failures, utopia, [a for up in upper_levels for a in up], lower)


def pareto_filter(records: Sequence[ParetoRecord], tol: float = DOMINANCE_TOL) -> list[ParetoRecord]:
    """Drop records whose robust values are dominated by another record's.

    ``b`` dominates ``a`` when ``b <= a + tol`` everywhere and ``b < a - tol``
    somewhere, so near-ties are both kept.
    """
    vals = [np.asarray(r.robust_values, dtype=float) for r in records]
    if len({len(v) for v in vals}) > 1:
        raise ValueError("records have different objective counts")
    keep = []
    for a, ra in zip(vals, records):
        dominated = any(
            np.all(b <= a + tol) and np.any(b < a - tol)
            for b in vals if np.all(np.isfinite(b))
        )
        if not dominated:
            keep.append(ra)
    return keep
