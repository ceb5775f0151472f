"""One-sided polynomial approximations of parametric value functions.

For ``F(x) = sup_{u in U} f(x, u)`` the upper approximation solves

    min  sum_a mu_a gamma_a
    s.t. sum_a mu_a x^a - f(x, u)  is in the truncated quadratic module of X x U

where ``gamma`` are the moments of the uniform probability measure on X.
The lower approximation of ``G(x) = inf_{v in V} g(x, v)`` is symmetric.
Both are assembled in Gram form: one PSD matrix per multiplier plus
coefficient-matching equalities.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import sdp
from .lasserre import ACCEPT_ACCURACY, SdpSink, SolverFailure, half_ceil, moment_block
from .moment import TruncatedMomentSequence
from .poly import Polynomial, add_exponents, basis, basis_index, num_monomials
from .semialg import Box, SetDescriptor, box_set, normalize, uniform_moments

log = logging.getLogger(__name__)


class Direction(enum.Enum):
    UPPER = "Upper"
    LOWER = "Lower"




class RaiseOrder(RuntimeError):
    """The truncated module is too small at this order; try a larger one."""


@dataclass(frozen=True)
class ValueApprox:
    poly: Polynomial
    direction: Direction
    d: int
    order: int
    integral: float
    shift: float = 0.0

    def __call__(self, x) -> float | np.ndarray:
        return self.poly.eval(x)

    @property
    def coefficients(self) -> dict:
        return dict(self.poly.items())


def _pin_points(inner: SetDescriptor, fj: Polynomial, nx: int) -> tuple[SetDescriptor, Polynomial]:
    """Substitute zero-width box sides into ``fj`` and widen them to unit length.

    Once ``fj`` no longer depends on such a coordinate its range is
    irrelevant, and a set with interior keeps the interior-point solver well
    conditioned.
    """
    if not isinstance(inner.shape, Box):
        return inner, fj
    lo, hi = np.asarray(inner.shape.lower, float), np.asarray(inner.shape.upper, float)
    flat = lo == hi
    if not flat.any():
        return inner, fj
    scale = np.concatenate([np.ones(nx), np.where(flat, 0.0, 1.0)])
    offset = np.concatenate([np.zeros(nx), np.where(flat, lo, 0.0)])
    wide = box_set(inner.variables, np.where(flat, lo - 0.5, lo), np.where(flat, hi + 0.5, hi))
    return wide, fj.affine_map(offset, scale)


def _joint(outer: SetDescriptor, inner: SetDescriptor, f: Polynomial) -> tuple[SetDescriptor, SetDescriptor, Polynomial]:
    K = outer.product(inner)
    inner, fj = _pin_points(inner, f.embed(K.variables), outer.dim)
    return outer.product(inner), inner, fj


def min_order(f: Polynomial, K: SetDescriptor, d: int) -> int:
    return max([half_ceil(d), half_ceil(f.degree), 1] + [half_ceil(h.degree) for h in K.inequalities])


def _gram_map(n: int, t: int, maxdeg: int, h: Polynomial | None) -> tuple[np.ndarray, np.ndarray, list]:
    """Gram block of size ``s(t)`` and the linear map from its upper-triangular
    entries to the coefficients of ``h * m^T Q m`` over ``basis(n, maxdeg)``."""
    mons = basis(n, t)
    s = len(mons)
    idx = basis_index(n, maxdeg)
    pairs = [(a, b) for a in range(s) for b in range(a, s)]
    coeffs = np.zeros((len(pairs), s, s))
    lin = np.zeros((num_monomials(n, maxdeg), len(pairs)))
    hterms = [((0,) * n, 1.0)] if h is None else list(h.items())
    for k, (a, b) in enumerate(pairs):
        coeffs[k, a, b] = coeffs[k, b, a] = 1.0
        mult = 1.0 if a == b else 2.0
        ab = add_exponents(mons[a], mons[b])
        for kappa, hk in hterms:
            lin[idx[add_exponents(ab, kappa)], k] += mult * hk
    return coeffs, lin, pairs


def _bound_abs(r: Polynomial, zmax: np.ndarray) -> float:
    """Upper bound on ``|r|`` over the box ``|z_i| <= zmax_i``."""
    return float(sum(abs(c) * np.prod(zmax ** np.array(m)) for m, c in r.items()))


def _max_coef(p: Polynomial) -> float:
    return max((abs(c) for _, c in p.items()), default=0.0)


def _normalized_joint(outer: SetDescriptor, inner: SetDescriptor, fj: Polynomial):
    """Map X x U into [-1, 1]^N and rescale f and each constraint to unit size.

    Monomials of a set far from the unit box are badly conditioned; the
    equivalent problem in normalized coordinates solves to much higher
    accuracy.  Returns the normalized pieces plus the data to map back.
    """
    ox, sx, Xn = normalize(outer)
    ou, su, Un = normalize(inner)
    Kn = Xn.product(Un)
    ineqs = tuple(h.scale(1.0 / _max_coef(h)) for h in Kn.inequalities if _max_coef(h) > 0)
    Kn = SetDescriptor(Kn.variables, ineqs, None, None, bound_radius=Kn.bound_radius, archimedean=True)
    fn = fj.affine_map(np.concatenate([ox, ou]), np.concatenate([sx, su]))
    fscale = _max_coef(fn) or 1.0
    zmax = np.concatenate([np.max(np.abs(Xn.bounding_box()), axis=0), np.max(np.abs(Un.bounding_box()), axis=0)])
    return Xn, Kn, fn.scale(1.0 / fscale), fscale, (ox, sx), zmax


def _joint_blocks(N: int, order: int, K: SetDescriptor) -> list[tuple[Polynomial | None, int]]:
    return [(None, order)] + [(h, order - half_ceil(h.degree)) for h in K.inequalities]


def _marginal_rows(N: int, nx: int, d: int, maxdeg: int) -> np.ndarray:
    """Index of each ``x^a`` (``|a| <= d``) inside ``basis(N, maxdeg)``."""
    idx = basis_index(N, maxdeg)
    return np.array([idx[tuple(a) + (0,) * (N - nx)] for a in basis(nx, d)], dtype=int)


def _solve_gram(fj, K, rows, gamma, order, sign, tol, sink, name):
    """SOS side written out explicitly: coefficients plus one Gram matrix per multiplier."""
    N = len(K.variables)
    maxdeg = 2 * order
    nrow = num_monomials(N, maxdeg)
    nmu = len(rows)
    pieces = [_gram_map(N, t, maxdeg, h) for h, t in _joint_blocks(N, order, K)]
    nvar = nmu + sum(len(pc[2]) for pc in pieces)
    # sign * (sum mu x^a - f) = sigma_0 + sum sigma_k h_k
    E = np.zeros((nrow, nvar))
    E[rows, np.arange(nmu)] = sign
    blocks = []
    col = nmu
    for coeffs, lin, pairs in pieces:
        npair = len(pairs)
        E[:, col:col + npair] = -lin
        full = np.zeros((nvar,) + coeffs.shape[1:])
        full[col:col + npair] = coeffs
        blocks.append(sdp.LmiBlock(np.zeros(coeffs.shape[1:]), full))
        col += npair
    c = np.zeros(nvar)
    c[:nmu] = sign * gamma
    P = sdp.SdpProblem(c, blocks, E, sign * fj.to_vector(maxdeg))
    if sink is not None:
        sink(name, P)
    sol = sdp.solve(P, tol=tol)
    grams = [blk.evaluate(sol.y) for blk in blocks] if sol.y.size and np.all(np.isfinite(sol.y)) else []
    return sol, sol.y[:nmu].copy(), grams


def _solve_moment(fj, K, rows, gamma, order, sign, tol, sink, name):
    """Moment side of the same primal-dual pair; the certificate is read off the duals."""
    N = len(K.variables)
    maxdeg = 2 * order
    m = num_monomials(N, maxdeg)
    blocks = [moment_block(N, t, maxdeg, h) for h, t in _joint_blocks(N, order, K)]
    E = np.zeros((len(rows), m))
    E[np.arange(len(rows)), rows] = 1.0
    c = -sign * fj.to_vector(maxdeg)
    P = sdp.SdpProblem(c, blocks, E, gamma)
    if sink is not None:
        sink(name, P)
    sol = sdp.solve(P, tol=tol)
    if not sol.block_duals:
        return sol, np.zeros(len(rows)), []
    # stationarity c = A*(X) + E^T w with E pinning single moments
    AX = sum(blk.coeffs.reshape(m, -1) @ Xj.ravel() for blk, Xj in zip(blocks, sol.block_duals))
    w = (c - AX)[rows]
    return sol, -sign * w, list(sol.block_duals)


def _value_approx(
    f: Polynomial,
    outer: SetDescriptor,
    inner: SetDescriptor,
    d: int,
    order: int | None,
    direction: Direction,
    tol: float,
    sdpa_sink: SdpSink,
    label: str,
    form: str,
) -> ValueApprox:
    if d < 0:
        raise ValueError("approximation degree must be nonnegative")
    if form not in ("moment", "gram"):
        raise ValueError(f"unknown form {form!r}")
    if not (outer.is_archimedean and inner.is_archimedean):
        raise ValueError("both sets must have Archimedean descriptions")
    K, inner, fj = _joint(outer, inner, f)
    X = outer.variables
    nx = len(X)
    sign = 1.0 if direction is Direction.UPPER else -1.0

    # nothing to approximate when f does not involve the inner variables
    inner_free = all(not any(m[nx:]) for m in fj.terms)
    if inner_free and fj.degree <= d:
        p = Polynomial(X, {m[:nx]: c for m, c in fj.items()})
        return ValueApprox(p, direction, d, order or 0, float(p.to_vector(d) @ uniform_moments(outer, d)))

    lo = min_order(fj, K, d)
    order = lo + 1 if order is None else order
    if order < lo:
        raise ValueError(f"relaxation order {order} below the minimum {lo}")
    Xn, Kn, fn, fscale, (ox, sx), zmax = _normalized_joint(outer, inner, fj)
    gamma = uniform_moments(Xn, d)
    N = len(Kn.variables)
    maxdeg = 2 * order
    rows = _marginal_rows(N, nx, d, maxdeg)
    name = f"{label}_{direction.value.lower()}_d{d}_o{order}"
    solver = _solve_moment if form == "moment" else _solve_gram
    sol, mu, grams = solver(fn, Kn, rows, gamma, order, sign, tol, sdpa_sink, name)
    log.debug("%s: %s accuracy %.2e", name, sol.status.value, sol.accuracy)
    if sol.status in (sdp.SdpStatus.PRIMAL_INFEASIBLE, sdp.SdpStatus.DUAL_INFEASIBLE):
        raise RaiseOrder(f"{label}: no certificate at order {order} ({sol.status.value})")
    if not sol.usable(ACCEPT_ACCURACY):
        raise SolverFailure(f"{label}: {direction.value} approximation failed ({sol.status.value})")

    # residual against PSD-clipped Gram matrices, then a constant shift that
    # makes the one-sided bound hold on all of X x U
    sos = np.zeros(num_monomials(N, maxdeg))
    for (h, t), Q in zip(_joint_blocks(N, order, Kn), grams):
        w, V = np.linalg.eigh(0.5 * (Q + Q.T))
        Qc = (V * np.clip(w, 0.0, None)) @ V.T
        sos += moment_block(N, t, maxdeg, h).coeffs.reshape(len(sos), -1) @ Qc.ravel()
    lin = np.zeros(len(sos))
    lin[rows] = mu
    resid = sign * (lin - fn.to_vector(maxdeg)) - sos
    shift = _bound_abs(Polynomial.from_vector(Kn.variables, resid, maxdeg), zmax)
    mu[0] += sign * shift
    mu *= fscale
    # the uniform measure on X pushes forward to the uniform measure on Xn
    integral = float(mu @ gamma)
    poly = Polynomial.from_vector(X, mu, d).affine_map(-ox / sx, 1.0 / sx)
    return ValueApprox(poly, direction, d, order, integral, shift * fscale)


def upper_value_approx(
    f: Polynomial,
    X: SetDescriptor,
    U: SetDescriptor,
    d: int,
    order: int | None = None,
    tol: float = sdp.DEFAULT_TOL,
    sdpa_sink: SdpSink = None,
    label: str = "jm",
    form: str = "gram",
) -> ValueApprox:
    """Degree-``d`` polynomial ``p`` with ``p(x) >= sup_{u in U} f(x, u)`` on X,
    minimising ``int p`` against the uniform measure on X.

    ``form="gram"`` (the default) builds the SOS program with explicit Gram matrices;
    ``form="moment"`` solves the equivalent moment side and reads the SOS
    certificate from its dual.  Either way the returned polynomial is
    shifted by a bound on the certificate residual, so the inequality
    holds exactly on X x U.
    """
    return _value_approx(f, X, U, d, order, Direction.UPPER, tol, sdpa_sink, label, form)


def lower_value_approx(
    g: Polynomial,
    X: SetDescriptor,
    V: SetDescriptor,
    e: int,
    order: int | None = None,
    tol: float = sdp.DEFAULT_TOL,
    sdpa_sink: SdpSink = None,
    label: str = "jm",
    form: str = "gram",
) -> ValueApprox:
    """Degree-``e`` polynomial below ``inf_{v in V} g(x, v)`` on X, with maximal integral."""
    return _value_approx(g, X, V, e, order, Direction.LOWER, tol, sdpa_sink, label, form)


def monotone_envelope(approxes: Sequence[ValueApprox]) -> Callable:
    """Pointwise min (upper) or max (lower) over the given approximations."""
    if not approxes:
        raise ValueError("need at least one approximation")
    direction = approxes[0].direction
    if any(a.direction is not direction for a in approxes):
        raise ValueError("cannot mix upper and lower approximations")
    reduce = np.minimum if direction is Direction.UPPER else np.maximum
    polys = [a.poly for a in approxes]

    def envelope(x):
        out = np.asarray(polys[0].eval(x), dtype=float)
        for p in polys[1:]:
            out = reduce(out, p.eval(x))
        return out if out.ndim else float(out)

    return envelope


def dual_marginal(
    f: Polynomial,
    X: SetDescriptor,
    U: SetDescriptor,
    d: int,
    order: int | None = None,
    tol: float = sdp.DEFAULT_TOL,
) -> tuple[float, TruncatedMomentSequence]:
    """Moment-side counterpart of :func:`upper_value_approx`.

    Maximises ``L_z(f)`` over pseudo-moments on X x U whose x-marginal
    moments of degree at most ``d`` equal the uniform moments of X.
    """
    K, U, fj = _joint(X, U, f)
    lo = min_order(fj, K, d)
    order = lo + 1 if order is None else order
    if order < lo:
        raise ValueError(f"relaxation order {order} below the minimum {lo}")
    N = len(K.variables)
    maxdeg = 2 * order
    rows = _marginal_rows(N, len(X.variables), d, maxdeg)
    sol, _, _ = _solve_moment(fj, K, rows, uniform_moments(X, d), order, 1.0, tol, None, "")
    if sol.status in (sdp.SdpStatus.PRIMAL_INFEASIBLE, sdp.SdpStatus.DUAL_INFEASIBLE):
        raise RaiseOrder(f"moment problem at order {order}: {sol.status.value}")
    if not sol.usable(ACCEPT_ACCURACY):
        raise SolverFailure(f"moment problem failed ({sol.status.value})")
    return -sol.primal_objective, TruncatedMomentSequence(N, maxdeg, sol.y)
