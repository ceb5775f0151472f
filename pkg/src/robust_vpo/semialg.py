"""Compact basic semialgebraic sets and uniform-measure moments on simple sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .poly import Polynomial, Variables, basis


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class SetDescriptor:
    """``{z : h_k(z) >= 0 for all k}`` over ``variables``.

    ``shape`` is a :class:`Box`, a :class:`Ball` or ``None`` (general).  Box and
    ball descriptors generate Archimedean quadratic modules by construction;
    general ones need ``archimedean_witness`` (a polynomial ``R^2 - |z|^2``
    that is also listed among the inequalities).
    """

    variables: Variables
    inequalities: tuple[Polynomial, ...]
    shape: Box | Ball | None = None
    archimedean_witness: Polynomial | None = None
    bound_radius: float | None = field(default=None, compare=False)
    archimedean: bool = field(default=False, compare=False)

    def __post_init__(self):
        for h in self.inequalities:
            if h.variables != self.variables:
                raise ValueError("inequality variables differ from the set's variables")
        if isinstance(self.shape, Box):
            if len(self.shape.lower) != len(self.variables):
                raise ValueError("box dimension mismatch")
            if any(lo > hi for lo, hi in zip(self.shape.lower, self.shape.upper)):
                raise ValueError("box needs lower <= upper in every coordinate")
        if isinstance(self.shape, Ball) and not self.shape.radius > 0:
            raise ValueError("ball radius must be positive")
        if self.archimedean_witness is not None and self.archimedean_witness not in self.inequalities:
            raise ValueError("archimedean witness must be one of the inequalities")

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def is_archimedean(self) -> bool:
        return self.archimedean or self.shape is not None or self.archimedean_witness is not None

    @property
    def max_degree(self) -> int:
        return max((h.degree for h in self.inequalities), default=0)

    def membership(self, point, tol: float = 0.0) -> bool:
        z = np.asarray(point, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"point has shape {z.shape}, expected ({self.dim},)")
        return all(h.eval(z) >= -tol for h in self.inequalities)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Vectorised membership for an array of points (..., n)."""
        z = np.asarray(points, dtype=float)
        ok = np.ones(z.shape[:-1], dtype=bool)
        for h in self.inequalities:
            ok &= np.asarray(h.eval(z)) >= -tol
        return ok

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if isinstance(self.shape, Box):
            return np.array(self.shape.lower), np.array(self.shape.upper)
        if isinstance(self.shape, Ball):
            c = np.array(self.shape.center)
            return c - self.shape.radius, c + self.shape.radius
        if self.bound_radius is not None:
            r = self.bound_radius
            return -r * np.ones(self.dim), r * np.ones(self.dim)
        raise ValueError("set has no known bound")

    def embed(self, variables: Variables) -> "SetDescriptor":
        """The cylinder over this set in a larger variable list."""
        return SetDescriptor(
            variables,
            tuple(h.embed(variables) for h in self.inequalities),
            None,
            self.archimedean_witness.embed(variables) if self.archimedean_witness is not None else None,
            bound_radius=self._radius(),
            archimedean=self.is_archimedean,
        )

    def _radius(self) -> float | None:
        try:
            lo, hi = self.bounding_box()
        except ValueError:
            return None
        return float(np.max(np.maximum(np.abs(lo), np.abs(hi))))

    def with_constraints(self, extra: Sequence[Polynomial]) -> "SetDescriptor":
        """Intersect with ``{h >= 0 : h in extra}`` (same variables)."""
        extra = tuple(h.embed(self.variables) for h in extra)
        return SetDescriptor(
            self.variables, self.inequalities + extra, None, self.archimedean_witness,
            bound_radius=self._radius(), archimedean=self.is_archimedean,
        )

    def product(self, other: "SetDescriptor") -> "SetDescriptor":
        """Cartesian product over the concatenated variable list."""
        joint = self.variables + other.variables
        a = self.embed(joint)
        b = other.embed(joint)
        ra, rb = self._radius(), other._radius()
        radius = None if ra is None or rb is None else math.hypot(ra, rb)
        return SetDescriptor(
            joint, a.inequalities + b.inequalities, None, None,
            bound_radius=radius, archimedean=self.is_archimedean and other.is_archimedean,
        )


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def box_set(variables: Variables, lower: Sequence[float], upper: Sequence[float]) -> SetDescriptor:
    """Box written as one quadratic ``(z_i - l_i)(u_i - z_i) >= 0`` per coordinate."""
    lower = tuple(float(v) for v in lower)
    upper = tuple(float(v) for v in upper)
    if len(lower) != len(variables) or len(upper) != len(variables):
        raise ValueError("box bounds do not match the variable count")
    ineqs = []
    for nm, lo, hi in zip(variables.names, lower, upper):
        z = Polynomial.variable(variables, nm)
        ineqs.append((z - lo) * (hi - z))
    return SetDescriptor(variables, tuple(ineqs), Box(lower, upper))


def ball_set(variables: Variables, center: Sequence[float], radius: float) -> SetDescriptor:
    center = tuple(float(c) for c in center)
    if len(center) != len(variables):
        raise ValueError("ball center does not match the variable count")
    h = Polynomial.constant(variables, float(radius) ** 2)
    for nm, c in zip(variables.names, center):
        h = h - (Polynomial.variable(variables, nm) - c) ** 2
    return SetDescriptor(variables, (h,), Ball(center, float(radius)))


def general_set(variables: Variables, inequalities: Sequence[Polynomial], radius: float) -> SetDescriptor:
    """General set; the witness ``radius^2 - |z|^2 >= 0`` is appended automatically."""
    if not radius > 0:
        raise ValueError("a positive bounding radius is required for compactness")
    w = Polynomial.constant(variables, float(radius) ** 2)
    for nm in variables.names:
        w = w - Polynomial.variable(variables, nm) ** 2
    ineqs = tuple(h.embed(variables) for h in inequalities) + (w,)
    return SetDescriptor(variables, ineqs, None, w, bound_radius=float(radius))


def normalize(S: SetDescriptor) -> tuple[np.ndarray, np.ndarray, SetDescriptor]:
    """Affine change of variables ``z = offset + scale * w`` putting ``S`` inside [-1, 1]^n.

    Boxes map to [-1, 1]^n and balls to the unit ball, so closed-form
    moments stay available.  Zero-width box sides keep scale 1.
    """
    lo, hi = S.bounding_box()
    offset = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    scale = np.where(half > 0, half, 1.0)
    if isinstance(S.shape, Box):
        return offset, scale, box_set(S.variables, (lo - offset) / scale, (hi - offset) / scale)
    if isinstance(S.shape, Ball):
        return offset, scale, ball_set(S.variables, np.zeros(S.dim), 1.0)
    ineqs = tuple(h.affine_map(offset, scale) for h in S.inequalities)
    witness = None
    if S.archimedean_witness is not None:
        witness = ineqs[S.inequalities.index(S.archimedean_witness)]
    return offset, scale, SetDescriptor(
        S.variables, ineqs, None, witness, bound_radius=1.0, archimedean=S.is_archimedean)


# --------------------------------------------------------------------------
# uniform moments
# --------------------------------------------------------------------------

def uniform_box_moments(lower: Sequence[float], upper: Sequence[float], maxdeg: int) -> np.ndarray:
    """Moments of the uniform probability measure on a box, over ``basis(n, maxdeg)``."""
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if np.any(hi < lo):
        raise ValueError("box needs lower <= upper")
    n = len(lo)
    k = np.arange(maxdeg + 1)
    # one-dimensional moments, shape (n, maxdeg+1); a zero-width side is a point mass
    width = np.where(hi > lo, hi - lo, 1.0)
    m1 = (hi[:, None] ** (k + 1) - lo[:, None] ** (k + 1)) / ((k + 1) * width[:, None])
    flat = hi <= lo
    m1[flat] = lo[flat, None] ** k
    out = np.empty(len(basis(n, maxdeg)))
    for j, alpha in enumerate(basis(n, maxdeg)):
        out[j] = np.prod([m1[i, a] for i, a in enumerate(alpha)])
    return out


def _centered_ball_moment(alpha, radius: float) -> float:
    if any(a % 2 for a in alpha):
        return 0.0
    n = len(alpha)
    s = sum(alpha)
    betas = [(a + 1) / 2 for a in alpha]
    # E[x^a] = Gamma(n/2+1)/pi^(n/2) * 2 prod Gamma(b_i) / Gamma(sum b) / (|a|+n) * R^|a|
    log_val = (
        gammaln(n / 2 + 1) - (n / 2) * math.log(math.pi) + math.log(2.0)
        + sum(gammaln(b) for b in betas) - gammaln(sum(betas)) - math.log(s + n)
    )
    return math.exp(log_val) * radius ** s


def uniform_ball_moments(center: Sequence[float], radius: float, maxdeg: int) -> np.ndarray:
    """Moments of the uniform probability measure on a Euclidean ball."""
    c = np.asarray(center, dtype=float)
    n = len(c)
    if not radius > 0:
        raise ValueError("radius must be positive")
    mons = basis(n, maxdeg)
    centered = {m: _centered_ball_moment(m, radius) for m in mons}
    if not np.any(c):
        return np.array([centered[m] for m in mons])
    out = np.empty(len(mons))
    for j, alpha in enumerate(mons):
        total = 0.0
        for beta in np.ndindex(*(a + 1 for a in alpha)):
            coef = 1.0
            for a, b, ci in zip(alpha, beta, c):
                coef *= math.comb(a, b) * ci ** (a - b)
            total += coef * centered[tuple(beta)]
        out[j] = total
    return out


def uniform_moments(S: SetDescriptor, maxdeg: int) -> np.ndarray:
    if isinstance(S.shape, Box):
        return uniform_box_moments(S.shape.lower, S.shape.upper, maxdeg)
    if isinstance(S.shape, Ball):
        return uniform_ball_moments(S.shape.center, S.shape.radius, maxdeg)
    raise ValueError("closed-form moments need a box or ball")


def sample_uniform(S: SetDescriptor, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from a box/ball, or rejection samples from a general set."""
    if isinstance(S.shape, Box):
        lo, hi = S.bounding_box()
        return rng.uniform(lo, hi, size=(size, S.dim))
    if isinstance(S.shape, Ball):
        n = S.dim
        g = rng.standard_normal((size, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = S.shape.radius * rng.uniform(size=(size, 1)) ** (1.0 / n)
        return np.asarray(S.shape.center) + r * g
    lo, hi = S.bounding_box()
    chunks = []
    have = 0
    for _ in range(1000):
        cand = rng.uniform(lo, hi, size=(max(size, 64), S.dim))
        keep = cand[S.contains(cand)]
        chunks.append(keep)
        have += len(keep)
        if have >= size:
            break
    pts = np.concatenate(chunks) if chunks else np.empty((0, S.dim))
    return pts[:size]
