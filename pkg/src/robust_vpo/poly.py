"""Sparse multivariate polynomials over named, block-partitioned variables.

Every polynomial carries its full ambient variable list.  Monomials are
exponent tuples aligned with that list, and the graded-lexicographic order
produced by :func:`basis` is the single indexing used by the moment and SDP
layers.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Monomial = tuple[int, ...]
Number = Union[int, float]


# --------------------------------------------------------------------------
# graded monomial indexing
# --------------------------------------------------------------------------

def num_monomials(n: int, d: int) -> int:
    """Dimension of the space of polynomials in ``n`` variables of degree <= ``d``."""
    if d < 0:
        return 0
    return math.comb(n + d, d)


@lru_cache(maxsize=None)
def _homogeneous(n: int, k: int) -> tuple[Monomial, ...]:
    if n == 1:
        return ((k,),)
    out = []
    for first in range(k, -1, -1):
        for rest in _homogeneous(n - 1, k - first):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def basis(n: int, d: int) -> tuple[Monomial, ...]:
    """All exponent tuples of total degree <= d in graded-lex order.

    >>> basis(2, 2)
    ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    """
    if n < 1:
        raise ValueError("basis needs at least one variable")
    if d < 0:
        raise ValueError("degree must be nonnegative")
    return tuple(itertools.chain.from_iterable(_homogeneous(n, k) for k in range(d + 1)))


@lru_cache(maxsize=None)
def basis_index(n: int, d: int) -> dict[Monomial, int]:
    """Inverse of :func:`basis`: exponent tuple -> position."""
    return {m: i for i, m in enumerate(basis(n, d))}


def monomial_index(alpha: Monomial) -> int:
    """Position of ``alpha`` in ``basis(len(alpha), d)`` for any d >= |alpha|."""
    n = len(alpha)
    deg = sum(alpha)
    return basis_index(n, deg)[tuple(alpha)]


def add_exponents(a: Monomial, b: Monomial) -> Monomial:
    return tuple(i + j for i, j in zip(a, b))


# --------------------------------------------------------------------------
# variables
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Variables:
    """Ordered variable names, each tagged with a block id ("x", "u", ...)."""

    names: tuple[str, ...]
    blocks: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) != len(self.blocks):
            raise ValueError("names and blocks differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate variable names in {self.names}")

    @classmethod
    def from_blocks(cls, **blocks: Sequence[str]) -> "Variables":
        names: list[str] = []
        tags: list[str] = []
        for bid, vs in blocks.items():
            names.extend(vs)
            tags.extend([bid] * len(vs))
        return cls(tuple(names), tuple(tags))

    def __len__(self) -> int:
        return len(self.names)

    def __add__(self, other: "Variables") -> "Variables":
        names = list(self.names)
        tags = list(self.blocks)
        for nm, bid in zip(other.names, other.blocks):
            if nm in names:
                if tags[names.index(nm)] != bid:
                    raise ValueError(f"variable {nm} appears in two blocks")
                continue
            names.append(nm)
            tags.append(bid)
        return Variables(tuple(names), tuple(tags))

    def block_ids(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.blocks))

    def block_positions(self, bid: str) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.blocks) if b == bid)

    def block(self, bid: str) -> "Variables":
        pos = self.block_positions(bid)
        return Variables(tuple(self.names[i] for i in pos), (bid,) * len(pos))

    def without_block(self, bid: str) -> "Variables":
        keep = [i for i, b in enumerate(self.blocks) if b != bid]
        return Variables(tuple(self.names[i] for i in keep), tuple(self.blocks[i] for i in keep))

    def index(self, name: str) -> int:
        return self.names.index(name)


# --------------------------------------------------------------------------
# polynomials
# --------------------------------------------------------------------------

class Polynomial:
    """Immutable sparse real polynomial.

    Coefficients that are exactly zero are dropped; nothing else is pruned.
    """

    __slots__ = ("_vars", "_terms", "_hash")

    def __init__(self, variables: Variables, terms: Mapping[Monomial, float] | None = None):
        self._vars = variables
        n = len(variables)
        clean: dict[Monomial, float] = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != n:
                raise ValueError(f"monomial {mono} does not match {n} variables")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = float(c)
            if c != 0.0:
                clean[mono] = clean.get(mono, 0.0) + c
        self._terms = {m: c for m, c in clean.items() if c != 0.0}
        self._hash = None

    # constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, variables: Variables, c: float) -> "Polynomial":
        return cls(variables, {(0,) * len(variables): c})

    @classmethod
    def zero(cls, variables: Variables) -> "Polynomial":
        return cls(variables, {})

    @classmethod
    def variable(cls, variables: Variables, name: str) -> "Polynomial":
        mono = [0] * len(variables)
        mono[variables.index(name)] = 1
        return cls(variables, {tuple(mono): 1.0})

    @classmethod
    def from_vector(cls, variables: Variables, coeffs: Sequence[float], d: int | None = None) -> "Polynomial":
        """Coefficients in graded-lex order of ``basis(n, d)``."""
        n = len(variables)
        if d is None:
            d = 0
            while num_monomials(n, d) < len(coeffs):
                d += 1
        mons = basis(n, d)
        if len(coeffs) > len(mons):
            raise ValueError("too many coefficients for degree")
        return cls(variables, dict(zip(mons, coeffs)))

    # accessors ------------------------------------------------------------

    @property
    def variables(self) -> Variables:
        return self._vars

    @property
    def nvars(self) -> int:
        return len(self._vars)

    @property
    def terms(self) -> Mapping[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, mono: Monomial) -> float:
        return self._terms.get(tuple(mono), 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def degree(self) -> int:
        if not self._terms:
            return 0
        return max(sum(m) for m in self._terms)

    def block_degree(self, bid: str) -> int:
        pos = self._vars.block_positions(bid)
        if not self._terms or not pos:
            return 0
        return max(sum(m[i] for i in pos) for m in self._terms)

    def depends_on(self, bid: str) -> bool:
        return self.block_degree(bid) > 0

    def is_zero(self) -> bool:
        return not self._terms

    def to_vector(self, d: int | None = None) -> np.ndarray:
        """Dense coefficient vector over ``basis(n, d)``."""
        if d is None:
            d = self.degree
        if self.degree > d:
            raise ValueError(f"polynomial of degree {self.degree} exceeds {d}")
        idx = basis_index(self.nvars, d)
        out = np.zeros(len(idx))
        for m, c in self._terms.items():
            out[idx[m]] = c
        return out

    # arithmetic -----------------------------------------------------------

    def _check(self, other: "Polynomial") -> None:
        if other._vars != self._vars:
            raise ValueError(f"variable mismatch: {self._vars.names} vs {other._vars.names}")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self._vars, float(other))
        return NotImplemented

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0.0) + c
        return Polynomial(self._vars, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self._vars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def scale(self, a: float) -> "Polynomial":
        return Polynomial(self._vars, {m: a * c for m, c in self._terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check(other)
        out: dict[Monomial, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = add_exponents(m1, m2)
                out[m] = out.get(m, 0.0) + c1 * c2
        return Polynomial(self._vars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(self._vars, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._vars == other._vars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self._vars, frozenset(self._terms.items())))
        return self._hash

    # evaluation -----------------------------------------------------------

    def __call__(self, point) -> float | np.ndarray:
        return self.eval(point)

    def eval(self, point) -> float | np.ndarray:
        """Evaluate at one point (shape (n,)) or many (shape (..., n))."""
        z = np.asarray(point, dtype=float)
        if z.shape[-1:] != (self.nvars,):
            raise ValueError(f"point has {z.shape[-1] if z.ndim else 0} coordinates, expected {self.nvars}")
        if not self._terms:
            return 0.0 if z.ndim == 1 else np.zeros(z.shape[:-1])
        exps = np.array(list(self._terms.keys()), dtype=int)
        coefs = np.fromiter(self._terms.values(), dtype=float, count=len(self._terms))
        vals = np.prod(z[..., None, :] ** exps, axis=-1) @ coefs
        return float(vals) if z.ndim == 1 else vals

    # variable manipulation ------------------------------------------------

    def embed(self, variables: Variables) -> "Polynomial":
        """Re-express over a larger ambient list (matching variables by name)."""
        if variables == self._vars:
            return self
        pos = []
        for nm in self._vars.names:
            try:
                pos.append(variables.index(nm))
            except ValueError:
                if all(m[self._vars.index(nm)] == 0 for m in self._terms):
                    pos.append(-1)
                    continue
                raise ValueError(f"variable {nm} missing from target list") from None
        out = {}
        n = len(variables)
        for m, c in self._terms.items():
            new = [0] * n
            for e, p in zip(m, pos):
                if p >= 0:
                    new[p] += e
            out[tuple(new)] = c
        return Polynomial(variables, out)

    def affine_map(self, offset: Sequence[float], scale: Sequence[float]) -> "Polynomial":
        """``q(z) = p(offset + scale * z)`` (coordinatewise), over the same variables."""
        offset = np.asarray(offset, dtype=float)
        scale = np.asarray(scale, dtype=float)
        n = self.nvars
        if offset.shape != (n,) or scale.shape != (n,):
            raise ValueError(f"offset and scale need shape ({n},)")
        # powers of each substituted coordinate, built once per exponent
        subs = [Polynomial(self._vars, {tuple(int(j == i) for j in range(n)): scale[i]}) + offset[i]
                for i in range(n)]
        powers: dict[tuple[int, int], Polynomial] = {}
        out = Polynomial.zero(self._vars)
        for m, c in self._terms.items():
            term = Polynomial.constant(self._vars, c)
            for i, e in enumerate(m):
                if e:
                    if (i, e) not in powers:
                        powers[(i, e)] = subs[i] ** e
                    term = term * powers[(i, e)]
            out = out + term
        return out

    def substitute_block(self, bid: str, values: Sequence[float]) -> "Polynomial":
        """Fix every variable of block ``bid`` to ``values``."""
        pos = self._vars.block_positions(bid)
        if not pos:
            raise KeyError(f"unknown block {bid!r}")
        values = np.asarray(values, dtype=float).ravel()
        if len(values) != len(pos):
            raise ValueError(f"block {bid!r} has {len(pos)} variables, got {len(values)} values")
        rest = self._vars.without_block(bid)
        keep = [i for i in range(self.nvars) if i not in pos]
        out: dict[Monomial, float] = {}
        for m, c in self._terms.items():
            factor = 1.0
            for p, v in zip(pos, values):
                factor *= v ** m[p]
            mono = tuple(m[i] for i in keep)
            out[mono] = out.get(mono, 0.0) + c * factor
        return Polynomial(rest, out)

    # text -----------------------------------------------------------------

    def to_string(self) -> str:
        """Canonical text form; round-trips through :func:`parse_polynomial`."""
        if not self._terms:
            return "0"
        order = basis_index(self.nvars, self.degree)
        parts = []
        for m in sorted(self._terms, key=order.__getitem__):
            c = self._terms[m]
            factors = [
                nm if e == 1 else f"{nm}^{e}"
                for nm, e in zip(self._vars.names, m) if e
            ]
            body = " * ".join([repr(abs(c))] + factors)
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first = parts[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()})"

    __str__ = to_string


def monomial_vector(variables: Variables, d: int) -> list[Polynomial]:
    return [Polynomial(variables, {m: 1.0}) for m in basis(len(variables), d)]


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

class PolynomialSyntaxError(ValueError):
    """Raised for malformed polynomial text; carries a 1-based column."""

    def __init__(self, message: str, column: int, line: int | None = None):
        self.column = column
        self.line = line
        where = f"line {line}, column {column}" if line is not None else f"column {column}"
        super().__init__(f"{where}: {message}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^()/]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    pos = 0
    toks = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PolynomialSyntaxError(f"unexpected character {text[pos:].lstrip()[:1]!r}",
                                        pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip())))
        kind = m.lastgroup
        col = m.start(kind) + 1
        toks.append((kind, m.group(kind), col))
        pos = m.end()
    toks.append(("end", "", len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text: str, variables: Variables):
        self.toks = _tokenize(text)
        self.i = 0
        self.vars = variables

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, col = self.take()
        if val != value:
            raise PolynomialSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", col)

    def parse(self) -> Polynomial:
        p = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise PolynomialSyntaxError(f"unexpected {val!r}", col)
        return p

    def expr(self) -> Polynomial:
        sign = 1.0
        kind, val, _ = self.peek()
        if val in "+-" and kind == "op":
            self.take()
            sign = -1.0 if val == "-" else 1.0
        acc = self.term().scale(sign)
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                t = self.term()
                acc = acc + t if val == "+" else acc - t
            else:
                return acc

    def term(self) -> Polynomial:
        acc = self.power()
        while True:
            kind, val, col = self.peek()
            if kind == "op" and val == "*":
                self.take()
                acc = acc * self.power()
            elif kind == "op" and val == "/":
                self.take()
                denom = self.power()
                if denom.degree > 0 or denom.is_zero():
                    raise PolynomialSyntaxError("division only by nonzero constants", col)
                acc = acc.scale(1.0 / denom.coefficient((0,) * denom.nvars))
            else:
                return acc

    def power(self) -> Polynomial:
        base = self.atom()
        kind, val, col = self.peek()
        if kind == "op" and val == "^":
            self.take()
            kind, val, col = self.take()
            if kind != "num" or not val.isdigit():
                raise PolynomialSyntaxError(f"exponent must be a nonnegative integer, found {val or 'end of input'!r}", col)
            return base ** int(val)
        return base

    def atom(self) -> Polynomial:
        kind, val, col = self.take()
        if kind == "num":
            return Polynomial.constant(self.vars, float(val))
        if kind == "name":
            if val == "sqrt":
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                if inner.degree > 0:
                    raise PolynomialSyntaxError("sqrt of a non-constant", col)
                return Polynomial.constant(self.vars, math.sqrt(inner.coefficient((0,) * inner.nvars)))
            if val not in self.vars.names:
                raise PolynomialSyntaxError(f"undeclared variable {val!r}", col)
            return Polynomial.variable(self.vars, val)
        if kind == "op" and val == "(":
            p = self.expr()
            self.expect(")")
            return p
        if kind == "op" and val == "-":
            return -self.power()
        raise PolynomialSyntaxError(f"unexpected {val or 'end of input'!r}", col)


def parse_polynomial(text: str, variables: Variables) -> Polynomial:
    """Parse ``coeff * x1^a * u1^b + ...`` (parentheses and integer powers allowed)."""
    return _Parser(text, variables).parse()


def parse_number(text: str) -> float:
    """A real constant such as ``1.5``, ``-2e-3`` or ``sqrt(2)``."""
    dummy = Variables(("_",), ("_",))
    p = parse_polynomial(text, dummy)
    if p.degree > 0:
        raise PolynomialSyntaxError("expected a constant", 1)
    return p.coefficient((0,))


def stack_eval(polys: Iterable[Polynomial], points) -> np.ndarray:
    """Evaluate several polynomials at the same points; returns (len(polys), ...)."""
    return np.array([p.eval(points) for p in polys])
