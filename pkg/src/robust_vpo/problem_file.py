"""Line-oriented problem files.

A file has four sections; ``#`` starts a comment::

    [variables]
    x = x1, x2
    u = u

    [objectives]
    f1 = x1^2*u^2 + x2^2*u

    [constraints]
    g1 = 1 - x1^2 - x2^2

    [sets]
    X = ball [0, 0] sqrt(2)
    U = box [0] [1]

Sets are ``box [lower...] [upper...]``, ``ball [center...] radius`` or
``general radius R: h1; h2; ...`` (meaning ``h_k >= 0`` inside the ball of
radius ``R``).
"""
from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

from .pipeline import ProblemSpec
from .poly import Polynomial, PolynomialSyntaxError, Variables, parse_number, parse_polynomial
from .semialg import Ball, Box, SetDescriptor, ball_set, box_set, general_set

SECTIONS = ("variables", "objectives", "constraints", "sets")
BLOCKS = ("x", "u", "v")
_OBJECTIVE_KEY = re.compile(r"f[1-9][0-9]*$")
_CONSTRAINT_KEY = re.compile(r"g[1-9][0-9]*$")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


class ProblemFileError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class NonCompactSet(ProblemFileError):
    """A set without a box, ball or radius bound."""


def _entries(text: str):
    """Yield ``(section, key, value, line, key_column, value_column)`` per assignment."""
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        col0 = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ProblemFileError("unterminated section header", lineno, col0)
            section = stripped[1:-1].strip()
            if section not in SECTIONS:
                raise ProblemFileError(f"unknown section [{section}]", lineno, col0 + 1)
            if section in seen:
                raise ProblemFileError(f"section [{section}] appears twice", lineno, col0 + 1)
            seen.add(section)
            continue
        if section is None:
            raise ProblemFileError("entry before any section header", lineno, col0)
        if "=" not in line:
            raise ProblemFileError("expected 'key = value'", lineno, col0)
        key_part, value = line.split("=", 1)
        key = key_part.strip()
        vcol = len(key_part) + 2 + (len(value) - len(value.lstrip()))
        yield section, key, value.strip(), lineno, col0, vcol


def _numbers(text: str, line: int, col: int) -> list[float]:
    out = []
    for piece in text.split(","):
        try:
            out.append(parse_number(piece.strip()))
        except PolynomialSyntaxError as exc:
            raise ProblemFileError(f"bad number {piece.strip()!r}", line, col) from exc
    return out


def _bracketed(text: str, line: int, col: int) -> tuple[list[list[float]], str]:
    """Leading ``[...]`` groups of numbers and the remaining text."""
    groups = []
    rest = text.strip()
    while rest.startswith("["):
        end = rest.find("]")
        if end < 0:
            raise ProblemFileError("missing ']'", line, col)
        groups.append(_numbers(rest[1:end], line, col))
        rest = rest[end + 1:].strip()
    return groups, rest


def _parse_set(text: str, variables: Variables, line: int, col: int) -> SetDescriptor:
    kind, _, body = text.partition(" ")
    kind = kind.strip()
    try:
        if kind == "box":
            groups, rest = _bracketed(body, line, col)
            if len(groups) != 2 or rest:
                raise ProblemFileError("box needs '[lower...] [upper...]'", line, col)
            return box_set(variables, groups[0], groups[1])
        if kind == "ball":
            groups, rest = _bracketed(body, line, col)
            if len(groups) != 1 or not rest:
                raise ProblemFileError("ball needs '[center...] radius'", line, col)
            return ball_set(variables, groups[0], _numbers(rest, line, col)[0])
        if kind == "general":
            head, sep, polys = body.partition(":")
            m = re.fullmatch(r"\s*radius\s+(.+?)\s*", head)
            if not m:
                raise NonCompactSet("general set needs 'radius R:' to be compact", line, col)
            if not sep:
                raise ProblemFileError("expected ':' before the inequalities", line, col)
            radius = _numbers(m.group(1), line, col)[0]
            ineqs = []
            offset = text.index(":") + 1
            for piece in polys.split(";"):
                if piece.strip():
                    ineqs.append(_parse_poly(piece, variables, line, col + offset))
                offset += len(piece) + 1
            return general_set(variables, ineqs, radius)
    except ValueError as exc:
        if isinstance(exc, ProblemFileError):
            raise
        raise ProblemFileError(str(exc), line, col) from exc
    raise NonCompactSet(f"unknown set kind {kind!r} (use box, ball or general)", line, col)


def _parse_poly(text: str, variables: Variables, line: int, col: int) -> Polynomial:
    lead = len(text) - len(text.lstrip())
    try:
        return parse_polynomial(text.strip(), variables)
    except PolynomialSyntaxError as exc:
        raise ProblemFileError(str(exc).split(": ", 1)[-1], line, col + lead + exc.column - 1) from exc


def parse_problem_text(text: str) -> ProblemSpec:
    blocks: dict[str, list[str]] = {}
    objectives: list[tuple[str, str, int, int]] = []
    constraints: list[tuple[str, str, int, int]] = []
    sets: dict[str, tuple[str, int, int]] = {}
    for section, key, value, line, kcol, vcol in _entries(text):
        if section == "variables":
            if key not in BLOCKS:
                raise ProblemFileError(f"unknown variable block {key!r} (use x, u or v)", line, kcol)
            if key in blocks:
                raise ProblemFileError(f"block {key!r} declared twice", line, kcol)
            names = [n.strip() for n in value.split(",")]
            for n in names:
                if not _NAME.match(n) or n == "sqrt":
                    raise ProblemFileError(f"bad variable name {n!r}", line, vcol)
            blocks[key] = names
        elif section == "objectives":
            if not _OBJECTIVE_KEY.match(key):
                raise ProblemFileError(f"unknown objective key {key!r} (use f1, f2, ...)", line, kcol)
            objectives.append((key, value, line, vcol))
        elif section == "constraints":
            if not _CONSTRAINT_KEY.match(key):
                raise ProblemFileError(f"unknown constraint key {key!r} (use g1, g2, ...)", line, kcol)
            constraints.append((key, value, line, vcol))
        else:
            if key not in ("X", "U", "V"):
                raise ProblemFileError(f"unknown set key {key!r} (use X, U or V)", line, kcol)
            if key in sets:
                raise ProblemFileError(f"set {key} given twice", line, kcol)
            sets[key] = (value, line, vcol)

    if "x" not in blocks:
        raise ProblemFileError("no decision variables declared", 1)
    for keys, what, prefix in ((objectives, "objective", "f"), (constraints, "constraint", "g")):
        names = [k for k, *_ in keys]
        if len(set(names)) != len(names):
            raise ProblemFileError(f"duplicate {what} key", keys[-1][2])
        if names != [f"{prefix}{i + 1}" for i in range(len(names))]:
            raise ProblemFileError(f"{what}s must be numbered 1, 2, ... in order", keys[0][2])
    if not objectives:
        raise ProblemFileError("no objectives given", 1)

    var = {b: Variables.from_blocks(**{b: blocks[b]}) for b in blocks}
    fvars = var["x"] + var["u"] if "u" in var else var["x"]
    gvars = var["x"] + var["v"] if "v" in var else var["x"]
    fs = tuple(_parse_poly(v, fvars, ln, c) for _, v, ln, c in objectives)
    gs = tuple(_parse_poly(v, gvars, ln, c) for _, v, ln, c in constraints)

    parsed = {}
    for key, bid in (("X", "x"), ("U", "u"), ("V", "v")):
        if key in sets and bid not in var:
            raise ProblemFileError(f"set {key} given but no {bid} variables declared", sets[key][1])
        if bid in var and key not in sets:
            raise ProblemFileError(f"{bid} variables declared but set {key} missing", 1)
        if key in sets:
            value, ln, c = sets[key]
            parsed[key] = _parse_set(value, var[bid], ln, c)
    return ProblemSpec(fs, gs, parsed["X"], parsed.get("U"), parsed.get("V"))


def parse_problem(path: str | Path) -> ProblemSpec:
    return parse_problem_text(Path(path).read_text())


def _fmt(v: float) -> str:
    return repr(float(v))


def _format_set(S: SetDescriptor) -> str:
    if isinstance(S.shape, Box):
        return f"box [{', '.join(map(_fmt, S.shape.lower))}] [{', '.join(map(_fmt, S.shape.upper))}]"
    if isinstance(S.shape, Ball):
        return f"ball [{', '.join(map(_fmt, S.shape.center))}] {_fmt(S.shape.radius)}"
    if S.archimedean_witness is None or S.bound_radius is None:
        raise ValueError("only box, ball and radius-bounded sets can be written")
    ineqs = [h.to_string() for h in S.inequalities if h is not S.archimedean_witness]
    return f"general radius {_fmt(S.bound_radius)}: " + "; ".join(ineqs)


def serialize_problem(spec: ProblemSpec) -> str:
    """Text that :func:`parse_problem_text` turns back into an equal spec."""
    lines = ["[variables]"]
    lines.append("x = " + ", ".join(spec.X.variables.names))
    if spec.U is not None:
        lines.append("u = " + ", ".join(spec.U.variables.names))
    if spec.V is not None:
        lines.append("v = " + ", ".join(spec.V.variables.names))
    lines += ["", "[objectives]"]
    lines += [f"f{i + 1} = {f.to_string()}" for i, f in enumerate(spec.objectives)]
    lines += ["", "[constraints]"]
    lines += [f"g{j + 1} = {g.to_string()}" for j, g in enumerate(spec.constraints)]
    lines += ["", "[sets]", f"X = {_format_set(spec.X)}"]
    if spec.U is not None:
        lines.append(f"U = {_format_set(spec.U)}")
    if spec.V is not None:
        lines.append(f"V = {_format_set(spec.V)}")
    return "\n".join(lines) + "\n"


def bundled(name: str) -> Path:
    """Path of a problem file shipped with the package (``example1`` or ``example2``)."""
    stem = name[:-5] if name.endswith(".prob") else name
    ref = resources.files("robust_vpo") / "data" / f"{stem}.prob"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled problem named {name!r}")
    return Path(str(ref))
