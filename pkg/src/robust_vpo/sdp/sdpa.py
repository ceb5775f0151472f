"""SDPA sparse format (``.dat-s``) export and import.

SDPA reads ``F(x) = sum_i F_i x_i - F_0 >= 0``; an LMI ``A0 + sum_k y_k A_k``
maps to ``F_0 = -A0`` and ``F_k = A_k``.  Equalities ``a . y = b`` become one
trailing diagonal block holding ``a . y - b >= 0`` and ``-a . y + b >= 0``
per row; a ``*`` comment line records how many such rows there are so that
the import can restore them.
"""
from __future__ import annotations

import re

import numpy as np

from .problem import LmiBlock, SdpProblem

_EQ_TAG = "* equality-rows:"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def export_sdpa(P: SdpProblem) -> str:
    m = P.num_vars
    k = P.eq_matrix.shape[0]
    sizes = [blk.size for blk in P.blocks]
    struct = [str(s) for s in sizes]
    if k:
        struct.append(str(-2 * k))
    lines = [
        "* LMI-form SDP: F(y) = sum_k y_k F_k - F_0 >= 0",
        f"{_EQ_TAG} {k}",
    ]
    if k:
        lines.append(f"* block {len(sizes) + 1} is diagonal: rows 2i-1, 2i encode a_i.y - b_i >= 0 and -(a_i.y - b_i) >= 0")
    lines += [
        f"{m} = mDIM",
        f"{len(struct)} = nBLOCK",
        " ".join(struct) + " = bLOCKsTRUCT",
        " ".join(_fmt(v) for v in P.objective),
    ]
    for b, blk in enumerate(P.blocks, start=1):
        for mat_no, mat in [(0, -blk.constant)] + [(i + 1, blk.coeffs[i]) for i in range(m)]:
            iu, ju = np.nonzero(np.triu(mat))
            for i, j in zip(iu, ju):
                lines.append(f"{mat_no} {b} {i + 1} {j + 1} {_fmt(mat[i, j])}")
    if k:
        eb = len(sizes) + 1
        for r, (row, rhs) in enumerate(zip(P.eq_matrix, P.eq_rhs)):
            d1, d2 = 2 * r + 1, 2 * r + 2
            if rhs != 0:
                lines.append(f"0 {eb} {d1} {d1} {_fmt(rhs)}")
                lines.append(f"0 {eb} {d2} {d2} {_fmt(-rhs)}")
            for i in np.flatnonzero(row):
                lines.append(f"{i + 1} {eb} {d1} {d1} {_fmt(row[i])}")
                lines.append(f"{i + 1} {eb} {d2} {d2} {_fmt(-row[i])}")
    return "\n".join(lines) + "\n"


def _numbers(line: str) -> list[str]:
    return [t for t in re.split(r"[\s,{}()]+", line.split("=")[0].strip()) if t]


def import_sdpa(text: str) -> SdpProblem:
    raw = text.splitlines()
    k = 0
    body = []
    for line in raw:
        s = line.strip()
        if not s:
            continue
        if s[0] in '*"':
            if s.startswith(_EQ_TAG):
                k = int(s[len(_EQ_TAG):].split()[0])
            continue
        body.append(s)
    m = int(_numbers(body[0])[0])
    nblock = int(_numbers(body[1])[0])
    struct = [int(t) for t in _numbers(body[2])]
    if len(struct) != nblock:
        raise ValueError("bLOCKsTRUCT length differs from nBLOCK")
    pos = 3
    c: list[float] = []
    while len(c) < m:
        c.extend(float(t) for t in _numbers(body[pos]))
        pos += 1
    mats = [np.zeros((m + 1, abs(s), abs(s))) for s in struct]
    for line in body[pos:]:
        t = _numbers(line)
        if len(t) != 5:
            raise ValueError(f"bad entry line: {line!r}")
        mat_no, blk, i, j = (int(v) for v in t[:4])
        v = float(t[4])
        M = mats[blk - 1]
        M[mat_no, i - 1, j - 1] = v
        M[mat_no, j - 1, i - 1] = v
    nlmi = nblock - (1 if k else 0)
    blocks = [LmiBlock(-mats[b][0], mats[b][1:]) for b in range(nlmi)]
    E = np.zeros((k, m))
    rhs = np.zeros(k)
    if k:
        D = mats[-1]
        for r in range(k):
            d = 2 * r
            rhs[r] = D[0, d, d]
            E[r] = D[1:, d, d]
    return SdpProblem(np.array(c), blocks, E, rhs)
