"""Block-diagonal SDP data in linear-matrix-inequality form.

    minimize    c . y
    subject to  A0_j + sum_k y_k A_kj  >= 0   (PSD, every block j)
                E y = b
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class SdpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class LmiBlock:
    """``constant + sum_k y_k coeffs[k]`` with symmetric (size x size) matrices."""

    constant: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.constant = np.asarray(self.constant, dtype=float)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        s = self.constant.shape[0]
        if self.constant.shape != (s, s) or self.coeffs.ndim != 3 or self.coeffs.shape[1:] != (s, s):
            raise ValueError("inconsistent block dimensions")
        if not np.array_equal(self.constant, self.constant.T):
            raise ValueError("constant matrix is not symmetric")
        if not np.array_equal(self.coeffs, self.coeffs.transpose(0, 2, 1)):
            raise ValueError("coefficient matrices must be symmetric")

    @property
    def size(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.constant + np.tensordot(y, self.coeffs, axes=1)


@dataclass
class SdpProblem:
    objective: np.ndarray
    blocks: list[LmiBlock]
    eq_matrix: np.ndarray = None
    eq_rhs: np.ndarray = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        m = self.num_vars
        if self.eq_matrix is None:
            self.eq_matrix = np.zeros((0, m))
            self.eq_rhs = np.zeros(0)
        self.eq_matrix = np.asarray(self.eq_matrix, dtype=float).reshape(-1, m)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).ravel()
        if self.eq_matrix.shape[0] != self.eq_rhs.shape[0]:
            raise ValueError("equality matrix and right-hand side disagree")
        for blk in self.blocks:
            if blk.coeffs.shape[0] != m:
                raise ValueError("block has wrong number of coefficient matrices")

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def equalities(self) -> list[tuple[np.ndarray, float]]:
        return [(row, float(r)) for row, r in zip(self.eq_matrix, self.eq_rhs)]

    def structurally_equal(self, other: "SdpProblem") -> bool:
        if self.num_vars != other.num_vars or len(self.blocks) != len(other.blocks):
            return False
        if not np.array_equal(self.objective, other.objective):
            return False
        if not (np.array_equal(self.eq_matrix, other.eq_matrix) and np.array_equal(self.eq_rhs, other.eq_rhs)):
            return False
        return all(
            np.array_equal(a.constant, b.constant) and np.array_equal(a.coeffs, b.coeffs)
            for a, b in zip(self.blocks, other.blocks)
        )


@dataclass
class SdpSolution:
    y: np.ndarray
    block_duals: list[np.ndarray]
    status: SdpStatus
    gap: float
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    eq_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    iterations: int = 0
    accuracy: float = float("inf")

    @property
    def ok(self) -> bool:
        return self.status is SdpStatus.OPTIMAL

    def usable(self, accuracy: float) -> bool:
        """Optimal, or stopped early with ``max(gap, residual/10) <= accuracy``."""
        if self.ok:
            return True
        return self.status in (SdpStatus.MAX_ITERATIONS, SdpStatus.NUMERICAL_FAILURE) and self.accuracy <= accuracy
