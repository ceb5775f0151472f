"""Semidefinite programming: data model, interior-point solver, SDPA I/O."""
from .ipm import DEFAULT_MAX_ITER, DEFAULT_TOL, solve
from .problem import LmiBlock, SdpProblem, SdpSolution, SdpStatus
from .sdpa import export_sdpa, import_sdpa

__all__ = [
    "DEFAULT_MAX_ITER",
    "DEFAULT_TOL",
    "LmiBlock",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "export_sdpa",
    "import_sdpa",
    "solve",
]
