"""Command-line driver: read a problem file, sweep, write CSV/JSON/plot data.

Every flag can also be set through an environment variable named
``RVPO_`` plus the flag in upper case with dashes as underscores
(``RVPO_P_LIST=1,2``).  Flags win over the environment.

Exit codes: 0 when at least one certified record was produced, 2 when
none was, 1 on a fatal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import jm, sdp
from .moment import EXTRACTION_SEED
from .pipeline import (
    CHEBYSHEV,
    OBLIGATIONS,
    ParetoRecord,
    ProblemSpec,
    SweepResult,
    default_lambda_grid,
    lambda_range,
    sweep,
)
from .problem_file import ProblemFileError, bundled, parse_problem

ENV_PREFIX = "RVPO_"
EXIT_OK, EXIT_FATAL, EXIT_NONE_CERTIFIED = 0, 1, 2

log = logging.getLogger("robust_vpo")


@dataclass
class RunConfig:
    problem: Path
    out: Path = Path("rvpo_out")
    degrees: list[int] | None = None
    constraint_degrees: list[int] | None = None
    order: int | None = None
    lambda_grid: tuple[float, float, float] | None = None
    p_list: list[float] = field(default_factory=lambda: [1, 2, 3, 4])
    eps: float | None = None
    seed: int = EXTRACTION_SEED
    tol: float = sdp.DEFAULT_TOL
    export_sdpa: Path | None = None
    workers: int = 1

    def check(self, spec: ProblemSpec) -> None:
        """Degree and order checks that need the problem."""
        if self.degrees is not None and len(self.degrees) != spec.l:
            raise ValueError(f"--degrees needs {spec.l} values, got {len(self.degrees)}")
        if self.constraint_degrees is not None and len(self.constraint_degrees) != spec.m:
            raise ValueError(f"--constraint-degrees needs {spec.m} values, got {len(self.constraint_degrees)}")
        for d in (self.degrees or []) + (self.constraint_degrees or []):
            if d < 1:
                raise ValueError("approximation degrees must be at least 1")
        if self.order is None:
            return
        jobs = []
        if spec.U is not None:
            ds = self.degrees or [max(1, f.block_degree("x")) for f in spec.objectives]
            jobs += [(f, spec.U, d) for f, d in zip(spec.objectives, ds) if f.depends_on("u")]
        if spec.V is not None:
            es = self.constraint_degrees or [max(1, g.block_degree("x")) for g in spec.constraints]
            jobs += [(g, spec.V, e) for g, e in zip(spec.constraints, es) if g.depends_on("v")]
        for poly, S, d in jobs:
            K = spec.X.product(S)
            lo = jm.min_order(poly.embed(K.variables), K, d)
            if self.order < lo:
                raise ValueError(f"--orders {self.order} is below the minimum relaxation order {lo}")


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _powers(text: str) -> list[float]:
    out = []
    for v in text.split(","):
        v = v.strip().lower()
        if v in ("inf", "chebyshev"):
            out.append(CHEBYSHEV)
        elif v:
            p = int(v)
            if p < 1:
                raise argparse.ArgumentTypeError("powers must be >= 1")
            out.append(p)
    return out


def _grid(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected a:b:step")
    return tuple(float(v) for v in parts)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="robust-vpo",
        description="Approximate the robust Pareto front of a polynomial vector optimization problem.",
        epilog=f"Environment variables {ENV_PREFIX}<FLAG> (e.g. {ENV_PREFIX}SEED) supply defaults for every flag.",
    )
    ap.add_argument("--problem", required=True,
                    help="problem file, or the name of a bundled example (example1, example2)")
    ap.add_argument("--out", type=Path, default=Path("rvpo_out"), help="output directory")
    ap.add_argument("--degrees", type=_ints, help="approximation degree per objective, comma separated")
    ap.add_argument("--constraint-degrees", type=_ints, help="approximation degree per constraint")
    ap.add_argument("--orders", type=int, dest="order", help="relaxation order of the approximations")
    ap.add_argument("--lambda-grid", type=_grid, help="first-weight grid a:b:step (two objectives)")
    ap.add_argument("--p-list", type=_powers, default=[1, 2, 3, 4], help="powers, e.g. 1,2,4 or inf")
    ap.add_argument("--eps", type=float, help="utopia margin (default 0.05*(1+|bound|))")
    ap.add_argument("--seed", type=int, default=EXTRACTION_SEED)
    ap.add_argument("--tol", type=float, default=sdp.DEFAULT_TOL, help="SDP stopping tolerance")
    ap.add_argument("--export-sdpa", type=Path, help="write every SDP solved to this directory")
    ap.add_argument("--workers", type=int, default=1, help="processes for the sweep")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def parse_args(argv: Sequence[str] | None = None, environ=None) -> tuple[RunConfig, int]:
    ap = build_parser()
    environ = os.environ if environ is None else environ
    argv = list(sys.argv[1:] if argv is None else argv)
    env = []
    for action in ap._actions:
        flag = next((o for o in action.option_strings if o.startswith("--")), None)
        if flag in (None, "--help", "--verbose"):
            continue
        key = ENV_PREFIX + flag[2:].upper().replace("-", "_")
        if key in environ:
            env += [f"{flag}={environ[key]}"]
    ns = ap.parse_args(env + argv)
    problem = Path(ns.problem)
    if not problem.exists() and not problem.suffix:
        try:
            problem = bundled(ns.problem)
        except FileNotFoundError:
            pass
    cfg = RunConfig(problem, ns.out, ns.degrees, ns.constraint_degrees, ns.order, ns.lambda_grid,
                    ns.p_list, ns.eps, ns.seed, ns.tol, ns.export_sdpa, ns.workers)
    return cfg, ns.verbose


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _num(v: float) -> str:
    return "%.12g" % v


def csv_header(l: int, n: int) -> list[str]:
    return ([f"lambda_{i + 1}" for i in range(l)] + ["p"] + [f"x_{k + 1}" for k in range(n)]
            + [f"Fapprox_{i + 1}" for i in range(l)] + [f"Frobust_{i + 1}" for i in range(l)] + ["certified"])


def csv_row(r: ParetoRecord) -> list[str]:
    nums = list(r.lam) + [r.p] + list(r.x_star) + list(r.approx_values) + list(r.robust_values)
    return [_num(v) for v in nums] + ["true" if r.certified else "false"]


def emit(records: Sequence[ParetoRecord], out: Path, l: int, n: int, meta: dict | None = None) -> dict[str, Path]:
    """Write ``results.csv``, ``results.json`` and, for two objectives, ``front.dat``.

    ``front.dat`` holds the certified robust value pairs, one per line.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "results.csv", "json": out / "results.json"}
    with open(paths["csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(l, n))
        for r in records:
            w.writerow(csv_row(r))
    doc = dict(meta or {})
    doc["records"] = [
        {
            "lambda": list(r.lam),
            "p": "inf" if r.p == CHEBYSHEV else r.p,
            "x": r.x_star.tolist(),
            "Fapprox": r.approx_values.tolist(),
            "Frobust": [None if not math.isfinite(v) else v for v in r.robust_values.tolist()],
            "certified": r.certified,
            "scalar_value": r.scalar_value,
        }
        for r in records
    ]
    paths["json"].write_text(json.dumps(doc, indent=2))
    if l == 2:
        paths["plot"] = out / "front.dat"
        with open(paths["plot"], "w") as fh:
            for r in records:
                if r.certified:
                    fh.write(f"{_num(r.robust_values[0])} {_num(r.robust_values[1])}\n")
    return paths


def _meta(result: SweepResult) -> dict:
    return {
        "utopia": {k: np.asarray(v).tolist() for k, v in asdict(result.utopia).items()},
        "upper": [{"poly": a.poly.to_string(), "d": a.d, "order": a.order, "integral": a.integral}
                  for a in result.upper],
        "lower": [{"poly": a.poly.to_string(), "d": a.d, "order": a.order, "integral": a.integral}
                  for a in result.lower],
        "failures": [{"lambda": list(f.lam), "p": "inf" if f.p == CHEBYSHEV else f.p, "reason": f.reason}
                     for f in result.failures],
    }


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------


def _sdpa_sink(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)

    def sink(name, P):
        (directory / f"{name}.dat-s").write_text(sdp.export_sdpa(P))

    return sink


def run(cfg: RunConfig, spec: ProblemSpec, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    cfg.check(spec)
    print("User obligations (not verified by this tool):", file=stream)
    for line in OBLIGATIONS:
        print(f"  - {line}", file=stream)
    if cfg.lambda_grid is not None:
        if spec.l != 2:
            raise ValueError("--lambda-grid applies to two objectives only")
        grid = lambda_range(*cfg.lambda_grid)
    else:
        grid = default_lambda_grid(spec.l)
    sink = _sdpa_sink(cfg.export_sdpa) if cfg.export_sdpa is not None else None
    t0 = time.perf_counter()
    result = sweep(spec, grid, cfg.p_list, cfg.degrees, cfg.constraint_degrees, cfg.order, cfg.eps,
                   cfg.seed, cfg.tol, cfg.workers, sink)
    elapsed = time.perf_counter() - t0
    paths = emit(result.records, cfg.out, spec.l, spec.n, _meta(result))
    ncert = len(result.certified)
    print(f"{len(result.records)} records ({ncert} certified), {len(result.failures)} failed cells, "
          f"{elapsed:.1f} s; utopia point {np.array2string(result.utopia.y_U, precision=6)}", file=stream)
    for f in result.failures:
        log.warning("cell lambda=%s p=%s failed: %s", f.lam, f.p, f.reason)
    print("wrote " + ", ".join(str(p) for p in paths.values()), file=stream)
    if ncert == 0:
        if result.failures and all(f.reason.startswith("empty feasible set") for f in result.failures):
            print("error: the approximated feasible set is empty", file=sys.stderr)
        else:
            print("error: no certified record", file=sys.stderr)
        return EXIT_NONE_CERTIFIED
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg, verbose = parse_args(argv)
    except SystemExit as exc:
        return EXIT_FATAL if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = parse_problem(cfg.problem)
        return run(cfg, spec)
    except (OSError, ProblemFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except Exception as exc:  # noqa: BLE001 - last-resort report for the exit code contract
        log.exception("fatal")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
