"""Acceptance criteria 1-10, each reported as one PASS/FAIL line in the summary.

Tolerances below are the contract values; nothing is loosened to make a
criterion pass.
"""
import time

import numpy as np
import pytest

from robust_vpo import jm, lasserre, sdp
from robust_vpo.jm import Direction
from robust_vpo.moment import AtomicMeasure, extract_atoms, flat_truncation, synthesize
from robust_vpo.poly import Variables, num_monomials, parse_polynomial
from robust_vpo.semialg import ball_set, box_set, general_set, sample_uniform

from conftest import report
from oracles import generic_atoms, dominated_by_margin, ex1_grid, ex1_robust, ex2_grid, nondominated, sup_distance
from test_sdp import diag_problem, gram_problem, random_problem, two_by_two

V2 = Variables.from_blocks(x=["x1", "x2"])
G_TARGET = {(2, 0): -0.9877, (0, 2): -0.9875, (0, 0): 0.9764}
F2_EXACT = "-x1^4 - 2*x1^2*x2^2 - x2^4 + x1^2"


def exact_F2(x):
    x1, x2 = x[:, 0], x[:, 1]
    return -x1**4 - 2 * x1**2 * x2**2 - x2**4 + x1**2


def disk_grid(radius, size):
    g = np.linspace(-radius, radius, size)
    X1, X2 = np.meshgrid(g, g)
    inside = X1**2 + X2**2 <= radius**2
    return np.column_stack([X1[inside], X2[inside]])


@pytest.fixture(scope="module")
def c1(example1):
    t0 = time.perf_counter()
    a = jm.upper_value_approx(example1.objectives[0], example1.X, example1.U, 2)
    return a, time.perf_counter() - t0


@pytest.fixture(scope="module")
def c2(example1):
    return jm.lower_value_approx(example1.constraints[0], example1.X, example1.V, 2)


@pytest.fixture(scope="module")
def c10(example1):
    """Upper approximations of both worst-case objectives over a range of d and order."""
    f1, f2 = example1.objectives
    X, U = example1.X, example1.U
    K = X.product(U)
    lo = jm.min_order(f1.embed(K.variables), K, 2)
    return {
        "F1_d": [jm.upper_value_approx(f1, X, U, d) for d in (1, 2, 3)],
        "F2_d": [jm.upper_value_approx(f2, X, U, d) for d in (2, 3, 4)],
        "F1_order": [jm.upper_value_approx(f1, X, U, 2, order=t) for t in (lo, lo + 1, lo + 2)],
    }


def test_criterion_01_f1_recovery(c1):
    a, elapsed = c1
    want = {(2, 0): 1.0, (0, 2): 1.0}
    worst = max(abs(c - want.get(m, 0.0)) for m, c in a.coefficients.items())
    worst = max([worst] + [abs(v - a.coefficients.get(m, 0.0)) for m, v in want.items()])
    ok = worst <= 1e-2 and a.order <= 7 and elapsed < 60
    report(1, ok, f"max coefficient error {worst:.2e} (tol 1e-2), order {a.order}, {elapsed:.1f} s")
    assert ok


def test_criterion_02_g_recovery(c2, example1):
    pts = disk_grid(np.sqrt(2), 100)
    gap = float(np.max(c2.poly.eval(pts) - (1 - pts[:, 0] ** 2 - pts[:, 1] ** 2)))
    coef_err = max(abs(c2.coefficients.get(m, 0.0) - v) for m, v in G_TARGET.items())
    others = max((abs(c) for m, c in c2.coefficients.items() if m not in G_TARGET), default=0.0)
    got = ", ".join(f"{c2.coefficients.get(m, 0.0):+.4f}" for m in G_TARGET)
    ok = gap <= 1e-6 and coef_err <= 0.05
    report(2, ok, f"grid check max excess {gap:.2e} (tol 1e-6); coefficients ({got}) vs "
                  f"(-0.9877, -0.9875, +0.9764): error {coef_err:.3f} (tol 0.05); other terms {others:.1e}")
    assert ok


def test_criterion_03_example1_front(sweep1):
    res, elapsed = sweep1
    front = nondominated(ex1_grid(400))
    cert = res.certified
    dists = [sup_distance(r.robust_values, front) for r in cert]
    worst = max(dists, default=np.inf)
    ok = len(cert) >= 20 and worst <= 0.05 and elapsed < 1800
    report(3, ok, f"{len(cert)} certified records (need 20), worst sup distance {worst:.2e} (tol 0.05), "
                  f"{elapsed:.0f} s")
    assert ok


def test_criterion_04_example2_front(sweep2):
    front = nondominated(ex2_grid(400))
    cert = sweep2.certified
    bad = [r for r in cert if dominated_by_margin(r.robust_values, front, 0.02)]
    ok = bool(cert) and not bad
    report(4, ok, f"{len(cert)} certified records, {len(bad)} dominated by more than 0.02")
    assert ok


def test_criterion_05_lasserre_suite():
    V1 = Variables.from_blocks(x=["x"])
    r1 = lasserre.minimize(parse_polynomial("x^2", V1), box_set(V1, [-1], [1]))
    ok1 = r1.certified and abs(r1.bound) <= 1e-7 and np.allclose(r1.minimizers.points, [[0]], atol=1e-6)

    box = box_set(V2, [0, 0], [1, 1])
    K = general_set(V2, list(box.inequalities) + [parse_polynomial("x1 + x2 - 1", V2)], np.sqrt(2))
    r2 = lasserre.minimize(parse_polynomial("x1^2 + x2^2", V2), K)
    ok2 = (r2.certified and abs(r2.bound - 0.5) <= 1e-6
           and np.allclose(r2.minimizers.points, [[0.5, 0.5]], atol=1e-4))

    r3 = lasserre.minimize(parse_polynomial(F2_EXACT, V2), ball_set(V2, [0, 0], 1.0))
    pts = np.array(sorted(map(tuple, r3.minimizers.points), key=lambda p: p[1])) if r3.certified else None
    ok3 = (r3.certified and abs(r3.bound + 1) <= 1e-5 and pts.shape == (2, 2)
           and np.allclose(pts, [[0, -1], [0, 1]], atol=1e-3))
    ok = ok1 and ok2 and ok3
    report(5, ok, f"bounds {r1.bound:.1e} / {r2.bound:.8f} / {r3.bound:.8f}; "
                  f"cases {'ok' if ok1 else 'FAIL'}, {'ok' if ok2 else 'FAIL'}, {'ok' if ok3 else 'FAIL'}")
    assert ok


def _expected_t(n, r):
    # generic points: rank M_k = min(s(k), r)
    t = 1
    while num_monomials(n, t - 1) < r:
        t += 1
    return t


def test_criterion_06_extraction():
    rng = np.random.default_rng(2024)
    cases = []
    for n in (1, 2):
        for r in (2, 3):
            for _ in range(10):
                while True:
                    pts = rng.uniform(-1, 1, size=(r, n))
                    if generic_atoms(pts, _expected_t(n, r) - 1):
                        break
                w = rng.uniform(0.2, 1.0, size=r)
                cases.append((pts, w / w.sum()))
    pos_err = w_err = 0.0
    wrong_tr = 0
    for pts, w in cases:
        n, r = pts.shape[1], len(w)
        y = synthesize(AtomicMeasure(pts, w), 2 * (_expected_t(n, r) + 1))
        tr = flat_truncation(y, 1)
        if tr != (_expected_t(n, r), r):
            wrong_tr += 1
            continue
        m = extract_atoms(y, *tr)
        for p, wk in zip(pts, w):
            d = np.linalg.norm(m.points - p, axis=1)
            j = int(np.argmin(d))
            pos_err = max(pos_err, d[j])
            w_err = max(w_err, abs(m.weights[j] - wk))
    ok = wrong_tr == 0 and pos_err <= 1e-6 and w_err <= 1e-6
    report(6, ok, f"{len(cases)} two/three-atom measures: position error {pos_err:.1e}, weight error "
                  f"{w_err:.1e} (tol 1e-6), wrong (t, r) on {wrong_tr}")
    assert ok


def _dominance_cases(example1, example2, sweep1, sweep2, c1, c2, c10):
    s1, _ = sweep1
    cases = []
    for spec, res in ((example1, s1), (example2, sweep2)):
        cases += [(a, f, spec.X, spec.U) for a, f in zip(res.upper, spec.objectives)]
        cases += [(a, g, spec.X, spec.V) for a, g in zip(res.lower, spec.constraints)]
    f1, f2 = example1.objectives
    cases.append((c1[0], f1, example1.X, example1.U))
    cases.append((c2, example1.constraints[0], example1.X, example1.V))
    cases += [(a, f1, example1.X, example1.U) for a in c10["F1_d"] + c10["F1_order"]]
    cases += [(a, f2, example1.X, example1.U) for a in c10["F2_d"]]
    return cases


def test_criterion_07_bound_dominance(example1, example2, sweep1, sweep2, c1, c2, c10):
    cases = _dominance_cases(example1, example2, sweep1, sweep2, c1, c2, c10)
    worst = -np.inf
    for k, (a, f, X, W) in enumerate(cases):
        rng = np.random.default_rng(1000 + k)
        xs = sample_uniform(X, 100, rng)
        z = xs if W is None else np.hstack([xs, sample_uniform(W, 100, rng)])
        fz = f.eval(z)
        p = a.poly.eval(xs)
        viol = (fz - p) if a.direction is Direction.UPPER else (p - fz)
        worst = max(worst, float(viol.max()))
    ok = worst <= 1e-6
    report(7, ok, f"{len(cases)} approximations x 100 samples, worst violation {worst:.2e} (tol 1e-6)")
    assert ok


def test_criterion_08_utopia(sweep1, sweep2):
    s1, _ = sweep1
    yi1 = ex1_grid(400).min(axis=0)
    yi2 = ex2_grid(400).min(axis=0)
    ok = bool(np.all(s1.utopia.y_U < yi1) and np.all(sweep2.utopia.y_U < yi2))
    report(8, ok, f"example 1: y_U {np.round(s1.utopia.y_U, 4)} < grid ideal {np.round(yi1, 4)}; "
                  f"example 2: y_U {np.round(sweep2.utopia.y_U, 4)} < grid ideal {np.round(yi2, 4)}")
    assert ok


def test_criterion_09_sdp_suite():
    errs = [
        abs(sdp.solve(two_by_two()).primal_objective - 1.0),
        abs(sdp.solve(diag_problem()).primal_objective - 2.0),
    ]
    s = sdp.solve(gram_problem())
    errs.append(float(np.max(np.abs(s.y[[0, 1, 1, 2]].reshape(2, 2) - [[1, -1], [-1, 1]]))))
    round_trip = all(
        sdp.import_sdpa(sdp.export_sdpa(P)).structurally_equal(P)
        for P in (two_by_two(), diag_problem(), gram_problem(), random_problem())
    )
    ok = max(errs) <= 1e-7 and round_trip
    report(9, ok, f"objective/Gram errors {', '.join(f'{e:.1e}' for e in errs)} (tol 1e-7); "
                  f"SDPA round trip {'exact' if round_trip else 'BROKEN'}")
    assert ok


def _l1_trend(approxes, exact, pts):
    """Worst increase of the mean L1 error between consecutive d, minus 3 sigma."""
    errs = [np.abs(a.poly.eval(pts) - exact) for a in approxes]
    worst = -np.inf
    for e0, e1 in zip(errs, errs[1:]):
        diff = e1 - e0
        worst = max(worst, diff.mean() - 3 * diff.std() / np.sqrt(len(diff)))
    return worst, [float(e.mean()) for e in errs]


def test_criterion_10_monotonicity(example1, c10):
    instances = [
        (parse_polynomial(F2_EXACT, V2), ball_set(V2, [0, 0], 1.0)),
        (parse_polynomial("x1^4*x2^2 + x1^2*x2^4 - 3*x1^2*x2^2 + 0.5*x1", V2), box_set(V2, [-1, -1], [1, 1])),
        (parse_polynomial("x1^2 + x2^2", V2),
         general_set(V2, [parse_polynomial("x1 + x2 - 1", V2), parse_polynomial("1 - x1^2", V2),
                          parse_polynomial("1 - x2^2", V2)], np.sqrt(2))),
    ]
    las_drop = -np.inf
    for f, K in instances:
        t0 = lasserre.min_order(f, K)
        bounds = [sdp.solve(lasserre.relax(f, K, t)).primal_objective for t in range(t0, t0 + 3)]
        las_drop = max(las_drop, max(b0 - b1 for b0, b1 in zip(bounds, bounds[1:])))

    def rise(seq):
        return max(b.integral - a.integral for a, b in zip(seq, seq[1:]))

    jm_rise = max(rise(c10["F1_d"]), rise(c10["F2_d"]), rise(c10["F1_order"]))

    pts = sample_uniform(example1.X, 100_000, np.random.default_rng(7))
    F1 = ex1_robust(pts[:, 0], pts[:, 1], nu=2)[0]
    mc1, l1_f1 = _l1_trend(c10["F1_d"], F1, pts)
    mc2, l1_f2 = _l1_trend(c10["F2_d"], exact_F2(pts), pts)
    mc = max(mc1, mc2)
    ok = las_drop <= 1e-7 and jm_rise <= 1e-7 and mc <= 0
    report(10, ok, f"lasserre max drop {las_drop:.1e}, jm max rise {jm_rise:.1e} (tol 1e-7); "
                   f"L1 errors F1 d=1..3 {np.round(l1_f1, 4).tolist()}, F2 d=2..4 {np.round(l1_f2, 4).tolist()} "
                   f"(example 2 objectives carry no uncertainty, so their approximations are exact)")
    assert ok
