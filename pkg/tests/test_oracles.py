"""The frozen reference numbers still match their brute-force oracles."""
import numpy as np

import oracles


def test_example1_ideal_point():
    pts = oracles.ex1_grid(400)
    assert np.allclose(pts.min(axis=0), oracles.EX1_IDEAL, atol=5e-3)


def test_example1_corner_constraint_matches_fine_v_grid():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1.5, 1.5, size=(500, 2))
    coarse = oracles.ex1_constraint(x[:, 0], x[:, 1], nv=2)
    fine = oracles.ex1_constraint(x[:, 0], x[:, 1], nv=41)
    assert np.allclose(coarse, fine)


def test_example1_front_lies_on_parabola():
    front = oracles.nondominated(oracles.ex1_grid(400))
    assert np.max(np.abs(front[:, 1] + front[:, 0] ** 2)) < 1e-2
    assert front[:, 0].max() <= 0.5 + 1e-9


def test_example2_ideal_point():
    assert np.allclose(oracles.ex2_grid(400).min(axis=0), oracles.EX2_IDEAL, atol=1e-9)


def test_disk_moment_monte_carlo():
    rng = np.random.default_rng(1)
    n = 4_000_000
    r = np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0, 2 * np.pi, size=n)
    v = (r * np.cos(th)) ** 2 * (r * np.sin(th)) ** 2
    sigma = v.std() / np.sqrt(n)
    assert abs(v.mean() - oracles.BALL_R1_X2Y2) < 4 * sigma
