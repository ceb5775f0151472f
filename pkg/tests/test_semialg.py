import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_vpo.moment import TruncatedMomentSequence, moment_matrix
from robust_vpo.poly import Polynomial, Variables, basis, basis_index
from robust_vpo.semialg import (
    ball_set,
    box_set,
    general_set,
    normalize,
    sample_uniform,
    uniform_ball_moments,
    uniform_box_moments,
    uniform_moments,
)

import oracles

X2 = Variables.from_blocks(x=["x1", "x2"])
X1 = Variables.from_blocks(x=["x"])


def test_membership_examples():
    assert box_set(X2, [0, 0], [1, 1]).membership([0.5, 0.5], 1e-9)
    assert not ball_set(X2, [0, 0], np.sqrt(2)).membership([2.0, 0.0])
    assert box_set(X2, [0, 0], [1, 1]).membership([1.0, 1.0], 0.0)


def test_membership_dimension_mismatch():
    with pytest.raises(ValueError):
        box_set(X2, [0, 0], [1, 1]).membership([0.5])


def test_invalid_shapes():
    with pytest.raises(ValueError):
        box_set(X2, [0, 1], [1, 0])
    with pytest.raises(ValueError):
        ball_set(X2, [0, 0], 0.0)
    with pytest.raises(ValueError):
        general_set(X2, [], 0.0)


def test_general_set_has_witness():
    x1 = Polynomial.variable(X2, "x1")
    S = general_set(X2, [x1], 3.0)
    assert S.archimedean_witness in S.inequalities
    assert S.is_archimedean
    assert S.membership([1.0, 0.0]) and not S.membership([-1.0, 0.0])


def test_box_moment_examples():
    g = uniform_box_moments([0, 0], [1, 1], 4)
    idx = basis_index(2, 4)
    assert g[0] == 1
    assert g[idx[(1, 0)]] == pytest.approx(0.5)
    assert g[idx[(2, 2)]] == pytest.approx(1 / 9)
    assert uniform_box_moments([-1], [1], 1)[1] == pytest.approx(0.0)


def test_zero_width_box_is_a_point_mass():
    g = uniform_box_moments([0.5, 0.0], [0.5, 2.0], 2)
    idx = basis_index(2, 2)
    assert g[idx[(1, 0)]] == pytest.approx(0.5)
    assert g[idx[(2, 0)]] == pytest.approx(0.25)
    assert g[idx[(0, 2)]] == pytest.approx(4 / 3)


def test_ball_moment_examples():
    g = uniform_ball_moments([0, 0], np.sqrt(2), 4)
    idx = basis_index(2, 4)
    assert g[idx[(2, 0)]] == pytest.approx(0.5)
    assert g[idx[(1, 0)]] == 0.0
    assert uniform_ball_moments([0, 0], 1.0, 4)[idx[(2, 2)]] == pytest.approx(oracles.BALL_R1_X2Y2)


def test_shifted_ball_moments():
    g = uniform_ball_moments([1.0, -2.0], 0.5, 2)
    idx = basis_index(2, 2)
    assert g[idx[(1, 0)]] == pytest.approx(1.0)
    assert g[idx[(0, 2)]] == pytest.approx(4.0 + 0.25 / 4)


@pytest.mark.parametrize("S", [
    box_set(X2, [-1, 0], [2, 0.5]),
    ball_set(X2, [0.3, -0.2], 1.3),
    ball_set(Variables.from_blocks(x=["a", "b", "c"]), [0, 0, 0], 1.0),
])
def test_moments_agree_with_monte_carlo(S):
    rng = np.random.default_rng(7)
    pts = sample_uniform(S, 1_000_000, rng)
    gamma = uniform_moments(S, 8)
    powers = pts[:, :, None] ** np.arange(9)
    for k, alpha in enumerate(basis(S.dim, 8)):
        vals = np.prod([powers[:, i, a] for i, a in enumerate(alpha)], axis=0)
        sigma = vals.std() / np.sqrt(len(vals))
        assert abs(vals.mean() - gamma[k]) <= 3 * sigma + 1e-12, alpha


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2), st.floats(0.1, 3), st.integers(1, 4))
def test_moment_vectors_are_psd(center, width, t):
    for gamma in (uniform_box_moments(center, np.array(center) + width, 2 * t),
                  uniform_ball_moments(center, width, 2 * t)):
        assert gamma[0] == pytest.approx(1.0)
        M = moment_matrix(TruncatedMomentSequence(2, 2 * t, gamma), t)
        assert np.linalg.eigvalsh(M).min() >= -1e-10 * max(1.0, np.trace(M))


def test_product_and_embed():
    U = box_set(Variables.from_blocks(u=["u"]), [0], [1])
    X = ball_set(X2, [0, 0], np.sqrt(2))
    K = X.product(U)
    assert K.variables.names == ("x1", "x2", "u")
    assert len(K.inequalities) == 2
    assert K.is_archimedean
    assert K.membership([1.0, 0.0, 0.5]) and not K.membership([1.0, 0.0, 1.5])


def test_normalize_maps_into_unit_box():
    for S in (box_set(X2, [1, 1], [np.sqrt(2)] * 2), ball_set(X2, [1, 2], 3.0)):
        offset, scale, Sn = normalize(S)
        lo, hi = Sn.bounding_box()
        assert np.allclose(lo, -1) and np.allclose(hi, 1)
        rng = np.random.default_rng(0)
        w = sample_uniform(Sn, 200, rng)
        assert S.contains(offset + scale * w, 1e-12).all()
