import numpy as np
import pytest

from robust_vpo.sdp import LmiBlock, SdpProblem, SdpStatus, export_sdpa, import_sdpa, solve


def two_by_two():
    # min y  s.t. [[y, 1], [1, y]] >= 0
    return SdpProblem([1.0], [LmiBlock([[0, 1], [1, 0]], [np.eye(2)])])


def diag_problem():
    # min y1 + y2  s.t. diag(y1 - 1, y2 - 1) >= 0
    return SdpProblem([1.0, 1.0], [LmiBlock(-np.eye(2), [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])])


def gram_problem():
    # Gram matrix of x^2 - 2x + 1 in the basis (1, x)
    A = np.zeros((3, 2, 2))
    A[0, 0, 0] = 1
    A[1, 0, 1] = A[1, 1, 0] = 1
    A[2, 1, 1] = 1
    return SdpProblem(np.zeros(3), [LmiBlock(np.zeros((2, 2)), A)], [[1, 0, 0], [0, 2, 0], [0, 0, 1]], [1, -2, 1])


def random_problem(seed=3):
    rng = np.random.default_rng(seed)
    blocks = []
    for size in (3, 2):
        C = rng.normal(size=(5, size, size))
        C = C + C.transpose(0, 2, 1)
        blocks.append(LmiBlock(np.eye(size) * 5, C))
    E = rng.normal(size=(2, 5))
    return SdpProblem(rng.normal(size=5), blocks, E, rng.normal(size=2))


def test_two_by_two():
    s = solve(two_by_two())
    assert s.status is SdpStatus.OPTIMAL
    assert s.primal_objective == pytest.approx(1.0, abs=1e-7)


def test_diagonal():
    s = solve(diag_problem())
    assert s.status is SdpStatus.OPTIMAL
    assert np.allclose(s.y, [1, 1], atol=1e-7)
    assert s.primal_objective == pytest.approx(2.0, abs=1e-7)


def test_gram_sos():
    s = solve(gram_problem())
    assert s.status is SdpStatus.OPTIMAL
    Q = s.y[[0, 1, 1, 2]].reshape(2, 2)
    assert np.allclose(Q, [[1, -1], [-1, 1]], atol=1e-7)


def test_optimal_status_contract():
    for P in (two_by_two(), diag_problem(), gram_problem()):
        s = solve(P, tol=1e-8)
        assert s.gap <= 1e-8
        assert s.primal_residual <= 1e-7 and s.dual_residual <= 1e-7
        assert s.primal_objective >= s.dual_objective - 1e-8 * (1 + abs(s.primal_objective))
        for blk in P.blocks:
            assert np.linalg.eigvalsh(blk.evaluate(s.y)).min() >= -1e-7


def test_deterministic():
    a, b = solve(random_problem()), solve(random_problem())
    assert np.array_equal(a.y, b.y)


def test_infeasible_and_unbounded_flagged():
    # y >= 1 and y <= 0
    P = SdpProblem([1.0], [LmiBlock([[-1.0]], [[[1.0]]]), LmiBlock([[0.0]], [[[-1.0]]])])
    assert solve(P).status is SdpStatus.PRIMAL_INFEASIBLE
    # min y with only y <= 0
    P = SdpProblem([1.0], [LmiBlock([[0.0]], [[[-1.0]]])])
    assert solve(P).status is SdpStatus.DUAL_INFEASIBLE


def test_block_permutation_invariance():
    P = random_problem()
    perm = np.array([2, 0, 1])
    b0 = P.blocks[0]
    permuted = LmiBlock(b0.constant[np.ix_(perm, perm)], b0.coeffs[:, perm][:, :, perm])
    Q = SdpProblem(P.objective, [permuted, P.blocks[1]], P.eq_matrix, P.eq_rhs)
    a, b = solve(P), solve(Q)
    assert a.status is b.status is SdpStatus.OPTIMAL
    assert a.primal_objective == pytest.approx(b.primal_objective, abs=1e-7 * (1 + abs(a.primal_objective)))


def test_sdpa_export_two_by_two():
    text = export_sdpa(two_by_two())
    body = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith(("*", '"'))]
    assert body[0].split()[0] == "1"      # mDIM
    assert body[1].split()[0] == "1"      # nBLOCK
    assert body[2].split()[0] == "2"      # block sizes
    entries = body[4:]
    assert len(entries) == 3
    assert all(int(e.split()[2]) <= int(e.split()[3]) for e in entries)


def test_sdpa_round_trip():
    for P in (two_by_two(), diag_problem(), gram_problem(), random_problem()):
        assert import_sdpa(export_sdpa(P)).structurally_equal(P)


def test_sdpa_round_trip_is_bit_exact():
    P = random_problem(11)
    Q = import_sdpa(export_sdpa(P))
    assert np.array_equal(P.objective, Q.objective)
    for a, b in zip(P.blocks, Q.blocks):
        assert np.array_equal(a.coeffs, b.coeffs) and np.array_equal(a.constant, b.constant)
