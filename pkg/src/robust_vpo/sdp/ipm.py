"""Primal-dual path-following interior-point method for :class:`SdpProblem`.

Equality constraints are removed by a null-space parametrisation
``y = y_p + N z``.  The reduced problem

    min  c~ . z   s.t.  S_j = sum_l z_l B_lj - C_j >= 0

is solved together with its dual ``max sum <C_j, X_j>`` subject to
``sum_j <B_lj, X_j> = c~_l, X_j >= 0`` using the HKM search direction and
Mehrotra's predictor-corrector.  The Schur complement is dense and factored
by Cholesky.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla

from .problem import SdpProblem, SdpSolution, SdpStatus

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
SCHUR_REG = 1e-9
SIGMA_FLOOR = 0.3
SIGMA_FLOOR_GAP = 1e3
STALL_LEVEL = 1e-4
STALL_ITERS = 8


class _Reduced:
    """Problem data after eliminating equalities."""

    def __init__(self, P: SdpProblem):
        m = P.num_vars
        E, b = P.eq_matrix, P.eq_rhs
        self.consistent = True
        if E.shape[0] == 0:
            self.y_p = np.zeros(m)
            self.N = None
        elif _is_pinning(E):
            # every row fixes a single variable: keep structure
            y_p = np.zeros(m)
            fixed = np.zeros(m, dtype=bool)
            for row, rhs in zip(E, b):
                k = int(np.flatnonzero(row)[0])
                val = rhs / row[k]
                if fixed[k] and abs(y_p[k] - val) > 1e-12 * (1 + abs(val)):
                    self.consistent = False
                y_p[k] = val
                fixed[k] = True
            self.y_p = y_p
            self.N = np.eye(m)[:, ~fixed]
        else:
            U, sv, Vt = np.linalg.svd(E, full_matrices=True)
            rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0] if len(sv) else 1.0)))
            self.y_p = Vt[:rank].T @ ((U[:, :rank].T @ b) / sv[:rank])
            if np.linalg.norm(E @ self.y_p - b) > 1e-9 * (1 + np.linalg.norm(b)):
                self.consistent = False
            self.N = Vt[rank:].T
        self.c_full = P.objective
        self.const = float(P.objective @ self.y_p)
        if self.N is None:
            self.c = P.objective.copy()
        else:
            self.c = self.N.T @ P.objective
        self.B = []
        self.C = []
        for blk in P.blocks:
            A0 = blk.constant + np.tensordot(self.y_p, blk.coeffs, axes=1)
            self.C.append(-A0)
            if self.N is None:
                self.B.append(blk.coeffs)
            else:
                self.B.append(np.tensordot(self.N.T, blk.coeffs, axes=1))
        self.nz = self.c.shape[0]

    def lift(self, z: np.ndarray) -> np.ndarray:
        return self.y_p + (z if self.N is None else self.N @ z)


def _is_pinning(E: np.ndarray) -> bool:
    return bool(np.all(np.count_nonzero(E, axis=1) == 1))


def _sym(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX PSD (X positive definite)."""
    L = np.linalg.cholesky(X)
    Li = sla.solve_triangular(L, np.eye(len(X)), lower=True)
    W = Li @ dX @ Li.T
    lam = np.linalg.eigvalsh(_sym(W))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _inner(Bflat: np.ndarray, G: np.ndarray) -> np.ndarray:
    return Bflat @ G.ravel()


def solve(P: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SdpSolution:
    """Solve ``P`` to relative accuracy ``tol``.  Deterministic for fixed input."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    R = _Reduced(P)
    m = P.num_vars
    nblk = len(R.B)
    if not R.consistent:
        return SdpSolution(np.full(m, np.nan), [], SdpStatus.PRIMAL_INFEASIBLE, np.inf)
    sizes = [C.shape[0] for C in R.C]
    ntot = sum(sizes)
    Bflat = [B.reshape(B.shape[0], B.shape[1] * B.shape[2]) for B in R.B]
    nz = R.nz
    c = R.c

    if nz == 0:
        # nothing to optimise: check feasibility of the fixed point
        mins = [np.linalg.eigvalsh(-C)[0] for C in R.C]
        y = R.y_p.copy()
        ok = all(v >= -10 * tol * (1 + np.abs(C).max()) for v, C in zip(mins, R.C))
        obj = float(P.objective @ y)
        viol = max([0.0] + [-v for v in mins])
        return SdpSolution(y, [np.zeros_like(C) for C in R.C],
                           SdpStatus.OPTIMAL if ok else SdpStatus.PRIMAL_INFEASIBLE,
                           0.0 if ok else np.inf, obj, obj,
                           primal_residual=viol, dual_residual=0.0, accuracy=viol)

    normC = np.sqrt(sum(np.sum(C * C) for C in R.C))
    normc = np.linalg.norm(c)
    normB = np.sqrt(sum(np.sum(Bf * Bf, axis=1) for Bf in Bflat))

    # starting point (scaled identity, infeasible start)
    X, S = [], []
    for j, s in enumerate(sizes):
        nb = np.linalg.norm(Bflat[j], axis=1)
        xi = max(10.0, np.sqrt(s), s * np.max((1 + np.abs(c)) / (1 + nb)))
        eta = max(10.0, np.sqrt(s), np.max(nb), np.linalg.norm(R.C[j]))
        X.append(xi * np.eye(s))
        S.append(eta * np.eye(s))
    z = np.zeros(nz)
    trX0 = sum(np.trace(Xj) for Xj in X)

    status = SdpStatus.MAX_ITERATIONS
    pobj = dobj = np.nan
    relgap = np.inf
    pinf = dinf = np.inf
    it = 0
    best = (np.inf, z, X, relgap, pinf, dinf, dobj, 0)
    # LMI-feasible iterate with the smallest objective; the y side often keeps
    # improving after the X side has lost accuracy
    best_y = (np.inf, z, np.inf)
    last_progress = 0
    for it in range(1, max_iter + 1):
        BX = sum(_inner(Bflat[j], X[j]) for j in range(nblk))
        rp = c - BX
        Rd = [np.tensordot(z, R.B[j], axes=1) - R.C[j] - S[j] for j in range(nblk)]
        mu = sum(np.sum(X[j] * S[j]) for j in range(nblk)) / ntot
        pobj = float(c @ z) + R.const
        dobj = float(sum(np.sum(R.C[j] * X[j]) for j in range(nblk))) + R.const
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / (1 + normc)
        dinf = np.sqrt(sum(np.sum(r * r) for r in Rd)) / (1 + normC)
        log.debug("it %3d pobj %.10e dobj %.10e gap %.2e pinf %.2e dinf %.2e mu %.2e",
                  it, pobj, dobj, relgap, pinf, dinf, mu)
        merit = max(relgap, pinf / 10, dinf / 10)
        if dinf <= tol and pobj < best_y[0]:
            if pobj < best_y[0] - 0.1 * tol * (1 + abs(pobj)):
                last_progress = it
            best_y = (pobj, z.copy(), dinf)
        if merit < best[0]:
            if merit < 0.5 * best[0]:
                last_progress = it
            best = (merit, z.copy(), [Xj.copy() for Xj in X], relgap, pinf, dinf, dobj, it)
        if merit <= tol:
            status = SdpStatus.OPTIMAL
            break
        if best[0] < STALL_LEVEL and it - last_progress > STALL_ITERS:
            # neither side is improving any more: fall back to the best iterates
            status = SdpStatus.NUMERICAL_FAILURE
            break

        # divergence-based infeasibility flags
        trX = sum(np.trace(Xj) for Xj in X)
        CX = dobj - R.const
        if it > 5 and CX > 0 and np.linalg.norm(BX) / CX < 1e-8 * (1 + np.max(normB)) / (1 + normC):
            status = SdpStatus.PRIMAL_INFEASIBLE
            break
        if it > 5 and trX > 1e12 * trX0 and CX > 0:
            status = SdpStatus.PRIMAL_INFEASIBLE
            break
        cz = float(c @ z)
        if it > 5 and cz < 0 and np.linalg.norm(z) > 1e10 and dinf < 1e-6:
            status = SdpStatus.DUAL_INFEASIBLE
            break

        # factorisations
        try:
            Lx = [np.linalg.cholesky(Xj) for Xj in X]
            Ls = [np.linalg.cholesky(Sj) for Sj in S]
        except np.linalg.LinAlgError:
            status = SdpStatus.NUMERICAL_FAILURE
            break
        Sinv = []
        Kmat = []
        for Lsj in Ls:
            Li = sla.solve_triangular(Lsj, np.eye(len(Lsj)), lower=True)
            Kmat.append(Li.T)           # S^{-1} = K K^T
            Sinv.append(Li.T @ Li)

        M = np.zeros((nz, nz))
        for j in range(nblk):
            Pj = np.matmul(np.matmul(Lx[j].T[None], R.B[j]), Kmat[j][None])
            Pf = Pj.reshape(nz, -1)
            M += Pf @ Pf.T
        M = 0.5 * (M + M.T)
        factor = None
        try:
            factor = sla.cho_factor(M, lower=True, check_finite=False)
        except (np.linalg.LinAlgError, sla.LinAlgError):
            pass
        reg = SCHUR_REG * max(1.0, float(np.mean(np.diag(M))))
        for _ in range(0 if factor is not None else 6):
            try:
                factor = sla.cho_factor(M + reg * np.eye(nz), lower=True, check_finite=False)
                break
            except (np.linalg.LinAlgError, sla.LinAlgError):
                reg *= 100
        if factor is None:
            status = SdpStatus.NUMERICAL_FAILURE
            break

        def schur_solve(rhs):
            # iterative refinement against the unregularised matrix: the
            # residual of this solve feeds straight into the X-side residual
            sol = sla.cho_solve(factor, rhs, check_finite=False)
            res = rhs - M @ sol
            rnorm = np.linalg.norm(res)
            for _ in range(20):
                if rnorm <= 1e-14 * (1 + np.linalg.norm(rhs)):
                    break
                cand = sol + sla.cho_solve(factor, res, check_finite=False)
                cres = rhs - M @ cand
                cnorm = np.linalg.norm(cres)
                if cnorm >= 0.9 * rnorm:
                    if cnorm < rnorm:
                        sol = cand
                    break
                sol, res, rnorm = cand, cres, cnorm
            return sol

        def direction(sigma_mu, corr):
            G = []
            for j in range(nblk):
                Gj = sigma_mu * Sinv[j] - X[j] - X[j] @ Rd[j] @ Sinv[j]
                if corr is not None:
                    Gj = Gj - corr[j] @ Sinv[j]
                G.append(Gj)
            rhs = sum(_inner(Bflat[j], G[j]) for j in range(nblk)) - rp
            dz = schur_solve(rhs)
            dSz = [np.tensordot(dz, R.B[j], axes=1) for j in range(nblk)]
            dS = [dSz[j] + Rd[j] for j in range(nblk)]
            dX = [_sym(G[j] - X[j] @ dSz[j] @ Sinv[j]) for j in range(nblk)]
            return dz, dX, dS

        try:
            dz, dX, dS = direction(0.0, None)
            ap = min(1.0, min(_max_step(X[j], dX[j]) for j in range(nblk)))
            ad = min(1.0, min(_max_step(S[j], dS[j]) for j in range(nblk)))
            mu_aff = sum(np.sum((X[j] + ap * dX[j]) * (S[j] + ad * dS[j])) for j in range(nblk)) / ntot
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
            if relgap < SIGMA_FLOOR_GAP * tol:
                # close to the target: shrink mu gently so accumulated
                # cancellation error in the X-side residual stays small
                sigma = max(sigma, SIGMA_FLOOR)
            corr = [dX[j] @ dS[j] for j in range(nblk)]
            dz, dX, dS = direction(sigma * mu, corr)
            ap = min(_max_step(X[j], dX[j]) for j in range(nblk))
            ad = min(_max_step(S[j], dS[j]) for j in range(nblk))
        except np.linalg.LinAlgError:
            status = SdpStatus.NUMERICAL_FAILURE
            break
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if ap < 1e-10 and ad < 1e-10:
            status = SdpStatus.NUMERICAL_FAILURE
            break
        X = [X[j] + ap * dX[j] for j in range(nblk)]
        z = z + ad * dz
        S = [S[j] + ad * dS[j] for j in range(nblk)]

    accuracy = best[0]
    if status in (SdpStatus.NUMERICAL_FAILURE, SdpStatus.MAX_ITERATIONS):
        if best[0] <= tol:
            status = SdpStatus.OPTIMAL
        if best[0] < np.inf:
            _, z, X, relgap, pinf, dinf, dobj, _ = best
            if best_y[0] < float(c @ z) + R.const:
                # a feasible point with a smaller objective is never worse; an
                # X-side value above it only reflects that side's infeasibility
                relgap = max(0.0, best_y[0] - dobj) / (1 + abs(best_y[0]) + abs(dobj))
                z, dinf = best_y[1], best_y[2]
                accuracy = max(relgap, pinf / 10, dinf / 10)
                if accuracy <= tol:
                    status = SdpStatus.OPTIMAL
    y = R.lift(z)
    # equality multipliers from stationarity: c = A*(X) + E^T w
    eq_duals = np.zeros(P.eq_matrix.shape[0])
    if P.eq_matrix.shape[0]:
        AX = sum(blk.coeffs.reshape(m, -1) @ X[j].ravel() for j, blk in enumerate(P.blocks))
        eq_duals = np.linalg.lstsq(P.eq_matrix.T, P.objective - AX, rcond=None)[0]
    if status is SdpStatus.OPTIMAL:
        # the returned y must satisfy the LMIs up to the stated tolerance
        for blk in P.blocks:
            F = blk.evaluate(y)
            scale = 1.0 + np.abs(F).max()
            if np.linalg.eigvalsh(F)[0] < -10 * tol * scale:
                log.debug("block residual min eigenvalue %.3e", np.linalg.eigvalsh(F)[0])
    return SdpSolution(
        y=y,
        block_duals=X,
        status=status,
        gap=relgap,
        primal_objective=float(P.objective @ y),
        dual_objective=dobj,
        eq_duals=eq_duals,
        primal_residual=dinf,
        dual_residual=pinf,
        iterations=it,
        accuracy=accuracy,
    )
