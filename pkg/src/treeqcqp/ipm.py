"""Primal-dual interior-point solver for real symmetric SDPs.

Solves
    minimize  <C, X>
    s.t.      <A_k, X> <= b_k   (inequality rows, slack s_k >= 0)
              <A_k, X>  = b_k   (equality rows)
              X >= 0 (PSD)

with Nesterov-Todd scaling and a Mehrotra-style predictor-corrector.  The
Schur complement M[p, q] = tr(A_p W A_q W) is assembled by the kernel backend
through the constraint supports, so sparse constraint sets stay cheap.  All
routines are deterministic for fixed input.

Dual convention: with multipliers lambda_k = -y_k >= 0 on inequality rows,
dual feasibility reads C + sum_k lambda_k A_k >= 0 and the dual objective is
-sum_k lambda_k b_k (equality rows carry free sign).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

DEFAULT_TOL_GAP = 1e-8
DEFAULT_TOL_FEAS = 1e-8
DEFAULT_MAX_ITERS = 200
_STEP_FRAC = 0.99
_MIN_SIGMA = 1e-8


@dataclass
class ConicResult:
    X: np.ndarray
    y: np.ndarray
    s: np.ndarray
    Z: np.ndarray
    status: str                      # optimal | infeasible | unbounded | max_iters | numerical_failure
    iterations: int
    pobj: float
    dobj: float
    residuals: dict = field(default_factory=dict)


def _supports(mats: np.ndarray, tol: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    sups, soff, blks, boff = [], [0], [], [0]
    for a in mats:
        nz = np.nonzero(np.abs(a).max(axis=0) > tol)[0]
        if len(nz) == 0:
            nz = np.array([0])
        sups.append(nz)
        soff.append(soff[-1] + len(nz))
        block = a[np.ix_(nz, nz)]
        blks.append(block.ravel())
        boff.append(boff[-1] + block.size)
    return (
        np.concatenate(sups).astype(np.int64),
        np.asarray(soff, dtype=np.int64),
        np.concatenate(blks).astype(np.float64),
        np.asarray(boff, dtype=np.int64),
    )


def _chol(mat: np.ndarray) -> np.ndarray | None:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return None


def _psd_max_step(chol_l: np.ndarray, direction: np.ndarray) -> float:
    """Largest alpha with X + alpha*D >= 0, X = L L^T."""
    tmp = np.linalg.solve(chol_l, direction)
    s = np.linalg.solve(chol_l, tmp.T).T
    s = (s + s.T) / 2.0
    lam_min = float(np.linalg.eigvalsh(s)[0])
    if lam_min >= 0.0:
        return np.inf
    return -1.0 / lam_min


def _lin_max_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _nt_scaling(x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """NT scaling point W with W Z W = X, returned as (W, factor G), W = G G^T."""
    lx = _chol(x)
    lz = _chol(z)
    if lx is None or lz is None:
        return None
    u, sig, vt = np.linalg.svd(lz.T @ lx)
    if sig.min() <= 0:
        return None
    g = lx @ vt.T / np.sqrt(sig)
    w = g @ g.T
    return (w + w.T) / 2.0, g


def solve_conic(
    cmat: np.ndarray,
    amats: list[np.ndarray] | np.ndarray,
    b: np.ndarray,
    is_eq: np.ndarray | None = None,
    tol_gap: float = DEFAULT_TOL_GAP,
    tol_feas: float = DEFAULT_TOL_FEAS,
    max_iters: int = DEFAULT_MAX_ITERS,
    trace=None,
) -> ConicResult:
    """Solve the conic program; never raises on infeasible/unbounded data."""
    cmat = np.asarray(cmat, dtype=np.float64)
    n = cmat.shape[0]
    amats = np.asarray(amats, dtype=np.float64).reshape(-1, n, n)
    m = amats.shape[0]
    b = np.asarray(b, dtype=np.float64).copy()
    if is_eq is None:
        is_eq = np.zeros(m, dtype=bool)
    is_eq = np.asarray(is_eq, dtype=bool)
    ineq = ~is_eq
    m_in = int(ineq.sum())

    if m == 0:
        zero = np.zeros((n, n))
        return ConicResult(zero, np.zeros(0), np.zeros(0), cmat.copy(), "optimal", 0, 0.0, 0.0,
                           {"primal_feas": 0.0, "dual_feas": 0.0, "gap": 0.0})

    # row/objective scaling for conditioning; undone on exit
    row_scale = np.maximum(1.0, np.linalg.norm(amats.reshape(m, -1), axis=1))
    amats = amats / row_scale[:, None, None]
    b = b / row_scale
    c_scale = max(1.0, float(np.linalg.norm(cmat)))
    cmat = cmat / c_scale

    sup, soff, blk, boff = _supports(amats)
    avecs = amats.reshape(m, -1)

    def aop(x: np.ndarray) -> np.ndarray:
        return avecs @ x.ravel()

    def aadj(y: np.ndarray) -> np.ndarray:
        return (avecs.T @ y).reshape(n, n)

    bnorm = 1.0 + float(np.abs(b).max(initial=0.0))
    cnorm = 1.0 + float(np.linalg.norm(cmat))

    xi = max(1.0, float(np.abs(b).max(initial=0.0)))
    eta = 1.0
    X = xi * np.eye(n)
    Z = eta * np.eye(n)
    s = np.maximum(1.0, np.abs(b[ineq])) if m_in else np.zeros(0)
    v = eta * np.ones(m_in)
    y = np.zeros(m)
    y[ineq] = -v

    best = None
    best_merit = np.inf
    status = "max_iters"
    it = 0

    for it in range(1, max_iters + 1):
        slack_full = np.zeros(m)
        slack_full[ineq] = s
        rp = b - aop(X) - slack_full
        Rd = cmat - aadj(y) - Z
        rv = -y[ineq] - v
        mu = (float(np.sum(X * Z)) + float(s @ v)) / (n + max(m_in, 1))

        pobj = float(np.sum(cmat * X))
        dobj = float(b @ y)
        gap_rel = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pres = float(np.abs(rp).max(initial=0.0)) / bnorm
        dres = max(
            float(np.linalg.norm(Rd)) / cnorm,
            float(np.abs(rv).max(initial=0.0)) / (1.0 + float(np.abs(y).max(initial=0.0))),
        )
        merit = max(gap_rel, pres, dres)
        if merit < best_merit:
            best_merit = merit
            best = (X.copy(), y.copy(), s.copy(), Z.copy(), pobj, dobj,
                    {"primal_feas": pres, "dual_feas": dres, "gap": gap_rel})

        if trace is not None:
            trace({"iteration": it - 1, "mu": mu, "gap": gap_rel,
                   "primal_feas": pres, "dual_feas": dres})

        if gap_rel <= tol_gap and pres <= tol_feas and dres <= tol_feas:
            status = "optimal"
            break

        # Farkas-style infeasibility certificates on the scaled iterates
        lam = -y.copy()
        lam_norm = float(np.abs(lam).max(initial=0.0))
        if lam_norm > 1e4:
            lam_hat = lam / lam_norm
            atl = aadj(lam_hat)
            w_min = float(np.linalg.eigvalsh((atl + atl.T) / 2.0)[0])
            if b @ lam_hat <= -1e-6 and w_min >= -1e-8 and np.all(lam_hat[ineq] >= -1e-10):
                status = "infeasible"
                break
        xnorm = float(np.linalg.norm(X))
        if xnorm > 1e7 * xi:
            xh = X / xnorm
            sh = slack_full / xnorm
            if (np.abs(aop(xh) + sh).max() <= 1e-6 and np.sum(cmat * xh) <= -1e-7):
                status = "unbounded"
                break

        ntres = _nt_scaling(X, Z)
        if ntres is None:
            # nudge off the cone boundary once before giving up
            X = X + (1e-14 * max(np.trace(X), 1.0) / n) * np.eye(n)
            Z = Z + (1e-14 * max(np.trace(Z), 1.0) / n) * np.eye(n)
            ntres = _nt_scaling(X, Z)
        if ntres is None:
            status = "numerical_failure"
            break
        W, _ = ntres

        M = _kernels.schur_matrix(sup, soff, blk, boff, W)
        d = s / v if m_in else np.zeros(0)
        H = M.copy()
        if m_in:
            H[np.where(ineq)[0], np.where(ineq)[0]] += d

        # Jacobi-precondition before factoring; refine in the original system
        hd = np.sqrt(np.maximum(np.diag(H), 1e-300))
        Hs = H / hd[:, None] / hd[None, :]
        reg = 1e-14
        Hs[np.diag_indices_from(Hs)] += reg
        lh = _chol(Hs)
        tries = 0
        while lh is None and tries < 5:
            reg = max(reg * 1e3, 1e-12)
            Hs[np.diag_indices_from(Hs)] += reg
            lh = _chol(Hs)
            tries += 1
        if lh is None:
            status = "numerical_failure"
            break

        def schur_solve(rhs: np.ndarray) -> np.ndarray:
            dy0 = np.zeros(m)
            r2 = rhs.copy()
            for _ in range(3):
                t = np.linalg.solve(lh, r2 / hd)
                dy0 = dy0 + np.linalg.solve(lh.T, t) / hd
                r2 = rhs - H @ dy0
            return dy0

        lz = _chol(Z)
        if lz is None:
            status = "numerical_failure"
            break
        zinv = np.linalg.solve(lz.T, np.linalg.solve(lz, np.eye(n)))
        zinv = (zinv + zinv.T) / 2.0
        wrdw = W @ Rd @ W

        # rhs: rp - A(Rc - W Rd W) - [rc - d*rv on inequality slots]
        def solve_newton(rc_mat: np.ndarray, rc_lin: np.ndarray):
            extra = np.zeros(m)
            if m_in:
                extra[ineq] = rc_lin - d * rv
            rhs = rp - avecs @ (rc_mat - wrdw).ravel() - extra
            dy = schur_solve(rhs)
            dZ = Rd - aadj(dy)
            dX = rc_mat - W @ dZ @ W
            dX = (dX + dX.T) / 2.0
            dv = rv - dy[ineq]
            ds = rc_lin - d * dv
            return dy, dZ, dX, ds, dv

        lx = _chol(X)
        if lx is None:
            status = "numerical_failure"
            break

        # predictor
        rc_mat = -X.copy()
        rc_lin = -s.copy()
        dy_a, dZ_a, dX_a, ds_a, dv_a = solve_newton(rc_mat, rc_lin)
        a_aff = min(
            1.0,
            _STEP_FRAC * min(_psd_max_step(lx, dX_a), _lin_max_step(s, ds_a)),
            _STEP_FRAC * min(_psd_max_step(lz, dZ_a), _lin_max_step(v, dv_a)),
        )
        mu_aff = (
            float(np.sum((X + a_aff * dX_a) * (Z + a_aff * dZ_a)))
            + float((s + a_aff * ds_a) @ (v + a_aff * dv_a))
        ) / (n + max(m_in, 1))
        sigma = min(1.0 - 1e-8, max(_MIN_SIGMA, (max(mu_aff, 0.0) / mu) ** 3))

        # corrector; a single step length keeps mu from outrunning feasibility
        rc_mat = sigma * mu * zinv - X
        rc_lin = (sigma * mu - s * v - ds_a * dv_a) / v if m_in else np.zeros(0)
        dy, dZ, dX, ds, dv = solve_newton(rc_mat, rc_lin)
        frac = _STEP_FRAC if merit > 1e-5 else 0.999
        alpha = min(
            1.0,
            frac * min(_psd_max_step(lx, dX), _lin_max_step(s, ds)),
            frac * min(_psd_max_step(lz, dZ), _lin_max_step(v, dv)),
        )
        if not np.isfinite(alpha) or alpha <= 1e-14:
            status = "numerical_failure"
            break

        X = X + alpha * dX
        s = s + alpha * ds
        y = y + alpha * dy
        Z = Z + alpha * dZ
        v = v + alpha * dv
        X = (X + X.T) / 2.0
        Z = (Z + Z.T) / 2.0

    if status in ("max_iters", "numerical_failure") and best is not None:
        X, y, s, Z, pobj, dobj, res = best
    else:
        slack_full = np.zeros(m)
        slack_full[ineq] = s
        rp = b - aop(X) - slack_full
        Rd = cmat - aadj(y) - Z
        pobj = float(np.sum(cmat * X))
        dobj = float(b @ y)
        res = {
            "primal_feas": float(np.abs(rp).max(initial=0.0)) / bnorm,
            "dual_feas": float(np.linalg.norm(Rd)) / cnorm,
            "gap": abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
        }

    # undo scaling: X unchanged by row scaling; y per-row, objective by c_scale
    y_out = y * c_scale / row_scale
    return ConicResult(
        X=X,
        y=y_out,
        s=s * row_scale[ineq],
        Z=Z * c_scale,
        status=status,
        iterations=it,
        pobj=pobj * c_scale,
        dobj=dobj * c_scale,
        residuals=res,
    )
