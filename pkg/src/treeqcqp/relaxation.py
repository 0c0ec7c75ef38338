"""Semidefinite relaxation of a QCQP and its dual diagnostics.

The relaxation replaces x x^H by a PSD matrix W:

    minimize tr(C W)  s.t.  tr(C_k W) <= b_k (active k), W >= 0.

Solves run on the real symmetric embedding of the Hermitian problem; the
recovered W is averaged over the embedding's block symmetry, which restores
exact Hermitian structure.  Two-sided constraint pairs whose bounds coincide
are merged into equality rows before the solve (better conditioned than two
opposing inequalities) and their multipliers are split back afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ipm
from .linalg import as_hermitian, eig_hermitian, from_real_embedding, real_embedding
from .problem import ProblemGraph, QcqpProblem, is_connected, matrix_graph


@dataclass
class SdpData:
    """Embeddable relaxation data: active rows only."""

    objective: np.ndarray                  # complex Hermitian
    matrices: list[np.ndarray]             # active constraint matrices
    bounds: np.ndarray                     # finite upper bounds
    active_index: list[int]                # positions in the original constraint list
    n_constraints_total: int
    offset: float = 0.0                    # constant added to the objective value
    merge_pairs: list[tuple[int, int]] = field(default_factory=list)  # indices into `matrices`


@dataclass
class SdpSolution:
    W: np.ndarray
    lam: np.ndarray                        # multipliers over the full constraint list
    r_star: float                          # primal objective (including offset)
    d_star: float                          # dual objective (including offset)
    status: str
    iterations: int
    residuals: dict


def build_relaxation(problem: QcqpProblem) -> SdpData:
    """Relaxation data from the active constraints of a problem.

    Rank <= 1 feasible W of the result correspond exactly to feasible x of
    the QCQP via W = x x^H, with equal objective values.
    """
    mats, bounds, index = [], [], []
    pos = {}
    for k, con in enumerate(problem.constraints):
        if not con.active:
            continue
        pos[k] = len(mats)
        mats.append(con.matrix)
        bounds.append(con.upper)
        index.append(k)
    merge = []
    for k_lo, k_hi in problem.pair_map:
        if k_lo in pos and k_hi in pos:
            lo = -problem.constraints[k_lo].upper
            hi = problem.constraints[k_hi].upper
            if lo == hi:
                merge.append((pos[k_lo], pos[k_hi]))
    return SdpData(
        objective=problem.objective,
        matrices=mats,
        bounds=np.asarray(bounds, dtype=np.float64),
        active_index=index,
        n_constraints_total=len(problem.constraints),
        merge_pairs=merge,
    )


def solve_sdp(
    data: SdpData,
    tol_gap: float = ipm.DEFAULT_TOL_GAP,
    tol_feas: float = ipm.DEFAULT_TOL_FEAS,
    max_iters: int = ipm.DEFAULT_MAX_ITERS,
    trace=None,
) -> SdpSolution:
    """Solve the relaxation; solver failures surface as statuses, not raises."""
    n = data.objective.shape[0]
    m = len(data.matrices)

    # tr_complex(C_k W) = tr_real(embed(C_k)/2 . embed(W))
    c_real = real_embedding(data.objective) / 2.0
    a_real = []
    b = []
    is_eq = []
    # equality-merged rows first would reorder things; keep original order and
    # mark the lower row of each merged pair as dropped
    drop = {}
    for i_lo, i_hi in data.merge_pairs:
        drop[i_lo] = i_hi
    row_of = {}
    for i in range(m):
        if i in drop:
            continue
        row_of[i] = len(a_real)
        a_real.append(real_embedding(data.matrices[i]) / 2.0)
        b.append(data.bounds[i])
        is_eq.append(i in {hi for _, hi in data.merge_pairs})

    res = ipm.solve_conic(
        c_real,
        np.asarray(a_real),
        np.asarray(b),
        is_eq=np.asarray(is_eq, dtype=bool),
        tol_gap=tol_gap,
        tol_feas=tol_feas,
        max_iters=max_iters,
        trace=trace,
    )

    w = from_real_embedding(res.X)
    w = as_hermitian(w, tol=np.inf)

    lam_active = np.zeros(m)
    for i in range(m):
        if i in drop:
            continue
        nu = -res.y[row_of[i]]
        if is_eq[row_of[i]]:
            # split the free equality multiplier over the original pair
            i_lo = [lo for lo, hi in data.merge_pairs if hi == i][0]
            lam_active[i] = max(nu, 0.0)
            lam_active[i_lo] = max(-nu, 0.0)
        else:
            lam_active[i] = max(nu, 0.0)
    lam = np.zeros(data.n_constraints_total)
    for i, k in enumerate(data.active_index):
        lam[k] = lam_active[i]

    r_star = float(np.real(np.sum(data.objective * w.conj()))) + data.offset
    d_star = float(res.dobj) + data.offset
    return SdpSolution(
        W=w,
        lam=lam,
        r_star=r_star,
        d_star=d_star,
        status=res.status,
        iterations=res.iterations,
        residuals=res.residuals,
    )


def solve_relaxation(problem: QcqpProblem, **kwargs) -> SdpSolution:
    return solve_sdp(build_relaxation(problem), **kwargs)


def dual_slack_matrix(problem: QcqpProblem, lam: np.ndarray) -> np.ndarray:
    """C + sum_k lambda_k C_k over active rows (removed rows contribute 0)."""
    a = problem.objective.copy()
    for k, con in enumerate(problem.constraints):
        if con.active and lam[k] != 0.0:
            a = a + lam[k] * con.matrix
    return a


@dataclass
class DualCertificate:
    A: np.ndarray
    psd_ok: bool
    graph: ProblemGraph
    connected: bool
    rank_at_least_n_minus_1: bool
    min_eig: float


def dual_certificate(problem: QcqpProblem, lam: np.ndarray) -> DualCertificate:
    """Assemble the dual slack matrix and its connectivity/rank diagnostics."""
    lam = np.asarray(lam, dtype=np.float64)
    if len(lam) != len(problem.constraints):
        raise ValueError("multiplier length mismatch")
    a = dual_slack_matrix(problem, lam)
    spec = eig_hermitian(a)
    scale = 1.0 + float(np.abs(spec.eigenvalues).max(initial=0.0))
    min_eig = float(spec.eigenvalues[-1])
    psd_ok = min_eig >= -1e-8 * scale
    graph = matrix_graph(a)
    from .linalg import numeric_rank

    rank = numeric_rank(spec)
    return DualCertificate(
        A=a,
        psd_ok=psd_ok,
        graph=graph,
        connected=is_connected(graph),
        rank_at_least_n_minus_1=rank >= problem.n - 1,
        min_eig=min_eig,
    )


@dataclass
class KktReport:
    comp_slack: float
    comp_slack_violation: bool
    dual_graph_connected: bool
    rank_W: int
    a_min_eig: float


def kkt_report(problem: QcqpProblem, sol: SdpSolution) -> KktReport:
    """Complementary-slackness and rank diagnostics, recomputed from (W, lam)."""
    cert = dual_certificate(problem, sol.lam)
    comp = abs(float(np.real(np.sum(cert.A * sol.W.conj()))))
    a_norm = float(np.linalg.norm(cert.A))
    w_norm = float(np.linalg.norm(sol.W))
    from .linalg import numeric_rank

    rank = numeric_rank(eig_hermitian(sol.W))
    return KktReport(
        comp_slack=comp,
        comp_slack_violation=comp > 1e-6 * (1.0 + a_norm * w_norm),
        dual_graph_connected=cert.connected,
        rank_W=rank,
        a_min_eig=cert.min_eig,
    )


@dataclass
class FeasibilityProbe:
    slack: float
    witness: np.ndarray
    status: str


def strict_feasibility_probe(
    problem: QcqpProblem, trace_box: float | None = None, **solver_kwargs
) -> FeasibilityProbe:
    """max s  s.t.  tr(C_k W) + s <= b_k, tr(W) <= trace_box, W >= 0.

    Positive slack certifies a strictly feasible W of the relaxation
    (necessary evidence, not proof, for strict feasibility of the QCQP).
    Implemented by adjoining s as an extra diagonal PSD slot, shifted to keep
    it nonnegative.
    """
    data = build_relaxation(problem)
    n = problem.n
    mats = data.matrices
    b = data.bounds
    if trace_box is None:
        trace_box = 1e3 * n
    shift = 1.0 + max(0.0, -float(b.min(initial=0.0)))

    aug = []
    for mat in mats:
        big = np.zeros((n + 1, n + 1), dtype=np.complex128)
        big[:n, :n] = mat
        big[n, n] = 1.0
        aug.append(big)
    box = np.zeros((n + 1, n + 1), dtype=np.complex128)
    box[:n, :n] = np.eye(n)
    aug.append(box)
    cost = np.zeros((n + 1, n + 1), dtype=np.complex128)
    cost[n, n] = -1.0

    aug_data = SdpData(
        objective=cost,
        matrices=aug,
        bounds=np.append(b + shift, trace_box),
        active_index=list(range(len(aug))),
        n_constraints_total=len(aug),
    )
    sol = solve_sdp(aug_data, **solver_kwargs)
    u = float(np.real(sol.W[n, n]))
    return FeasibilityProbe(slack=u - shift, witness=sol.W[:n, :n], status=sol.status)
