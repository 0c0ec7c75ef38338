"""Rank-1 recovery of QCQP optimizers from the semidefinite relaxation.

Pipeline (for problems satisfying the tree/edge-hull exactness condition):

1. Solve the plain relaxation.  If the optimizer has numeric rank <= 1,
   factor it and return the global optimizer directly.
2. Definite objective: re-solve with the slack-tilted objective
   tr(C W) - eps * sum_k [b_k - tr(C_k W)], whose optimizer is provably
   rank 1 for small enough eps.  The first solve at the safe ceiling eps_0
   calibrates how small eps must be for a requested accuracy zeta; the final
   solve at that eps yields x with objective within zeta of the true optimum.
3. Singular PSD objective: shift the objective by a ridge delta*I (making it
   definite), pick delta so the shift costs at most zeta, and run step 2 on
   the shifted problem; the result is within 2*zeta of the optimum.
4. If extraction never reaches rank 1, hand the relaxation optimum to the
   feasibility heuristic.

The tilt eps is applied over active (finite-bound) constraints only; with
removed bounds the slack sum would be undefined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import heuristic
from .linalg import RANK_TOL, Spectrum, ValidationError, eig_hermitian, numeric_rank
from .problem import QcqpProblem
from .relaxation import SdpData, SdpSolution, build_relaxation, solve_sdp

EPS_SEARCH_LIMIT = 1.0
EPS_FLOOR = 1e-12
_TINY = 1e-12
CASCADE_TOL_GAP = 1e-10   # perturbed solves need mu well below the tilt scale
CASCADE_TOL_FEAS = 1e-9


@dataclass
class RecoveryStage:
    kind: str                 # "plain" | "eps" | "delta"
    sdp_solution: SdpSolution
    rank: int
    eps: float | None = None
    delta: float | None = None


@dataclass
class RecoveryReport:
    stages: list[RecoveryStage] = field(default_factory=list)
    x_star: np.ndarray | None = None
    p_hat: float | None = None
    lower_bound: float | None = None
    zeta: float | None = None
    achieved_gap: float | None = None
    outcome: str = "failed"   # exact_rank1 | cascade_rank1 | handed_to_heuristic | failed
    warnings: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "lower_bound": self.lower_bound,
            "p_hat": self.p_hat,
            "zeta": self.zeta,
            "achieved_gap": self.achieved_gap,
            "x_star": None
            if self.x_star is None
            else [[v.real, v.imag] for v in self.x_star],
            "warnings": list(self.warnings),
            "stages": [
                {
                    "kind": st.kind,
                    "eps": st.eps,
                    "delta": st.delta,
                    "rank": st.rank,
                    "status": st.sdp_solution.status,
                    "objective": st.sdp_solution.r_star,
                    "dual_objective": st.sdp_solution.d_star,
                    "iterations": st.sdp_solution.iterations,
                }
                for st in self.stages
            ],
        }


def extract_rank1(
    w: np.ndarray, rank_tol: float = RANK_TOL, gauge_index: int = 0
) -> np.ndarray | None:
    """Factor a numerically rank-<=1 PSD matrix as x x^H.

    x = sqrt(rho_1) u_1, phase-rotated so entry ``gauge_index`` is real and
    nonnegative.  Returns None when the numeric rank exceeds 1; raises on
    negative eigenvalues beyond tolerance.  The factorization error satisfies
    ||W - x x^H||_F <= rank_tol * ||W||_F * sqrt(n).
    """
    spec = eig_hermitian(w)
    scale = float(np.abs(spec.eigenvalues).max(initial=0.0))
    if spec.eigenvalues[-1] < -1e-8 * (1.0 + scale):
        raise ValidationError(
            f"matrix is not PSD within tolerance (min eig {spec.eigenvalues[-1]:.3e})"
        )
    rank = numeric_rank(spec, rank_tol)
    if rank == 0:
        return np.zeros(w.shape[0], dtype=np.complex128)
    if rank > 1:
        return None
    x = np.sqrt(max(float(spec.eigenvalues[0]), 0.0)) * spec.eigenvectors[:, 0]
    piv = x[gauge_index]
    if abs(piv) < 1e-14 * (1.0 + np.abs(x).max()):
        piv = x[int(np.argmax(np.abs(x)))]
    if abs(piv) > 0:
        x = x * (piv.conjugate() / abs(piv))
    return x


def _min_eig_tilted(problem: QcqpProblem, eps: float) -> float:
    a = problem.objective.copy()
    for con in problem.constraints:
        if con.active:
            a = a + eps * con.matrix
    return float(eig_hermitian(a).eigenvalues[-1])


def choose_eps_bound(problem: QcqpProblem, limit: float = EPS_SEARCH_LIMIT) -> float:
    """Largest eps_0 (up to ``limit``) with lambda_min(C + eps sum C_k) >= lambda_min(C)/2
    for all eps in [0, eps_0].

    lambda_min of an affine matrix family is concave, so checking the right
    endpoint suffices.  Geometric grid search down from the limit, then
    bisection between the last failure and first success.
    """
    if not problem.c_definite:
        raise ValidationError("slack tilt requires a positive definite objective")
    target = 0.5 * float(eig_hermitian(problem.objective).eigenvalues[-1])

    def ok(eps: float) -> bool:
        return _min_eig_tilted(problem, eps) >= target

    grid = [limit * 10.0**-k for k in range(13)]
    hi = None
    lo_fail = None
    for eps in grid:
        if ok(eps):
            hi = eps
            break
        lo_fail = eps
    if hi is None:
        if ok(EPS_FLOOR):
            return EPS_FLOOR
        raise ValidationError("no stable tilt magnitude found down to 1e-12")
    if lo_fail is None:
        return hi
    lo, up = hi, lo_fail
    for _ in range(20):
        mid = np.sqrt(lo * up)
        if ok(mid):
            lo = mid
        else:
            up = mid
    return lo


def build_slack_perturbation(problem: QcqpProblem, eps: float, eps_bound: float | None = None) -> SdpData:
    """Relaxation data of the slack-tilted problem.

    The feasible set is unchanged; the objective becomes
    tr((C + eps sum_k C_k) W) - eps sum_k b_k over active rows.
    """
    if eps_bound is not None and not (0.0 < eps <= eps_bound):
        raise ValidationError(f"eps {eps:.3e} outside (0, {eps_bound:.3e}]")
    if eps <= 0.0:
        raise ValidationError("eps must be positive")
    data = build_relaxation(problem)
    tilted = data.objective.copy()
    for mat in data.matrices:
        tilted = tilted + eps * mat
    return SdpData(
        objective=tilted,
        matrices=data.matrices,
        bounds=data.bounds,
        active_index=data.active_index,
        n_constraints_total=data.n_constraints_total,
        offset=-eps * float(np.sum(data.bounds)),
        merge_pairs=data.merge_pairs,
    )


def slack_sum(problem: QcqpProblem, w: np.ndarray) -> float:
    """sum_k [b_k - tr(C_k W)] over active rows."""
    total = 0.0
    for con in problem.constraints:
        if con.active:
            total += con.upper - float(np.real(np.sum(con.matrix * w.conj())))
    return total


def eps_for_accuracy(
    problem: QcqpProblem, eps_bound: float, sol_at_bound: SdpSolution, zeta: float
) -> float:
    """eps = min(eps_0/2, zeta / slack_sum(W at eps_0)): guarantees the tilted
    optimizer's plain objective is within zeta of the true relaxation value."""
    ssum = slack_sum(problem, sol_at_bound.W)
    return float(min(eps_bound / 2.0, zeta / max(ssum, _TINY)))


def _tilted_plain_value(problem: QcqpProblem, w: np.ndarray) -> float:
    return float(np.real(np.sum(problem.objective * w.conj())))


def _feasible_x(problem: QcqpProblem, x: np.ndarray, tol: float) -> bool:
    _, _, ok = heuristic.quadratic_violations(problem, x, tol)
    return ok


def _try_extract(
    problem: QcqpProblem,
    w: np.ndarray,
    gauge_index: int,
    tol_feas: float,
) -> np.ndarray | None:
    x = extract_rank1(w, gauge_index=gauge_index)
    if x is None:
        return None
    # the factor drops W's residual eigenvalue mass; polish the tiny
    # violations away so recovered objectives respect the relaxation bound
    # to solver precision, then accept at the contract tolerance
    if not _feasible_x(problem, x, heuristic._POLISH_TOL):
        x = heuristic.polish(problem, x)
    if not _feasible_x(problem, x, tol_feas):
        return None
    return x


def solve_exact(
    problem: QcqpProblem,
    zeta: float | None = None,
    enable_cascade: bool = True,
    gauge_index: int = 0,
    tol_feas: float = heuristic.FEAS_TOL,
    delta_bound: float | None = None,
    solver_kwargs: dict | None = None,
) -> RecoveryReport:
    """Full recovery pipeline; see the module docstring.

    ``enable_cascade=False`` limits the run to the plain solve plus
    extraction (for problems where the exactness condition fails, the
    perturbation stages carry no guarantee and are usually wasted work).
    """
    solver_kwargs = dict(solver_kwargs or {})
    report = RecoveryReport()

    sol = solve_sdp(build_relaxation(problem), **solver_kwargs)
    rank = numeric_rank(eig_hermitian(sol.W))
    report.stages.append(RecoveryStage("plain", sol, rank))
    if sol.status != "optimal":
        report.outcome = "failed"
        report.warnings.append(f"plain relaxation solve: {sol.status}")
        return report

    r_star = sol.r_star
    report.lower_bound = r_star
    if zeta is None:
        zeta = 1e-6 * (1.0 + abs(r_star))
    report.zeta = zeta

    if rank <= 1:
        x = _try_extract(problem, sol.W, gauge_index, tol_feas)
        if x is not None:
            report.x_star = x
            report.p_hat = problem.value(x)
            report.achieved_gap = report.p_hat - r_star
            report.outcome = "exact_rank1"
            return report
        report.warnings.append("rank-1 extraction of the plain optimum failed feasibility")

    if not enable_cascade:
        report.outcome = "handed_to_heuristic"
        return report

    cascade_kwargs = dict(solver_kwargs)
    cascade_kwargs.setdefault("tol_gap", CASCADE_TOL_GAP)
    cascade_kwargs.setdefault("tol_feas", CASCADE_TOL_FEAS)

    if problem.c_definite:
        done = _eps_cascade(problem, r_star, zeta, gauge_index, tol_feas, cascade_kwargs, report)
        if done:
            report.outcome = "cascade_rank1"
        elif report.stages[-1].sdp_solution.status != "optimal":
            report.outcome = "failed"
        else:
            report.outcome = "handed_to_heuristic"
        return report

    # singular PSD objective: ridge-shift it, then run the eps cascade
    if delta_bound is None:
        delta_bound = 1.0 * (float(np.abs(eig_hermitian(problem.objective).eigenvalues[0])) + 1.0)
    shifted0 = QcqpProblem(
        problem.n,
        problem.objective + delta_bound * np.eye(problem.n),
        problem.constraints,
        pair_map=list(problem.pair_map),
    )
    sol_d0 = solve_sdp(build_relaxation(shifted0), **cascade_kwargs)
    rank_d0 = numeric_rank(eig_hermitian(sol_d0.W))
    report.stages.append(RecoveryStage("delta", sol_d0, rank_d0, delta=delta_bound))
    if sol_d0.status != "optimal":
        report.outcome = "failed"
        report.warnings.append(f"ridge calibration solve: {sol_d0.status}")
        return report
    p_d0 = sol_d0.r_star
    delta = float(min(delta_bound / 2.0, zeta * delta_bound / max(p_d0 - r_star, _TINY)))
    shifted = QcqpProblem(
        problem.n,
        problem.objective + delta * np.eye(problem.n),
        problem.constraints,
        pair_map=list(problem.pair_map),
    )
    sol_d = solve_sdp(build_relaxation(shifted), **cascade_kwargs)
    rank_d = numeric_rank(eig_hermitian(sol_d.W))
    report.stages.append(RecoveryStage("delta", sol_d, rank_d, delta=delta))
    if sol_d.status != "optimal":
        report.outcome = "failed"
        report.warnings.append(f"ridge solve: {sol_d.status}")
        return report
    if rank_d <= 1:
        x = _try_extract(problem, sol_d.W, gauge_index, tol_feas)
        if x is not None:
            report.x_star = x
            report.p_hat = problem.value(x)
            report.achieved_gap = report.p_hat - r_star
            report.outcome = "cascade_rank1"
            return report
    done = _eps_cascade(
        shifted, sol_d.r_star, zeta, gauge_index, tol_feas, cascade_kwargs, report,
        original=problem, lower_bound=r_star,
    )
    report.outcome = "cascade_rank1" if done else "handed_to_heuristic"
    return report


def _eps_cascade(
    problem: QcqpProblem,
    r_star: float,
    zeta: float,
    gauge_index: int,
    tol_feas: float,
    solver_kwargs: dict,
    report: RecoveryReport,
    original: QcqpProblem | None = None,
    lower_bound: float | None = None,
) -> bool:
    """Slack-tilt stages on a definite-objective problem; appends to report.

    ``original`` carries the unshifted problem when called from the ridge
    stage: feasibility and final objective are evaluated there.
    """
    target = original if original is not None else problem
    bound = lower_bound if lower_bound is not None else r_star
    try:
        eps0 = choose_eps_bound(problem)
    except ValidationError as exc:
        report.warnings.append(str(exc))
        return False

    sol0 = solve_sdp(build_slack_perturbation(problem, eps0, eps0), **solver_kwargs)
    rank0 = numeric_rank(eig_hermitian(sol0.W))
    report.stages.append(RecoveryStage("eps", sol0, rank0, eps=eps0))
    if sol0.status != "optimal":
        report.warnings.append(f"tilt calibration solve: {sol0.status}")
        return False

    eps = eps_for_accuracy(problem, eps0, sol0, zeta)
    for attempt in range(2):
        sol_e = solve_sdp(build_slack_perturbation(problem, eps), **solver_kwargs)
        rank_e = numeric_rank(eig_hermitian(sol_e.W))
        report.stages.append(RecoveryStage("eps", sol_e, rank_e, eps=eps))
        if sol_e.status != "optimal":
            report.warnings.append(f"tilted solve: {sol_e.status}")
            return False
        if rank_e <= 1:
            x = _try_extract(target, sol_e.W, gauge_index, tol_feas)
            if x is not None:
                report.x_star = x
                report.p_hat = target.value(x)
                report.achieved_gap = report.p_hat - bound
                return True
        # ambiguous extraction: retry once with the tilt halved
        eps = eps / 2.0
    report.warnings.append("tilted optimizer never reached numeric rank 1")
    return False
