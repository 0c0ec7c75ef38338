"""Feasible-point restoration when the relaxation optimum is not rank 1.

Starting from a point built out of the principal eigenvector of the
relaxation optimum W*, each outer iteration linearizes every quadratic
constraint around the current point, measures how far the linearized values
stick out of their bounds, and minimizes the sum of squared violations inside
an l1 trust region:

    x_{m+1} = argmin sum_k s_k(x)^2   s.t.  ||x - x_m||_1 <= gamma,

where s_k is the (signed) amount by which the linearized constraint k leaves
its [lower, upper] interval.  The subproblem is convex piecewise-quadratic
and is solved by projected gradient descent with backtracking.  The outer
loop stops at the first iterate that satisfies the true quadratic
constraints.

The optimization variable is a real parametrization of x: rectangular
(real/imaginary parts, gauge entry phase fixed) by default, or polar
magnitudes/angles with a fixed reference bus for power flow problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import eig_hermitian
from .problem import QcqpProblem

FEAS_TOL = 1e-6          # relative feasibility acceptance for recovered points
_POLISH_TOL = 1e-9


# --- parametrizations -------------------------------------------------------

class RectangularParam:
    """z = (Re x, Im x) with the gauge entry's imaginary part pinned to 0."""

    def __init__(self, n: int, gauge_index: int = 0):
        self.n = n
        self.gauge_index = gauge_index

    @property
    def dim(self) -> int:
        return 2 * self.n - 1

    def from_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        piv = x[self.gauge_index]
        if abs(piv) > 0:
            x = x * (piv.conjugate() / abs(piv))
        im = np.delete(x.imag, self.gauge_index)
        return np.concatenate([x.real, im])

    def to_x(self, z: np.ndarray) -> np.ndarray:
        re = z[: self.n]
        im = np.insert(z[self.n :], self.gauge_index, 0.0)
        return re + 1j * im

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        jac = np.zeros((self.n, self.dim), dtype=np.complex128)
        for k in range(self.n):
            jac[k, k] = 1.0
        col = self.n
        for k in range(self.n):
            if k == self.gauge_index:
                continue
            jac[k, col] = 1j
            col += 1
        return jac


class PolarParam:
    """z = (|x_2|..|x_n|, arg x_2..arg x_n); entry 1 fixed at (root_mag, 0).

    ``include_root=True`` adds |x_1| as a leading variable instead of fixing
    it.
    """

    def __init__(self, n: int, root_mag: float, include_root: bool = False):
        self.n = n
        self.root_mag = float(root_mag)
        self.include_root = include_root

    @property
    def dim(self) -> int:
        return 2 * (self.n - 1) + (1 if self.include_root else 0)

    def _mags_angles(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.include_root:
            mags = np.concatenate([[z[0]], z[1 : self.n]])
            angles = np.concatenate([[0.0], z[self.n :]])
        else:
            mags = np.concatenate([[self.root_mag], z[: self.n - 1]])
            angles = np.concatenate([[0.0], z[self.n - 1 :]])
        return mags, angles

    def from_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        piv = x[0]
        if abs(piv) > 0:
            x = x * (piv.conjugate() / abs(piv))
        mags = np.abs(x)
        angles = np.angle(x)
        angles[0] = 0.0
        if self.include_root:
            return np.concatenate([mags, angles[1:]])
        return np.concatenate([mags[1:], angles[1:]])

    def to_x(self, z: np.ndarray) -> np.ndarray:
        mags, angles = self._mags_angles(z)
        return mags * np.exp(1j * angles)

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        mags, angles = self._mags_angles(z)
        phase = np.exp(1j * angles)
        jac = np.zeros((self.n, self.dim), dtype=np.complex128)
        col = 0
        start = 0 if self.include_root else 1
        for k in range(start, self.n):
            jac[k, col] = phase[k]
            col += 1
        for k in range(1, self.n):
            jac[k, col] = 1j * mags[k] * phase[k]
            col += 1
        return jac


# --- violations and linearization -------------------------------------------

def _logical_rows(problem: QcqpProblem):
    return problem.two_sided_view()


def quadratic_violations(
    problem: QcqpProblem, x: np.ndarray, tol_feas: float = FEAS_TOL
) -> tuple[np.ndarray, float, bool]:
    """Per-logical-constraint violations of the true quadratics at x.

    Returns (violations, sum of squared violations, feasible flag); a
    constraint is satisfied when its violation is within
    tol_feas * (1 + |bound|) of zero.
    """
    x = np.asarray(x, dtype=np.complex128)
    viol = []
    feasible = True
    for mat, lo, hi, _, _ in _logical_rows(problem):
        f = float(np.real(x.conj() @ mat @ x))
        v = max(0.0, f - hi, lo - f)
        viol.append(v)
        bound = hi if f > hi else lo
        if np.isfinite(bound):
            if v > tol_feas * (1.0 + abs(bound)):
                feasible = False
    viol = np.asarray(viol)
    return viol, float(np.sum(viol**2)), feasible


def linearize_violation(problem: QcqpProblem, x_m: np.ndarray, x: np.ndarray) -> float:
    """Sum of squared violations of the constraints linearized around x_m.

    The linear model of each quadratic is
    f_k(x_m) + 2 Re[x_m^H C_k (x - x_m)]; a removed bound contributes no
    hinge on its side.
    """
    x_m = np.asarray(x_m, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    total = 0.0
    for mat, lo, hi, _, _ in _logical_rows(problem):
        base = float(np.real(x_m.conj() @ mat @ x_m))
        f_lin = base + 2.0 * float(np.real(x_m.conj() @ mat @ (x - x_m)))
        s = max(0.0, f_lin - hi, lo - f_lin)
        total += s * s
    return total


@dataclass
class _LinearModel:
    f0: np.ndarray       # constraint values at the base point
    grad: np.ndarray     # (m_logical, p) gradients in the parametrization
    lo: np.ndarray
    hi: np.ndarray

    def residuals(self, w: np.ndarray) -> np.ndarray:
        f = self.f0 + self.grad @ w
        return np.maximum(0.0, f - self.hi) - np.maximum(0.0, self.lo - f)

    def value(self, w: np.ndarray) -> float:
        r = self.residuals(w)
        return float(r @ r)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        r = self.residuals(w)
        return 2.0 * (self.grad.T @ r)


def _build_model(problem: QcqpProblem, x_m: np.ndarray, param) -> _LinearModel:
    z_m = param.from_x(x_m)
    x_base = param.to_x(z_m)
    jac = param.jacobian(z_m)
    f0, los, his, grads = [], [], [], []
    for mat, lo, hi, _, _ in _logical_rows(problem):
        y = mat @ x_base
        f0.append(float(np.real(x_base.conj() @ y)))
        grads.append(2.0 * np.real(jac.conj().T @ y))
        los.append(lo)
        his.append(hi)
    return _LinearModel(
        np.asarray(f0), np.asarray(grads), np.asarray(los), np.asarray(his)
    )


# --- l1 projection and projected gradient ------------------------------------

def project_l1(d: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the l1 ball of the given radius (sort-based)."""
    if not np.isfinite(radius):
        return d
    a = np.abs(d)
    if a.sum() <= radius:
        return d
    u = np.sort(a)[::-1]
    cum = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(u) + 1) > (cum - radius))[0][-1]
    theta = (cum[rho] - radius) / (rho + 1.0)
    return np.sign(d) * np.maximum(a - theta, 0.0)


def _pgd(model: _LinearModel, gamma: float, max_inner: int, w0: np.ndarray | None = None):
    """Projected gradient descent with Armijo backtracking; monotone in F."""
    p = model.grad.shape[1]
    w = np.zeros(p) if w0 is None else w0.copy()
    f = model.value(w)
    gn2 = float(np.sum(model.grad * model.grad))
    step = 1.0 / max(2.0 * gn2, 1e-12)
    for _ in range(max_inner):
        if f <= 1e-24:
            break
        g = model.gradient(w)
        accepted = False
        for _ in range(40):
            w_new = project_l1(w - step * g, gamma)
            f_new = model.value(w_new)
            dw = w_new - w
            if f_new <= f - 1e-4 / max(step, 1e-300) * float(dw @ dw):
                accepted = True
                break
            step *= 0.5
        if not accepted or float(np.abs(w_new - w).max(initial=0.0)) <= 1e-14 * (1.0 + np.abs(w).max(initial=0.0)):
            w = w_new if accepted else w
            f = model.value(w)
            break
        w, f = w_new, f_new
        step *= 1.3
    return w, f


# --- public heuristic API -----------------------------------------------------

@dataclass
class HeuristicConfig:
    gamma: float = np.inf
    max_outer_iters: int = 50
    max_inner_iters: int = 500
    start_mode: str = "rank1_approx"     # or "scaled_eig" (scaled principal eigenvector)
    tol_feas: float = FEAS_TOL
    stall_rtol: float = 1e-10
    refine_tol: float = 1e-10            # post-feasibility polish target; None disables


@dataclass
class HeuristicResult:
    x_tilde: np.ndarray | None
    iterations: int
    eta: float | None
    violation_trace: list[float] = field(default_factory=list)
    outcome: str = "exhausted"           # "feasible" | "exhausted"


def initial_point(w_star: np.ndarray, cmat: np.ndarray, mode: str = "rank1_approx") -> np.ndarray:
    """Starting point from the relaxation optimum.

    ``rank1_approx`` takes the Frobenius-optimal rank-1 factor sqrt(rho_1) u_1.
    ``scaled_eig`` scales the unit principal eigenvector by sqrt(tr(C W*)),
    which reproduces the relaxation objective value exactly whenever
    u_1^H C u_1 = 1 (and only approximately otherwise).  Both are gauge-fixed.
    """
    spec = eig_hermitian(w_star)
    rho1 = float(max(spec.eigenvalues[0], 0.0))
    if rho1 == 0.0:
        return np.zeros(w_star.shape[0], dtype=np.complex128)
    u1 = spec.eigenvectors[:, 0]
    if mode == "rank1_approx":
        return np.sqrt(rho1) * u1
    if mode == "scaled_eig":
        value = float(np.real(np.sum(cmat * w_star.conj())))
        return u1 * np.sqrt(max(value, 0.0))
    raise ValueError(f"unknown start mode {mode!r}")


def heuristic_step(
    problem: QcqpProblem, x_m: np.ndarray, cfg: HeuristicConfig, param=None
) -> np.ndarray:
    """One outer iteration: linearize at x_m and minimize squared violations."""
    if param is None:
        param = RectangularParam(problem.n)
    model = _build_model(problem, x_m, param)
    w, _ = _pgd(model, cfg.gamma, cfg.max_inner_iters)
    z_m = param.from_x(x_m)
    return param.to_x(z_m + w)


def restore_feasibility(
    problem: QcqpProblem,
    w_star: np.ndarray,
    r_star: float,
    cfg: HeuristicConfig | None = None,
    param=None,
) -> HeuristicResult:
    """Run the outer linearize-and-project loop until feasibility or exhaustion."""
    cfg = cfg or HeuristicConfig()
    x = initial_point(w_star, problem.objective, cfg.start_mode)
    if param is None:
        param = RectangularParam(problem.n)
    trace = []
    prev_total = None
    for it in range(cfg.max_outer_iters + 1):
        _, total, feasible = quadratic_violations(problem, x, cfg.tol_feas)
        trace.append(total)
        if feasible:
            if cfg.refine_tol is not None:
                # already feasible at the contract tolerance; a couple more
                # linearized steps push violations to solver precision so the
                # objective respects the relaxation bound
                x = _refine(problem, x, cfg, param)
            eta = None
            if abs(r_star) > 1e-12:
                eta = problem.value(x) / r_star - 1.0
            return HeuristicResult(x, it, eta, trace, "feasible")
        if it == cfg.max_outer_iters:
            break
        if prev_total is not None and abs(prev_total - total) <= cfg.stall_rtol * (1.0 + total):
            break
        prev_total = total
        x = heuristic_step(problem, x, cfg, param)
    return HeuristicResult(None, len(trace) - 1, None, trace, "exhausted")


def _refine(problem: QcqpProblem, x: np.ndarray, cfg: HeuristicConfig, param) -> np.ndarray:
    best = x
    _, best_total, _ = quadratic_violations(problem, best, cfg.refine_tol)
    for _ in range(3):
        _, _, tight = quadratic_violations(problem, best, cfg.refine_tol)
        if tight:
            break
        cand = heuristic_step(problem, best, cfg, param)
        _, cand_total, _ = quadratic_violations(problem, cand, cfg.refine_tol)
        if cand_total >= best_total:
            break
        best, best_total = cand, cand_total
    return best


def polish(
    problem: QcqpProblem,
    x: np.ndarray,
    tol_feas: float = _POLISH_TOL,
    max_iters: int = 5,
    param=None,
) -> np.ndarray:
    """Drive a near-feasible point onto the feasible set by a few linearized steps.

    Used after rank-1 extraction, where the factor drops the residual
    eigenvalue mass of W and may leave tiny constraint violations.
    """
    cfg = HeuristicConfig(max_outer_iters=max_iters, tol_feas=tol_feas)
    if param is None:
        param = RectangularParam(problem.n)
    best = x
    for _ in range(max_iters):
        _, total, feasible = quadratic_violations(problem, best, tol_feas)
        if feasible:
            break
        best = heuristic_step(problem, best, cfg, param)
    return best
