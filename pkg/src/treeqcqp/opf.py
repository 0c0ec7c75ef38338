"""Optimal power flow on radial networks as a tree-structured QCQP.

The decision variable is the complex bus-voltage vector V.  Constraints are
two-sided bounds on bus injections (real/reactive), squared voltage
magnitudes, and one-sided line-flow / thermal-loss limits; each two-sided
bound is split into a pair of one-sided rows so the problem matches the
solver's canonical form.  Removed bounds (infinite) produce no row.

Constraint patterns (bound removals that make the per-edge hull condition
hold) follow three named schemes:

* ``oversatisfaction``: drop all lower bounds on real and reactive
  injections (power delivered may exceed demand); passes for any g, b > 0.
* ``example1``: drop real-power lower bounds everywhere and reactive lower
  bounds at alternate tree levels; relies on g > b.
* ``example3``: voltage objective; drop parent-side real-power upper and
  reactive lower bounds, child-side reactive upper bounds, and line limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import heuristic, recovery, relaxation
from .linalg import ValidationError, eig_hermitian, numeric_rank
from .network import (
    Bus,
    Line,
    ObjectiveSpec,
    PowerNetwork,
    build_admittance,
    build_flow_matrices,
    build_injection_matrices,
    build_objective,
    complex_power_injections,
)
from .problem import (
    ConditionReport,
    Constraint,
    QcqpProblem,
    check_exactness_condition,
)

PATTERNS = ("none", "oversatisfaction", "example1", "example3")


def _tree_structure(net: PowerNetwork) -> tuple[list[int], list[int]]:
    """(parent, depth) arrays rooted at the gauge bus."""
    n = net.n
    adj: list[list[int]] = [[] for _ in range(n)]
    for ln in net.lines:
        adj[ln.i].append(ln.j)
        adj[ln.j].append(ln.i)
    parent = [-1] * n
    depth = [0] * n
    root = net.gauge_bus
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v] = u
                depth[v] = depth[u] + 1
                stack.append(v)
    return parent, depth


def _removals(net: PowerNetwork, pattern: str) -> dict[str, set]:
    """Sets of bounds to remove, keyed by bound family."""
    n = net.n
    out: dict[str, set] = {
        "p_min": set(), "p_max": set(), "q_min": set(), "q_max": set(),
        "f": set(), "l": set(),
    }
    if pattern == "none":
        return out
    if pattern == "oversatisfaction":
        out["p_min"] = set(range(n))
        out["q_min"] = set(range(n))
        return out
    parent, depth = _tree_structure(net)
    if pattern == "example1":
        out["p_min"] = set(range(n))
        # keep reactive lower bounds on one color class only
        out["q_min"] = {k for k in range(n) if depth[k] % 2 == 1}
        return out
    if pattern == "example3":
        children = [False] * n
        for k in range(n):
            if parent[k] >= 0:
                children[parent[k]] = True
        for k in range(n):
            if children[k]:                  # parent-side roles
                out["p_max"].add(k)
                out["q_min"].add(k)
            if parent[k] >= 0:               # child-side roles
                out["q_max"].add(k)
        out["f"] = {(min(ln.i, ln.j), max(ln.i, ln.j)) for ln in net.lines}
        out["l"] = set(out["f"])
        return out
    raise ValidationError(f"unknown pattern {pattern!r} (one of {PATTERNS})")


def assemble_opf(
    net: PowerNetwork, spec: ObjectiveSpec, pattern: str = "none"
) -> QcqpProblem:
    """Build the QCQP in canonical row order.

    Per bus k: (Phi_k, P_max), (-Phi_k, -P_min), (Psi_k, Q_max),
    (-Psi_k, -Q_min), (J_k, W_max), (-J_k, -W_min); per line: both sending-end
    flow rows then the loss row.  Removed bounds become +inf rows (inactive).
    """
    net.validate()
    removed = _removals(net, pattern)
    cmat = build_objective(net, spec)
    cons: list[Constraint] = []
    pairs: list[tuple[int, int]] = []

    def push(mat: np.ndarray, upper: float, label: str) -> int:
        cons.append(Constraint(mat, upper, label))
        return len(cons) - 1

    inf = math.inf
    for k in range(net.n):
        p_min, p_max, q_min, q_max = net.injection_bounds(k)
        bus = net.buses[k]
        phi, psi, jk = build_injection_matrices(net, k)
        if k in removed["p_max"]:
            p_max = inf
        if k in removed["p_min"]:
            p_min = -inf
        if k in removed["q_max"]:
            q_max = inf
        if k in removed["q_min"]:
            q_min = -inf
        hi = push(phi, p_max, f"P_max[{k}]")
        lo = push(-phi, -p_min, f"P_min[{k}]")
        pairs.append((lo, hi))
        hi = push(psi, q_max, f"Q_max[{k}]")
        lo = push(-psi, -q_min, f"Q_min[{k}]")
        pairs.append((lo, hi))
        hi = push(jk, bus.w_max, f"W_max[{k}]")
        lo = push(-jk, -bus.w_min, f"W_min[{k}]")
        pairs.append((lo, hi))
    for ln in net.lines:
        key = (min(ln.i, ln.j), max(ln.i, ln.j))
        m_ij, m_ji, t_ij = build_flow_matrices(net, ln.i, ln.j)
        f_max = inf if key in removed["f"] else ln.f_max
        l_max = inf if key in removed["l"] else ln.l_max
        push(m_ij, f_max, f"F[{ln.i}->{ln.j}]")
        push(m_ji, f_max, f"F[{ln.j}->{ln.i}]")
        push(t_ij, l_max, f"L[{ln.i}-{ln.j}]")
    return QcqpProblem(net.n, cmat, cons, pair_map=pairs)


@dataclass
class OpfConditionResult:
    report: ConditionReport
    pattern: str
    suggestions: dict[str, list[str]] = field(default_factory=dict)
    missing_edges: list[tuple[int, int]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        d = self.report.to_json_dict()
        d["pattern"] = self.pattern
        d["suggestions"] = {f"{e}": pats for e, pats in self.suggestions.items()}
        d["missing_edges"] = [list(e) for e in self.missing_edges]
        return d


def check_opf_condition(
    net: PowerNetwork, spec: ObjectiveSpec, pattern: str = "none"
) -> OpfConditionResult:
    """Exactness-condition check, plus per-failing-edge pattern suggestions.

    Suggestions list which of the named removal patterns would make each
    offending edge pass; the problem itself is never mutated.  Aggressive
    bound removal can also delete an edge from the problem graph entirely;
    such lines are reported in ``missing_edges`` rather than silently passed.
    """
    problem = assemble_opf(net, spec, pattern)
    report = check_exactness_condition(problem, bounded_assertion=False)
    line_edges = {(min(ln.i, ln.j), max(ln.i, ln.j)) for ln in net.lines}
    present = set(e for e in (tuple(x.edge) for x in report.per_edge))
    missing = sorted(line_edges - present)

    suggestions: dict[tuple[int, int], list[str]] = {}
    if report.offending_edges:
        alt_reports = {}
        for alt in ("oversatisfaction", "example1", "example3"):
            if alt == pattern:
                continue
            if alt == "example3" and spec.kind != "voltage":
                continue
            alt_problem = assemble_opf(net, spec, alt)
            alt_reports[alt] = check_exactness_condition(alt_problem)
        for edge in report.offending_edges:
            fixes = []
            for alt, rep in alt_reports.items():
                bad = set(rep.offending_edges)
                if edge not in bad:
                    fixes.append(alt)
            suggestions[edge] = fixes
    return OpfConditionResult(report, pattern, suggestions, missing)


@dataclass
class OpfConfig:
    pattern: str = "none"
    zeta: float | None = None
    gamma: float = math.inf
    skip_condition_check: bool = False
    force_cascade: bool = False
    reoptimize_root_voltage: bool = False
    max_outer_iters: int = 50
    tol_feas: float = heuristic.FEAS_TOL
    solver_kwargs: dict = field(default_factory=dict)


@dataclass
class PhysicalSolution:
    v: np.ndarray
    v_mag: np.ndarray
    theta: np.ndarray
    p_injection: np.ndarray
    q_injection: np.ndarray
    p_gen: np.ndarray
    q_gen: np.ndarray
    w: np.ndarray
    flows: list[dict]


def recover_physical(x: np.ndarray, net: PowerNetwork, verify_tol: float = 1e-10) -> PhysicalSolution:
    """Map a voltage vector to bus/line quantities via the quadratic forms.

    Cross-checks every injection against the direct circuit computation
    S_k = V_k conj((Y V)_k).
    """
    v = np.asarray(x, dtype=np.complex128)
    if len(v) != net.n:
        raise ValidationError("voltage vector dimension mismatch")
    y = build_admittance(net)
    s_direct = complex_power_injections(v, y)
    p_inj = np.empty(net.n)
    q_inj = np.empty(net.n)
    for k in range(net.n):
        phi, psi, _ = build_injection_matrices(net, k)
        p_inj[k] = float(np.real(v.conj() @ phi @ v))
        q_inj[k] = float(np.real(v.conj() @ psi @ v))
    scale = 1.0 + float(np.abs(s_direct).max(initial=0.0))
    mismatch = float(np.abs(p_inj + 1j * q_inj - s_direct).max(initial=0.0))
    if mismatch > verify_tol * scale:
        raise ValidationError(f"injection cross-check failed ({mismatch:.3e})")
    flows = []
    for ln in net.lines:
        m_ij, m_ji, t_ij = build_flow_matrices(net, ln.i, ln.j)
        flows.append(
            {
                "from": ln.i,
                "to": ln.j,
                "p_from": float(np.real(v.conj() @ m_ij @ v)),
                "p_to": float(np.real(v.conj() @ m_ji @ v)),
                "loss": float(np.real(v.conj() @ t_ij @ v)),
            }
        )
    p_dem = np.array([b.p_demand for b in net.buses])
    q_dem = np.array([b.q_demand for b in net.buses])
    return PhysicalSolution(
        v=v,
        v_mag=np.abs(v),
        theta=np.angle(v),
        p_injection=p_inj,
        q_injection=q_inj,
        p_gen=p_inj + p_dem,
        q_gen=q_inj + q_dem,
        w=np.abs(v) ** 2,
        flows=flows,
    )


@dataclass
class OpfResult:
    status: str                      # solved | heuristic | infeasible | failed
    problem: QcqpProblem
    recovery: recovery.RecoveryReport
    condition: OpfConditionResult | None
    heuristic_result: heuristic.HeuristicResult | None
    physical: PhysicalSolution | None
    rank: int | None
    eta: float | None
    objective: float | None

    def to_json_dict(self, net: PowerNetwork) -> dict:
        kw = net.power_base_mw * 1e3
        out = {
            "status": self.status,
            "objective": self.objective,
            "eta": self.eta,
            "rank": self.rank,
            "recovery": self.recovery.to_json_dict(),
            "condition": None if self.condition is None else self.condition.to_json_dict(),
            "heuristic": None,
            "buses": [],
            "lines": [],
        }
        if self.heuristic_result is not None:
            h = self.heuristic_result
            out["heuristic"] = {
                "outcome": h.outcome,
                "iterations": h.iterations,
                "eta": h.eta,
                "violation_trace": list(h.violation_trace),
            }
        if self.physical is not None:
            ph = self.physical
            out["buses"] = [
                {
                    "id": k + 1,
                    "v_mag_pu": float(ph.v_mag[k]),
                    "theta_rad": float(ph.theta[k]),
                    "p_gen_kw": float(ph.p_gen[k] * kw),
                    "q_gen_kvar": float(ph.q_gen[k] * kw),
                }
                for k in range(net.n)
            ]
            out["lines"] = [
                {
                    "from": f["from"] + 1,
                    "to": f["to"] + 1,
                    "p_from_kw": f["p_from"] * kw,
                    "p_to_kw": f["p_to"] * kw,
                    "loss_kw": f["loss"] * kw,
                }
                for f in ph.flows
            ]
        return out


def solve_opf(net: PowerNetwork, spec: ObjectiveSpec, cfg: OpfConfig | None = None) -> OpfResult:
    """Assemble, check, solve, and map back to physical quantities.

    The perturbation cascade runs only when the exactness condition holds
    (or ``force_cascade``); otherwise a rank-deficient relaxation optimum
    goes straight to the feasibility heuristic, which optimizes over
    magnitudes/angles of the non-reference buses.
    """
    cfg = cfg or OpfConfig()
    problem = assemble_opf(net, spec, cfg.pattern)

    condition = None
    enable_cascade = cfg.force_cascade
    if not cfg.skip_condition_check:
        condition = check_opf_condition(net, spec, cfg.pattern)
        enable_cascade = enable_cascade or condition.report.overall

    rec = recovery.solve_exact(
        problem,
        zeta=cfg.zeta,
        enable_cascade=enable_cascade,
        gauge_index=net.gauge_bus,
        tol_feas=cfg.tol_feas,
        solver_kwargs=cfg.solver_kwargs,
    )
    plain = rec.stages[0]
    rank = plain.rank
    if rec.outcome == "failed":
        status = "infeasible" if plain.sdp_solution.status == "infeasible" else "failed"
        return OpfResult(status, problem, rec, condition, None, None, rank, None, None)

    heur = None
    x = rec.x_star
    if rec.outcome == "handed_to_heuristic":
        w_star = plain.sdp_solution.W
        x0 = heuristic.initial_point(w_star, problem.objective)
        root_mag = abs(x0[net.gauge_bus]) if abs(x0[net.gauge_bus]) > 0 else 1.0
        param = heuristic.PolarParam(
            net.n, root_mag, include_root=cfg.reoptimize_root_voltage
        )
        hcfg = heuristic.HeuristicConfig(
            gamma=cfg.gamma,
            max_outer_iters=cfg.max_outer_iters,
            tol_feas=cfg.tol_feas,
        )
        heur = heuristic.restore_feasibility(
            problem, w_star, plain.sdp_solution.r_star, hcfg, param
        )
        if heur.outcome != "feasible":
            return OpfResult("failed", problem, rec, condition, heur, None, rank, None, None)
        x = heur.x_tilde

    physical = recover_physical(x, net)
    objective = problem.value(x)
    r_star = rec.lower_bound
    eta = objective / r_star - 1.0 if abs(r_star) > 1e-12 else None
    status = "solved" if rec.outcome in ("exact_rank1", "cascade_rank1") else "heuristic"
    return OpfResult(status, problem, rec, condition, heur, physical, rank, eta, objective)
