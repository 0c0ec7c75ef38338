"""QCQP problem representation, sparsity graphs, and the exactness condition.

A problem is

    minimize x^H C x  subject to  x^H C_k x <= b_k,  k in K,

with complex x, Hermitian C (PSD) and C_k, and real bounds.  ``b_k = +inf``
encodes a removed inequality: removed constraints are excluded from the
sparsity graph, the condition check, and the relaxation.

The exactness condition asks that (a) the problem's sparsity graph is a tree
and (b) on every edge (i, j), the origin of the complex plane is *not* in the
relative interior of the convex hull of the entries
{C_ij} + {[C_k]_ij : k active}.  Together with bounded, strictly feasible
constraint sets this is what lets the semidefinite relaxation recover a
global optimizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .linalg import ValidationError, as_hermitian, min_eigenvalue

GRAPH_ZERO_TOL = 1e-12   # absolute cutoff for "nonzero entry" in graphs
RELINT_TOL = 1e-9        # LP margin separating interior from boundary


@dataclass(frozen=True)
class Constraint:
    """One inequality x^H C x <= upper; upper may be +inf (removed)."""

    matrix: np.ndarray
    upper: float
    label: str = ""

    @property
    def active(self) -> bool:
        return np.isfinite(self.upper)


@dataclass
class QcqpProblem:
    n: int
    objective: np.ndarray
    constraints: list[Constraint]
    pair_map: list[tuple[int, int]] = field(default_factory=list)
    c_definite: bool = field(init=False, default=False)

    def __post_init__(self) -> None:
        self.objective = as_hermitian(self.objective)
        if self.objective.shape[0] != self.n:
            raise ValidationError("objective dimension mismatch")
        validated = []
        for k, con in enumerate(self.constraints):
            mat = as_hermitian(con.matrix)
            if mat.shape[0] != self.n:
                raise ValidationError(f"constraint {k} dimension mismatch")
            validated.append(Constraint(mat, float(con.upper), con.label))
        self.constraints = validated
        for lo, hi in self.pair_map:
            if not (0 <= lo < len(validated) and 0 <= hi < len(validated)):
                raise ValidationError("pair_map index out of range")
        cmin = min_eigenvalue(self.objective)
        scale = 1.0 + float(np.abs(self.objective).max(initial=0.0))
        if cmin < -1e-8 * scale:
            raise ValidationError(f"objective matrix is not PSD (min eig {cmin:.3e})")
        self.c_definite = cmin > 1e-10 * scale

    def active_indices(self) -> list[int]:
        return [k for k, c in enumerate(self.constraints) if c.active]

    def two_sided_view(self) -> list[tuple[np.ndarray, float, float, int | None, int | None]]:
        """Logical constraints as (C, lower, upper, k_lower, k_upper).

        Paired rows (k_minus holding (-C, -lower), k_plus holding (C, upper))
        merge into one two-sided entry; unpaired rows become one-sided.
        Entries with both sides removed are dropped.
        """
        paired = set()
        out = []
        for k_lo, k_hi in self.pair_map:
            paired.update((k_lo, k_hi))
            mat = self.constraints[k_hi].matrix
            lo = -self.constraints[k_lo].upper
            hi = self.constraints[k_hi].upper
            if np.isinf(lo) and np.isinf(hi):
                continue
            out.append((mat, lo, hi, k_lo, k_hi))
        for k, con in enumerate(self.constraints):
            if k in paired or not con.active:
                continue
            out.append((con.matrix, -np.inf, con.upper, None, k))
        return out

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.complex128)
        return float(np.real(x.conj() @ self.objective @ x))


@dataclass(frozen=True)
class ProblemGraph:
    n: int
    edges: tuple[tuple[int, int], ...]   # canonical i < j, sorted

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


def _edges_of(mats: list[np.ndarray], n: int, tol: float) -> ProblemGraph:
    mask = np.zeros((n, n), dtype=bool)
    for m in mats:
        mask |= np.abs(m) > tol
    edges = sorted(
        (i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j] or mask[j, i]
    )
    return ProblemGraph(n, tuple(edges))


def extract_graph(problem: QcqpProblem, tol: float = GRAPH_ZERO_TOL) -> ProblemGraph:
    """Sparsity graph of the whole problem (objective plus active constraints)."""
    mats = [problem.objective] + [c.matrix for c in problem.constraints if c.active]
    return _edges_of(mats, problem.n, tol)


def matrix_graph(h: np.ndarray, tol: float = GRAPH_ZERO_TOL) -> ProblemGraph:
    """Sparsity graph of a single Hermitian matrix."""
    h = as_hermitian(h)
    return _edges_of([h], h.shape[0], tol)


def is_connected(graph: ProblemGraph) -> bool:
    if graph.n == 0:
        return True
    adj = graph.adjacency()
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == graph.n


def is_tree(graph: ProblemGraph) -> bool:
    """Connected and acyclic: |E| = n - 1 plus connectivity."""
    return len(graph.edges) == graph.n - 1 and is_connected(graph)


@dataclass
class RelintResult:
    in_relint: bool
    on_boundary: bool
    certificate: np.ndarray | None   # optimal hull weights when the LP is feasible


def origin_in_relint(points: list[complex] | np.ndarray, tol: float = RELINT_TOL) -> RelintResult:
    """Decide whether 0 is in the relative interior of conv(points).

    Solves  max t  s.t.  sum a_l u_l = 0, sum a_l = 1, a_l >= t  exactly with
    a dense simplex.  t* > tol means interior; t* in [0, tol] means the origin
    sits on the hull (boundary); an infeasible LP or t* < 0 means neither.
    """
    pts = np.asarray(points, dtype=np.complex128).ravel()
    if len(pts) == 0:
        raise ValidationError("point set must be nonempty")
    scale = float(np.abs(pts).max())
    if scale > 0:
        pts = pts / scale
    r = len(pts)

    # variables: p_l >= 0 (a_l = t + p_l), tp >= 0, tm >= 0 (t = tp - tm)
    su = pts.sum()
    a_eq = np.zeros((3, r + 2))
    a_eq[0, :r] = pts.real
    a_eq[0, r] = su.real
    a_eq[0, r + 1] = -su.real
    a_eq[1, :r] = pts.imag
    a_eq[1, r] = su.imag
    a_eq[1, r + 1] = -su.imag
    a_eq[2, :r] = 1.0
    a_eq[2, r] = r
    a_eq[2, r + 1] = -r
    b_eq = np.array([0.0, 0.0, 1.0])
    cost = np.zeros(r + 2)
    cost[r] = -1.0
    cost[r + 1] = 1.0

    res = lp.solve_lp(cost, a_eq, b_eq)
    if res.status != "optimal":
        return RelintResult(False, False, None)
    t_star = -res.objective
    weights = res.x[:r] + t_star
    if t_star > tol:
        return RelintResult(True, False, weights)
    if t_star >= 0.0:
        return RelintResult(False, True, weights)
    return RelintResult(False, False, None)


@dataclass
class EdgeConditionEntry:
    edge: tuple[int, int]
    point_set: np.ndarray
    origin_in_relint: bool
    origin_on_boundary: bool


@dataclass
class ConditionReport:
    is_tree: bool
    per_edge: list[EdgeConditionEntry]
    bounded_hint: bool
    overall: bool
    offending_edges: list[tuple[int, int]]

    def to_json_dict(self) -> dict:
        return {
            "is_tree": self.is_tree,
            "bounded_hint": self.bounded_hint,
            "overall": "pass" if self.overall else "fail",
            "offending_edges": [list(e) for e in self.offending_edges],
            "per_edge": [
                {
                    "edge": list(e.edge),
                    "points": [[z.real, z.imag] for z in e.point_set],
                    "origin_in_relint": e.origin_in_relint,
                    "origin_on_boundary": e.origin_on_boundary,
                }
                for e in self.per_edge
            ],
        }


def edge_point_set(problem: QcqpProblem, i: int, j: int) -> np.ndarray:
    """{C_ij} plus the (i, j) entries of every active constraint matrix.

    Zero entries are kept on purpose: the condition is defined on the full
    entry set, and a zero point makes the origin a hull member, which the
    relint test then classifies correctly.
    """
    pts = [problem.objective[i, j]]
    pts += [c.matrix[i, j] for c in problem.constraints if c.active]
    return np.asarray(pts, dtype=np.complex128)


def _bounded_syntactic(problem: QcqpProblem, tol: float = GRAPH_ZERO_TOL) -> bool:
    """Sufficient check: every |x_i|^2 is bounded by some active diagonal row."""
    covered = np.zeros(problem.n, dtype=bool)
    for con in problem.constraints:
        if not con.active:
            continue
        m = con.matrix
        off = np.abs(m - np.diag(np.diag(m))).max(initial=0.0)
        d = np.real(np.diag(m))
        if off <= tol and np.all(d >= -tol):
            covered |= d > tol
    return bool(covered.all())


def check_exactness_condition(
    problem: QcqpProblem, bounded_assertion: bool = False
) -> ConditionReport:
    """Tree test plus the per-edge origin/relative-interior test.

    ``bounded_assertion`` is echoed into ``bounded_hint`` (or'd with a
    sufficient syntactic bound check); boundedness is not decidable from the
    matrices alone and does not enter ``overall``.
    """
    graph = extract_graph(problem)
    tree = is_tree(graph)
    per_edge = []
    offending = []
    for (i, j) in graph.edges:
        pts = edge_point_set(problem, i, j)
        res = origin_in_relint(pts)
        per_edge.append(EdgeConditionEntry((i, j), pts, res.in_relint, res.on_boundary))
        if res.in_relint:
            offending.append((i, j))
    overall = tree and not offending
    bounded = bounded_assertion or _bounded_syntactic(problem)
    return ConditionReport(tree, per_edge, bounded, overall, offending)


# --- JSON serialization ----------------------------------------------------

def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _matrix_from_json(data: list, n: int) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape != (n, n, 2):
        raise ValidationError(f"matrix JSON must be {n}x{n} [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def problem_to_json_dict(problem: QcqpProblem) -> dict:
    return {
        "n": problem.n,
        "objective": _matrix_to_json(problem.objective),
        "constraints": [
            {
                "matrix": _matrix_to_json(c.matrix),
                "upper": None if np.isinf(c.upper) else float(c.upper),
                "label": c.label,
            }
            for c in problem.constraints
        ],
        "pairs": [list(p) for p in problem.pair_map],
    }


def problem_from_json_dict(data: dict) -> QcqpProblem:
    n = int(data["n"])
    objective = _matrix_from_json(data["objective"], n)
    constraints = []
    for entry in data["constraints"]:
        upper = entry.get("upper")
        constraints.append(
            Constraint(
                _matrix_from_json(entry["matrix"], n),
                np.inf if upper is None else float(upper),
                str(entry.get("label", "")),
            )
        )
    pairs = [tuple(int(v) for v in p) for p in data.get("pairs", [])]
    return QcqpProblem(n, objective, constraints, pair_map=pairs)


def load_problem(path: str) -> QcqpProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_json_dict(json.load(fh))
