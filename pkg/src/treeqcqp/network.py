"""Radial power network model and its constraint matrices.

Buses carry fixed demands, generation bounds and squared-voltage-magnitude
bounds; lines carry admittance y_ij = g_ij - i*b_ij with g, b > 0 (resistive,
inductive) plus optional flow and thermal-loss limits.  All quantities are
per-unit; case-file parsing converts physical units on ingestion.

Quadratic-form identities implemented here (V the complex bus-voltage
vector):

* bus injection:  P_k = V^H Phi_k V,  Q_k = V^H Psi_k V  where
  Y_k = e_k e_k^H Y,  Phi_k = (Y_k^H + Y_k)/2,  Psi_k = (Y_k^H - Y_k)/(2i);
* sending-end flow: P_ij = Re{V_i (V_i - V_j)^H y_ij^H} = V^H M_ij V;
* line loss: L_ij = P_ij + P_ji = V^H T_ij V with T_ij PSD.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import ValidationError


@dataclass
class Bus:
    p_demand: float = 0.0
    q_demand: float = 0.0
    p_gen_min: float = 0.0
    p_gen_max: float = 0.0
    q_gen_min: float = 0.0
    q_gen_max: float = 0.0
    w_min: float = 0.9025          # squared voltage bounds
    w_max: float = 1.1025
    shunt: complex = 0.0

    def validate(self, tag: str) -> None:
        if not (0.0 < self.w_min <= self.w_max):
            raise ValidationError(f"{tag}: need 0 < w_min <= w_max")
        for lo, hi, name in (
            (self.p_gen_min, self.p_gen_max, "p_gen"),
            (self.q_gen_min, self.q_gen_max, "q_gen"),
        ):
            if np.isfinite(lo) and np.isfinite(hi) and lo > hi:
                raise ValidationError(f"{tag}: {name} bounds inverted")


@dataclass
class Line:
    i: int                         # 0-based bus indices
    j: int
    g: float
    b: float
    f_max: float = math.inf
    l_max: float = math.inf

    def validate(self) -> None:
        if self.i == self.j:
            raise ValidationError(f"line ({self.i}, {self.j}): self-loop")
        if not (self.g > 0.0 and self.b > 0.0):
            raise ValidationError(
                f"line ({self.i}, {self.j}): conductance and susceptance must be positive"
            )

    @property
    def y(self) -> complex:
        return self.g - 1j * self.b


@dataclass
class PowerNetwork:
    buses: list[Bus]
    lines: list[Line]
    power_base_mw: float = 1.0
    voltage_base_kv: float = 12.47     # line-to-line
    gauge_bus: int = 0                 # angle reference (substation)

    @property
    def n(self) -> int:
        return len(self.buses)

    def validate(self) -> None:
        n = self.n
        if n < 1:
            raise ValidationError("network needs at least one bus")
        seen = set()
        for ln in self.lines:
            ln.validate()
            if not (0 <= ln.i < n and 0 <= ln.j < n):
                raise ValidationError(f"line ({ln.i}, {ln.j}): bus index out of range")
            key = (min(ln.i, ln.j), max(ln.i, ln.j))
            if key in seen:
                raise ValidationError(f"duplicate line between buses {key}")
            seen.add(key)
        for k, bus in enumerate(self.buses):
            bus.validate(f"bus {k}")
        if len(self.lines) != n - 1 or not self._connected():
            raise ValidationError("network is not radial (bus-line graph must be a tree)")

    def _connected(self) -> bool:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for ln in self.lines:
            adj[ln.i].append(ln.j)
            adj[ln.j].append(ln.i)
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def injection_bounds(self, k: int) -> tuple[float, float, float, float]:
        """(P_min, P_max, Q_min, Q_max) at bus k: generation bounds minus demand."""
        bus = self.buses[k]
        return (
            bus.p_gen_min - bus.p_demand,
            bus.p_gen_max - bus.p_demand,
            bus.q_gen_min - bus.q_demand,
            bus.q_gen_max - bus.q_demand,
        )


@dataclass
class ObjectiveSpec:
    kind: str = "loss"                   # "voltage" | "loss" | "cost"
    cost_coeffs: np.ndarray | None = None

    def validate(self, n: int) -> None:
        if self.kind not in ("voltage", "loss", "cost"):
            raise ValidationError(f"unknown objective kind {self.kind!r}")
        if self.kind == "cost":
            if self.cost_coeffs is None or len(self.cost_coeffs) != n:
                raise ValidationError("cost objective needs one coefficient per bus")
            if np.any(np.asarray(self.cost_coeffs) < 0):
                raise ValidationError("cost coefficients must be nonnegative")


def build_admittance(net: PowerNetwork) -> np.ndarray:
    """Bus admittance matrix: Y_kk = y_kk + sum of incident line admittances,
    Y_ij = -y_ij on lines.  Symmetric, generally not Hermitian."""
    n = net.n
    y = np.zeros((n, n), dtype=np.complex128)
    for k, bus in enumerate(net.buses):
        y[k, k] += bus.shunt
    for ln in net.lines:
        y[ln.i, ln.j] -= ln.y
        y[ln.j, ln.i] -= ln.y
        y[ln.i, ln.i] += ln.y
        y[ln.j, ln.j] += ln.y
    return y


def build_injection_matrices(net: PowerNetwork, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Phi_k, Psi_k, J_k): Hermitian forms giving P_k, Q_k, |V_k|^2."""
    n = net.n
    y = build_admittance(net)
    yk = np.zeros((n, n), dtype=np.complex128)
    yk[k, :] = y[k, :]
    phi = (yk.conj().T + yk) / 2.0
    psi = (yk.conj().T - yk) / 2.0j
    jk = np.zeros((n, n), dtype=np.complex128)
    jk[k, k] = 1.0
    return phi, psi, jk


def build_flow_matrices(net: PowerNetwork, i: int, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(M_ij, M_ji, T_ij) for a line: sending-end flows and the PSD loss form."""
    line = None
    for ln in net.lines:
        if {ln.i, ln.j} == {i, j}:
            line = ln
            break
    if line is None:
        raise ValidationError(f"({i}, {j}) is not a line of the network")
    n = net.n
    yij = line.y

    def m_of(a: int, bidx: int) -> np.ndarray:
        # V^H M V = Re{V_a (V_a - V_b)^H y^H}; the conj(V_a) V_b coefficient
        # is -y/2, so M[a, b] = -y/2 and M[b, a] its conjugate
        m = np.zeros((n, n), dtype=np.complex128)
        m[a, a] = yij.real
        m[a, bidx] = -yij / 2.0
        m[bidx, a] = -yij.conjugate() / 2.0
        return m

    m_ij = m_of(i, j)
    m_ji = m_of(j, i)
    return m_ij, m_ji, m_ij + m_ji


def build_objective(net: PowerNetwork, spec: ObjectiveSpec) -> np.ndarray:
    """Objective matrix C: identity (voltage), (Y + Y^H)/2 (loss), or
    sum_k c_k Phi_k (cost).  Must be PSD; voltage is the only definite one."""
    spec.validate(net.n)
    if spec.kind == "voltage":
        return np.eye(net.n, dtype=np.complex128)
    y = build_admittance(net)
    if spec.kind == "loss":
        c = (y + y.conj().T) / 2.0
    else:
        c = np.zeros((net.n, net.n), dtype=np.complex128)
        for k, ck in enumerate(np.asarray(spec.cost_coeffs, dtype=np.float64)):
            if ck != 0.0:
                phi, _, _ = build_injection_matrices(net, k)
                c = c + ck * phi
    from .linalg import min_eigenvalue

    scale = 1.0 + float(np.abs(c).max(initial=0.0))
    if min_eigenvalue(c) < -1e-8 * scale:
        raise ValidationError(f"{spec.kind} objective matrix is not PSD for this network")
    return c


def complex_power_injections(v: np.ndarray, y: np.ndarray) -> np.ndarray:
    """S_k = V_k conj((Y V)_k): direct circuit computation, used as the
    cross-check oracle for the quadratic forms."""
    v = np.asarray(v, dtype=np.complex128)
    return v * np.conj(y @ v)
