"""Classical and quantum isomonodromy flows for the coefficients F_gamma.

    dF_gamma = sum_{alpha + beta = gamma} c(<alpha, beta>) F_alpha F_beta dlog Z(beta)

with c(m) = m (classical) or c(m) = (2/hbar) sin(hbar m / 2) (quantum).  The
sum runs over ordered pairs of support classes.  The support is closed under
the sums the flow generates, inside a cone truncation; since every class is
a sum of strictly lower-degree classes, the truncated system is exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .lattice import CentralCharge, Lattice, Vector, as_vector, pairing, vadd
from .torus import ConeTruncation, sine_coefficient


class ActiveRayCollision(ArithmeticError):
    """Z(beta) vanishes (or nearly so) along the integration path."""

    def __init__(self, beta: Vector, where: str):
        super().__init__(f"Z({list(beta)}) = 0 {where}")
        self.beta = beta


def support_closure(lattice: Lattice, support: Iterable[Sequence[int]], truncation: ConeTruncation) -> list[Vector]:
    """Smallest set containing ``support`` and every alpha + beta with <alpha, beta> != 0 in the truncation."""
    out = {as_vector(g) for g in support}
    for g in out:
        if g not in truncation:
            raise ValueError(f"class {g} lies outside the truncation")
    frontier = set(out)
    while frontier:
        new = set()
        for a in frontier:
            for b in out | new:
                s = vadd(a, b)
                if s in truncation and s not in out and s not in new and any(s) and pairing(lattice, a, b):
                    new.add(s)
        out |= new
        frontier = new
    return sorted(out, key=lambda g: (truncation.degree(g), g))


@dataclass
class FlowState:
    """Charge values z_i and coefficients F_gamma on a closed support."""

    lattice: Lattice
    charge: CentralCharge
    F: dict[Vector, complex]
    truncation: ConeTruncation
    support: list[Vector] = field(default_factory=list)

    def __post_init__(self):
        F = {as_vector(g): complex(v) for g, v in self.F.items()}
        self.support = support_closure(self.lattice, list(F) + list(self.support), self.truncation)
        self.F = {g: F.get(g, 0j) for g in self.support}
        self._pairs = None

    @classmethod
    def create(cls, lattice, z, F: Mapping, truncation) -> "FlowState":
        return cls(lattice, CentralCharge(z), dict(F), truncation)

    def with_values(self, z, values: Sequence[complex]) -> "FlowState":
        out = FlowState.__new__(FlowState)
        out.lattice, out.truncation, out.support = self.lattice, self.truncation, self.support
        out.charge = CentralCharge(z)
        out.F = dict(zip(self.support, (complex(v) for v in values)))
        out._pairs = self._pairs
        return out

    def vector(self) -> np.ndarray:
        return np.array([self.F[g] for g in self.support], dtype=complex)

    def pairs(self) -> list[tuple[int, int, int, int]]:
        """(index of gamma, index of alpha, index of beta, <alpha, beta>) for ordered pairs."""
        if self._pairs is None:
            pos = {g: k for k, g in enumerate(self.support)}
            out = []
            for (ia, a), (ib, b) in itertools.product(enumerate(self.support), repeat=2):
                m = pairing(self.lattice, a, b)
                s = vadd(a, b)
                if m and s in pos:
                    out.append((pos[s], ia, ib, m))
            self._pairs = out
        return self._pairs

    def max_abs_diff(self, other: "FlowState") -> float:
        keys = set(self.F) | set(other.F)
        return max((abs(self.F.get(g, 0) - other.F.get(g, 0)) for g in keys), default=0.0)


def _rhs_vector(state: FlowState, F: np.ndarray, z, dz, coeff: Callable[[int], float]) -> np.ndarray:
    charge = CentralCharge(z)
    dlog = []
    for b in state.support:
        Zb = charge(b)
        if Zb == 0:
            raise ActiveRayCollision(b, f"at z = {list(z)}")
        dlog.append(charge.differential(b, dz) / Zb)
    out = np.zeros(len(state.support), dtype=complex)
    for g, a, b, m in state.pairs():
        c = coeff(m)
        if c:
            out[g] += c * F[a] * F[b] * dlog[b]
    return out


def classical_flow_rhs(state: FlowState, direction: Sequence[complex]) -> dict[Vector, complex]:
    """dF_gamma evaluated on the tangent vector ``direction`` = dz."""
    v = _rhs_vector(state, state.vector(), state.charge.values, direction, lambda m: m)
    return dict(zip(state.support, v))


def quantum_coefficient(m: int, hbar: float) -> float:
    """(1/(i hbar)) (L^{m/2} - L^{-m/2}) with L = exp(i hbar), i.e. (2/hbar) sin(hbar m / 2)."""
    return sine_coefficient(m, hbar)


def quantum_flow_rhs(state: FlowState, direction: Sequence[complex], hbar: float) -> dict[Vector, complex]:
    if hbar == 0:
        raise ZeroDivisionError("hbar = 0: use classical_flow_rhs")
    v = _rhs_vector(state, state.vector(), state.charge.values, direction, lambda m: quantum_coefficient(m, hbar))
    return dict(zip(state.support, v))


def _segment_collision(state: FlowState, za: np.ndarray, zb: np.ndarray, tol: float) -> None:
    for b in state.support:
        A = sum(x * y for x, y in zip(b, za))
        D = sum(x * y for x, y in zip(b, zb)) - A
        # closest approach of A + s D to 0 on s in [0, 1]
        if D == 0:
            s, dist = 0.0, abs(A)
        else:
            s = min(1.0, max(0.0, -(A * np.conj(D)).real / abs(D) ** 2))
            dist = abs(A + s * D)
        scale = max(abs(A), abs(A + D), 1e-300)
        if dist <= tol * scale:
            raise ActiveRayCollision(b, f"on the path segment at s = {s:.6g}")


def integrate_flow(
    state0: FlowState,
    path: Sequence[Sequence[complex]],
    rhs: str = "classical",
    hbar: float | None = None,
    rtol: float = 1e-10,
    atol: float | None = None,
    trajectory: list | None = None,
    collision_tol: float = 1e-9,
) -> FlowState:
    """Integrate the flow along the polygon through ``path`` (DOP853 on each segment).

    The state is assumed to sit at ``path[0]``.  If ``trajectory`` is a list,
    rows ``(segment, s, z, F)`` are appended at the start and end of each segment.
    """
    if rhs == "classical":
        coeff = lambda m: m
    elif rhs == "quantum":
        if not hbar:
            raise ZeroDivisionError("quantum flow needs hbar != 0")
        coeff = lambda m: quantum_coefficient(m, hbar)
    else:
        raise ValueError("rhs must be 'classical' or 'quantum'")
    pts = [np.asarray(p, dtype=complex) for p in path]
    if not pts:
        return state0
    F = state0.vector()
    if atol is None:
        atol = rtol * max(1e-3, float(np.abs(F).max()) if F.size else 1.0) * 1e-2
    if trajectory is not None:
        trajectory.append((0, 0.0, pts[0].copy(), F.copy()))
    for k, (za, zb) in enumerate(zip(pts[:-1], pts[1:])):
        dz = zb - za
        if not np.any(dz):
            continue
        _segment_collision(state0, za, zb, collision_tol)
        if not state0.pairs():
            continue

        def f(s, y, za=za, dz=dz):
            return _rhs_vector(state0, y, za + s * dz, dz, coeff)

        sol = solve_ivp(f, (0.0, 1.0), F, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            worst = min(state0.support, key=lambda b: min(abs(sum(x * y for x, y in zip(b, za + s * dz))) for s in np.linspace(0, 1, 101)))
            raise ActiveRayCollision(worst, f"(integrator failure: {sol.message})")
        F = sol.y[:, -1]
        if trajectory is not None:
            trajectory.append((k + 1, 1.0, zb.copy(), F.copy()))
    return state0.with_values(pts[-1], F)


def circle_path(center: Sequence[complex], index: int, radius: float, vertices: int = 24) -> list[np.ndarray]:
    """Closed polygon moving z_index around a circle, other charges fixed."""
    c = np.asarray(center, dtype=complex)
    out = []
    for k in range(vertices + 1):
        p = c.copy()
        p[index] += radius * np.exp(2j * np.pi * k / vertices)
        out.append(p)
    # start and end at the center
    return [c] + out + [c]


def pentagon_closed_form(F1: complex, F2: complex, c12: complex, z: Sequence[complex], z0: Sequence[complex]) -> complex:
    """F_{g1+g2}(z) = F1 F2 log((Z2/Z1)(z) / (Z2/Z1)(z0)) + c12 for the three-class support."""
    r = (z[1] / z[0]) / (z0[1] / z0[0])
    return F1 * F2 * np.log(r) + c12
