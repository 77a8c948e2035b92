"""Numerical verification of the strong Joyce structure axioms J1-J5.

Every check walks a :class:`SamplePlan` of points (z, theta), evaluates exact
jets of the potential there, and records the worst residual of each identity.
Exact (algebraic) identities are compared against ``tol`` scaled by the size
of the data; identities needing finite differences use ``fd_tol``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hk import build_hk, fibration_report, frame_point, hk_from_frame, metric_expansion, plebanski_residual
from .isomonodromy import FlowState, integrate_flow
from .jets import Potential, PoleError, central_difference, character_term, eval_jet
from .lattice import pairing

EXACT_TOL = 1e-12
FD_TOL = 1e-5


@dataclass
class SamplePlan:
    """Random points near a base charge plus structured points with theta = 0."""

    seed: int = 0
    n_random: int = 20
    z_center: Sequence[complex] | None = None
    z_radius: float = 0.3
    theta_radius: float = 1.0
    exclusion: float = 1e-3
    n_zero_section: int = 3

    def center(self, n: int) -> np.ndarray:
        if self.z_center is not None:
            c = np.asarray(self.z_center, dtype=complex)
            if c.size != n:
                raise ValueError("z_center has the wrong length")
            return c
        return (1 + 0.25 * np.arange(n)) * np.exp(1j * np.linspace(0.3, 1.3, n))

    def _clear_of_poles(self, p: Potential, z: np.ndarray) -> bool:
        scale = max(1.0, float(np.abs(z).max()))
        for t in p.terms:
            if any(a < 0 and abs(zi) < self.exclusion for a, zi in zip(t.z_exp, z)):
                return False
            if t.z_char_power and abs(sum(c * zi for c, zi in zip(t.z_char, z))) < self.exclusion * scale:
                return False
        return True

    def points(self, p: Potential) -> list[tuple[np.ndarray, np.ndarray]]:
        n = p.n
        rng = np.random.default_rng(self.seed)
        c = self.center(n)
        out = []
        tries = 0
        while len(out) < self.n_random:
            tries += 1
            if tries > 100 * (self.n_random + 1):
                raise PoleError(p.terms[0], "could not sample points away from the poles")
            r = self.z_radius * np.sqrt(rng.uniform(size=n))
            z = c + r * np.exp(2j * np.pi * rng.uniform(size=n))
            th = self.theta_radius * (rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n))
            if self._clear_of_poles(p, z):
                out.append((z, th))
        zeros = [(z, np.zeros(n, dtype=complex)) for z, _ in out[: self.n_zero_section]]
        return out + zeros

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "n_random": self.n_random,
            "z_center": None if self.z_center is None else [[complex(x).real, complex(x).imag] for x in self.z_center],
            "z_radius": self.z_radius,
            "theta_radius": self.theta_radius,
            "exclusion": self.exclusion,
            "n_zero_section": self.n_zero_section,
        }


@dataclass
class JoyceCandidate:
    potential: Potential
    plan: SamplePlan = field(default_factory=SamplePlan)

    @property
    def lattice(self):
        return self.potential.lattice

    def points(self):
        return self.plan.points(self.potential)


@dataclass
class AxiomReport:
    name: str
    residuals: dict[str, float]
    tolerances: dict[str, float]
    n_points: int
    worst_point: dict[str, list] = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.residuals.items() if not v <= self.tolerances[k]]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "failures": self.failures,
            "residuals": self.residuals,
            "tolerances": self.tolerances,
            "n_points": self.n_points,
            "worst_point": self.worst_point,
            "notes": self.notes,
        }


class _Tracker:
    def __init__(self, name):
        self.name = name
        self.res: dict[str, float] = {}
        self.tol: dict[str, float] = {}
        self.where: dict[str, list] = {}
        self.count = 0

    def add(self, key: str, value: float, tol: float, z, theta):
        value = float(value)
        if key not in self.res or not value <= self.res[key]:
            self.res[key] = value
            self.where[key] = [[complex(x).real, complex(x).imag] for x in (*z, *theta)]
        self.tol[key] = tol

    def report(self, **notes) -> AxiomReport:
        return AxiomReport(self.name, self.res, self.tol, self.count, self.where, notes)


def _scale(*arrays) -> float:
    return max([1.0] + [float(np.abs(a).max()) for a in arrays if np.size(a)])


# -- J1 / J2 ---------------------------------------------------------------


def check_J1_J2(c: JoyceCandidate, variant: str = "standard", tol: float = EXACT_TOL) -> AxiomReport:
    """Normalised affine symplectic fibration with base form omega = eta^-1.

    Algebraic identities at each point, plus the gauge-invariant Plebanski
    residual that certifies the structure is hyperkähler.
    """
    p = c.potential
    n = p.n
    tr = _Tracker("J1_J2")
    for z, th in c.points():
        fp = frame_point(p, z, th, variant)
        hk = hk_from_frame(fp)
        s = _scale(hk.g, fp.A)
        fib = fibration_report(hk)
        for key in ("omega_minus_pullback", "kernel_minus", "kernel_plus", "fibre_form", "normalisation"):
            tr.add(key, fib[key] / s, tol, z, th)
        tr.add("rank_omega_minus", abs(fib["rank_omega_minus"] - n), 0, z, th)
        tr.add("eigenspace_dims", abs(fib["eigenspace_dims"][0] - n) + abs(fib["eigenspace_dims"][1] - n), 0, z, th)
        tr.add("metric_expansion", np.abs(hk.g - metric_expansion(fp)).max() / s, tol, z, th)
        tr.add("quaternion", hk.quaternion_residual() / s, tol, z, th)
        tr.add("metric_invariance", hk.invariance_residual() / s**3, tol, z, th)
        tr.add("null_J_minus_iK", hk.null_residual() / s**2, tol, z, th)
        _, pde = plebanski_residual(p, z, th, "pde", fp)
        tr.add("plebanski_pde", pde / s**2, tol, z, th)
        tr.count += 1
    omega = p.lattice.omega_array()
    eta = p.lattice.eta_array()
    tr.add("base_form_inverse", np.abs(omega @ eta - np.eye(n)).max(), tol, [], [])
    return tr.report(variant=variant)


# -- J3 --------------------------------------------------------------------


def _involution(n: int) -> np.ndarray:
    return np.diag([1.0] * n + [-1.0] * n)


def check_J3(c: JoyceCandidate, tol: float = EXACT_TOL) -> AxiomReport:
    """iota*(g) = -g, iota*(I) = I, iota*(J +- iK) = -(J +- iK) and oddness of W mod quadratics."""
    p = c.potential
    n = p.n
    D = _involution(n)
    tr = _Tracker("J3")
    for z, th in c.points():
        a = build_hk(p, z, th)
        b = build_hk(p, z, -th)
        s = _scale(a.g, b.g)
        tr.add("metric_odd", np.abs(D @ b.g @ D + a.g).max() / s, tol, z, th)
        tr.add("I_even", np.abs(D @ b.I @ D - a.I).max() / s, tol, z, th)
        for sign, key in ((1, "J_plus_iK_odd"), (-1, "J_minus_iK_odd")):
            Na = a.J + sign * 1j * a.K
            Nb = b.J + sign * 1j * b.K
            tr.add(key, np.abs(D @ Nb @ D + Na).max() / s, tol, z, th)
        Ta = a.frame.theta_derivs(3)
        Tb = b.frame.theta_derivs(3)
        tr.add("W_odd_mod_quadratic", np.abs(Ta - Tb).max() / _scale(Ta, Tb), tol, z, th)
        tr.count += 1
    return tr.report()


# -- J4 --------------------------------------------------------------------


def _tensors(p: Potential, x: np.ndarray) -> dict[str, np.ndarray]:
    n = p.n
    hk = build_hk(p, x[:n], x[n:])
    return {"g": hk.g, "I": hk.I, "N+": hk.J + 1j * hk.K, "N-": hk.J - 1j * hk.K}


def lie_derivatives_euler(p: Potential, z, theta, step: float = 1e-5) -> dict[str, np.ndarray]:
    """L_E of g, I, J+iK, J-iK for E = sum z_i d/dz_i.

    The flow exp(tE) scales z by e^t, so its Jacobian generator P = diag(1, 0)
    enters exactly (P^T g + g P for the metric, [T, P] for endomorphisms);
    only the transport term d/dt T(exp(tE) x) is a central difference.
    """
    n = p.n
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=complex)
    P = np.diag([1.0] * n + [0.0] * n)
    T0 = _tensors(p, np.concatenate([z, theta]))
    fwd = _tensors(p, np.concatenate([np.exp(step) * z, theta]))
    bwd = _tensors(p, np.concatenate([np.exp(-step) * z, theta]))
    out = {}
    for k, v in T0.items():
        transport = (fwd[k] - bwd[k]) / (2 * step)
        algebraic = P @ v + v @ P if k == "g" else v @ P - P @ v
        out[k] = transport + algebraic
    return out


def term_degree(t) -> int:
    """Homogeneity degree in z of z^a / Z(c)^k (theta factors do not scale)."""
    return sum(t.z_exp) - t.z_char_power


def euler_defect(p: Potential) -> Potential:
    """sum_i z_i d/dz_i W_{theta theta} + W_{theta theta} as an exact potential.

    Each term is homogeneous, so Euler's relation turns the operator into
    multiplication of the term by (degree + 1); the result is zero exactly
    when every term of W_{theta theta} has degree -1.
    """
    n = p.n
    terms = []
    for a in range(n):
        for b in range(a, n):
            for t in p.partial((n + a, n + b)).terms:
                d = term_degree(t) + 1
                if d:
                    terms.append(t.with_factor(t.factor * d))
    return Potential(p.lattice, terms)


def euler_residual(p: Potential, z, theta) -> float:
    """max |sum_i z_i d/dz_i W_{theta_a theta_b} + W_{theta_a theta_b}| from jets (rounding-level)."""
    n = p.n
    jet = eval_jet(p, z, theta, order=3)
    worst = 0.0
    for a in range(n):
        for b in range(a, n):
            e = sum(z[i] * jet.d(i, n + a, n + b) for i in range(n)) + jet.d(n + a, n + b)
            worst = max(worst, abs(e))
    return worst


def check_J4(c: JoyceCandidate, tol: float = EXACT_TOL, fd_tol: float = FD_TOL, step: float = 1e-5) -> AxiomReport:
    """L_E g = g, L_E I = 0, L_E (J +- iK) = -+(J +- iK), and the Euler identity on W_{theta theta}."""
    p = c.potential
    n = p.n
    tr = _Tracker("J4")
    defect = euler_defect(p)
    for z, th in c.points():
        x = np.concatenate([z, th])
        T = _tensors(p, x)
        L = lie_derivatives_euler(p, z, th, step)
        s = _scale(*T.values())
        A = eval_jet(p, z, th, order=2)
        sA = _scale(np.array([A.d(n + a, n + b) for a in range(n) for b in range(n)]))
        tr.add("euler_exact", abs(defect.value(z, th)) / sA if defect.terms else 0.0, 0.0, z, th)
        tr.add("euler_jet", euler_residual(p, z, th) / sA, tol, z, th)
        tr.add("lie_g", np.abs(L["g"] - T["g"]).max() / s, fd_tol, z, th)
        tr.add("lie_I", np.abs(L["I"]).max() / s, fd_tol, z, th)
        tr.add("lie_J_plus_iK", np.abs(L["N+"] + T["N+"]).max() / s, fd_tol, z, th)
        tr.add("lie_J_minus_iK", np.abs(L["N-"] - T["N-"]).max() / s, fd_tol, z, th)
        tr.count += 1
    return tr.report(step=step)


# -- J5 --------------------------------------------------------------------


def structurally_periodic(p: Potential, order: int = 2) -> bool:
    """True when every term of the order-th theta derivatives is a pure integral character."""
    n = p.n
    idx = [tuple(n + i for i in k) for k in np.ndindex(*(n,) * order)]
    for key in idx:
        for t in p.partial(key).terms:
            if any(t.theta_exp) or any(not isinstance(b, int) for b in t.theta_char):
                return False
    return True


def _theta_table(p: Potential, z, theta, order: int) -> np.ndarray:
    n = p.n
    jet = eval_jet(p, z, theta, order=order)
    return np.array([jet.d(*(n + i for i in k)) for k in np.ndindex(*(n,) * order)])


def check_J5(c: JoyceCandidate, tol: float = EXACT_TOL, relax: bool = False) -> AxiomReport:
    """W_{theta theta} (or W_{theta theta theta} with ``relax``) invariant under theta_j -> theta_j + 2 pi i."""
    p = c.potential
    n = p.n
    order = 3 if relax else 2
    key = "third_derivatives" if relax else "second_derivatives"
    tr = _Tracker("J5")
    for z, th in c.points():
        base = _theta_table(p, z, th, order)
        for j in range(n):
            shifted = th.copy()
            shifted[j] += 2j * np.pi
            other = _theta_table(p, z, shifted, order)
            tr.add(key, np.abs(other - base).max() / _scale(base, other), tol, z, th)
        tr.count += 1
    return tr.report(relaxed=relax, structurally_periodic=structurally_periodic(p, order))


# -- gauge, linearisation -----------------------------------------------------


def gauge_simplify(p: Potential, check: JoyceCandidate | None = None) -> Potential:
    """W - sum_k theta_k W_{theta_k}(z, 0); warns if W is not odd at the plan's points."""
    if check is not None:
        rep = check_J3(JoyceCandidate(p, check.plan))
        if rep.residuals.get("W_odd_mod_quadratic", 0.0) > EXACT_TOL:
            warnings.warn("potential is not odd in theta; gauge_simplify may not reach the simplified equation")
    n = p.n
    out = p
    for k in range(n):
        linear = p.partial((n + k,)).restrict_theta_zero().times_theta(k)
        out = out - linear
    return out


@dataclass
class LinearisedConnection:
    christoffel: np.ndarray  # [i, j, q]: nabla_i d_j = sum_q G[i, j, q] d_q
    torsion: float
    curvature: np.ndarray  # [k, l, i, q]: R(d_k, d_l) d_i = sum_q R[...] d_q
    flatness: float


def linearised_christoffel(p: Potential, z) -> np.ndarray:
    n = p.n
    theta0 = np.zeros(n, dtype=complex)
    eta = p.lattice.eta_array()
    T = np.empty((n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                T[i, j, k] = p.partial((n + i, n + j, n + k)).value(z, theta0)
    return -np.einsum("ijp,pq->ijq", T, eta)


def linearised_connection(p: Potential, z, step: float = 1e-5) -> LinearisedConnection:
    """Christoffels -sum_p eta^{pq} W_{theta_i theta_j theta_p}(z, 0) and a finite-difference curvature."""
    z = np.asarray(z, dtype=complex)
    n = p.n
    G = linearised_christoffel(p, z)
    dG = np.array([central_difference(lambda x: linearised_christoffel(p, x), z, k, step) for k in range(n)])
    R = dG - dG.transpose(1, 0, 2, 3)
    R += np.einsum("ksq,lis->kliq", G, G) - np.einsum("lsq,kis->kliq", G, G)
    torsion = float(np.abs(G - G.transpose(1, 0, 2)).max())
    return LinearisedConnection(G, torsion, R, float(np.abs(R).max()) / _scale(G, G @ G))


# -- builder from flow data ------------------------------------------------------


def build_W_from_F(state: FlowState, symmetrize: bool = False) -> Potential:
    """sum_gamma F_gamma exp(theta(gamma)) / Z(gamma) at the state's charge.

    With ``symmetrize`` the terms F_gamma exp(-theta(gamma)) / Z(-gamma) are
    added, making W odd; this is only flow-consistent when the support pairs
    trivially with its negative (collinear support).
    """
    terms = []
    for g, f in state.F.items():
        if f == 0:
            continue
        terms.append(character_term(g, f))
        if symmetrize:
            if any(pairing(state.lattice, a, b) for a in state.support for b in state.support):
                raise ValueError("symmetrised builder needs a support with vanishing pairings")
            terms.append(character_term([-x for x in g], f))
    return Potential(state.lattice, terms)


def _flow_derivatives(state: FlowState, z: np.ndarray, step: float, rtol: float):
    base = np.asarray(state.charge.values, dtype=complex)
    at = integrate_flow(state, [base, z], rtol=rtol) if np.any(z != base) else state
    dF = []
    for j in range(len(z)):
        h = step * max(1.0, abs(z[j]))
        e = np.zeros(len(z), dtype=complex)
        e[j] = h
        plus = integrate_flow(at, [z, z + e], rtol=rtol)
        minus = integrate_flow(at, [z, z - e], rtol=rtol)
        dF.append({g: (plus.F[g] - minus.F[g]) / (2 * h) for g in at.support})
    return at, dF


def point_residual(
    state: FlowState,
    z,
    theta,
    step: float = 1e-4,
    rtol: float = 1e-12,
    within_truncation: bool = False,
) -> float:
    """Residual of W_{theta_i z_j} - W_{theta_j z_i} = sum eta^{pq} W_{theta_i theta_p} W_{theta_j theta_q}.

    W is the builder potential with F_gamma(z) from the flow; z-derivatives of
    F come from re-integrating the flow to z +- h e_j.  The right-hand side is
    summed pairwise over terms with the integer pairing, so <gamma, gamma> = 0
    contributes exactly nothing.  ``within_truncation`` drops right-hand-side
    products whose class alpha + beta falls outside the support.
    """
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=complex)
    n = len(z)
    at, dF = _flow_derivatives(state, z, step, rtol)
    charge = at.charge
    sup = [g for g in at.support if at.F[g] != 0 or any(d[g] != 0 for d in dF)]
    val = {}
    for g in sup:
        Zg = charge(g)
        if Zg == 0:
            raise PoleError(character_term(g), f"Z({list(g)}) = 0")
        val[g] = (np.exp(sum(b * t for b, t in zip(g, theta))), Zg)
    lhs = np.zeros((n, n), dtype=complex)
    for g in sup:
        e, Zg = val[g]
        for i in range(n):
            for j in range(n):
                if i != j:
                    lhs[i, j] += e / Zg * (g[i] * dF[j][g] - g[j] * dF[i][g])
    rhs = np.zeros((n, n), dtype=complex)
    support = set(at.support)
    for a in sup:
        for b in sup:
            m = pairing(at.lattice, a, b)
            if not m:
                continue
            if within_truncation and tuple(x + y for x, y in zip(a, b)) not in support:
                continue
            c = m * at.F[a] * at.F[b] * val[a][0] * val[b][0] / (val[a][1] * val[b][1])
            rhs += c * np.outer(a, b)
    return float(np.abs(lhs - rhs).max())
