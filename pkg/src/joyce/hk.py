"""Pointwise complex hyperkähler data built from a potential W.

Coordinates on X are ordered ``(z_1..z_n, theta_1..theta_n)``.  Frames are
ordered ``(v_1..v_n, h_1..h_n)`` with

    v_i = d/dtheta_i,     h_i = d/dz_i + sum_{p,q} eta^{pq} W_{theta_i theta_p} d/dtheta_q.

The frame matrix ``P`` has the frame vectors as columns, so a tensor with
frame components ``T_f`` has coordinate components ``P T_f P^-1`` (endomorphisms)
or ``P^-T T_f P^-1`` (bilinear forms).  In the frame basis

    I = diag(i, -i),  J = [[0, -1], [1, 0]],  K = [[0, -i], [-i, 0]],
    g = [[0, omega], [omega^T, 0]].

Two-forms are matrices ``Omega[a, b] = Omega(e_a, e_b)`` with the wedge
convention ``(alpha ^ beta)(u, w) = alpha(u) beta(w) - alpha(w) beta(u)``;
``Omega_A(u, w) = g(u, A w)``.  With this convention ``Omega_-(h_i, h_j) = 2 omega_ij``.

Connection tables store ``nabla_{e_a} e_b = sum_c G[a, b, c] e_c`` and curvature
tables ``R(e_a, e_b) e_c = sum_d R[a, b, c, d] e_d`` with
``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .jets import Jet4, Potential, central_difference, eval_jet

FRAME_VARIANTS = ("standard", "transposed_eta", "permuted")


# -- frames -----------------------------------------------------------------


def theta_hessian(p: Potential, z, theta) -> np.ndarray:
    n = p.n
    A = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            A[i, j] = A[j, i] = p.partial((n + i, n + j)).value(z, theta)
    return A


def _frame_matrix(A: np.ndarray, eta: np.ndarray, variant: str) -> np.ndarray:
    n = A.shape[0]
    if variant == "standard":
        B = A @ eta
        zpart = np.eye(n)
    elif variant == "transposed_eta":
        B = A @ eta.T
        zpart = np.eye(n)
    elif variant == "permuted":
        B = A @ eta
        zpart = np.roll(np.eye(n), 1, axis=0)
    else:
        raise ValueError(f"unknown frame variant {variant!r}")
    P = np.zeros((2 * n, 2 * n), dtype=complex)
    P[n:, :n] = np.eye(n)
    P[:n, n:] = zpart
    P[n:, n:] = B.T
    return P


@dataclass
class FramePoint:
    """Frames and coframes of X at one point.

    ``P[:, a]`` is the a-th frame vector in coordinates; the rows of ``coframe``
    are the dual covectors ``v^1..v^n, h^1..h^n``.
    """

    z: np.ndarray
    theta: np.ndarray
    jet: Jet4
    eta: np.ndarray
    omega: np.ndarray
    A: np.ndarray
    P: np.ndarray
    coframe: np.ndarray
    variant: str = "standard"

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def v(self) -> np.ndarray:
        return self.P[:, : self.n]

    @property
    def h(self) -> np.ndarray:
        return self.P[:, self.n :]

    def W(self, *idx) -> complex:
        return self.jet.d(*idx)

    def theta_derivs(self, order: int) -> np.ndarray:
        """Array of W_{theta...theta} with ``order`` indices."""
        n = self.n
        shape = (n,) * order
        out = np.empty(shape, dtype=complex)
        for idx in np.ndindex(*shape):
            out[idx] = self.jet.d(*(n + i for i in idx))
        return out

    def frame_jacobian(self) -> np.ndarray:
        """dP[k] = d P / d x_k (frame coefficient derivatives), exact from the jet."""
        n = self.n
        dP = np.zeros((2 * n, 2 * n, 2 * n), dtype=complex)
        eta = self.eta.T if self.variant == "transposed_eta" else self.eta
        for k in range(2 * n):
            dA = np.array([[self.jet.d(k, n + i, n + j) for j in range(n)] for i in range(n)])
            dP[k, n:, n:] = (dA @ eta).T
        return dP


def frame_point(p: Potential, z, theta, variant: str = "standard", order: int = 4) -> FramePoint:
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=complex)
    jet = eval_jet(p, z, theta, order)
    n = p.n
    eta = p.lattice.eta_array()
    omega = p.lattice.omega_array()
    A = np.array([[jet.d(n + i, n + j) for j in range(n)] for i in range(n)])
    P = _frame_matrix(A, eta, variant)
    return FramePoint(z, theta, jet, eta, omega, A, P, np.linalg.inv(P), variant)


# -- hyperkähler structure -------------------------------------------------


def frame_structures(n: int, omega: np.ndarray) -> dict[str, np.ndarray]:
    one, zero = np.eye(n), np.zeros((n, n))
    I = np.block([[1j * one, zero], [zero, -1j * one]])
    J = np.block([[zero, -one], [one, zero]])
    K = np.block([[zero, -1j * one], [-1j * one, zero]])
    g = np.block([[zero, omega], [omega.T, zero]]).astype(complex)
    return {"I": I, "J": J, "K": K, "g": g}


@dataclass
class HKPoint:
    """Metric and complex structures in the coordinate basis (d/dz, d/dtheta)."""

    g: np.ndarray
    I: np.ndarray
    J: np.ndarray
    K: np.ndarray
    frame: FramePoint

    def endo(self, name: str) -> np.ndarray:
        return {"I": self.I, "J": self.J, "K": self.K}[name]

    def quaternion_residual(self) -> float:
        one = np.eye(len(self.g))
        res = [self.I @ self.I + one, self.J @ self.J + one, self.K @ self.K + one, self.I @ self.J @ self.K + one]
        return max(np.abs(r).max() for r in res)

    def invariance_residual(self) -> float:
        """max over A of |A^T g A - g|."""
        return max(np.abs(A.T @ self.g @ A - self.g).max() for A in (self.I, self.J, self.K))

    def null_residual(self) -> float:
        """|(J - iK)^2|."""
        N = self.J - 1j * self.K
        return float(np.abs(N @ N).max())

    def symmetry_residual(self) -> float:
        return float(np.abs(self.g - self.g.T).max())


def build_hk(p: Potential, z, theta, variant: str = "standard") -> HKPoint:
    fp = frame_point(p, z, theta, variant)
    return hk_from_frame(fp)


def hk_from_frame(fp: FramePoint) -> HKPoint:
    s = frame_structures(fp.n, fp.omega)
    P, Q = fp.P, fp.coframe
    return HKPoint(
        g=Q.T @ s["g"] @ Q,
        I=P @ s["I"] @ Q,
        J=P @ s["J"] @ Q,
        K=P @ s["K"] @ Q,
        frame=fp,
    )


def metric_expansion(fp: FramePoint) -> np.ndarray:
    """g = sum omega_ij (dtheta^i dz^j + dz^j dtheta^i) - sum W_{theta_i theta_j} (dz^i dz^j + dz^j dz^i)."""
    n = fp.n
    g = np.zeros((2 * n, 2 * n), dtype=complex)
    g[n:, :n] = fp.omega
    g[:n, n:] = fp.omega.T
    g[:n, :n] = -2 * fp.A
    return g


# -- symplectic forms ---------------------------------------------------------


def symplectic_forms(hk: HKPoint) -> dict[str, np.ndarray]:
    """Omega_A = g A for A in I, J, K; Omega_pm = Omega_J pm i Omega_K."""
    out = {name: hk.g @ hk.endo(name) for name in "IJK"}
    out["+"] = out["J"] + 1j * out["K"]
    out["-"] = out["J"] - 1j * out["K"]
    return out


def pullback_base_form(omega: np.ndarray) -> np.ndarray:
    """pi^* of sum omega_ij dz_i ^ dz_j as a coordinate matrix."""
    n = len(omega)
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = omega - omega.T
    return out


def eigenspace(A: np.ndarray, value: complex, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) of ker(A - value)."""
    m = A - value * np.eye(len(A))
    _, s, vh = np.linalg.svd(m)
    return vh[s <= tol * max(1.0, s.max())].conj().T


def fibration_report(hk: HKPoint) -> dict[str, float]:
    """Residuals of the affine symplectic fibration identities at one point."""
    fp = hk.frame
    n = fp.n
    forms = symplectic_forms(hk)
    out = {
        "omega_minus_pullback": float(np.abs(forms["-"] - pullback_base_form(fp.omega)).max()),
        "antisymmetry": max(float(np.abs(f + f.T).max()) for f in forms.values()),
    }
    sv = np.linalg.svd(forms["-"], compute_uv=False)
    out["rank_omega_minus"] = int((sv > 1e-9 * sv.max()).sum()) if sv.max() else 0
    plus_i = eigenspace(hk.I, 1j)
    minus_i = eigenspace(hk.I, -1j)
    out["kernel_minus"] = float(np.abs(forms["-"] @ plus_i).max())
    out["kernel_plus"] = float(np.abs(forms["+"] @ minus_i).max())
    out["eigenspace_dims"] = [plus_i.shape[1], minus_i.shape[1]]
    # the +i eigenspace is vertical
    out["vertical_plus_i"] = float(np.abs(plus_i[:n]).max())
    # fibre form: Omega_+ on vertical vectors vs omega through the basing map
    basing = hk.J[:n, n:]  # pi_* J restricted to vertical vectors
    base = pullback_base_form(fp.omega)[:n, :n]
    out["fibre_form"] = float(np.abs(forms["+"][n:, n:] - basing.T @ base @ basing).max())
    out["normalisation"] = float(np.abs(basing - np.eye(n)).max())
    return out


# -- Plebanski residual and brackets -------------------------------------------


def plebanski_residual(p: Potential, z, theta, mode: str = "simples", fp: FramePoint | None = None):
    """Residual of W_{theta_i z_j} - W_{theta_j z_i} = sum eta^{pq} W_{theta_i theta_p} W_{theta_j theta_q}.

    ``mode='simples'`` returns the n x n residual R; ``mode='pde'`` returns the
    array ``[k, i, j] = d R_ij / d theta_k``.  The second element is the max norm.
    """
    fp = fp or frame_point(p, z, theta, order=3)
    n = fp.n
    eta = fp.eta
    A = fp.A
    if mode == "simples":
        R = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                R[i, j] = fp.W(n + i, j) - fp.W(n + j, i)
        R -= A @ eta @ A.T
    elif mode == "pde":
        T = fp.theta_derivs(3)
        R = np.empty((n, n, n), dtype=complex)
        for k in range(n):
            Tk = T[k]
            for i in range(n):
                for j in range(n):
                    R[k, i, j] = fp.W(n + i, n + k, j) - fp.W(n + j, n + k, i)
            R[k] -= Tk @ eta @ A.T + A @ eta @ Tk.T
    else:
        raise ValueError("mode must be 'simples' or 'pde'")
    return R, float(np.abs(R).max()) if R.size else 0.0


def lie_bracket(X: np.ndarray, dX: np.ndarray, Y: np.ndarray, dY: np.ndarray) -> np.ndarray:
    """[X, Y]^m = X^k d_k Y^m - Y^k d_k X^m with dX[k, m] = d_k X^m."""
    return X @ dY - Y @ dX


def frame_brackets(fp: FramePoint) -> np.ndarray:
    """out[a, b] = [e_a, e_b] in coordinates (exact from the jet)."""
    dP = fp.frame_jacobian()
    m = 2 * fp.n
    out = np.zeros((m, m, m), dtype=complex)
    for a in range(m):
        for b in range(m):
            out[a, b] = lie_bracket(fp.P[:, a], dP[:, :, a], fp.P[:, b], dP[:, :, b])
    return out


def bracket_report(fp: FramePoint) -> dict[str, float]:
    n = fp.n
    br = frame_brackets(fp)
    return {
        "vv": float(np.abs(br[:n, :n]).max()),
        "hh": float(np.abs(br[n:, n:]).max()),
        "vh": float(np.abs(br[:n, n:]).max()),
    }


# -- connection and curvature --------------------------------------------------


def levi_civita(p: Potential, z, theta, fp: FramePoint | None = None, check_tol: float | None = 1e-8) -> np.ndarray:
    """Frame connection table G[a, b, c] from the closed-form formulas.

    nabla_{h_i} h_j = -sum eta^{pq} W_{ijp} h_q, the same for v_j, and
    nabla_{v_i} = 0.  These presuppose that W solves the Plebanski equation;
    a warning is issued when the residual exceeds ``check_tol``.
    """
    fp = fp or frame_point(p, z, theta)
    n = fp.n
    if check_tol is not None:
        _, res = plebanski_residual(p, z, theta, "pde", fp)
        if res > check_tol:
            warnings.warn(f"Plebanski residual {res:.3g} exceeds {check_tol}; closed-form connection is not Levi-Civita")
    T = fp.theta_derivs(3)
    C = -np.einsum("ijp,pq->ijq", T, fp.eta)
    G = np.zeros((2 * n, 2 * n, 2 * n), dtype=complex)
    G[n:, n:, n:] = C  # nabla_h h
    G[n:, :n, :n] = C  # nabla_h v
    return G


def frame_to_coordinate_connection(fp: FramePoint, G: np.ndarray) -> np.ndarray:
    """Christoffels Gam[k, l, m] with nabla_{d_k} d_l = sum_m Gam[k, l, m] d_m."""
    P, Q = fp.P, fp.coframe
    dP = fp.frame_jacobian()
    dQ = -np.einsum("ab,kbc,cd->kad", Q, dP, Q)
    # d_l = sum_b Q[b, l] e_b
    frame_part = np.einsum("ak,bl,abc->klc", Q, Q, G)
    deriv_part = dQ.transpose(0, 2, 1)  # [k, l, b] = d_k Q[b, l]
    return np.einsum("klc,mc->klm", frame_part + deriv_part, P)


def curvature(p: Potential, z, theta, fp: FramePoint | None = None) -> tuple[np.ndarray, bool]:
    """Frame curvature table and the flatness flag (all fourth theta-derivatives vanish)."""
    fp = fp or frame_point(p, z, theta)
    n = fp.n
    Q4 = fp.theta_derivs(4)
    C = np.einsum("ijkp,pq->ijkq", Q4, fp.eta)  # [i, j, k, q]
    R = np.zeros((2 * n,) * 4, dtype=complex)
    # R(h_j, v_i) h_k = sum eta^{pq} W_ijkp h_q, same coefficient on v
    for i in range(n):
        for j in range(n):
            R[n + j, i, n:, n:] = C[i, j]
            R[n + j, i, :n, :n] = C[i, j]
            R[i, n + j] = -R[n + j, i]
    flat = bool(np.all(Q4 == 0))
    return R, flat


def frame_to_coordinate_curvature(fp: FramePoint, R: np.ndarray) -> np.ndarray:
    """Riemann[a, b, c, m] with R(d_a, d_b) d_c = sum_m Riemann[a, b, c, m] d_m."""
    Q = fp.coframe
    return np.einsum("xa,yb,zc,xyzw,mw->abcm", Q, Q, Q, R, fp.P)


# finite-difference oracles ---------------------------------------------------


def _metric_function(p: Potential):
    n = p.n
    eta = p.lattice.eta_array()
    omega = p.lattice.omega_array()
    s = frame_structures(n, omega)

    def metric(x):
        A = theta_hessian(p, x[:n], x[n:])
        Q = np.linalg.inv(_frame_matrix(A, eta, "standard"))
        return Q.T @ s["g"] @ Q

    return metric


def _endo_function(p: Potential, name: str):
    n = p.n
    eta = p.lattice.eta_array()
    s = frame_structures(n, p.lattice.omega_array())

    def endo(x):
        A = theta_hessian(p, x[:n], x[n:])
        P = _frame_matrix(A, eta, "standard")
        return P @ s[name] @ np.linalg.inv(P)

    return endo


def christoffel_from_metric(metric, x, step: float = 1e-5) -> np.ndarray:
    """Gam[k, l, m] = 1/2 g^{mr} (d_k g_rl + d_l g_rk - d_r g_kl) by central differences."""
    x = np.asarray(x, dtype=complex)
    m = len(x)
    dg = np.array([central_difference(metric, x, k, step) for k in range(m)])  # [k, a, b]
    ginv = np.linalg.inv(metric(x))
    lower = 0.5 * (np.einsum("krl->klr", dg) + np.einsum("lrk->klr", dg) - np.einsum("rkl->klr", dg))
    return np.einsum("klr,mr->klm", lower, ginv)


def fd_christoffel(p: Potential, z, theta, step: float = 1e-5) -> np.ndarray:
    x = np.concatenate([np.asarray(z, dtype=complex), np.asarray(theta, dtype=complex)])
    return christoffel_from_metric(_metric_function(p), x, step)


def fd_riemann(p: Potential, z, theta, step: float = 1e-4) -> np.ndarray:
    """Riemann[a, b, c, m] from second finite differences of the metric."""
    x = np.concatenate([np.asarray(z, dtype=complex), np.asarray(theta, dtype=complex)])
    metric = _metric_function(p)
    gam = lambda y: christoffel_from_metric(metric, y, step)
    G = gam(x)
    dG = np.array([central_difference(gam, x, a, step) for a in range(len(x))])  # [a, b, c, m]
    R = dG - dG.transpose(1, 0, 2, 3)
    R += np.einsum("asm,bcs->abcm", G, G) - np.einsum("bsm,acs->abcm", G, G)
    return R


def covariant_derivative_residual(p: Potential, z, theta, name: str, step: float = 1e-5) -> float:
    """max |nabla_k A| for A in {I, J, K}, using finite-difference Christoffels."""
    x = np.concatenate([np.asarray(z, dtype=complex), np.asarray(theta, dtype=complex)])
    endo = _endo_function(p, name)
    G = christoffel_from_metric(_metric_function(p), x, step)
    A = endo(x)
    worst = 0.0
    for k in range(len(x)):
        dA = central_difference(endo, x, k, step)
        Gk = G[k].T  # Gk[m, l] = Gam[k, l, m]
        worst = max(worst, float(np.abs(dA + Gk @ A - A @ Gk).max()))
    return worst


def metric_compatibility_residual(p: Potential, z, theta, gam: np.ndarray, step: float = 1e-5) -> float:
    """max |d_k g_lm - Gam_kl^r g_rm - Gam_km^r g_lr| with d_k g from finite differences."""
    metric = _metric_function(p)
    x = np.concatenate([np.asarray(z, dtype=complex), np.asarray(theta, dtype=complex)])
    g = metric(x)
    worst = 0.0
    for k in range(len(x)):
        dg = central_difference(metric, x, k, step)
        rhs = gam[k] @ g + (gam[k] @ g).T
        worst = max(worst, float(np.abs(dg - rhs).max()))
    return worst


# -- twistor distributions ------------------------------------------------------


def quadric_parametrization(s: complex, t: complex) -> tuple[complex, complex, complex]:
    """[s:t] -> [2st : s^2 - t^2 : i(s^2 + t^2)], a point with a^2 + b^2 + c^2 = 0."""
    if s == 0 and t == 0:
        raise ValueError("(s, t) must not both vanish")
    return (2 * s * t, s * s - t * t, 1j * (s * s + t * t))


def twistor_operator(hk: HKPoint, q: Sequence[complex]) -> np.ndarray:
    a, b, c = q
    return a * hk.I + b * hk.J + c * hk.K


def twistor_kernel_fields(fp: FramePoint, s: complex, t: complex) -> np.ndarray:
    """Columns s h_i + i t v_i: the kernel of aI + bJ + cK at quadric_parametrization(s, t)."""
    return s * fp.h + 1j * t * fp.v


def twistor_point(s: complex, t: complex) -> tuple[complex, complex, complex]:
    """The quadric point whose operator has kernel spanned by s v_i + t h_i."""
    return quadric_parametrization(t, -1j * s)


@dataclass
class TwistorReport:
    fields: np.ndarray  # columns
    bracket_residual: float
    kernel_residual: float
    operator_rank: int


def twistor_distribution(p: Potential, z, theta, s: complex, t: complex) -> TwistorReport:
    """Fields s v_i + t h_i, their pairwise Lie brackets and the kernel check."""
    if s == 0 and t == 0:
        raise ValueError("(s, t) must not both vanish")
    fp = frame_point(p, z, theta, order=3)
    n = fp.n
    fields = s * fp.v + t * fp.h
    dP = fp.frame_jacobian()
    dF = s * dP[:, :, :n] + t * dP[:, :, n:]
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            br = lie_bracket(fields[:, i], dF[:, :, i], fields[:, j], dF[:, :, j])
            worst = max(worst, float(np.abs(br).max()))
    hk = hk_from_frame(fp)
    op = twistor_operator(hk, twistor_point(s, t))
    sv = np.linalg.svd(op, compute_uv=False)
    rank = int((sv > 1e-9 * max(1.0, sv.max())).sum())
    return TwistorReport(fields, worst, float(np.abs(op @ fields).max()), rank)
