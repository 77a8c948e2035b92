"""Stokes data of dY/deps = (U/eps^2 + V/eps) Y for small gl(n).

Column j of the flat section Y_r is written y_j = exp(-u_j/eps) phi_j(eps)
with phi_j -> e_j as eps -> 0.  We compute phi_j as a Laplace integral

    phi_j(eps) = e_j + int_0^{infty e^{i alpha}} exp(-s/eps) B(s) ds

where B solves (s - D) B' = (V - 1) B, D = diag(u_i - u_j).  B is analytic
except at s = u_i - u_j, so any alpha strictly between consecutive singular
directions around arg r gives the same function on H_r.  Near s = 0 we use
the Taylor series of B; beyond half the radius of convergence we integrate
B along the ray, accumulating the integral in the same ODE solve.

The direct route (integrating Y from a tiny eps_0 with asymptotic initial
data) amplifies rounding by exp(|u_i - u_j| / eps_0) in recessive
directions, so it is only used as a cross-check for n = 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

TAYLOR_ORDER = 60
GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
LAPLACE_SLACK = 0.35  # keep |alpha - arg eps| <= pi/2 - slack


class StokesRayError(ValueError):
    """A requested ray is (too close to) a Stokes ray."""


class StokesExtractionError(RuntimeError):
    pass


def _wrap(a: float) -> float:
    return float((a + np.pi) % (2 * np.pi) - np.pi)


@dataclass
class GLConnection:
    u: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=complex).ravel()
        self.V = np.asarray(self.V, dtype=complex)
        n = self.u.size
        if self.V.shape != (n, n):
            raise ValueError("V must be n x n")
        if np.any(np.diag(self.V) != 0):
            raise ValueError("V must have zero diagonal")
        if n > 1 and self.min_gap() <= 1e-12 * max(1.0, float(np.abs(self.u).max())):
            raise ValueError("eigenvalues of U must be pairwise distinct")

    @property
    def n(self) -> int:
        return self.u.size

    @property
    def U(self) -> np.ndarray:
        return np.diag(self.u)

    def min_gap(self) -> float:
        d = np.abs(self.u[:, None] - self.u[None, :])
        return float(d[~np.eye(self.n, dtype=bool)].min())

    def stokes_directions(self) -> list[tuple[float, int, int]]:
        """(arg(u_i - u_j), i, j) for all ordered pairs i != j."""
        return [
            (float(np.angle(self.u[i] - self.u[j])), i, j)
            for i in range(self.n)
            for j in range(self.n)
            if i != j
        ]

    def rhs(self, eps: complex) -> np.ndarray:
        return self.U / eps**2 + self.V / eps

    def to_json(self) -> dict:
        return {
            "u": [[z.real, z.imag] for z in self.u],
            "V": [[[z.real, z.imag] for z in row] for row in self.V],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GLConnection":
        unknown = set(data) - {"u", "V"}
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        c = lambda x: complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x)
        return cls(np.array([c(x) for x in data["u"]]), np.array([[c(x) for x in row] for row in data["V"]]))


def distance_to_stokes(conn: GLConnection, angle: float) -> float:
    return min(abs(_wrap(a - angle)) for a, _, _ in conn.stokes_directions())


def _column_sector(conn: GLConnection, j: int, ray: float) -> tuple[float, float]:
    """Offsets (lo, hi) from ``ray`` of the column-j singular directions bracketing it."""
    offs = [_wrap(np.angle(conn.u[i] - conn.u[j]) - ray) for i in range(conn.n) if i != j]
    neg = [o for o in offs if o < 0]
    pos = [o for o in offs if o > 0]
    lo = max(neg) if neg else max(offs) - 2 * np.pi
    hi = min(pos) if pos else min(offs) + 2 * np.pi
    return lo, hi


def _laplace_direction(lo: float, hi: float, e_off: float) -> float:
    margin = min(0.15, (hi - lo) / 4)
    for slack in (LAPLACE_SLACK, 0.2, 0.1):
        a = max(lo + margin, e_off - (np.pi / 2 - slack))
        b = min(hi - margin, e_off + (np.pi / 2 - slack))
        if a <= b:
            return float(min(max((lo + hi) / 2, a), b))
    raise StokesRayError("no admissible Laplace direction for this eps")


def borel_coefficients(conn: GLConnection, j: int, order: int = TAYLOR_ORDER) -> np.ndarray:
    """Taylor coefficients beta_k (k = 0..order) of the Borel transform for column j."""
    n, V = conn.n, conn.V
    d = conn.u - conn.u[j]
    off = np.arange(n) != j
    beta = np.zeros((order + 1, n), dtype=complex)
    b = np.zeros(n, dtype=complex)
    b[off] = -V[off, j] / d[off]
    b[j] = V[j] @ b
    beta[0] = b
    for k in range(order):
        nb = np.zeros(n, dtype=complex)
        w = (k + 1) * beta[k] - V @ beta[k]
        nb[off] = w[off] / ((k + 1) * d[off])
        nb[j] = (V[j] @ nb) / (k + 2)
        beta[k + 1] = nb
    return beta


def _taylor_eval(beta: np.ndarray, s: np.ndarray) -> np.ndarray:
    out = np.zeros((s.size, beta.shape[1]), dtype=complex)
    for c in beta[::-1]:
        out = out * s[:, None] + c
    return out


def _laplace_column(conn: GLConnection, j: int, alpha: float, eps: np.ndarray, rtol: float) -> np.ndarray:
    """int_0^{infty e^{i alpha}} exp(-s/eps) B(s) ds for each eps (rows)."""
    n = conn.n
    if not np.any(conn.V[:, j]):
        return np.zeros((eps.size, n), dtype=complex)
    d = conn.u - conn.u[j]
    R = min(abs(d[i]) for i in range(n) if i != j)
    rho0 = R / 2
    beta = borel_coefficients(conn, j)
    w = np.exp(1j * alpha)
    inv = w / eps  # Re > 0 by choice of alpha

    # near part: geometric Gauss-Legendre panels resolving every eps scale
    emin = float(np.abs(eps).min())
    m = max(1, int(np.ceil(np.log2(rho0 / (1e-4 * min(emin, rho0))))) + 1)
    edges = np.concatenate([[0.0], rho0 * 2.0 ** -np.arange(m, -1, -1)])
    near = np.zeros((eps.size, n), dtype=complex)
    for a, b in zip(edges[:-1], edges[1:]):
        rho = 0.5 * (b - a) * GL_NODES + 0.5 * (a + b)
        Bv = _taylor_eval(beta, w * rho)
        kern = np.exp(-np.outer(inv, rho)) * (0.5 * (b - a) * GL_WEIGHTS)
        near += w * kern @ Bv

    # far part: ODE for B with the Laplace integrals appended
    c = inv.real
    growth = 2.0 + np.abs(conn.V).sum(axis=0).max()
    rho_max = rho0
    for _ in range(3):
        rho_max = max(rho0 * 1.01, float(np.max((42.0 + growth * np.log1p(rho_max)) / c)))
    VmI = conn.V - np.eye(n)
    neps = eps.size

    def f(rho, y):
        s = w * rho
        B = y[:n]
        dB = w * (VmI @ B) / (s - d)
        dL = w * np.exp(-s * (1 / eps))[:, None] * B[None, :]
        return np.concatenate([dB, dL.ravel()])

    y0 = np.concatenate([_taylor_eval(beta, np.array([w * rho0]))[0], np.zeros(neps * n, dtype=complex)])
    scale = float(np.abs(beta[0]).max()) or 1.0
    sol = solve_ivp(f, (rho0, rho_max), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-3 * scale * min(1.0, emin))
    if not sol.success:
        raise StokesExtractionError(f"Borel integration failed: {sol.message}")
    far = sol.y[n:, -1].reshape(neps, n)
    return near + far


@dataclass
class FlatSection:
    """Samples of Y_r; H = Y_r exp(U/eps) is stored to avoid overflow."""

    conn: GLConnection
    ray: float
    eps: np.ndarray
    H: np.ndarray
    normalization_residual: float = float("nan")
    richardson_ratio: float = float("nan")

    def Y(self, k: int) -> np.ndarray:
        return self.H[k] * np.exp(-self.conn.u / self.eps[k])[None, :]

    def to_json(self) -> dict:
        return {
            "ray": self.ray,
            "eps": [[e.real, e.imag] for e in self.eps],
            "normalization_residual": self.normalization_residual,
            "richardson_ratio": self.richardson_ratio,
        }


def flat_section_H(conn: GLConnection, ray: float, eps, tol: float = 1e-6, rtol: float = 1e-12) -> np.ndarray:
    """H(eps) = Y_r(eps) exp(U/eps) for eps in the half-plane centred on ``ray``."""
    eps = np.atleast_1d(np.asarray(eps, dtype=complex))
    if conn.n > 1 and distance_to_stokes(conn, ray) < tol:
        raise StokesRayError(f"ray at angle {ray:.6g} lies on a Stokes ray")
    e_off = np.array([_wrap(np.angle(e) - ray) for e in eps])
    if np.any(np.abs(e_off) >= np.pi / 2) or np.any(eps == 0):
        raise ValueError("eps outside the open half-plane of the ray")
    H = np.zeros((eps.size, conn.n, conn.n), dtype=complex)
    for j in range(conn.n):
        H[:, j, j] = 1.0
        if conn.n == 1:
            continue
        lo, hi = _column_sector(conn, j, ray)
        alphas = np.array([_laplace_direction(lo, hi, e) for e in e_off])
        for a in np.unique(np.round(alphas, 12)):
            sel = np.isclose(alphas, a, atol=1e-11)
            H[sel, :, j] += _laplace_column(conn, j, ray + a, eps[sel], rtol)
    return H


def gl_flat_section(conn: GLConnection, ray: float, eps_grid=None, tol: float = 1e-6) -> FlatSection:
    """Y_r sampled on ``eps_grid`` (default: log-spaced |eps| along the ray).

    The normalisation residual is |H(eps0) - 1| at eps0 = 1e-3 min|u_i - u_j|;
    ``richardson_ratio`` is residual(eps0) / residual(eps0/2), close to 2 for
    an O(eps) approach to the identity.
    """
    if eps_grid is None:
        g = conn.min_gap() if conn.n > 1 else 1.0
        eps_grid = g * np.logspace(-1, 0.5, 8) * np.exp(1j * ray)
    eps = np.atleast_1d(np.asarray(eps_grid, dtype=complex))
    H = flat_section_H(conn, ray, eps, tol)
    out = FlatSection(conn, ray, eps, H)
    if conn.n > 1:
        e0 = 1e-3 * conn.min_gap() * np.exp(1j * ray)
        H0 = flat_section_H(conn, ray, [e0, e0 / 2], tol)
        r = [float(np.abs(h - np.eye(conn.n)).max()) for h in H0]
        out.normalization_residual = r[0]
        out.richardson_ratio = r[0] / r[1] if r[1] else (1.0 if r[0] == 0 else float("inf"))
    else:
        out.normalization_residual, out.richardson_ratio = 0.0, 1.0
    return out


def _transport(conn: GLConnection, H: np.ndarray, eps: complex) -> np.ndarray:
    """exp(U/eps) M exp(-U/eps) applied entrywise."""
    e = conn.u / eps
    return H * np.exp(e[:, None] - e[None, :])


@dataclass
class StokesReport:
    ray: float
    S: np.ndarray
    spread: float
    unipotent_deviation: float
    support: list[tuple[int, int]]
    eps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ok(self) -> bool:
        return self.spread <= 1e-3

    def to_json(self) -> dict:
        return {
            "ray": self.ray,
            "S": [[[z.real, z.imag] for z in row] for row in self.S],
            "spread": self.spread,
            "unipotent_deviation": self.unipotent_deviation,
            "support": [list(p) for p in self.support],
            "eps": [[e.real, e.imag] for e in self.eps],
        }


def extract_stokes_factor(
    conn: GLConnection, ray: float, offset: float = 0.05, radii=None, max_spread: float = 1e-3
) -> StokesReport:
    """S = Y_{r-}^{-1} Y_{r+} on the Stokes ray at angle ``ray``; r+- = ray -+ offset.

    Averaged over several eps on the ray; ``spread`` is the largest deviation
    of a sample from the mean.
    """
    others = [a for a, _, _ in conn.stokes_directions() if abs(_wrap(a - ray)) > 1e-9]
    if others and min(abs(_wrap(a - ray)) for a in others) <= offset:
        raise StokesRayError("another Stokes ray lies within the offset; half-planes do not isolate it")
    support = [(i, j) for a, i, j in conn.stokes_directions() if abs(_wrap(a - ray)) <= 1e-9]
    if radii is None:
        scale = min((abs(conn.u[i] - conn.u[j]) for i, j in support), default=conn.min_gap())
        radii = scale * np.array([0.5, 0.7, 1.0, 1.4, 2.0])
    eps = np.asarray(radii, dtype=float) * np.exp(1j * ray)
    Hp = flat_section_H(conn, ray - offset, eps)
    Hm = flat_section_H(conn, ray + offset, eps)
    samples = np.array([_transport(conn, np.linalg.solve(Hm[k], Hp[k]), eps[k]) for k in range(eps.size)])
    S = samples.mean(axis=0)
    spread = float(np.abs(samples - S).max())
    mask = np.ones((conn.n, conn.n), dtype=bool)
    for p in support:
        mask[p] = False
    dev = float(np.abs((S - np.eye(conn.n))[mask]).max())
    report = StokesReport(ray, S, spread, dev, support, eps)
    if spread > max_spread:
        raise StokesExtractionError(f"Stokes factor unstable in eps (spread {spread:.3g})")
    return report


def sector_stokes_product(conn: GLConnection, start: float, end: float, offset: float = 0.05) -> np.ndarray:
    """Clockwise product of Stokes factors for rays with angle in (end, start), start > end."""
    rays = sorted({round(_wrap(a - end), 12) for a, _, _ in conn.stokes_directions()})
    width = start - end
    inside = [end + o for o in rays if 0 < o < width]
    S = np.eye(conn.n, dtype=complex)
    for a in sorted(inside, reverse=True):
        S = S @ extract_stokes_factor(conn, a, offset).S
    return S


def rh3_residual(conn: GLConnection, r_minus: float, r_plus: float, eps, offset: float = 0.05) -> float:
    """max |Y_{r+} - Y_{r-} S(Delta)| in normalised form for eps in both half-planes.

    Delta is the convex sector swept clockwise from r_minus to r_plus.
    """
    if not 0 < r_minus - r_plus < np.pi:
        raise ValueError("need 0 < r_minus - r_plus < pi")
    S = sector_stokes_product(conn, r_minus, r_plus, offset)
    eps = np.atleast_1d(np.asarray(eps, dtype=complex))
    Hp = flat_section_H(conn, r_plus, eps)
    Hm = flat_section_H(conn, r_minus, eps)
    res = 0.0
    for k, e in enumerate(eps):
        # Y+ = Y- S  <=>  H+ = H- exp(-U/e) S exp(U/e)
        lhs = Hm[k] @ _transport(conn, S, -e)
        res = max(res, float(np.abs(Hp[k] - lhs).max()))
    return res


def growth_diagnostic(conn: GLConnection, ray: float, radii=None) -> dict:
    """Slope of log|Y_r| against log|eps| toward infinity (moderate growth monitor)."""
    if radii is None:
        radii = np.logspace(1, 3, 5) * max(conn.min_gap(), 1.0)
    eps = np.asarray(radii) * np.exp(1j * ray)
    H = flat_section_H(conn, ray, eps)
    norms = [np.linalg.norm(H[k] * np.exp(-conn.u / eps[k])[None, :], 2) for k in range(eps.size)]
    x, y = np.log(np.abs(eps)), np.log(norms)
    slope = float(np.polyfit(x, y, 1)[0])
    return {"radii": list(map(float, np.abs(eps))), "log_norms": list(map(float, y)), "slope": slope}


def isomonodromic_rhs(u: np.ndarray, V: np.ndarray, du: np.ndarray, sign: int = 1) -> np.ndarray:
    """dV_ij = sign * sum_k V_ik V_kj [dlog(u_k - u_j) - dlog(u_i - u_k)].

    This is the bracket sum over ordered root decompositions alpha + beta = gamma
    of [V_alpha, V_beta] dlog U(beta).  sign = +1 preserves Stokes data;
    sign = -1 is kept as a negative control.
    """
    n = u.size
    dV = np.zeros_like(V)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            acc = 0j
            for k in range(n):
                if k in (i, j):
                    continue
                acc += V[i, k] * V[k, j] * (
                    (du[k] - du[j]) / (u[k] - u[j]) - (du[i] - du[k]) / (u[i] - u[k])
                )
            dV[i, j] = sign * acc
    return dV


def isomonodromic_deformation(conn: GLConnection, u_target, sign: int = 1, rtol: float = 1e-12) -> GLConnection:
    """Carry V along the straight path u(s) from conn.u to ``u_target``."""
    u0 = conn.u
    du = np.asarray(u_target, dtype=complex) - u0
    n = conn.n

    def f(s, y):
        return isomonodromic_rhs(u0 + s * du, y.reshape(n, n), du, sign).ravel()

    sol = solve_ivp(f, (0.0, 1.0), conn.V.ravel(), method="DOP853", rtol=rtol, atol=rtol * 1e-2)
    if not sol.success:
        raise StokesExtractionError(sol.message)
    V = sol.y[:, -1].reshape(n, n)
    np.fill_diagonal(V, 0)
    return GLConnection(np.asarray(u_target, dtype=complex), V)
