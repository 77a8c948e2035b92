import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from joyce.glstokes import (
    GLConnection,
    StokesExtractionError,
    StokesRayError,
    borel_coefficients,
    extract_stokes_factor,
    flat_section_H,
    gl_flat_section,
    growth_diagnostic,
    isomonodromic_deformation,
    rh3_residual,
)

V2 = np.array([[0, 0.3], [0.2, 0]], dtype=complex)


def generic3(seed=1, size=0.25):
    rng = np.random.default_rng(seed)
    V = size * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    np.fill_diagonal(V, 0)
    return GLConnection([0, 1, 0.3 + 0.8j], V)


# -- independent oracle: direct ODE integration on a ray where every mode is dominant


def _formal_series(conn, j, K):
    """phi_j = sum a_k eps^k with a_0 = e_j (from eps^2 phi' = D phi + eps V phi)."""
    n = conn.n
    d = conn.u - conn.u[j]
    off = np.arange(n) != j
    a = [np.eye(n, dtype=complex)[j]]
    for k in range(K):
        nxt = np.zeros(n, dtype=complex)
        # coefficient of eps^{k+1}: k a_k = D a_{k+1} + V a_k
        w = k * a[k] - conn.V @ a[k]
        nxt[off] = w[off] / d[off]
        # j-row at next order: (k+1) a_{k+1,j} = (V a_{k+1})_j
        nxt[j] = (conn.V[j] @ nxt) / (k + 1) if k + 1 else 0
        a.append(nxt)
    return a


def direct_column(conn, j, start_angle, target, t0=0.02, K=24):
    """phi_j at ``target`` by integrating from t0 e^{i start} outward, then along the arc."""
    n = conn.n
    D = conn.u - conn.u[j]
    a = _formal_series(conn, j, K)
    e0 = t0 * np.exp(1j * start_angle)
    phi = sum(c * e0**k for k, c in enumerate(a))

    def rhs_path(eps_of, deps_of):
        def f(s, y):
            e = eps_of(s)
            return deps_of(s) * (D * y / e**2 + conn.V @ y / e)

        return f

    r = abs(target)
    w = np.exp(1j * start_angle)
    f1 = rhs_path(lambda t: t * w, lambda t: w)
    y = solve_ivp(f1, (t0, r), phi, method="DOP853", rtol=1e-12, atol=1e-15).y[:, -1]
    ang = np.angle(target)
    # choose the lift of the target angle nearest the start angle
    ang = start_angle + ((ang - start_angle + np.pi) % (2 * np.pi) - np.pi)
    f2 = rhs_path(lambda a: r * np.exp(1j * a), lambda a: 1j * r * np.exp(1j * a))
    return solve_ivp(f2, (start_angle, ang), y, method="DOP853", rtol=1e-12, atol=1e-15).y[:, -1]


def test_borel_against_direct_integration_n2():
    c = GLConnection([0, 1], V2)
    ray = -np.pi / 2 + 0.3
    eps = 1.1 * np.exp(1j * (ray + 0.2))
    H = flat_section_H(c, ray, [eps])[0]
    # column 0: dominant direction is arg eps = pi (lift -pi keeps it in the sector of the ray)
    col0 = direct_column(c, 0, -np.pi, eps)
    col1 = direct_column(c, 1, 0.0, eps)
    assert np.abs(H[:, 0] - col0).max() < 1e-9
    assert np.abs(H[:, 1] - col1).max() < 1e-9


def test_formal_series_matches_borel_coefficients():
    c = generic3()
    for j in range(3):
        a = _formal_series(c, j, 8)
        beta = borel_coefficients(c, j, 8)
        for m in range(8):
            assert np.allclose(a[m + 1], beta[m] * math.factorial(m), rtol=1e-12, atol=1e-14)


# -- V = 0 and validation


def test_zero_V_exact():
    c = GLConnection([0, 1, 2j], np.zeros((3, 3)))
    fs = gl_flat_section(c, 0.4)
    assert np.all(fs.H == np.eye(3))
    assert fs.normalization_residual == 0
    eps = fs.eps[2]
    assert np.allclose(fs.Y(2), np.diag(np.exp(-c.u / eps)), rtol=0, atol=0)
    for a, _, _ in c.stokes_directions():
        assert np.all(extract_stokes_factor(c, a).S == np.eye(3))


def test_validation():
    with pytest.raises(ValueError):
        GLConnection([0, 0], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        GLConnection([0, 1], np.eye(2))
    c = GLConnection([0, 1], V2)
    with pytest.raises(StokesRayError):
        gl_flat_section(c, 0.0)
    with pytest.raises(ValueError):
        flat_section_H(c, 0.5, [np.exp(1j * (0.5 + 2.0))])


def test_json_roundtrip():
    c = generic3()
    d = GLConnection.from_json(c.to_json())
    assert np.all(d.u == c.u) and np.all(d.V == c.V)
    with pytest.raises(ValueError):
        GLConnection.from_json({**c.to_json(), "W": 1})


# -- Stokes factors


def test_n2_unipotent_and_stable():
    c = GLConnection([0, 1], V2)
    r0 = extract_stokes_factor(c, 0.0)
    assert r0.support == [(1, 0)]
    assert r0.spread < 1e-5
    assert r0.unipotent_deviation < 1e-6
    N = r0.S - np.eye(2)
    assert np.abs(N @ N).max() < 1e-6
    assert abs(r0.S[1, 0]) > 0.1


def test_n2_monodromy_trace_oracle():
    # monodromy at infinity is conjugate to exp(-2 pi i V): tr(S_0 S_pi) = 2 cos(2 pi lambda)
    for V in (V2, np.array([[0, 0.7 + 0.1j], [-0.4j, 0]])):
        c = GLConnection([0, 1], V)
        lam = np.sqrt(V[0, 1] * V[1, 0])
        s0 = extract_stokes_factor(c, 0.0).S
        s1 = extract_stokes_factor(c, np.pi).S
        assert abs(np.trace(s0 @ s1) - 2 * np.cos(2 * np.pi * lam)) < 1e-9


def test_normalisation_residual_is_order_eps():
    c = GLConnection([0, 1], V2)
    fs = gl_flat_section(c, 0.3)
    assert fs.normalization_residual < 1e-2
    assert abs(fs.richardson_ratio - 2) < 0.05


def test_n3_factors_unipotent():
    c = generic3()
    for a, _, _ in c.stokes_directions():
        r = extract_stokes_factor(c, a)
        assert r.spread < 1e-5
        assert r.unipotent_deviation < 1e-6
        assert np.abs(np.linalg.eigvals(r.S) - 1).max() < 1e-6


def test_rh3_n2_and_n3():
    c = GLConnection([0, 1], V2)
    eps = [np.exp(0.1j), 0.7 * np.exp(-0.2j), 1.5 * np.exp(0.05j)]
    assert rh3_residual(c, 0.4, -0.4, eps) < 1e-6
    c3 = generic3()
    dirs = sorted(a for a, _, _ in c3.stokes_directions())
    # a sector holding two Stokes rays, boundaries away from all rays
    lo, hi = dirs[1], dirs[2]
    r_minus, r_plus = hi + 0.1, lo - 0.1
    assert r_minus - r_plus < np.pi
    mid = 0.5 * (r_minus + r_plus)
    assert rh3_residual(c3, r_minus, r_plus, [np.exp(1j * mid), 0.8 * np.exp(1j * (mid + 0.1))]) < 1e-6


def test_wrong_sector_order_breaks_rh3():
    # three consecutive rays whose outer factors do not commute
    c3 = generic3()
    dirs = sorted(a for a, _, _ in c3.stokes_directions())[:3]
    assert dirs[2] - dirs[0] < np.pi
    from joyce import glstokes

    factors = [extract_stokes_factor(c3, a).S for a in dirs]
    assert np.abs(factors[0] @ factors[2] - factors[2] @ factors[0]).max() > 1e-3
    clockwise = factors[2] @ factors[1] @ factors[0]
    reverse = factors[0] @ factors[1] @ factors[2]
    r_minus, r_plus = dirs[2] + 0.1, dirs[0] - 0.1
    eps = np.exp(0.5j * (r_minus + r_plus))
    Hp = flat_section_H(c3, r_plus, [eps])[0]
    Hm = flat_section_H(c3, r_minus, [eps])[0]
    good = np.abs(Hp - Hm @ glstokes._transport(c3, clockwise, -eps)).max()
    bad = np.abs(Hp - Hm @ glstokes._transport(c3, reverse, -eps)).max()
    assert good < 1e-6 < bad
    assert rh3_residual(c3, r_minus, r_plus, [eps]) < 1e-6


# -- isomonodromy


def _entries(c):
    return {(i, j): extract_stokes_factor(c, a).S[i, j] for a, i, j in c.stokes_directions()}


def test_iso_stokes_n2():
    c = GLConnection([0, 1], V2)
    target = np.array([0.2 + 0.1j, 1.3 + 0.4j])
    d = isomonodromic_deformation(c, target)
    assert np.all(d.V == c.V)  # the bracket sum is empty for n = 2
    before, after = _entries(c), _entries(d)
    assert max(abs(before[k] - after[k]) for k in before) < 1e-4


def test_iso_stokes_n3_and_controls():
    c = generic3()
    target = c.u + np.array([0, 0.1 + 0.05j, -0.1j])
    before = _entries(c)
    after = _entries(isomonodromic_deformation(c, target))
    assert max(abs(before[k] - after[k]) for k in before) < 1e-4
    flipped = _entries(isomonodromic_deformation(c, target, sign=-1))
    frozen = _entries(GLConnection(target, c.V))
    assert max(abs(before[k] - flipped[k]) for k in before) > 1e-2
    assert max(abs(before[k] - frozen[k]) for k in before) > 1e-2


def test_growth_diagnostic_moderate():
    c = GLConnection([0, 1], V2)
    g = growth_diagnostic(c, 0.3)
    # log|Y| grows at most linearly in log|eps|; slope bounded by the eigenvalues of V
    assert 0 <= g["slope"] < 1


def test_excessive_spread_flagged():
    c = GLConnection([0, 1], V2)
    with pytest.raises(StokesExtractionError):
        extract_stokes_factor(c, 0.0, radii=[0.05, 1.0], max_spread=0.0)
