import math

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from joyce.isomonodromy import (
    ActiveRayCollision,
    FlowState,
    circle_path,
    classical_flow_rhs,
    integrate_flow,
    pentagon_closed_form,
    quantum_coefficient,
    quantum_flow_rhs,
    support_closure,
)
from joyce.lattice import Lattice
from joyce.torus import ConeTruncation

LAT = Lattice([[0, 1], [-1, 0]])
Z0 = np.array([1.0, 1j])


def pentagon(degree=2, F1=0.3, F2=-0.2 + 0.1j):
    tr = ConeTruncation(LAT, [(1, 0), (0, 1)], degree)
    return FlowState.create(LAT, Z0, {(1, 0): F1, (0, 1): F2}, tr)


def test_closure_of_pentagon_support():
    assert pentagon().support == [(0, 1), (1, 0), (1, 1)]
    s = pentagon(4)
    assert (2, 1) in s.support and (1, 2) in s.support
    # (2, 0) = g1 + g1 has zero pairing and is not generated
    assert (2, 0) not in s.support


def test_collinear_support_is_closed():
    tr = ConeTruncation(LAT, [(1, 0), (0, 1)], 6)
    assert support_closure(LAT, [(1, 1), (2, 2)], tr) == [(1, 1), (2, 2)]


def test_rhs_pentagon_two_decompositions():
    s = pentagon()
    dz = np.array([0.1 - 0.2j, 0.3 + 0.05j])
    d = classical_flow_rhs(s, dz)
    F1, F2 = s.F[(1, 0)], s.F[(0, 1)]
    expected = F1 * F2 * (dz[1] / Z0[1] - dz[0] / Z0[0])
    assert d[(1, 0)] == 0 and d[(0, 1)] == 0
    assert abs(d[(1, 1)] - expected) < 1e-16


def test_rhs_zero_and_collinear():
    tr = ConeTruncation(LAT, [(1, 0), (0, 1)], 6)
    s = FlowState.create(LAT, Z0, {(1, 1): 0.4, (2, 2): -0.1, (3, 3): 2}, tr)
    assert all(v == 0 for v in classical_flow_rhs(s, (1, 1)).values())
    z = FlowState.create(LAT, Z0, {(1, 0): 0, (0, 1): 0}, tr)
    assert all(v == 0 for v in classical_flow_rhs(z, (1, 2j)).values())


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_rhs_quadratic(lr, li):
    lam = complex(lr, li)
    s = pentagon(4)
    scaled = FlowState.create(LAT, Z0, {g: lam * v for g, v in s.F.items()}, s.truncation)
    dz = (0.2, -0.1j)
    a, b = classical_flow_rhs(s, dz), classical_flow_rhs(scaled, dz)
    for g in s.support:
        assert abs(b[g] - lam**2 * a[g]) <= 1e-12 * max(1, abs(b[g]))


def test_active_ray_error():
    s = FlowState.create(LAT, [1, -1], {(1, 0): 1, (0, 1): 1}, pentagon().truncation)
    with pytest.raises(ActiveRayCollision) as e:
        classical_flow_rhs(s, (1, 0))
    assert e.value.beta == (1, 1)


def test_quantum_coefficient_sympy_taylor():
    h, m = sympy.symbols("hbar m")
    series = sympy.series(2 / h * sympy.sin(h * m / 2), h, 0, 5).removeO()
    assert sympy.simplify(series.coeff(h, 0) - m) == 0
    assert sympy.simplify(series.coeff(h, 2) + m**3 / 24) == 0
    for mm in range(-4, 5):
        for hb in (1e-3, 1e-2):
            approx = mm - mm**3 * hb**2 / 24
            assert abs(quantum_coefficient(mm, hb) - approx) < 1e-4 * hb**2 * (1 + mm**4)


def test_quantum_rhs_limits():
    s = pentagon(4)
    dz = (0.1, 0.2j)
    c = classical_flow_rhs(s, dz)
    for hb in (1e-2, 1e-3):
        q = quantum_flow_rhs(s, dz, hb)
        assert max(abs(q[g] - c[g]) for g in s.support) < hb**2 * 5
    with pytest.raises(ZeroDivisionError):
        quantum_flow_rhs(s, dz, 0)


def test_quantum_freezes_at_root_of_sine():
    # hbar = 2 pi / m kills the pairing-m decompositions; pentagon degree 2 only has m = +-1
    s = pentagon()
    q = quantum_flow_rhs(s, (0.1, 0.2), 2 * math.pi)
    assert abs(q[(1, 1)]) < 1e-15
    assert quantum_coefficient(0, 0.7) == 0


def test_constant_path_unchanged():
    s = pentagon(6)
    out = integrate_flow(s, [Z0, Z0, Z0])
    assert out.F == s.F


def test_single_primitive_constant_along_path():
    tr = ConeTruncation(LAT, [(1, 0), (0, 1)], 6)
    s = FlowState.create(LAT, Z0, {(1, 2): 0.5, (2, 4): 0.2j}, tr)
    out = integrate_flow(s, [Z0, Z0 + [0.3, 0.2], Z0 + [0.1j, -0.3]])
    assert out.F == s.F


def test_pentagon_closed_form():
    s = pentagon()
    z1 = np.array([1.2 + 0.1j, 0.8 + 1.3j])
    out = integrate_flow(s, [Z0, z1])
    expected = pentagon_closed_form(0.3, -0.2 + 0.1j, 0, z1, Z0)
    assert abs(out.F[(1, 1)] - expected) < 1e-10


@pytest.mark.parametrize("degree", [4, 6, 8])
def test_loop_closure(degree):
    s = pentagon(degree)
    rtol = 1e-10
    for index, radius in ((1, 0.4), (0, 0.3)):
        out = integrate_flow(s, circle_path(Z0, index, radius), rtol=rtol)
        scale = max(abs(v) for v in s.F.values())
        assert out.max_abs_diff(s) < 10 * rtol * scale


def test_loop_around_wall_does_not_close():
    # z2 circling 0 winds dlog Z(g2): F_{g1+g2} picks up 2 pi i F1 F2
    s = pentagon()
    with pytest.raises(ActiveRayCollision):
        integrate_flow(s, [Z0, np.array([1, -1j])])
    ring = [np.array([1, 0.5j * np.exp(2j * np.pi * k / 32)]) for k in range(33)]
    out = integrate_flow(s, [Z0] + ring + [Z0])
    F1F2 = s.F[(1, 0)] * s.F[(0, 1)]
    assert abs(out.F[(1, 1)] - s.F[(1, 1)] - 2j * np.pi * F1F2) < 1e-9


def test_trajectory_rows():
    rows = []
    integrate_flow(pentagon(), [Z0, Z0 + 0.1, Z0 + 0.2j], trajectory=rows)
    assert [r[0] for r in rows] == [0, 1, 2]


def test_quantum_flow_integrates_and_tends_to_classical():
    s = pentagon(5)
    z1 = Z0 + np.array([0.2, 0.1 - 0.1j])
    c = integrate_flow(s, [Z0, z1])
    q = integrate_flow(s, [Z0, z1], rhs="quantum", hbar=1e-3)
    assert q.max_abs_diff(c) < 1e-6
