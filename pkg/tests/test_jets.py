import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from joyce.jets import (
    Jet4,
    PoleError,
    Potential,
    PotentialTerm,
    central_difference,
    character_term,
    derive,
    eval_jet,
    jet_of_callable,
    monomial,
    multi_indices,
    term_jet,
)
from joyce.lattice import Lattice

LAT = Lattice([[0, 1], [-1, 0]])
N = 2

small = st.integers(-1, 1)


@st.composite
def terms(draw):
    kind = draw(st.sampled_from(["poly", "char"]))
    coeff = complex(draw(st.floats(-2, 2)), draw(st.floats(-2, 2)))
    z_exp = (draw(st.integers(-2, 2)), draw(st.integers(-2, 2)))
    theta_exp = (draw(st.integers(0, 3)), draw(st.integers(0, 3)))
    if kind == "poly":
        return PotentialTerm(coeff, z_exp, theta_exp, (0, 0))
    b = draw(st.sampled_from([(1, 0), (0, 1), (1, 1), (1, -1), (-1, 2)]))
    k = draw(st.integers(0, 2))
    return PotentialTerm(coeff, z_exp, theta_exp, b, k)


@st.composite
def potentials(draw):
    return Potential(LAT, draw(st.lists(terms(), min_size=1, max_size=4)))


points = st.tuples(
    st.complex_numbers(min_magnitude=0.5, max_magnitude=1.5),
    st.complex_numbers(min_magnitude=0.5, max_magnitude=1.5),
    st.complex_numbers(max_magnitude=0.8),
    st.complex_numbers(max_magnitude=0.8),
)


def safe(point):
    z = point[:2]
    return all(abs(sum(c * zi for c, zi in zip(cc, z))) > 0.3 for cc in [(1, 0), (0, 1), (1, 1), (1, -1), (-1, 2)])


def test_theta_cubed_derivative():
    p = Potential(LAT, [monomial(N, 1, theta_exp=(3, 0))])
    (t,) = derive(p, "theta", 0).terms
    assert t.scale * t.factor == 3 and t.theta_exp == (2, 0)


def test_character_z_derivative():
    p = Potential(LAT, [character_term((1, 0))])
    d = derive(p, "z", 0)
    (t,) = d.terms
    assert t.factor == -1 and t.z_char_power == 2 and t.theta_char == (1, 0)
    z, th = (0.7 + 0.2j, -1.1j), (0.3, -0.4j)
    f = lambda x: p.value(x[:2], x[2:])
    fd = central_difference(f, list(z) + list(th), 0)
    assert abs(d.value(z, th) - fd) < 1e-9


@given(potentials(), st.integers(0, 3), st.integers(0, 3))
def test_derivatives_commute(p, a, b):
    assert p.partial((a,)).partial((b,)) == p.partial((b,)).partial((a,))
    assert p.partial((a, b)) == p.partial((b, a))


def test_zero_potential_gives_zero_jet():
    jet = eval_jet(Potential(LAT), (1, 1j), (0.2, 0.1))
    assert jet.derivs == {}


def test_theta_fourth():
    p = Potential(LAT, [monomial(N, 1, theta_exp=(4, 0))])
    jet = eval_jet(p, (1.3, -0.7j), (0.4 - 0.2j, 2.0))
    assert set(jet.derivs) <= {(), (2,), (2, 2), (2, 2, 2), (2, 2, 2, 2)}
    assert jet.d(2, 2, 2, 2) == 24


def test_sympy_oracle():
    z1, z2, t1, t2 = sympy.symbols("z1 z2 t1 t2")
    W_sym = sympy.Rational(3, 2) * t1**3 / z1 + sympy.exp(t1 - t2) / (z1 - z2) ** 2 + z2**2 * t1 * t2**2
    p = Potential(
        LAT,
        [
            monomial(N, 1.5, z_exp=(-1, 0), theta_exp=(3, 0)),
            PotentialTerm(1.0, (0, 0), (0, 0), (1, -1), 2),
            monomial(N, 1.0, z_exp=(0, 2), theta_exp=(1, 2)),
        ],
    )
    pt = {z1: 0.8 + 0.3j, z2: -0.4 + 1.1j, t1: 0.25 - 0.5j, t2: 0.7j}
    jet = eval_jet(p, (pt[z1], pt[z2]), (pt[t1], pt[t2]))
    syms = [z1, z2, t1, t2]
    for idx in multi_indices(4):
        expr = W_sym
        for i in idx:
            expr = sympy.diff(expr, syms[i])
        ref = complex(expr.subs(pt).evalf(30))
        assert abs(jet.d(*idx) - ref) <= 1e-13 * max(1, abs(ref))


@given(potentials(), points)
def test_layered_finite_differences(p, point):
    if not safe(point):
        return
    z, th = point[:2], point[2:]
    x = list(z) + list(th)
    jet = eval_jet(p, z, th)
    for idx in multi_indices(4, 4)[1:]:
        lower = p.partial(idx[:-1])
        fd = central_difference(lambda y: lower.value(y[:2], y[2:]), x, idx[-1])
        ref = jet.d(*idx)
        scale = max(1.0, abs(ref), max(abs(t.value(z, th)) for t in lower.terms) if lower.terms else 1.0)
        tol = 1e-7 if len(idx) <= 2 else 1e-4
        assert abs(fd - ref) <= tol * scale


@given(potentials(), points)
def test_jet_arithmetic_matches_exact(p, point):
    if not safe(point):
        return
    z, th = point[:2], point[2:]
    exact = eval_jet(p, z, th)
    via_jets = Jet4.constant(4, 0)
    for t in p.terms:
        via_jets = via_jets + term_jet(t, z, th)
    assert via_jets.max_abs_diff(exact, relative=True) < 1e-13 * max(
        1.0, max(abs(v) for v in exact.derivs.values()) if exact.derivs else 1.0
    )


def test_jet_leibniz_and_powers():
    z, th = (0.9, 1.2j), (0.3, -0.1)
    f = jet_of_callable(lambda v: v[0] * v[2] ** 2 + (v[3] * 2).exp(), z, th)
    g = jet_of_callable(lambda v: 1 / (v[0] + v[1]), z, th)
    fg = f * g
    # d/dz1 (f g) = f_z1 g + f g_z1
    assert abs(fg.d(0) - (f.d(0) * g.value + f.value * g.d(0))) < 1e-14
    assert abs(fg.d(0, 2) - (f.d(0, 2) * g.value + f.d(0) * g.d(2) + f.d(2) * g.d(0) + f.value * g.d(0, 2))) < 1e-13
    h = jet_of_callable(lambda v: v[1] ** -3, z, th)
    assert abs(h.d(1, 1, 1, 1) - 360 * z[1] ** -7) < 1e-12
    assert (g * (v := jet_of_callable(lambda w: w[0] + w[1], z, th))).max_abs_diff(Jet4.constant(4, 1)) < 1e-14


def test_pole_is_reported():
    p = Potential(LAT, [character_term((1, -1))])
    with pytest.raises(PoleError) as err:
        eval_jet(p, (1.0, 1.0), (0, 0))
    assert err.value.term.z_char == (1, -1)
    q = Potential(LAT, [monomial(N, 1, z_exp=(-1, 0))])
    with pytest.raises(PoleError):
        q.value((0, 1), (0, 0))


@given(potentials())
def test_json_roundtrip(p):
    assert Potential.from_json(p.to_json(), LAT) == p


def test_json_rejects_unknown_keys():
    with pytest.raises(ValueError):
        Potential.from_json([{"coeff": [1, 0], "colour": 3}], LAT)


@given(potentials(), points, st.lists(st.complex_numbers(max_magnitude=2), min_size=6, max_size=6))
def test_gauge_terms_leave_second_theta_derivatives(p, point, c):
    if not safe(point):
        return
    z, th = point[:2], point[2:]
    # c(z) + sum l_i(z) theta_i: no change to any second theta derivative
    lin = Potential(LAT, [
        monomial(N, c[0], z_exp=(1, -1)),
        monomial(N, c[1], z_exp=(2, 0), theta_exp=(1, 0)),
        monomial(N, c[2], z_exp=(0, -1), theta_exp=(0, 1)),
    ])
    quad = Potential(LAT, [monomial(N, c[3], z_exp=(1, 0), theta_exp=(2, 0)),
                           monomial(N, c[4], z_exp=(0, 1), theta_exp=(1, 1))])
    base = eval_jet(p, z, th)
    a = eval_jet(p + lin, z, th)
    b = eval_jet(p + quad, z, th)
    tt = [(2, 2), (2, 3), (3, 3)]
    for idx in tt:
        assert a.d(*idx) == pytest.approx(base.d(*idx), abs=1e-12, rel=1e-12)
    for idx in itertools.combinations_with_replacement([2, 3], 3):
        assert b.d(*idx) == pytest.approx(base.d(*idx), abs=1e-12, rel=1e-12)
    assert lin.partial((2, 2)).is_zero() and lin.partial((2, 3)).is_zero() and lin.partial((3, 3)).is_zero()
    for idx in itertools.combinations_with_replacement([2, 3], 3):
        assert quad.partial(idx).is_zero()
