"""Exact derivative-closed potentials W(z, theta) and order-4 jets.

A :class:`PotentialTerm` has the value

    scale * factor * prod z_i^a_i * prod theta_i^d_i * exp(b . theta) / Z(c)^k

where ``scale`` is the user supplied complex coefficient, ``factor`` an exact
rational that collects everything differentiation produces, ``b`` the theta
character and ``c`` the class whose central charge Z(c) = sum c_i z_i sits
in the denominator (``c`` defaults to ``b``).  Keeping ``c`` separate from
``b`` makes the family closed under setting theta = 0, which gauge fixing
needs.

Variables are numbered ``0..n-1`` for z and ``n..2n-1`` for theta.  Partial
derivatives are keyed by the sorted tuple of variable numbers.

Sums are evaluated with ``math.fsum`` on real and imaginary parts, so two
derivatives with the same normalized term list evaluate to identical floats
no matter how they were reached.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .lattice import Lattice

MAX_ORDER = 4


class PoleError(ArithmeticError):
    """A term has a vanishing denominator at the evaluation point."""

    def __init__(self, term: "PotentialTerm", reason: str):
        super().__init__(f"pole in term {term.describe()}: {reason}")
        self.term = term
        self.reason = reason


def _rational(b):
    """Integral entries stay ints; others (e.g. 1/2 for a negative control) become Fractions."""
    q = Fraction(b) if not isinstance(b, float) else Fraction(str(b))
    return int(q) if q.denominator == 1 else q


@dataclass(frozen=True)
class PotentialTerm:
    scale: complex
    z_exp: tuple[int, ...]
    theta_exp: tuple[int, ...]
    theta_char: tuple[int, ...]
    z_char_power: int = 0
    z_char: tuple[int, ...] | None = None
    factor: Fraction = Fraction(1)

    def __post_init__(self):
        n = len(self.z_exp)
        object.__setattr__(self, "scale", complex(self.scale))
        object.__setattr__(self, "z_exp", tuple(int(a) for a in self.z_exp))
        object.__setattr__(self, "theta_exp", tuple(int(d) for d in self.theta_exp))
        object.__setattr__(self, "theta_char", tuple(_rational(b) for b in self.theta_char))
        c = self.theta_char if self.z_char is None else tuple(int(x) for x in self.z_char)
        if not self.z_char_power:
            c = self.theta_char  # irrelevant without a denominator
        object.__setattr__(self, "z_char", c)
        object.__setattr__(self, "factor", Fraction(self.factor))
        if not (len(self.theta_exp) == len(self.theta_char) == len(c) == n):
            raise ValueError("term vectors must all have length n")
        if any(d < 0 for d in self.theta_exp):
            raise ValueError("theta exponents must be non-negative")
        if self.z_char_power < 0:
            raise ValueError("z_char_power must be non-negative")
        if self.z_char_power and not any(c):
            raise ValueError("a Z(c) denominator needs a nonzero class c")

    @property
    def n(self) -> int:
        return len(self.z_exp)

    @property
    def key(self):
        k = self.z_char_power
        return (
            self.z_exp,
            self.theta_exp,
            self.theta_char,
            self.z_char,
            k,
            self.scale.real,
            self.scale.imag,
        )

    def describe(self) -> str:
        return (
            f"{self.scale}*{self.factor} z^{list(self.z_exp)} theta^{list(self.theta_exp)} "
            f"exp({list(self.theta_char)}.theta) / Z({list(self.z_char)})^{self.z_char_power}"
        )

    def with_factor(self, factor: Fraction) -> "PotentialTerm":
        return replace(self, factor=factor)

    def derive(self, var: int) -> list["PotentialTerm"]:
        """Exact partial derivative in variable ``var`` (z block first)."""
        n = self.n
        out = []
        if var < n:
            i = var
            a = self.z_exp[i]
            if a:
                z = list(self.z_exp)
                z[i] -= 1
                out.append(replace(self, z_exp=tuple(z), factor=self.factor * a))
            k, c = self.z_char_power, self.z_char[i]
            if k and c:
                out.append(replace(self, z_char_power=k + 1, factor=self.factor * (-k * c)))
        elif var < 2 * n:
            i = var - n
            d = self.theta_exp[i]
            if d:
                t = list(self.theta_exp)
                t[i] -= 1
                out.append(replace(self, theta_exp=tuple(t), factor=self.factor * d))
            b = self.theta_char[i]
            if b:
                out.append(replace(self, factor=self.factor * b))
        else:
            raise IndexError(f"variable {var} out of range for n = {n}")
        return out

    def value(self, z: Sequence[complex], theta: Sequence[complex]) -> complex:
        if not self.factor:
            return 0j
        v = self.scale * (self.factor.numerator / self.factor.denominator)
        for zi, a in zip(z, self.z_exp):
            if a < 0 and zi == 0:
                raise PoleError(self, "z_i = 0 with a negative exponent")
            if a:
                v *= zi**a
        for ti, d in zip(theta, self.theta_exp):
            if d:
                v *= ti**d
        if any(self.theta_char):
            v *= np.exp(sum(b * t for b, t in zip(self.theta_char, theta) if b))
        if self.z_char_power:
            Zc = sum(c * zi for c, zi in zip(self.z_char, z) if c)
            if Zc == 0:
                raise PoleError(self, f"Z({list(self.z_char)}) = 0")
            v /= Zc**self.z_char_power
        return complex(v)

    def to_json(self) -> dict:
        out = {
            "coeff": [self.scale.real, self.scale.imag],
            "z_exp": list(self.z_exp),
            "theta_exp": list(self.theta_exp),
            "theta_char": [b if isinstance(b, int) else str(b) for b in self.theta_char],
            "z_char_power": self.z_char_power,
        }
        if self.z_char != self.theta_char:
            out["z_char"] = list(self.z_char)
        if self.factor != 1:
            out["factor"] = str(self.factor)
        return out

    @classmethod
    def from_json(cls, data: Mapping, n: int) -> "PotentialTerm":
        allowed = {"coeff", "z_exp", "theta_exp", "theta_char", "z_char_power", "z_char", "factor"}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown term keys {sorted(extra)}")
        coeff = data.get("coeff", [1.0, 0.0])
        if isinstance(coeff, (int, float)):
            coeff = [coeff, 0.0]
        zero = [0] * n
        return cls(
            scale=complex(coeff[0], coeff[1]),
            z_exp=tuple(data.get("z_exp", zero)),
            theta_exp=tuple(data.get("theta_exp", zero)),
            theta_char=tuple(Fraction(str(b)) for b in data.get("theta_char", zero)),
            z_char_power=int(data.get("z_char_power", 0)),
            z_char=tuple(data["z_char"]) if "z_char" in data else None,
            factor=Fraction(str(data.get("factor", 1))),
        )


def monomial(n: int, coeff: complex = 1.0, z_exp=None, theta_exp=None) -> PotentialTerm:
    """coeff * z^a * theta^d."""
    zero = (0,) * n
    return PotentialTerm(coeff, tuple(z_exp or zero), tuple(theta_exp or zero), zero)


def character_term(gamma: Sequence[int], coeff: complex = 1.0, sign: int = 1, power: int = 1) -> PotentialTerm:
    """coeff * exp(sign * theta(gamma)) / Z(gamma)^power."""
    gamma = tuple(gamma)
    n = len(gamma)
    return PotentialTerm(
        coeff, (0,) * n, (0,) * n, tuple(sign * g for g in gamma), power, z_char=gamma
    )


def normalize(terms: Iterable[PotentialTerm]) -> tuple[PotentialTerm, ...]:
    """Merge terms with equal keys (adding exact factors) and sort by key."""
    merged: dict = {}
    for t in terms:
        k = t.key
        if k in merged:
            merged[k] = merged[k].with_factor(merged[k].factor + t.factor)
        else:
            merged[k] = t
    return tuple(merged[k] for k in sorted(merged) if merged[k].factor != 0 and merged[k].scale != 0)


def csum(values: Iterable[complex]) -> complex:
    """Correctly rounded complex sum (order independent)."""
    vals = list(values)
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))


class Potential:
    """Finite sum of :class:`PotentialTerm` on a lattice of rank n."""

    def __init__(self, lattice: Lattice, terms: Iterable[PotentialTerm] = ()):
        self.lattice = lattice
        n = lattice.rank
        terms = list(terms)
        for t in terms:
            if t.n != n:
                raise ValueError(f"term has n = {t.n}, lattice rank is {n}")
        self.terms = normalize(terms)
        self._partials: dict[tuple[int, ...], "Potential"] = {(): self}

    @property
    def n(self) -> int:
        return self.lattice.rank

    def __eq__(self, other):
        return isinstance(other, Potential) and self.lattice == other.lattice and self.terms == other.terms

    def __repr__(self):
        return f"Potential({len(self.terms)} terms)"

    def __add__(self, other: "Potential") -> "Potential":
        return Potential(self.lattice, self.terms + other.terms)

    def __neg__(self) -> "Potential":
        return Potential(self.lattice, [t.with_factor(-t.factor) for t in self.terms])

    def __sub__(self, other: "Potential") -> "Potential":
        return self + (-other)

    def is_zero(self) -> bool:
        return not self.terms

    def partial(self, idx: Sequence[int]) -> "Potential":
        """Derivative along the multi-index ``idx`` (order does not matter)."""
        key = tuple(sorted(idx))
        if key not in self._partials:
            base = self.partial(key[:-1])
            self._partials[key] = Potential(
                self.lattice, [d for t in base.terms for d in t.derive(key[-1])]
            )
        return self._partials[key]

    def value(self, z, theta) -> complex:
        return csum(t.value(z, theta) for t in self.terms)

    def restrict_theta_zero(self) -> "Potential":
        """The function z -> W(z, 0) as a potential with no theta dependence."""
        n = self.n
        zero = (0,) * n
        kept = [
            replace(t, theta_exp=zero, theta_char=zero, z_char=t.z_char)
            for t in self.terms
            if not any(t.theta_exp)
        ]
        return Potential(self.lattice, kept)

    def times_theta(self, k: int) -> "Potential":
        out = []
        for t in self.terms:
            d = list(t.theta_exp)
            d[k] += 1
            out.append(replace(t, theta_exp=tuple(d)))
        return Potential(self.lattice, out)

    def to_json(self) -> list:
        return [t.to_json() for t in self.terms]

    @classmethod
    def from_json(cls, data: Sequence[Mapping], lattice: Lattice) -> "Potential":
        return cls(lattice, [PotentialTerm.from_json(t, lattice.rank) for t in data])


def derive(p: Potential, kind: str, i: int) -> Potential:
    """dW/dz_i (kind 'z') or dW/dtheta_i (kind 'theta'), exact."""
    if kind == "z":
        return p.partial((i,))
    if kind == "theta":
        return p.partial((p.n + i,))
    raise ValueError(f"kind must be 'z' or 'theta', got {kind!r}")


# jets ----------------------------------------------------------------------


def multi_indices(nvars: int, order: int = MAX_ORDER) -> list[tuple[int, ...]]:
    out = [()]
    for k in range(1, order + 1):
        out.extend(itertools.combinations_with_replacement(range(nvars), k))
    return out


def _exponents(idx: tuple[int, ...], nvars: int) -> tuple[int, ...]:
    e = [0] * nvars
    for i in idx:
        e[i] += 1
    return tuple(e)


def _index(exps: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(i for i, k in enumerate(exps) for _ in range(k))


def _fact(exps) -> int:
    out = 1
    for k in exps:
        out *= math.factorial(k)
    return out


class Jet4:
    """Value and all partial derivatives up to order 4 in ``nvars`` variables.

    ``derivs`` maps a sorted variable tuple to the partial derivative.  The
    arithmetic (``+``, ``*``, :meth:`exp`, :meth:`reciprocal`, integer
    powers) works on Taylor coefficients and applies the Leibniz rule exactly
    at the stored order; it is the numeric fallback for functions outside the
    exact family.
    """

    def __init__(self, nvars: int, derivs: Mapping[tuple[int, ...], complex] | None = None):
        self.nvars = nvars
        self.derivs: dict[tuple[int, ...], complex] = {}
        for k, v in (derivs or {}).items():
            k = tuple(sorted(k))
            if len(k) > MAX_ORDER:
                raise ValueError("jets stop at order 4")
            if v != 0:
                self.derivs[k] = complex(v)

    # constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, nvars: int, c: complex) -> "Jet4":
        return cls(nvars, {(): c})

    @classmethod
    def variable(cls, nvars: int, i: int, value: complex) -> "Jet4":
        return cls(nvars, {(): value, (i,): 1.0})

    @classmethod
    def coordinates(cls, z: Sequence[complex], theta: Sequence[complex]) -> list["Jet4"]:
        pt = list(z) + list(theta)
        return [cls.variable(len(pt), i, v) for i, v in enumerate(pt)]

    @classmethod
    def from_taylor(cls, nvars: int, coeffs: Mapping[tuple[int, ...], complex]) -> "Jet4":
        return cls(nvars, {_index(e): c * _fact(e) for e, c in coeffs.items()})

    # access ---------------------------------------------------------------

    def d(self, *idx: int) -> complex:
        return self.derivs.get(tuple(sorted(idx)), 0j)

    @property
    def value(self) -> complex:
        return self.d()

    def taylor(self) -> dict[tuple[int, ...], complex]:
        return {_exponents(k, self.nvars): v / _fact(_exponents(k, self.nvars)) for k, v in self.derivs.items()}

    def max_abs_diff(self, other: "Jet4", relative: bool = False) -> float:
        worst = 0.0
        for k in set(self.derivs) | set(other.derivs):
            a, b = self.d(*k), other.d(*k)
            err = abs(a - b)
            if relative:
                err /= max(1.0, abs(b))
            worst = max(worst, err)
        return worst

    # arithmetic -----------------------------------------------------------

    def _lift(self, other) -> "Jet4":
        if isinstance(other, Jet4):
            if other.nvars != self.nvars:
                raise ValueError("jet variable count mismatch")
            return other
        return Jet4.constant(self.nvars, other)

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.derivs)
        for k, v in other.derivs.items():
            out[k] = out.get(k, 0) + v
        return Jet4(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Jet4(self.nvars, {k: -v for k, v in self.derivs.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        if not isinstance(other, Jet4):
            return NotImplemented
        a, b = self.taylor(), other.taylor()
        out: dict[tuple[int, ...], complex] = {}
        for (ea, ca), (eb, cb) in itertools.product(a.items(), b.items()):
            if sum(ea) + sum(eb) > MAX_ORDER:
                continue
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
        return Jet4.from_taylor(self.nvars, out)

    __rmul__ = __mul__

    def _series(self, coeffs: Sequence[complex]) -> "Jet4":
        """sum_k coeffs[k] * (self - value)^k, k <= 4."""
        h = self - self.value
        out = Jet4.constant(self.nvars, coeffs[0])
        power = Jet4.constant(self.nvars, 1.0)
        for c in coeffs[1:]:
            power = power * h
            out = out + power * c
        return out

    def exp(self) -> "Jet4":
        e = np.exp(self.value)
        return self._series([e / math.factorial(k) for k in range(MAX_ORDER + 1)])

    def reciprocal(self) -> "Jet4":
        c = self.value
        if c == 0:
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        return self._series([(-1) ** k / c ** (k + 1) for k in range(MAX_ORDER + 1)])

    def __truediv__(self, other):
        other = self._lift(other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("jets support integer powers only")
        if k < 0:
            return self.reciprocal() ** (-k)
        out = Jet4.constant(self.nvars, 1.0)
        for _ in range(k):
            out = out * self
        return out


def eval_jet(p: Potential, z: Sequence[complex], theta: Sequence[complex], order: int = MAX_ORDER) -> Jet4:
    """Exact value and partials of ``p`` up to ``order`` at (z, theta)."""
    n = p.n
    if len(z) != n or len(theta) != n:
        raise ValueError("point dimension mismatch")
    table = {}
    for idx in multi_indices(2 * n, order):
        table[idx] = p.partial(idx).value(z, theta)
    return Jet4(2 * n, table)


def jet_of_callable(fn: Callable[[list[Jet4]], Jet4], z, theta) -> Jet4:
    """Evaluate ``fn`` on coordinate jets, e.g. ``lambda v: v[2] ** 3 / v[0]``."""
    return fn(Jet4.coordinates(z, theta))


def term_jet(term: PotentialTerm, z, theta) -> Jet4:
    """Jet of one exact-family term built only from jet arithmetic."""
    n = term.n
    v = Jet4.coordinates(z, theta)
    out = Jet4.constant(2 * n, term.scale * (term.factor.numerator / term.factor.denominator))
    for i, a in enumerate(term.z_exp):
        if a:
            out = out * v[i] ** a
    for i, d in enumerate(term.theta_exp):
        if d:
            out = out * v[n + i] ** d
    if any(term.theta_char):
        lin = Jet4.constant(2 * n, 0)
        for i, b in enumerate(term.theta_char):
            if b:
                lin = lin + v[n + i] * complex(b)
        out = out * lin.exp()
    if term.z_char_power:
        Zc = Jet4.constant(2 * n, 0)
        for i, c in enumerate(term.z_char):
            if c:
                Zc = Zc + v[i] * c
        out = out * Zc ** (-term.z_char_power)
    return out


def central_difference(
    f: Callable[[np.ndarray], object], x: Sequence[complex], i: int, step: float = 1e-5
):
    """(f(x + h e_i) - f(x - h e_i)) / 2h with h = step * max(1, |x_i|)."""
    x = np.asarray(x, dtype=complex)
    h = step * max(1.0, abs(x[i]))
    e = np.zeros(len(x), dtype=complex)
    e[i] = h
    return (f(x + e) - f(x - e)) / (2 * h)
