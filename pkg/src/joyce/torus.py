"""Truncated character series on the torus and its quantum deformation.

A :class:`CharacterSeries` is a finite sum ``sum_gamma c_gamma x_gamma`` over the
classes of a :class:`ConeTruncation`.  Coefficients live in exactly one domain:

``exact``
    :class:`fractions.Fraction`
``formal``
    :class:`Laurent` polynomials in the formal symbol ``s = q^(1/2)``
``complex``
    Python complex floats

Sign convention for the quantum torus.  With ``q = exp(i (hbar + 2 pi))`` we
get ``q^(1/2) = -exp(i hbar / 2)``, so the structure constant
``(-q^(1/2))^m`` of the star product is ``exp(i hbar m / 2)`` with no branch
ambiguity.  In formal mode the same constant is the Laurent monomial
``(-1)^m s^m``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import sympy

from .lattice import Lattice, Vector, as_vector, pairing, vadd

FORMAL = "formal"
DOMAINS = ("exact", "formal", "complex")


class TruncationError(ValueError):
    pass


class Laurent:
    """Laurent polynomial in one formal symbol with rational coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[int, Fraction | int] | Fraction | int = 0):
        if not isinstance(terms, Mapping):
            terms = {0: terms}
        self.terms = {int(k): Fraction(v) for k, v in terms.items() if v != 0}

    @classmethod
    def monomial(cls, exponent: int, coeff: Fraction | int = 1) -> "Laurent":
        return cls({exponent: coeff})

    @staticmethod
    def _lift(other) -> "Laurent":
        if isinstance(other, Laurent):
            return other
        if isinstance(other, (int, Fraction)):
            return Laurent(other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Laurent(out)

    __radd__ = __add__

    def __neg__(self):
        return Laurent({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out: dict[int, Fraction] = {}
        for (a, u), (b, v) in itertools.product(self.terms.items(), other.terms.items()):
            out[a + b] = out.get(a + b, 0) + u * v
        return Laurent(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return Laurent({k: v / other for k, v in self.terms.items()})
        return NotImplemented

    def __eq__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return False
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        if not self.terms:
            return "Laurent(0)"
        return " + ".join(f"({v})*s^{k}" for k, v in sorted(self.terms.items()))

    def __call__(self, s: complex) -> complex:
        return sum((complex(float(v.numerator) / v.denominator) * s**k for k, v in self.terms.items()), 0j)

    def to_json(self):
        return [[k, str(v)] for k, v in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, data) -> "Laurent":
        return cls({int(k): Fraction(v) for k, v in data})


def coerce(value, domain: str):
    if domain == "exact":
        if isinstance(value, (Laurent, complex, float)):
            raise TypeError(f"cannot use {value!r} as an exact rational coefficient")
        return Fraction(value)
    if domain == "formal":
        if isinstance(value, (complex, float)):
            raise TypeError(f"cannot use {value!r} as a formal coefficient")
        return value if isinstance(value, Laurent) else Laurent(Fraction(value))
    if domain == "complex":
        if isinstance(value, Laurent):
            raise TypeError("cannot use a Laurent polynomial as a complex coefficient")
        if isinstance(value, Fraction):
            return complex(value.numerator / value.denominator)
        return complex(value)
    raise ValueError(f"unknown coefficient domain {domain!r}")


def _is_zero(c) -> bool:
    return not c if isinstance(c, Laurent) else c == 0


class ConeTruncation:
    """Classes ``sum_k n_k g_k`` with ``n_k >= 0`` and ``sum_k n_k <= degree_bound``.

    The generators must be linearly independent, so the degree of a class is
    well defined and additive; the discarded classes then form an ideal and
    truncated multiplication stays associative.  The zero class (degree 0) is
    always present for constants.
    """

    def __init__(
        self,
        lattice: Lattice,
        generators: Iterable[Sequence[int]],
        degree_bound: int,
        functional: Callable[[Vector], float] | None = None,
    ):
        gens = [lattice.check(g) for g in generators]
        if not gens:
            raise TruncationError("a truncation needs at least one generator")
        if degree_bound < 1:
            raise TruncationError("degree_bound must be a positive integer")
        if sympy.Matrix(gens).rank() != len(gens):
            raise TruncationError("cone generators must be linearly independent")
        if functional is not None:
            bad = [g for g in gens if not functional(g) > 0]
            if bad:
                raise TruncationError(f"cone not strictly convex for the functional: {bad}")
        self.lattice = lattice
        self.generators = tuple(gens)
        self.degree_bound = int(degree_bound)
        self._degree: dict[Vector, int] = {}
        zero = tuple(0 for _ in range(lattice.rank))
        for counts in _compositions(len(gens), self.degree_bound):
            v = zero
            for c, g in zip(counts, gens):
                if c:
                    v = tuple(x + c * y for x, y in zip(v, g))
            self._degree[v] = sum(counts)

    def __eq__(self, other):
        return (
            isinstance(other, ConeTruncation)
            and self.lattice == other.lattice
            and self.generators == other.generators
            and self.degree_bound == other.degree_bound
        )

    def __hash__(self):
        return hash((self.lattice, self.generators, self.degree_bound))

    def __repr__(self):
        return f"ConeTruncation(generators={list(self.generators)}, degree_bound={self.degree_bound})"

    def __contains__(self, gamma) -> bool:
        return tuple(gamma) in self._degree

    def degree(self, gamma: Sequence[int]) -> int | None:
        return self._degree.get(tuple(gamma))

    def classes(self, include_zero: bool = True) -> list[Vector]:
        out = sorted(self._degree, key=lambda v: (self._degree[v], v))
        return out if include_zero else [v for v in out if self._degree[v] > 0]

    def with_bound(self, degree_bound: int) -> "ConeTruncation":
        return ConeTruncation(self.lattice, self.generators, degree_bound)

    @property
    def zero(self) -> Vector:
        return tuple(0 for _ in range(self.lattice.rank))


def _compositions(k: int, bound: int) -> Iterator[tuple[int, ...]]:
    """All k-tuples of non-negative ints with sum <= bound."""
    if k == 1:
        for i in range(bound + 1):
            yield (i,)
        return
    for i in range(bound + 1):
        for rest in _compositions(k - 1, bound - i):
            yield (i,) + rest


class CharacterSeries:
    """Finite sum of characters inside a cone truncation."""

    __slots__ = ("truncation", "domain", "coeffs")

    def __init__(self, truncation: ConeTruncation, coeffs: Mapping | None = None, domain: str = "exact"):
        if domain not in DOMAINS:
            raise ValueError(f"unknown coefficient domain {domain!r}")
        self.truncation = truncation
        self.domain = domain
        self.coeffs: dict[Vector, object] = {}
        for gamma, c in (coeffs or {}).items():
            gamma = as_vector(gamma)
            if gamma not in truncation:
                raise TruncationError(f"class {gamma} lies outside {truncation}")
            c = coerce(c, domain)
            if not _is_zero(c):
                self.coeffs[gamma] = c

    # construction -------------------------------------------------------

    @classmethod
    def character(cls, truncation, gamma, coeff=1, domain="exact") -> "CharacterSeries":
        return cls(truncation, {tuple(gamma): coeff}, domain)

    @classmethod
    def constant(cls, truncation, value=1, domain="exact") -> "CharacterSeries":
        return cls(truncation, {truncation.zero: value}, domain)

    @classmethod
    def zero(cls, truncation, domain="exact") -> "CharacterSeries":
        return cls(truncation, {}, domain)

    def _new(self, coeffs: dict) -> "CharacterSeries":
        out = CharacterSeries.__new__(CharacterSeries)
        out.truncation = self.truncation
        out.domain = self.domain
        out.coeffs = {g: c for g, c in coeffs.items() if not _is_zero(c)}
        return out

    def to_domain(self, domain: str) -> "CharacterSeries":
        if domain == self.domain:
            return self
        if self.domain == "exact" and domain in ("formal", "complex"):
            return CharacterSeries(self.truncation, self.coeffs, domain)
        raise TypeError(f"no conversion from {self.domain} to {domain}")

    def evaluate_formal(self, hbar: float) -> "CharacterSeries":
        """Substitute s = q^(1/2) = -exp(i hbar / 2) into a formal series."""
        if self.domain != "formal":
            raise TypeError("evaluate_formal needs a formal series")
        s = -cmath.exp(0.5j * hbar)
        return CharacterSeries(self.truncation, {g: c(s) for g, c in self.coeffs.items()}, "complex")

    # algebra --------------------------------------------------------------

    def _check(self, other: "CharacterSeries"):
        if not isinstance(other, CharacterSeries):
            raise TypeError(f"expected CharacterSeries, got {type(other).__name__}")
        if other.truncation != self.truncation:
            raise TruncationError("truncation mismatch")
        if other.domain != self.domain:
            raise TypeError(f"domain mismatch: {self.domain} vs {other.domain}")

    def __add__(self, other):
        if not isinstance(other, CharacterSeries):
            other = CharacterSeries.constant(self.truncation, other, self.domain)
        self._check(other)
        out = dict(self.coeffs)
        for g, c in other.coeffs.items():
            out[g] = out[g] + c if g in out else c
        return self._new(out)

    __radd__ = __add__

    def __neg__(self):
        return self._new({g: -c for g, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, k) -> "CharacterSeries":
        k = coerce(k, self.domain)
        return self._new({g: k * c for g, c in self.coeffs.items()})

    def __mul__(self, other):
        if not isinstance(other, CharacterSeries):
            return self.scale(other)
        return _bilinear(self, other, lambda a, b: None)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k: int) -> "CharacterSeries":
        if k < 0:
            return self.inverse() ** (-k)
        result = CharacterSeries.constant(self.truncation, 1, self.domain)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def inverse(self) -> "CharacterSeries":
        """Inverse of a series with invertible constant term, to truncation order."""
        zero = self.truncation.zero
        c0 = self.coeffs.get(zero)
        if c0 is None:
            raise ZeroDivisionError("series has no constant term")
        if self.domain == "formal":
            if len(c0.terms) != 1:
                raise ZeroDivisionError("formal constant term is not a unit")
            ((e, v),) = c0.terms.items()
            inv0 = Laurent.monomial(-e, 1 / v)
        else:
            inv0 = 1 / c0
        rest = self.scale(inv0) - 1  # nilpotent part
        out = CharacterSeries.constant(self.truncation, 1, self.domain)
        term = out
        for _ in range(self.truncation.degree_bound):
            term = -(term * rest)
            if not term.coeffs:
                break
            out = out + term
        return out.scale(inv0)

    def __eq__(self, other):
        if not isinstance(other, CharacterSeries):
            return NotImplemented
        return (
            self.truncation == other.truncation and self.domain == other.domain and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.truncation, self.domain, frozenset(self.coeffs.items())))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"({c})*x{list(g)}" for g, c in sorted(self.coeffs.items()))

    def __getitem__(self, gamma) -> object:
        return self.coeffs.get(tuple(gamma), coerce(0, self.domain))

    def max_abs_diff(self, other: "CharacterSeries"):
        """Largest coefficient discrepancy (exact Fraction in the exact domain)."""
        self._check(other)
        diff = (self - other).coeffs
        if self.domain == "formal":
            return max((max(abs(v) for v in c.terms.values()) for c in diff.values()), default=Fraction(0))
        if self.domain == "exact":
            return max((abs(c) for c in diff.values()), default=Fraction(0))
        return max((abs(c) for c in diff.values()), default=0.0)

    # serialization --------------------------------------------------------

    def to_json(self) -> dict:
        terms = []
        for g, c in sorted(self.coeffs.items()):
            if self.domain == "exact":
                enc = str(c)
            elif self.domain == "formal":
                enc = c.to_json()
            else:
                enc = [c.real, c.imag]
            terms.append({"gamma": list(g), "coeff": enc})
        return {
            "domain": self.domain,
            "generators": [list(g) for g in self.truncation.generators],
            "degree_bound": self.truncation.degree_bound,
            "terms": terms,
        }

    @classmethod
    def from_json(cls, data: dict, lattice: Lattice) -> "CharacterSeries":
        trunc = ConeTruncation(lattice, data["generators"], data["degree_bound"])
        domain = data.get("domain", "exact")
        coeffs = {}
        for t in data["terms"]:
            enc = t["coeff"]
            if domain == "exact":
                c = Fraction(enc)
            elif domain == "formal":
                c = Laurent.from_json(enc)
            else:
                c = complex(enc[0], enc[1])
            coeffs[tuple(t["gamma"])] = c
        return cls(trunc, coeffs, domain)


def _bilinear(f: CharacterSeries, g: CharacterSeries, constant) -> CharacterSeries:
    """sum c_a d_b k(a, b) x_{a+b}; k returning None means k = 1."""
    f._check(g)
    trunc = f.truncation
    out: dict[Vector, object] = {}
    for (a, ca), (b, cb) in itertools.product(f.coeffs.items(), g.coeffs.items()):
        ab = vadd(a, b)
        if ab not in trunc:
            continue
        k = constant(a, b)
        if k is None:
            term = ca * cb
        elif isinstance(k, int) and k == 0:
            continue
        else:
            term = k * (ca * cb)
        out[ab] = out[ab] + term if ab in out else term
    return f._new(out)


def poisson_bracket(f: CharacterSeries, g: CharacterSeries) -> CharacterSeries:
    """{x_a, x_b} = <a, b> x_{a+b}, extended bilinearly."""
    lat = f.truncation.lattice
    return _bilinear(f, g, lambda a, b: pairing(lat, a, b))


def star_structure_constant(m: int, hbar):
    """(-q^(1/2))^m: exp(i hbar m / 2) numerically, (-1)^m s^m formally."""
    if _is_formal(hbar):
        return Laurent.monomial(m, (-1) ** (m % 2))
    return cmath.exp(0.5j * hbar * m)


def sine_coefficient(m: int, hbar: float) -> float:
    """(2/hbar) sin(hbar m / 2), snapped to exactly 0 where hbar m / (2 pi) is an integer."""
    if hbar == 0:
        raise ZeroDivisionError("hbar = 0: use the classical (Poisson) limit instead")
    x = 0.5 * hbar * m
    turns = x / math.pi
    if abs(turns - round(turns)) < 1e-12:
        return 0.0
    return 2.0 / hbar * math.sin(x)


def _is_formal(hbar) -> bool:
    return isinstance(hbar, str) and hbar == FORMAL


def _check_hbar(f: CharacterSeries, hbar):
    if _is_formal(hbar):
        if f.domain != "formal":
            raise TypeError("formal hbar needs series in the formal domain")
    else:
        if f.domain != "complex":
            raise TypeError("numeric hbar needs series in the complex domain")


def star_product(f: CharacterSeries, g: CharacterSeries, hbar) -> CharacterSeries:
    """x_a * x_b = (-q^(1/2))^{<a,b>} x_{a+b}; ``hbar`` is a float or ``FORMAL``."""
    _check_hbar(f, hbar)
    lat = f.truncation.lattice
    cache: dict[int, object] = {}

    def const(a, b):
        m = pairing(lat, a, b)
        if m not in cache:
            cache[m] = star_structure_constant(m, hbar)
        return cache[m]

    return _bilinear(f, g, const)


def moyal_bracket(f: CharacterSeries, g: CharacterSeries, hbar) -> CharacterSeries:
    """Moyal bracket (f*g - g*f) / (i hbar).

    Numerically the structure constant is (2/hbar) sin(hbar <a,b> / 2).  In
    formal mode 1/(i hbar) is not a Laurent polynomial in s, so the result is
    the star commutator f*g - g*f, i.e. ``i hbar {f, g}_M``; brackets that
    only need the identity up to a scalar (antisymmetry, Jacobi) are exact.
    """
    _check_hbar(f, hbar)
    if _is_formal(hbar):
        return star_product(f, g, hbar) - star_product(g, f, hbar)
    if hbar == 0:
        raise ZeroDivisionError("hbar = 0: use poisson_bracket for the classical limit")
    lat = f.truncation.lattice
    return _bilinear(f, g, lambda a, b: sine_coefficient(pairing(lat, a, b), hbar))


def generalized_binomial(r: Fraction, k: int) -> Fraction:
    """binom(r, k) for rational r."""
    out = Fraction(1)
    for i in range(k):
        out = out * (r - i) / (i + 1)
    return out


def one_minus_character_power(
    truncation: ConeTruncation,
    gamma: Sequence[int],
    exponent: Fraction | int,
    domain: str = "exact",
    sign: int = 1,
) -> CharacterSeries:
    """(1 - sign * x_gamma)^exponent expanded to the truncation (terms beyond it are dropped)."""
    gamma = tuple(gamma)
    exponent = Fraction(exponent)
    coeffs = {}
    k = 0
    while True:
        cls = tuple(k * x for x in gamma)
        if cls not in truncation:
            break
        c = generalized_binomial(exponent, k) * (-sign) ** k
        if c:
            coeffs[cls] = c
        k += 1
        if k > 0 and not any(gamma):
            break
    return CharacterSeries(truncation, coeffs, "exact").to_domain(domain)
