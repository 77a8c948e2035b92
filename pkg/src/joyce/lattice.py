"""Charge lattice with integral skew form, central charges and rays.

Lattice vectors are plain tuples of ints written in the fixed basis
``(gamma_1, ..., gamma_n)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import sympy

Vector = tuple[int, ...]

ANGLE_TOL = 1e-12


class LatticeError(ValueError):
    pass


class WallOfSecondKind(LatticeError):
    """A class in the support has vanishing central charge."""

    def __init__(self, gamma: Vector):
        super().__init__(f"Z(gamma) = 0 for gamma = {gamma}")
        self.gamma = gamma


def as_vector(v: Iterable[int]) -> Vector:
    out = []
    for x in v:
        if int(x) != x:
            raise LatticeError(f"non-integral lattice vector {tuple(v)}")
        out.append(int(x))
    return tuple(out)


def vadd(a: Vector, b: Vector) -> Vector:
    return tuple(x + y for x, y in zip(a, b))


def vscale(k: int, a: Vector) -> Vector:
    return tuple(k * x for x in a)


def is_zero(a: Vector) -> bool:
    return not any(a)


def content(a: Vector) -> int:
    """gcd of the entries; 0 for the zero vector."""
    return math.gcd(*a) if a else 0


@dataclass(frozen=True)
class Lattice:
    """Rank-n lattice with non-degenerate integral skew form ``eta``."""

    eta: tuple[tuple[int, ...], ...]
    _omega: tuple[tuple[Fraction, ...], ...] = field(init=False, repr=False, compare=False)

    def __init__(self, eta: Sequence[Sequence[int]]):
        rows = tuple(as_vector(r) for r in eta)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise LatticeError("eta must be a non-empty square matrix")
        for p in range(n):
            for q in range(n):
                if rows[p][q] != -rows[q][p]:
                    raise LatticeError(f"eta is not skew-symmetric at ({p}, {q})")
        m = sympy.Matrix(rows)
        if m.det() == 0:
            raise LatticeError("eta is degenerate")
        inv = m.inv()
        omega = tuple(
            tuple(Fraction(int(inv[i, j].p), int(inv[i, j].q)) for j in range(n)) for i in range(n)
        )
        object.__setattr__(self, "eta", rows)
        object.__setattr__(self, "_omega", omega)

    @property
    def rank(self) -> int:
        return len(self.eta)

    def omega(self) -> tuple[tuple[Fraction, ...], ...]:
        """Exact inverse of eta: sum_q omega[p][q] * eta[q][r] = delta_pr."""
        return self._omega

    def eta_array(self):
        import numpy as np

        return np.array(self.eta, dtype=float)

    def omega_array(self):
        import numpy as np

        return np.array([[float(x) for x in row] for row in self._omega], dtype=float)

    def basis(self) -> list[Vector]:
        n = self.rank
        return [tuple(int(i == j) for j in range(n)) for i in range(n)]

    def check(self, a: Sequence[int]) -> Vector:
        v = as_vector(a)
        if len(v) != self.rank:
            raise LatticeError(f"vector {v} has length {len(v)}, lattice rank is {self.rank}")
        return v

    def pairing(self, a: Sequence[int], b: Sequence[int]) -> int:
        return pairing(self, a, b)


def pairing(lattice: Lattice, a: Sequence[int], b: Sequence[int]) -> int:
    """<a, b> = sum_ij eta^{ij} a_i b_j."""
    a = lattice.check(a)
    b = lattice.check(b)
    eta = lattice.eta
    return sum(eta[i][j] * a[i] * b[j] for i in range(len(a)) for j in range(len(b)) if eta[i][j])


@dataclass(frozen=True)
class CentralCharge:
    values: tuple[complex, ...]

    def __init__(self, values: Sequence[complex]):
        object.__setattr__(self, "values", tuple(complex(z) for z in values))

    @property
    def rank(self) -> int:
        return len(self.values)

    def __call__(self, gamma: Sequence[int]) -> complex:
        if len(gamma) != len(self.values):
            raise LatticeError("dimension mismatch between charge and class")
        return sum((g * z for g, z in zip(gamma, self.values) if g), 0j)

    def differential(self, gamma: Sequence[int], dz: Sequence[complex]) -> complex:
        """Z(gamma) evaluated on a tangent vector dz (Z is linear in z)."""
        return sum((g * d for g, d in zip(gamma, dz) if g), 0j)


@dataclass(frozen=True)
class Ray:
    """Open ray R_{>0} * direction in C^*."""

    direction: complex

    def __post_init__(self):
        if self.direction == 0:
            raise LatticeError("a ray needs a nonzero direction")

    @classmethod
    def at_angle(cls, phi: float) -> "Ray":
        return cls(cmath.exp(1j * phi))

    @property
    def arg(self) -> float:
        return cmath.phase(self.direction)

    def same(self, other: "Ray | complex", tol: float = ANGLE_TOL) -> bool:
        return same_ray(self.direction, other.direction if isinstance(other, Ray) else other, tol)

    def rotated(self, dphi: float) -> "Ray":
        return Ray(self.direction * cmath.exp(1j * dphi))


def same_ray(a: complex, b: complex, tol: float = ANGLE_TOL) -> bool:
    """Exact sign test when tol == 0, else |sin(angle)| <= tol."""
    cross = a.real * b.imag - a.imag * b.real
    dot = a.real * b.real + a.imag * b.imag
    return dot > 0 and abs(cross) <= tol * abs(a) * abs(b)


def clockwise_distance(start: complex, z: complex) -> float:
    """Angle in [0, 2 pi) swept clockwise from the ray of ``start`` to the ray of ``z``."""
    d = (cmath.phase(start) - cmath.phase(z)) % (2 * math.pi)
    return 0.0 if d >= 2 * math.pi else d


def active_rays(
    charge: CentralCharge,
    support: Iterable[Sequence[int]],
    boundary: Ray | complex,
    tol: float = ANGLE_TOL,
) -> list[tuple[Ray, list[Vector]]]:
    """Group ``support`` by the ray of Z(gamma), ordered clockwise from ``boundary``.

    Classes on one ray keep their input order inside the group.
    """
    start = boundary.direction if isinstance(boundary, Ray) else complex(boundary)
    keyed = []
    for g in support:
        g = as_vector(g)
        z = charge(g)
        if z == 0:
            raise WallOfSecondKind(g)
        keyed.append((clockwise_distance(start, z), z, g))
    keyed.sort(key=lambda t: t[0])

    groups: list[tuple[Ray, list[Vector]]] = []
    for _, z, g in keyed:
        if groups and same_ray(groups[-1][0].direction, z, tol):
            groups[-1][1].append(g)
        else:
            groups.append((Ray(z), [g]))
    # a ray sitting just clockwise of 2 pi wraps around onto the first group
    if len(groups) > 1 and same_ray(groups[0][0].direction, groups[-1][0].direction, tol):
        ray, members = groups.pop()
        groups[0] = (groups[0][0], members + groups[0][1])
    return groups
