"""DT/BPS invariants, Kontsevich-Soibelman Stokes factors and wall-crossing checks.

A Poisson automorphism of the torus is stored by its action on the basis
characters, ``S*(x_{e_i}) = x_{e_i} * u_i`` with ``u_i`` a unit series in the
truncation cone.  Composition follows ``(S o T)* = T* o S*``; the clockwise
product over a sector is ``S(l_1) o S(l_2) o ...`` with ``l_1`` the first ray
met when sweeping clockwise from the anticlockwise boundary.

Characters multiply without a twist, ``x_a x_b = x_{a+b}``.  The factor
``(1 - x_gamma)`` of a Stokes factor is the one of the twisted torus
(``x_a x_b = (-1)^{<a,b>} x_{a+b}``); transported to the untwisted torus it
becomes ``(1 - sigma(gamma) x_gamma)`` with the quadratic refinement
``sigma`` of :func:`quadratic_refinement`.  Pass ``twisted=False`` for the
literal untwisted reading, under which the pentagon identity fails.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from sympy.functions.combinatorial.numbers import mobius

from .lattice import (
    CentralCharge,
    Ray,
    Vector,
    WallOfSecondKind,
    active_rays,
    as_vector,
    clockwise_distance,
    content,
    pairing,
    same_ray,
    vadd,
)
from .torus import CharacterSeries, ConeTruncation, one_minus_character_power


class BoundaryActive(ValueError):
    """An active class sits on a sector boundary."""

    def __init__(self, gamma: Vector, which: str):
        super().__init__(f"class {gamma} lies on the {which} boundary ray of the sector")
        self.gamma = gamma


def _rational_map(m: Mapping) -> dict[Vector, Fraction]:
    return {as_vector(k): Fraction(v) for k, v in m.items() if Fraction(v) != 0}


def dt_from_omega(omega: Mapping, truncation: ConeTruncation) -> dict[Vector, Fraction]:
    """DT(a) = sum_{a = k b, k >= 1} Omega(b) / k^2 on the truncation."""
    omega = _rational_map(omega)
    dt: dict[Vector, Fraction] = {}
    for beta, value in omega.items():
        if beta not in truncation:
            raise ValueError(f"Omega is supported outside the truncation at {beta}")
        k = 1
        while True:
            alpha = tuple(k * x for x in beta)
            if alpha not in truncation:
                break
            dt[alpha] = dt.get(alpha, Fraction(0)) + value / (k * k)
            k += 1
    return {a: v for a, v in dt.items() if v != 0}


def omega_from_dt(dt: Mapping, truncation: ConeTruncation) -> dict[Vector, Fraction]:
    """Moebius inversion: Omega(a) = sum_{k | a} mu(k)/k^2 DT(a/k)."""
    dt = _rational_map(dt)
    candidates = set()
    for beta in dt:
        if beta not in truncation:
            raise ValueError(f"DT is supported outside the truncation at {beta}")
        k = 1
        while (alpha := tuple(k * x for x in beta)) in truncation:
            candidates.add(alpha)
            k += 1
    omega = {}
    for alpha in candidates:
        c = content(alpha)
        total = Fraction(0)
        for k in range(1, c + 1):
            if c % k:
                continue
            mu = int(mobius(k))
            if mu:
                total += Fraction(mu, k * k) * dt.get(tuple(x // k for x in alpha), Fraction(0))
        if total:
            omega[alpha] = total
    return omega


@dataclass
class DTData:
    """Exact BPS invariants Omega and DT invariants on one truncation cone."""

    truncation: ConeTruncation
    omega: dict[Vector, Fraction]
    dt: dict[Vector, Fraction]

    @classmethod
    def from_omega(cls, omega: Mapping, truncation: ConeTruncation) -> "DTData":
        om = {k: v for k, v in _rational_map(omega).items()}
        return cls(truncation, om, dt_from_omega(om, truncation))

    @classmethod
    def from_dt(cls, dt: Mapping, truncation: ConeTruncation) -> "DTData":
        d = _rational_map(dt)
        return cls(truncation, omega_from_dt(d, truncation), d)

    @property
    def support(self) -> list[Vector]:
        return sorted(self.omega)

    def to_json(self) -> dict:
        return {
            "omega": [{"gamma": list(g), "value": str(v)} for g, v in sorted(self.omega.items())],
            "dt": [{"gamma": list(g), "value": str(v)} for g, v in sorted(self.dt.items())],
        }


def parse_rational_entries(entries: Iterable[Mapping]) -> dict[Vector, Fraction]:
    """[{"gamma": [1, 0], "value": "1/4"}, ...] -> {(1, 0): Fraction(1, 4)}."""
    out = {}
    for e in entries:
        g = as_vector(e["gamma"])
        if g in out:
            raise ValueError(f"duplicate class {g}")
        out[g] = Fraction(str(e["value"]))
    return out


def quadratic_refinement(lattice, gamma: Sequence[int]) -> int:
    """sigma(gamma) = (-1)^{sum_{i<j} g_i g_j eta^{ij}}.

    Satisfies sigma(a + b) = (-1)^{<a,b>} sigma(a) sigma(b) and sigma = 1 on
    the basis (and on multiples of basis vectors).
    """
    n = len(gamma)
    e = sum(gamma[i] * gamma[j] * lattice.eta[i][j] for i in range(n) for j in range(i + 1, n))
    return -1 if e % 2 else 1


class TorusAutomorphism:
    """Poisson automorphism given by unit multipliers on the basis characters."""

    def __init__(self, truncation: ConeTruncation, multipliers: Sequence[CharacterSeries]):
        n = truncation.lattice.rank
        if len(multipliers) != n:
            raise ValueError(f"need {n} multipliers, got {len(multipliers)}")
        for u in multipliers:
            if u.truncation != truncation:
                raise ValueError("multiplier truncation mismatch")
            if u[truncation.zero] != 1:
                raise ValueError("multipliers must have constant term 1")
        self.truncation = truncation
        self.multipliers = tuple(multipliers)
        self._cache: dict[Vector, CharacterSeries] = {}

    @classmethod
    def identity(cls, truncation: ConeTruncation, domain: str = "exact") -> "TorusAutomorphism":
        one = CharacterSeries.constant(truncation, 1, domain)
        return cls(truncation, [one] * truncation.lattice.rank)

    @property
    def domain(self) -> str:
        return self.multipliers[0].domain

    def multiplier(self, beta: Sequence[int]) -> CharacterSeries:
        """u_beta with S*(x_beta) = x_beta u_beta."""
        beta = tuple(beta)
        if beta not in self._cache:
            out = CharacterSeries.constant(self.truncation, 1, self.domain)
            for b, u in zip(beta, self.multipliers):
                if b:
                    out = out * (u**b)
            self._cache[beta] = out
        return self._cache[beta]

    def apply(self, f: CharacterSeries) -> CharacterSeries:
        """S*(f) for a series supported in the cone."""
        out: dict[Vector, object] = {}
        for alpha, c in f.coeffs.items():
            u = self.multiplier(alpha)
            for delta, d in u.coeffs.items():
                cls = vadd(alpha, delta)
                if cls in self.truncation:
                    out[cls] = out[cls] + c * d if cls in out else c * d
        return CharacterSeries(self.truncation, out, f.domain)

    def compose(self, other: "TorusAutomorphism") -> "TorusAutomorphism":
        """self o other, i.e. pullback other* o self*."""
        if other.truncation != self.truncation:
            raise ValueError("truncation mismatch")
        mults = []
        for i, u in enumerate(self.multipliers):
            basis = tuple(int(i == j) for j in range(self.truncation.lattice.rank))
            mults.append(other.multiplier(basis) * other.apply(u))
        return TorusAutomorphism(self.truncation, mults)

    def max_abs_diff(self, other: "TorusAutomorphism"):
        return max(a.max_abs_diff(b) for a, b in zip(self.multipliers, other.multipliers))

    def diffs(self, other: "TorusAutomorphism") -> list[dict]:
        """Per-basis, per-class differences of multipliers (nonzero only)."""
        rows = []
        for i, (a, b) in enumerate(zip(self.multipliers, other.multipliers)):
            for g, c in sorted((a - b).coeffs.items()):
                rows.append({"basis": i, "gamma": list(g), "diff": str(c) if a.domain == "exact" else repr(c)})
        return rows

    def __eq__(self, other):
        if not isinstance(other, TorusAutomorphism):
            return NotImplemented
        return self.truncation == other.truncation and self.multipliers == other.multipliers

    def __repr__(self):
        return "TorusAutomorphism(" + "; ".join(f"x_e{i} -> x_e{i}*({u})" for i, u in enumerate(self.multipliers)) + ")"

    def poisson_defect(self):
        """Largest coefficient of S*{x_a, x_b} - {S* x_a, S* x_b} over basis pairs.

        With S*(x_b) = x_b u_b the bracket identity reduces, after dividing by
        x_{a+b}, to ``sum_{c,d} u_c v_d <a+c, b+d> x_{c+d} = <a,b> u_{a+b}``.
        """
        lat = self.truncation.lattice
        basis = lat.basis()
        worst = 0
        for a, b in itertools.combinations_with_replacement(basis, 2):
            u, v = self.multiplier(a), self.multiplier(b)
            lhs: dict[Vector, object] = {}
            for (c, uc), (d, vd) in itertools.product(u.coeffs.items(), v.coeffs.items()):
                cd = vadd(c, d)
                if cd not in self.truncation:
                    continue
                m = pairing(lat, vadd(a, c), vadd(b, d))
                if m:
                    lhs[cd] = lhs.get(cd, 0) + m * (uc * vd)
            lhs_series = CharacterSeries(self.truncation, lhs, u.domain)
            rhs = self.multiplier(vadd(a, b)).scale(pairing(lat, a, b))
            worst = max(worst, lhs_series.max_abs_diff(rhs))
        return worst


def stokes_factor(
    ray_classes: Iterable[Sequence[int]],
    dt: DTData,
    truncation: ConeTruncation | None = None,
    twisted: bool = True,
) -> TorusAutomorphism:
    """S*(x_b) = x_b prod_{gamma on the ray} (1 - x_gamma)^{Omega(gamma) <gamma, b>}.

    Binomial expansions are cut at the truncation; rational exponents use
    generalized binomial coefficients.  ``twisted`` selects the sign
    convention described in the module docstring.
    """
    trunc = truncation or dt.truncation
    lat = trunc.lattice
    classes = [as_vector(g) for g in ray_classes]
    mults = []
    for b in lat.basis():
        u = CharacterSeries.constant(trunc, 1)
        for gamma in classes:
            om = dt.omega.get(gamma, Fraction(0))
            m = pairing(lat, gamma, b)
            if om and m and gamma in trunc:
                sign = quadratic_refinement(lat, gamma) if twisted else 1
                u = u * one_minus_character_power(trunc, gamma, om * m, sign=sign)
        mults.append(u)
    return TorusAutomorphism(trunc, mults)


@dataclass(frozen=True)
class Sector:
    """Convex sector swept clockwise from ``start`` to ``end`` (opening < pi)."""

    start: Ray
    end: Ray

    def __post_init__(self):
        if not 0 < self.opening < math.pi:
            raise ValueError(f"sector opening {self.opening} is not in (0, pi)")

    @classmethod
    def from_angles(cls, start: float, end: float) -> "Sector":
        return cls(Ray.at_angle(start), Ray.at_angle(end))

    @property
    def opening(self) -> float:
        return clockwise_distance(self.start.direction, self.end.direction)

    def locate(self, z: complex, tol: float = 1e-12) -> str:
        """'inside', 'outside', 'start' or 'end' (on a boundary ray)."""
        if same_ray(self.start.direction, z, tol):
            return "start"
        if same_ray(self.end.direction, z, tol):
            return "end"
        d = clockwise_distance(self.start.direction, z)
        return "inside" if d < self.opening else "outside"


def sector_rays(
    sector: Sector, charge: CentralCharge, dt: DTData, tol: float = 1e-12
) -> list[tuple[Ray, list[Vector]]]:
    """Active rays inside the sector, clockwise from its start."""
    support = []
    for gamma in dt.support:
        z = charge(gamma)
        if z == 0:
            raise WallOfSecondKind(gamma)
        where = sector.locate(z, tol)
        if where in ("start", "end"):
            raise BoundaryActive(gamma, where)
        if where == "inside":
            support.append(gamma)
    return active_rays(charge, support, sector.start, tol)


def sector_product(
    sector: Sector,
    charge: CentralCharge,
    dt: DTData,
    truncation: ConeTruncation | None = None,
    tol: float = 1e-12,
    twisted: bool = True,
) -> TorusAutomorphism:
    """Clockwise product of the ray Stokes factors inside the sector."""
    trunc = truncation or dt.truncation
    out = TorusAutomorphism.identity(trunc)
    for _, classes in sector_rays(sector, charge, dt, tol):
        out = out.compose(stokes_factor(classes, dt, trunc, twisted))
    return out


@dataclass
class WallCrossingReport:
    degree_bound: int
    max_discrepancy: Fraction
    diffs: list[dict] = field(default_factory=list)
    rays_before: list[list[list[int]]] = field(default_factory=list)
    rays_after: list[list[list[int]]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.max_discrepancy == 0

    def to_json(self) -> dict:
        return {
            "degree_bound": self.degree_bound,
            "max_discrepancy": str(self.max_discrepancy),
            "ok": self.ok,
            "rays_before": self.rays_before,
            "rays_after": self.rays_after,
            "diffs": self.diffs,
        }


def verify_wall_crossing(
    dt_before: DTData,
    z_before: CentralCharge,
    dt_after: DTData,
    z_after: CentralCharge,
    sector: Sector,
    truncation: ConeTruncation | None = None,
    tol: float = 1e-12,
    twisted: bool = True,
) -> WallCrossingReport:
    """Compare the clockwise sector products on both sides of a wall."""
    trunc = truncation or dt_before.truncation
    before = sector_product(sector, z_before, dt_before, trunc, tol, twisted)
    after = sector_product(sector, z_after, dt_after, trunc, tol, twisted)
    return WallCrossingReport(
        degree_bound=trunc.degree_bound,
        max_discrepancy=Fraction(before.max_abs_diff(after)),
        diffs=before.diffs(after),
        rays_before=[[list(g) for g in cls] for _, cls in sector_rays(sector, z_before, dt_before, tol)],
        rays_after=[[list(g) for g in cls] for _, cls in sector_rays(sector, z_after, dt_after, tol)],
    )
