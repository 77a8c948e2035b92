"""Hyperkahler and Plebanski residuals for a family of exact potentials."""

import numpy as np

from joyce.axioms import JoyceCandidate, SamplePlan, check_J1_J2, check_J3, check_J4, check_J5
from joyce.hk import covariant_derivative_residual, curvature
from joyce.jets import Potential, character_term, monomial
from joyce.lattice import Lattice

LAT = Lattice([[0, 1], [-1, 0]])

POTENTIALS = {
    "0": Potential(LAT),
    "theta1^3": Potential(LAT, [monomial(2, 1, theta_exp=(3, 0))]),
    "theta1^3/z1": Potential(LAT, [monomial(2, 1, z_exp=(-1, 0), theta_exp=(3, 0))]),
    "pair": Potential(LAT, [character_term((1, 1), 0.3), character_term((-1, -1), 0.3)]),
    "theta1^4": Potential(LAT, [monomial(2, 1, theta_exp=(4, 0))]),
    "theta1^2 theta2^2": Potential(LAT, [monomial(2, 1, theta_exp=(2, 2))]),
}


def main():
    plan = SamplePlan(seed=0)
    print(f"{'potential':>18} {'J1J2':>5} {'J3':>5} {'J4':>5} {'J5':>5} {'pde':>9} {'nabla J':>9} {'flat':>5}")
    for name, W in POTENTIALS.items():
        c = JoyceCandidate(W, plan)
        reps = [check_J1_J2(c), check_J3(c), check_J4(c), check_J5(c)]
        z, th = np.array([0.9 + 0.2j, 1.1 - 0.3j]), np.array([0.25 + 0.1j, -0.4j])
        pde = reps[0].residuals["plebanski_pde"]
        nab = covariant_derivative_residual(W, z, th, "J")
        flat = curvature(W, z, th)[1]
        marks = ["ok" if r.passed else "x" for r in reps]
        print(f"{name:>18} {marks[0]:>5} {marks[1]:>5} {marks[2]:>5} {marks[3]:>5} {pde:9.1e} {nab:9.1e} {str(flat):>5}")


if __name__ == "__main__":
    main()
