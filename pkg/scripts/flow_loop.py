"""Loop closure of the classical flow on the pentagon support, and the builder point-equation residual by degree."""

import numpy as np

from joyce.axioms import point_residual
from joyce.isomonodromy import FlowState, circle_path, integrate_flow
from joyce.lattice import Lattice
from joyce.torus import ConeTruncation

LAT = Lattice([[0, 1], [-1, 0]])
Z0 = np.array([1.0, 1j])


def main():
    print(f"{'degree':>6} {'rtol':>8} {'loop drift':>11} {'point residual':>15} {'within trunc.':>14}")
    for degree in (2, 3, 4, 6, 8):
        tr = ConeTruncation(LAT, [(1, 0), (0, 1)], degree)
        s = FlowState.create(LAT, Z0, {(1, 0): 0.1, (0, 1): 0.08}, tr)
        for rtol in (1e-8, 1e-10):
            out = integrate_flow(s, circle_path(Z0, 0, 0.3), rtol=rtol)
            drift = out.max_abs_diff(s)
            z, th = np.array([1.03, 1.02j]), np.array([0.3, 0.2j])
            full = point_residual(s, z, th)
            inner = point_residual(s, z, th, within_truncation=True)
            print(f"{degree:>6} {rtol:8.0e} {drift:11.2e} {full:15.2e} {inner:14.2e}")
    ring = [np.array([1, 0.5j * np.exp(2j * np.pi * k / 32)]) for k in range(33)]
    s = FlowState.create(LAT, Z0, {(1, 0): 0.1, (0, 1): 0.08}, ConeTruncation(LAT, [(1, 0), (0, 1)], 2))
    out = integrate_flow(s, [Z0] + ring + [Z0])
    print(f"loop of z2 around 0: F_(1,1) jump {out.F[(1, 1)]:.12f} vs 2 pi i F1 F2 = {2j * np.pi * 0.008:.12f}")


if __name__ == "__main__":
    main()
