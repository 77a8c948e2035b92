"""Pentagon identity across truncation degrees, both ray orientations, signed and unsigned factors."""

import argparse
import math
import time

from joyce.lattice import CentralCharge, Lattice
from joyce.torus import ConeTruncation
from joyce.wallcross import DTData, Sector, verify_wall_crossing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degrees", type=int, nargs="+", default=[4, 6, 8, 10])
    args = ap.parse_args()
    lat = Lattice([[0, 1], [-1, 0]])
    sector = Sector.from_angles(math.pi / 2 + 0.3, -0.3)
    z_two, z_three = CentralCharge([1, 1j]), CentralCharge([1j, 1])
    print(f"{'degree':>6} {'twisted':>8} {'orientation':>12} {'discrepancy':>12} {'seconds':>8}")
    for n in args.degrees:
        tr = ConeTruncation(lat, [(1, 0), (0, 1)], n)
        two = DTData.from_omega({(1, 0): 1, (0, 1): 1}, tr)
        three = DTData.from_omega({(1, 0): 1, (0, 1): 1, (1, 1): 1}, tr)
        for twisted in (True, False):
            for label, a, b in (("2 | 3", z_two, z_three), ("3 | 2", z_three, z_two)):
                t = time.perf_counter()
                rep = verify_wall_crossing(two, a, three, b, sector, twisted=twisted)
                print(f"{n:>6} {str(twisted):>8} {label:>12} {str(rep.max_discrepancy):>12} {time.perf_counter() - t:8.2f}")


if __name__ == "__main__":
    main()
