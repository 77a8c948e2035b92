"""gl(2) Stokes factors: trace oracle, epsilon stability, and constancy under isomonodromic deformation."""

import argparse

import numpy as np

from joyce.glstokes import GLConnection, extract_stokes_factor, gl_flat_section, isomonodromic_deformation, rh3_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--v12", type=complex, default=0.3)
    ap.add_argument("--v21", type=complex, default=0.2)
    args = ap.parse_args()
    V = np.array([[0, args.v12], [args.v21, 0]], dtype=complex)
    c = GLConnection([0, 1], V)
    s0 = extract_stokes_factor(c, 0.0)
    s1 = extract_stokes_factor(c, np.pi)
    lam = np.sqrt(V[0, 1] * V[1, 0])
    print("S_0 =", np.round(s0.S, 12).tolist(), f"spread {s0.spread:.1e}")
    print("S_pi =", np.round(s1.S, 12).tolist(), f"spread {s1.spread:.1e}")
    print(f"tr(S_0 S_pi) = {np.trace(s0.S @ s1.S):.12f}   2 cos(2 pi lambda) = {2 * np.cos(2 * np.pi * lam):.12f}")
    fs = gl_flat_section(c, 0.3)
    print(f"normalisation residual {fs.normalization_residual:.2e}, Richardson ratio {fs.richardson_ratio:.3f}")
    print(f"RH3 residual {rh3_residual(c, 0.4, -0.4, [np.exp(0.1j), 0.7 * np.exp(-0.2j)]):.2e}")
    for target in ([0.2 + 0.1j, 1.3 + 0.4j], [-0.5j, 0.8 + 0.6j]):
        d = isomonodromic_deformation(c, target)
        change = max(np.abs(extract_stokes_factor(d, a).S - extract_stokes_factor(c, b).S).max()
                     for (a, i, j), (b, k, l) in zip(sorted(d.stokes_directions(), key=lambda x: x[1:]),
                                                     sorted(c.stokes_directions(), key=lambda x: x[1:])))
        print(f"deformation to u = {target}: Stokes change {change:.2e}")


if __name__ == "__main__":
    main()
