"""Phi of planar cones compared with the half-plane.

For every opening the cone is rasterized at h and h/2, Phi is evaluated at
two radii (it should not depend on r for a cone) and Richardson-extrapolated.
The gap to the half-plane value is printed with its error estimate.

    python demos/cone_energies.py [--side 64] [--s 0.5]
"""

import argparse
import math

from fracmin.extension import cone_curve
from fracmin.kernel import FractionalOrder


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=32, help="cells per unit length of the coarse grid")
    ap.add_argument("--s", type=float, default=0.5)
    args = ap.parse_args()
    order = FractionalOrder(args.s)
    h = 1.0 / args.side
    radii = [0.25, 0.5]
    plane = cone_curve(math.pi, order, radii, h)
    print(f"half-plane: Phi = {plane.values[1]:.4f} +- {plane.discretization_error[1]:.4f}")
    for frac in (1 / 12, 1 / 6, 1 / 4, 3 / 4):
        opening = 2 * math.pi * frac
        c = cone_curve(opening, order, radii, h)
        gap = c.values[1] - plane.values[1]
        err = c.discretization_error[1] + plane.discretization_error[1]
        spread = abs(c.values[0] - c.values[1]) / c.values[1]
        print(
            f"opening {math.degrees(opening):5.1f} deg: Phi(0.25) = {c.values[0]:.4f}, "
            f"Phi(0.5) = {c.values[1]:.4f} (spread {spread:.3f}), gap {gap:+.4f} +- {err:.4f}"
        )


if __name__ == "__main__":
    main()
