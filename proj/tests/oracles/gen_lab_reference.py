"""Reference CIELAB values for an sRGB grid.

Independent of the C++ code path: the RGB->XYZ matrix is derived here from
the sRGB primary chromaticities and the D65 white chromaticity instead of
using the published 7-digit matrix.

Usage: python3 gen_lab_reference.py <steps> > lab_reference_<steps>.csv
"""
import sys

import numpy as np

PRIMARIES = {"r": (0.64, 0.33), "g": (0.30, 0.60), "b": (0.15, 0.06)}
WHITE_XY = (0.3127, 0.3290)


def xy_to_xyz(x, y):
    return np.array([x / y, 1.0, (1.0 - x - y) / y])


def rgb_to_xyz_matrix():
    prim = np.column_stack([xy_to_xyz(*PRIMARIES[k]) for k in "rgb"])
    white = xy_to_xyz(*WHITE_XY)
    scale = np.linalg.solve(prim, white)
    return prim * scale, white


def decode(v):
    return v / 12.92 if v <= 0.04045 else ((v + 0.055) / 1.055) ** 2.4


def lab(rgb, m, white):
    lin = np.array([decode(c) for c in rgb])
    xyz = m @ lin
    t = xyz / white
    d = 6.0 / 29.0
    f = np.where(t > d ** 3, np.cbrt(t), t / (3 * d * d) + 4.0 / 29.0)
    return 116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])


def main():
    steps = int(sys.argv[1]) if len(sys.argv) > 1 else 9
    m, white = rgb_to_xyz_matrix()
    print("r,g,b,L,a,b_star")
    grid = [i / (steps - 1) for i in range(steps)]
    for r in grid:
        for g in grid:
            for b in grid:
                L, a, bb = lab((r, g, b), m, white)
                print(f"{r:.6f},{g:.6f},{b:.6f},{L:.10f},{a:.10f},{bb:.10f}")


if __name__ == "__main__":
    main()
