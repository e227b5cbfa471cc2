"""The b'_inf = 1 level set of the S2xR2 shooting map, on two nested b0 grids."""

import numpy as np

from soliton_forge import IntegrationParams
from soliton_forge.degree import FCache, level_set_b_slope


def main():
    F = FCache("s2r2", IntegrationParams())
    for n in (12, 23):
        pts, missing = level_set_b_slope(np.geomspace(0.2, 5.0, n), 1.0, (1e-1, 1e2), F=F)
        print(f"-- {n} values of b0 ({len(missing)} without a root)")
        for p in pts:
            print(f"b0 {p.b0:8.4f}  -f0 {p.x:9.5f}  a_slope {p.a_slope:.6f}")
        print(f"max a_slope {max(p.a_slope for p in pts):.6f}")


if __name__ == "__main__":
    main()
