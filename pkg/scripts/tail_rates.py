"""Tail behaviour on the 5x5 acceptance grid.

For each run prints the log-log slope of |f' + r - K| on r >= 10 and the
oscillation of r^2 |Rm| about its tail mean, measured against r and against
the shifted radius r - K.
"""

import numpy as np

from soliton_forge import IntegrationParams, InitialConditions, sweep
from soliton_forge.geometry import max_abs_curvature


def oscillation(radius, q, r, r_max):
    qq = radius ** 2 * q
    mean = np.mean(qq[r >= 0.5 * r_max])
    return np.max(np.abs(qq[r >= 10] - mean)) / mean


def main():
    print(f"{'run':>22} {'K':>9} {'r_max':>6} {'slope':>7} {'osc(r)':>8} {'osc(r-K)':>9}")
    for top in ("s1r3", "s2r2"):
        ics = [InitialConditions(top, o, f) for o in np.linspace(0.5, 2, 5) for f in np.linspace(-3, -0.1, 5)]
        for s in sweep(ics, IntegrationParams()):
            r = s.r
            dev = np.abs(s.y[:, 5] + r - s.K)
            use = (r >= 10) & (dev > 1e3 * np.finfo(float).eps * r)
            slope = np.polyfit(np.log(r[use]), np.log(dev[use]), 1)[0]
            q = max_abs_curvature(s.y)
            tag = f"{top}({s.ic.orbit_size:.3g},{s.ic.f0:.3g})"
            print(f"{tag:>22} {s.K:9.4f} {s.r_max:6.0f} {slope:7.3f} "
                  f"{oscillation(r, q, r, s.r_max):8.3f} {oscillation(r - s.K, q, r, s.r_max):9.3f}")


if __name__ == "__main__":
    main()
