"""Error of the Einstein run at r = 5 against the closed form, across tolerances and handoff radii."""

import math

import numpy as np

from soliton_forge import IntegrationParams, InitialConditions, integrate


def main():
    ic = InitialConditions("s1r3", 1.0, 0.0)
    print(f"{'r_handoff':>9} {'rtol':>7} {'atol':>7} {'rel err a':>10} {'max |f|':>10} {'steps':>6}")
    for rs in (1e-3, 1e-2):
        for rt, at in ((1e-8, 1e-10), (1e-10, 1e-12), (1e-12, 1e-14)):
            s = integrate(ic, IntegrationParams(r_max=5.0, einstein=True, rel_tol=rt, abs_tol=at,
                                                r_series_max=rs, series_order=8))
            ea = np.max(np.abs(s.y[:, 0] / np.cosh(s.r / math.sqrt(3)) - 1))
            print(f"{rs:9.0e} {rt:7.0e} {at:7.0e} {ea:10.2e} {np.max(np.abs(s.y[:, 4])):10.2e} "
                  f"{s.diagnostics.steps:6d}")


if __name__ == "__main__":
    main()
