"""F1(-f0) = b-slope of the S1xR3 shooting map at a0 = 1 on a log grid of -f0."""

import numpy as np

from soliton_forge import IntegrationParams
from soliton_forge.degree import FCache, degree_s1r3


def main():
    F = FCache("s1r3", IntegrationParams())
    xs = np.geomspace(1e-3, 1e2, 16)
    vals = F.many([(1.0, x) for x in xs])
    print(f"{'-f0':>10} {'a_slope':>10} {'b_slope':>10}")
    for x, v in zip(xs, vals):
        print(f"{x:10.4g} {v[0]:10.6f} {v[1]:10.6f}")
    for target in (0.5, 1.0, 5.0):
        rep = degree_s1r3(target, (1e-3, 1e2), F=F)
        roots = ", ".join(f"{p.ic.f0:.6g}" for p in rep.preimages)
        print(f"target b_slope {target:g}: signed count {rep.signed_count}, f0 = {roots}")


if __name__ == "__main__":
    main()
