"""Print the independent-oracle numbers frozen in the regression tests."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import numpy as np  # noqa: E402

from oracles import scipy_r0, scipy_trajectory  # noqa: E402

for top, p, f0 in [("s1r3", 1, -1), ("s2r2", 1, -1), ("s1r3", 1, -0.1)]:
    sol = scipy_trajectory(top, p, f0, 40.0)
    y10 = sol.sol(10.0)
    print(top, p, f0, "r0 =", repr(scipy_r0(top, p, f0)))
    print("   state(10) =", np.array2string(y10, precision=17, separator=", "))
    print("   f'+r at 40 =", repr(sol.sol(40.0)[5] + 40.0))
