"""Independent reference computations: symbolic series, scipy integration."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp


@lru_cache(maxsize=None)
def symbolic_jet(topology: str, orbit, f0, order: int = 6):
    """Taylor coefficients from sympy: solve the cleared equations row by row.

    ``orbit`` and ``f0`` may be numbers or sympy symbols. Returns dict of
    coefficient lists for a, b, f up to ``order``.
    """
    r = sp.Symbol("r")
    # two extra orders: the top coefficients are only fixed by later rows
    N = order + 2
    if topology == "s1r3":
        A = [orbit] + [0] * N
        B = [0, 1] + [0] * (N - 1)
        free_a = range(2, N + 1, 2)
        free_b = range(3, N + 1, 2)
    else:
        A = [0, 1] + [0] * (N - 1)
        B = [orbit] + [0] * N
        free_a = range(3, N + 1, 2)
        free_b = range(2, N + 1, 2)
    Fc = [0, 0, sp.nsimplify(f0) / 2 if not isinstance(f0, sp.Basic) else f0 / 2] + [0] * (N - 2)
    unknowns = []
    for k in free_a:
        A[k] = sp.Symbol(f"a{k}")
        unknowns.append(A[k])
    for k in free_b:
        B[k] = sp.Symbol(f"b{k}")
        unknowns.append(B[k])
    for k in range(4, N + 1, 2):
        Fc[k] = sp.Symbol(f"f{k}")
        unknowns.append(Fc[k])
    a = sum(c * r ** i for i, c in enumerate(A))
    b = sum(c * r ** i for i, c in enumerate(B))
    f = sum(c * r ** i for i, c in enumerate(Fc))
    da, db, df = (sp.diff(x, r) for x in (a, b, f))
    dda, ddb, ddf = (sp.diff(x, r, 2) for x in (a, b, f))
    eqs = [sp.expand(dda * b + 2 * da * db - da * df * b - a * b),
           sp.expand(ddb * a * b - a * (1 - db ** 2) + da * db * b - db * df * a * b - a * b * b),
           sp.expand(ddf * a * b - dda * b - 2 * ddb * a + a * b)]
    rows = []
    for e in eqs:
        P = sp.Poly(e, r)
        for m in range(N - 1):
            c = P.coeff_monomial(r ** m)
            if c != 0:
                rows.append(c)
    sol = sp.solve(rows, unknowns, dict=True)
    assert len(sol) == 1
    s = sol[0]
    sub = lambda lst: [sp.simplify(sp.sympify(c).subs(s)) for c in lst[: order + 1]]
    return dict(a=sub(A), b=sub(B), f=sub(Fc))


def _rhs(r, y):
    a, da, b, db, f, df = y
    dda = -2 * da * db / b + da * df + a
    ddb = (1 - db * db) / b - da * db / a + db * df + b
    ddf = dda / a + 2 * ddb / b - 1
    return [da, dda, db, ddb, df, ddf]


def _start_state(topology, orbit, f0, r1):
    js = symbolic_jet(topology, sp.nsimplify(orbit), sp.nsimplify(f0), 6)
    out = []
    for name in ("a", "b", "f"):
        c = [float(x) for x in js[name]]
        out.append(sum(ci * r1 ** i for i, ci in enumerate(c)))
        out.append(sum(i * ci * r1 ** (i - 1) for i, ci in enumerate(c) if i))
    return out


def scipy_trajectory(topology, orbit, f0, r_end, rtol=1e-12, atol=1e-14, r1=1e-3, events=None):
    """DOP853 run started from the symbolic jet."""
    y0 = _start_state(topology, orbit, f0, r1)
    return solve_ivp(_rhs, (r1, r_end), y0, method="DOP853", rtol=rtol, atol=atol,
                     dense_output=True, events=events)


def scipy_r0(topology, orbit, f0, r_end=50.0):
    ev = lambda r, y: y[5] + 1.0
    ev.terminal = True
    sol = scipy_trajectory(topology, orbit, f0, r_end, events=ev)
    return float(sol.t_events[0][0])


def transformed_trajectory(b0, f0, rho_end=1.5, rho_start=1e-12, F_rhs=None):
    """Integrate the (F, h, b, B) system in t = log(rho); also carries the radius s."""
    def numer(u, rho):
        F, h, b, B = u
        r = rho
        dF = (1 + b * b - 4 * B * B * h * r - b * b * F * (1 + 2 * F * h) * r
              + 4 * b * B * h * (-1 + 2 * F * r)) / (2 * b * b * h)
        dh = -4 * h * r * B / b + 2 * h * r * F + r
        dbb = B * r
        dB = 1 / (4 * h * b) - B + r * B * B / b - r * B / (2 * h) + b / (4 * h)
        return [dF, dh, dbb, dB]

    numer = F_rhs or numer

    def rhs(t, z):
        rho = math.exp(t)
        return list(numer(z[:4], rho)) + [math.sqrt(rho) / (2 * math.sqrt(z[1]))]

    z0 = [f0 / 2, 1.0, b0, 0.25 * (b0 + 1 / b0), math.sqrt(rho_start)]
    return solve_ivp(rhs, (math.log(rho_start), math.log(rho_end)), z0, method="DOP853",
                     rtol=1e-12, atol=1e-14, dense_output=True)
