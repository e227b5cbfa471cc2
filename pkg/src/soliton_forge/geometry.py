"""Curvature frame, soliton identities and cone curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .errors import DegeneratePoint, InvalidParameters
from .profile_ode import (InitialConditions, ProfileState, SeriesJet, Topology,
                          second_derivatives)

if TYPE_CHECKING:
    from .cone_map import ConeSlopes
    from .integrator import SolitonSolution

COMPONENTS = ("rm1221", "rm1331", "rm1441", "rm2332", "rm2442", "rm3443")


@dataclass(frozen=True)
class CurvatureFrame:
    """Sectional curvatures in the orthonormal frame (dr, S1, S2, S2) plus Ricci and R."""

    rm1221: float
    rm1331: float
    rm1441: float
    rm2332: float
    rm2442: float
    rm3443: float
    ric11: float
    ric22: float
    ric33: float
    scalar: float

    def sectionals(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in COMPONENTS])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.sectionals())))


def _frame_from_parts(rm1221, rm1331, rm2332, rm3443, vectorized=False):
    ric11 = rm1221 + 2.0 * rm1331
    ric22 = rm1221 + 2.0 * rm2332
    ric33 = rm1331 + rm2332 + rm3443
    scalar = ric11 + ric22 + 2.0 * ric33
    return dict(rm1221=rm1221, rm1331=rm1331, rm1441=rm1331, rm2332=rm2332,
                rm2442=rm2332, rm3443=rm3443, ric11=ric11, ric22=ric22, ric33=ric33,
                scalar=scalar)


def curvature_parts(a, da, b, db, dda, ddb):
    """The four independent sectional curvatures; scalars or arrays."""
    return -dda / a, -ddb / b, -da * db / (a * b), (1.0 - db * db) / (b * b)


def curvature(state: ProfileState, second_derivs=None,
              r_series_max: float = 0.0) -> CurvatureFrame:
    """Frame curvatures at a regular point. ``second_derivs`` = (a'', b'', f'') or None."""
    if state.r <= r_series_max or state.r <= 0 or state.a <= 0 or state.b <= 0:
        raise DegeneratePoint(f"curvature formulas are singular at r={state.r}; use curvature_at_origin")
    if second_derivs is None:
        second_derivs = second_derivatives(state.a, state.da, state.b, state.db, state.df)
    dda, ddb = second_derivs[0], second_derivs[1]
    parts = curvature_parts(state.a, state.da, state.b, state.db, dda, ddb)
    return CurvatureFrame(**{k: float(v) for k, v in _frame_from_parts(*parts).items()})


def curvature_arrays(y: np.ndarray) -> dict:
    """Vectorized frame over an (n, 6) sample table."""
    a, da, b, db, f, df = y.T
    dda, ddb, ddf = second_derivatives(a, da, b, db, df)
    out = _frame_from_parts(*curvature_parts(a, da, b, db, dda, ddb))
    out["ddf"] = ddf
    return out


def _series_ratio(num: np.ndarray, den: np.ndarray, r: float) -> float:
    """Limit-safe value of num(r)/den(r) for power series with a common zero at 0."""
    tol = 1e-13 * max(1.0, float(np.max(np.abs(den))))
    k = 0
    while k < len(den) and abs(den[k]) <= tol:
        k += 1
    num = num[k:]
    den = den[k:]
    P = np.polynomial.polynomial
    return float(P.polyval(r, num) / P.polyval(r, den))


def curvature_at_origin(jet: SeriesJet, r: float = 0.0) -> CurvatureFrame:
    """Frame from the jet, with the degenerate quotients resolved term by term."""
    P = np.polynomial.polynomial
    n = jet.order + 1
    A, B = jet.a, jet.b
    dA, dB = P.polyder(A), P.polyder(B)
    ddA, ddB = P.polyder(dA), P.polyder(dB)

    def trunc(p):
        return np.asarray(p)[:n]

    rm1221 = -_series_ratio(trunc(ddA), A, r)
    rm1331 = -_series_ratio(trunc(ddB), B, r)
    rm2332 = -_series_ratio(trunc(P.polymul(dA, dB)), trunc(P.polymul(A, B)), r)
    one_minus = P.polysub([1.0], P.polymul(dB, dB))
    rm3443 = _series_ratio(trunc(one_minus), trunc(P.polymul(B, B)), r)
    return CurvatureFrame(**{k: float(v) for k, v in
                             _frame_from_parts(rm1221, rm1331, rm2332, rm3443).items()})


def scalar_at_origin(ic: InitialConditions) -> float:
    if ic.topology is Topology.S1xR3:
        return -3.0 * ic.f0 - 4.0
    return -2.0 * ic.f0 - 4.0


def laplacian_f(state: ProfileState, ddf: float) -> float:
    return ddf + (state.da / state.a + 2.0 * state.db / state.b) * state.df


def trace_residual(state: ProfileState, frame: CurvatureFrame, second_derivs=None) -> float:
    """R + Laplacian(f) + 4."""
    if second_derivs is None:
        second_derivs = second_derivatives(state.a, state.da, state.b, state.db, state.df)
    return frame.scalar + laplacian_f(state, second_derivs[2]) + 4.0


def bianchi_residual(state: ProfileState, frame: CurvatureFrame, ic: InitialConditions) -> float:
    """R + |grad f|^2 + 2f - R(0)."""
    return frame.scalar + state.df ** 2 + 2.0 * state.f - scalar_at_origin(ic)


def potential_identity_residual(state: ProfileState, ic: InitialConditions, ddf=None) -> float:
    """Laplacian(f) - |grad f|^2 - 2f - c*f0 with c = 3 (S1xR3) or 2 (S2xR2)."""
    if ddf is None:
        ddf = second_derivatives(state.a, state.da, state.b, state.db, state.df)[2]
    c = 3.0 if ic.topology is Topology.S1xR3 else 2.0
    return laplacian_f(state, ddf) - state.df ** 2 - 2.0 * state.f - c * ic.f0


def residual_arrays(r: np.ndarray, y: np.ndarray, ic: InitialConditions) -> dict:
    """Identity residuals on a sample table (all samples must have r > 0)."""
    fr = curvature_arrays(y)
    a, da, b, db, f, df = y.T
    lap = fr["ddf"] + (da / a + 2.0 * db / b) * df
    trace = fr["scalar"] + lap + 4.0
    bianchi = fr["scalar"] + df ** 2 + 2.0 * f - scalar_at_origin(ic)
    c = 3.0 if ic.topology is Topology.S1xR3 else 2.0
    potential = lap - df ** 2 - 2.0 * f - c * ic.f0
    sol11 = fr["ric11"] + fr["ddf"] + 1.0
    sol22 = fr["ric22"] + da * df / a + 1.0
    sol33 = fr["ric33"] + db * df / b + 1.0
    return dict(trace=trace, bianchi=bianchi, potential=potential,
                soliton11=sol11, soliton22=sol22, soliton33=sol33)


def max_abs_curvature(y: np.ndarray) -> np.ndarray:
    fr = curvature_arrays(y)
    return np.max(np.abs(np.vstack([fr[c] for c in COMPONENTS])), axis=0)


def residual_summary(sol: "SolitonSolution") -> dict:
    env = 1.0 + sol.r ** 2
    res = residual_arrays(sol.r, sol.y, sol.ic)
    tail = sol.r >= 10.0
    sup = math.nan
    if np.any(tail):
        sup = float(np.max(sol.r[tail] ** 2 * max_abs_curvature(sol.y[tail])))
    return dict(max_trace_residual=float(np.max(np.abs(res["trace"]) / env)),
                max_bianchi_residual=float(np.max(np.abs(res["bianchi"]) / env)),
                tail_curvature_sup=sup)


def cone_curvature(slopes: "ConeSlopes", s: float) -> CurvatureFrame:
    """Curvature of ds^2 + (a_slope s)^2 g_S1 + (b_slope s)^2 g_S2 at radius s."""
    if not s > 0:
        raise InvalidParameters("cone radius must be positive")
    if not (slopes.a_slope > 0 and slopes.b_slope > 0):
        raise InvalidParameters("cone slopes must be positive")
    beta = slopes.b_slope
    return CurvatureFrame(**{k: float(v) for k, v in _frame_from_parts(
        0.0, 0.0, -1.0 / s ** 2, (1.0 - beta ** 2) / beta ** 2 / s ** 2).items()})
