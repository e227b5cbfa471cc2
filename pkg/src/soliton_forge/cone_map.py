"""Asymptotic cone data: the K-shift, cone slopes, the shooting map and conicality."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import InvalidParameters, NeverConical, NotConverged
from .geometry import max_abs_curvature
from .integrator import IntegrationParams, SolitonSolution, integrate
from .profile_ode import InitialConditions, second_derivatives

K_TOL = 1e-4
SLOPE_TOL = 1e-4


@dataclass(frozen=True)
class ConeSlopes:
    a_slope: float
    b_slope: float
    err_estimate: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.a_slope, self.b_slope])


def _at_half(solution: SolitonSolution) -> np.ndarray:
    half = 0.5 * solution.r_max
    try:
        return solution.y[solution.sample_index(half)]
    except KeyError:
        return solution.evaluate([half])[0]


def K_pair(solution: SolitonSolution) -> tuple[float, float]:
    """f' + r at r_max and at r_max / 2."""
    half = 0.5 * solution.r_max
    return (float(solution.y[-1, 5] + solution.r_max), float(_at_half(solution)[5] + half))


def estimate_K(solution: SolitonSolution) -> float:
    """Limit of f' + r, read off at the outermost sample."""
    if solution.ic.is_einstein:
        raise InvalidParameters("no K-shift in Einstein reference mode")
    k_out, k_half = K_pair(solution)
    if not abs(k_out - k_half) <= K_TOL:
        raise NotConverged(f"K estimates differ by {abs(k_out - k_half):.3g} "
                           f"between r={solution.r_max / 2:g} and r={solution.r_max:g}")
    return k_out


def slope_estimates(solution: SolitonSolution, K: float):
    """(primary, secondary, half-radius primary) for a and for b."""
    rm = solution.r_max
    a, da, b, db = solution.y[-1, :4]
    half = _at_half(solution)
    return ((float(da), float(a / (rm - K)), float(half[1])),
            (float(db), float(b / (rm - K)), float(half[3])))


def extract_slopes(solution: SolitonSolution, K: float | None = None) -> ConeSlopes:
    """a'(r_max), b'(r_max) with a two-estimator error bound."""
    if K is None:
        K = solution.K if solution.K is not None else estimate_K(solution)
    (pa, sa, ha), (pb, sb, hb) = slope_estimates(solution, K)
    err = max(abs(pa - sa) + abs(pa - ha), abs(pb - sb) + abs(pb - hb))
    if not err <= SLOPE_TOL:
        raise NotConverged(f"slope err_estimate {err:.3g} > {SLOPE_TOL:g} at r_max={solution.r_max:g}")
    if not (pa > 0 and pb > 0):
        raise NotConverged("non-positive cone slope")
    return ConeSlopes(pa, pb, err)


def eval_F(ic: InitialConditions, params: IntegrationParams = IntegrationParams()) -> ConeSlopes:
    """Shooting map: (orbit size, -f0) -> (a'_inf, b'_inf)."""
    if not ic.f0 < 0:
        raise InvalidParameters("the shooting map needs f0 < 0")
    sol = integrate(ic, params)
    K = estimate_K(sol) if sol.K is None else sol.K
    return extract_slopes(sol, K)


@dataclass(frozen=True)
class EpsilonConicalityReport:
    epsilon: float
    s0: float
    d_s0: float
    max_metric_gap: float
    s_grid: np.ndarray
    gap: np.ndarray


def _splines(solution: SolitonSolution):
    r = np.asarray(solution.r)
    a, da, b, db, f, df = solution.y.T
    dda, ddb, ddf = second_derivatives(a, da, b, db, df)
    return (CubicHermiteSpline(r, a, da), CubicHermiteSpline(r, b, db),
            CubicHermiteSpline(r, df, ddf))


def conicality_profile(solution: SolitonSolution, slopes: ConeSlopes, K: float | None = None,
                       n_grid: int = 240, s_min: float | None = None):
    """(s grid, d(s), metric gap) from the characteristic d'(s) = -f'(d)/s.

    The anchor is d(s*) = r* with s* = r* - K at the outermost sample.
    """
    if K is None:
        K = solution.K if solution.K is not None else estimate_K(solution)
    a_sp, b_sp, df_sp = _splines(solution)
    r_star = solution.r_max
    s_star = r_star - K
    if s_min is None:
        s_min = max(1e-2 * s_star, 0.5)
    s_min = min(s_min, 0.5 * s_star)
    r_floor = float(solution.r[0])

    def rhs(u, d):
        # u = ln s; dd/du = s d'(s) = -f'(d)
        return [-float(df_sp(min(max(d[0], r_floor), r_star)))]

    u_grid = np.linspace(math.log(s_star), math.log(s_min), n_grid)
    out = solve_ivp(rhs, (u_grid[0], u_grid[-1]), [r_star], t_eval=u_grid,
                    method="DOP853", rtol=1e-11, atol=1e-12)
    s = np.exp(out.t[::-1])
    d = out.y[0][::-1]
    valid = d > r_floor
    s, d = s[valid], d[valid]
    dprime = -df_sp(d) / s
    gap = np.max(np.vstack([np.abs(a_sp(d) ** 2 / (slopes.a_slope * s) ** 2 - 1.0),
                            np.abs(b_sp(d) ** 2 / (slopes.b_slope * s) ** 2 - 1.0),
                            np.abs(dprime ** 2 - 1.0)]), axis=0)
    return s, d, gap


def epsilon_conicality(solution: SolitonSolution, slopes: ConeSlopes, epsilon: float,
                       K: float | None = None, n_grid: int = 240) -> EpsilonConicalityReport:
    """Smallest grid radius s0 beyond which the metric-level gap stays below epsilon."""
    if not epsilon > 0:
        raise InvalidParameters("epsilon must be positive")
    s, d, gap = conicality_profile(solution, slopes, K, n_grid)
    bad = np.nonzero(gap > epsilon)[0]
    if len(bad) and bad[-1] == len(s) - 1:
        raise NeverConical(f"gap {gap[-1]:.3g} > {epsilon:g} at the outermost radius; increase r_max")
    i0 = 0 if not len(bad) else bad[-1] + 1
    return EpsilonConicalityReport(float(epsilon), float(s[i0]), float(d[i0]),
                                   float(np.max(gap[i0:])), s, gap)


def decay_constant(solution: SolitonSolution, r_from: float = 10.0) -> float:
    """sup over r >= r_from of r^2 times the largest sectional curvature."""
    if solution.ic.is_einstein:
        raise InvalidParameters("r^2 |Rm| grows without bound for the hyperbolic metric")
    tail = solution.r >= r_from
    if not np.any(tail):
        raise NotConverged(f"no samples beyond r={r_from}")
    return float(np.max(solution.r[tail] ** 2 * max_abs_curvature(solution.y[tail])))
