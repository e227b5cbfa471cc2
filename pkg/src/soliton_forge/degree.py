"""Degree certificates for the shooting map: signed preimage counts and winding numbers.

Orientation: the parameter plane (orbit_size, -f0) is taken right-handed, so a
regular preimage counts sign(det DF) in those coordinates and boundary loops
are traversed counterclockwise in that plane.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .cone_map import ConeSlopes, eval_F
from .errors import (BracketFailure, InvalidParameters, JacobianSingular, LevelSetNotFound,
                     NoneFound, OnTarget, Refine, SolitonForgeError)
from .integrator import IntegrationParams, thread_count
from .profile_ode import InitialConditions, Topology

SIGN_CONVENTION = "(orbit_size, -f0) right-handed; loops counterclockwise"
RESIDUAL_TOL = 1e-4
POLISH_TOL = 1e-10
MERGE_DIST = 1e-3


class Certificate(enum.Enum):
    SignedCount = "SignedCount"
    Winding = "Winding"
    NonSurjectivity = "NonSurjectivity"


@dataclass(frozen=True)
class Box:
    """Rectangle [orbit_lo, orbit_hi] x [x_lo, x_hi] with x = -f0."""

    orbit_lo: float
    orbit_hi: float
    x_lo: float
    x_hi: float

    def __post_init__(self):
        if not (0 < self.orbit_lo < self.orbit_hi and 0 < self.x_lo < self.x_hi):
            raise InvalidParameters(f"box must lie in (0, inf)^2 with lo < hi: {self}")

    def contains(self, p, slack: float = 0.0) -> bool:
        o, x = p
        return (self.orbit_lo * (1 - slack) <= o <= self.orbit_hi * (1 + slack)
                and self.x_lo * (1 - slack) <= x <= self.x_hi * (1 + slack))

    def as_tuple(self):
        return (self.orbit_lo, self.orbit_hi, self.x_lo, self.x_hi)


@dataclass(frozen=True)
class Preimage:
    ic: InitialConditions
    sign: int
    residual: float
    det: float


@dataclass
class DegreeReport:
    topology: Topology
    target: object
    preimages: list
    winding: Optional[int]
    certificate: Certificate
    search_box: Optional[Box]
    signed_count: Optional[int] = None
    sign_convention: str = SIGN_CONVENTION
    details: dict = field(default_factory=dict)


class FCache:
    """Memoized shooting map; eval_F is a pure function of (ic, params)."""

    def __init__(self, topology: Topology, params: IntegrationParams):
        self.topology = Topology.parse(topology)
        self.params = params
        self._store: dict = {}

    def _key(self, orbit, x):
        return (float(orbit), float(x))

    def __call__(self, orbit: float, x: float) -> np.ndarray:
        key = self._key(orbit, x)
        hit = self._store.get(key)
        if hit is None:
            ic = InitialConditions(self.topology, orbit, -x)
            try:
                hit = eval_F(ic, self.params)
            except SolitonForgeError as exc:
                hit = exc
            self._store[key] = hit
        if isinstance(hit, Exception):
            raise hit
        return hit.as_array()

    def many(self, points) -> list:
        todo = [p for p in dict.fromkeys(self._key(*p) for p in points) if p not in self._store]
        n = thread_count()
        if n > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=n) as pool:
                list(pool.map(lambda p: self._safe(*p), todo))
        else:
            for p in todo:
                self._safe(*p)
        return [self(*p) for p in points]

    def _safe(self, orbit, x):
        try:
            self(orbit, x)
        except SolitonForgeError:
            pass


def _fd_step(p: float) -> float:
    # 1e-3 (1 + |p|), kept inside the half-line p > 0
    return min(1e-3 * (1.0 + abs(p)), 0.5 * abs(p))


def jacobian(F: FCache, orbit: float, x: float) -> np.ndarray:
    """Central-difference Jacobian of F in the (orbit_size, -f0) coordinates."""
    ho, hx = _fd_step(orbit), _fd_step(x)
    vals = F.many([(orbit + ho, x), (orbit - ho, x), (orbit, x + hx), (orbit, x - hx)])
    return np.column_stack([(vals[0] - vals[1]) / (2 * ho), (vals[2] - vals[3]) / (2 * hx)])


def _newton(F: FCache, target: np.ndarray, start, box: Box, max_iter: int = 25):
    """Damped Newton in log coordinates; returns (point, residual) or None.

    Iterates past RESIDUAL_TOL until POLISH_TOL or stagnation, then accepts
    anything under RESIDUAL_TOL.
    """
    u = np.log(np.asarray(start, dtype=float))
    lo = np.log([box.orbit_lo, box.x_lo])
    hi = np.log([box.orbit_hi, box.x_hi])
    margin = 0.25 * (hi - lo)
    try:
        val = F(*np.exp(u)) - target
    except SolitonForgeError:
        return None
    res = float(np.max(np.abs(val)))
    for _ in range(max_iter):
        if res < POLISH_TOL:
            break
        p = np.exp(u)
        try:
            J = jacobian(F, *p) * p[None, :]
        except SolitonForgeError:
            return None
        try:
            step = -np.linalg.solve(J, val)
        except np.linalg.LinAlgError:
            return None
        step_len = np.max(np.abs(step))
        if step_len > 1.0:
            step /= step_len
        lam = 1.0
        improved = False
        while lam > 1.0 / 64:
            u_new = np.clip(u + lam * step, lo - margin, hi + margin)
            try:
                v_new = F(*np.exp(u_new)) - target
            except SolitonForgeError:
                lam *= 0.5
                continue
            r_new = float(np.max(np.abs(v_new)))
            if r_new < res:
                u, val, res = u_new, v_new, r_new
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
    return (np.exp(u), res) if res < RESIDUAL_TOL else None


def invert_F(target, topology, box: Box, params: IntegrationParams = IntegrationParams(),
             starts_per_side: int = 3, F: Optional[FCache] = None) -> list:
    """All preimages of ``target`` found by multistart damped Newton inside ``box``."""
    topology = Topology.parse(topology)
    tgt = target.as_array() if isinstance(target, ConeSlopes) else np.asarray(target, dtype=float)
    if not np.all(tgt > 0):
        raise InvalidParameters("target slopes must be positive")
    F = F or FCache(topology, params)
    orbits = np.geomspace(box.orbit_lo, box.orbit_hi, starts_per_side + 2)[1:-1]
    xs = np.geomspace(box.x_lo, box.x_hi, starts_per_side + 2)[1:-1]
    F.many([(o, x) for o in orbits for x in xs])
    roots = []
    for o in orbits:
        for x in xs:
            got = _newton(F, tgt, (o, x), box)
            if got is None:
                continue
            p, res = got
            if not box.contains(p, slack=1e-9):
                continue
            if any(np.max(np.abs(p - q.ic_point)) < MERGE_DIST for q in roots):
                continue
            roots.append(_Root(p, res))
    if not roots:
        raise NoneFound(f"no preimage of {tgt.tolist()} in box {box.as_tuple()}")
    out = []
    for root in roots:
        J = jacobian(F, *root.ic_point)
        det = float(np.linalg.det(J))
        if abs(det) <= 1e-10 * max(1.0, float(np.max(np.abs(J))) ** 2):
            warnings.warn(f"singular Jacobian at preimage {root.ic_point.tolist()}; excluded")
            continue
        ic = InitialConditions(topology, root.ic_point[0], -root.ic_point[1])
        out.append(Preimage(ic, int(np.sign(det)), root.residual, det))
    if roots and not out:
        raise JacobianSingular("every preimage found has a singular Jacobian")
    return out


@dataclass
class _Root:
    ic_point: np.ndarray
    residual: float


# --------------------------------------------------------------------------
# winding numbers


def winding_number(loop_values: Sequence, target) -> int:
    """Net turns of (value - target) around a closed loop (last point joins the first)."""
    v = np.asarray(loop_values, dtype=float) - np.asarray(target, dtype=float)[None, :]
    norms = np.hypot(v[:, 0], v[:, 1])
    scale = max(1.0, float(np.max(norms)))
    if np.any(norms <= 1e-14 * scale):
        raise OnTarget("a loop value coincides with the target")
    ang = np.arctan2(v[:, 1], v[:, 0])
    inc = np.diff(np.concatenate([ang, ang[:1]]))
    inc = (inc + math.pi) % (2 * math.pi) - math.pi
    if np.any(np.abs(inc) >= math.pi - 1e-12):
        raise Refine("angular increment reached pi; sample the loop more densely")
    total = float(np.sum(inc)) / (2 * math.pi)
    k = int(round(total))
    if abs(total - k) >= 0.1:
        raise Refine(f"winding sum {total:.3f} is not near an integer")
    return k


def box_loop(box: Box, per_side: int) -> list:
    """Counterclockwise boundary points; x sides are log-spaced."""
    o = np.geomspace(box.orbit_lo, box.orbit_hi, per_side + 1)
    x = np.geomspace(box.x_lo, box.x_hi, per_side + 1)
    pts = ([(oi, box.x_lo) for oi in o[:-1]] + [(box.orbit_hi, xi) for xi in x[:-1]]
           + [(oi, box.x_hi) for oi in o[::-1][:-1]] + [(box.orbit_lo, xi) for xi in x[::-1][:-1]])
    return pts


def _loop_param(pts):
    return np.log(np.asarray(pts))


def loop_winding(F: FCache, box: Box, target, per_side: int = 8, max_angle: float = math.pi / 4,
                 max_points: int = 2000) -> tuple[int, list]:
    """Winding of F along the box boundary with adaptive subdivision of large angular steps."""
    tgt = np.asarray(target, dtype=float)
    pts = box_loop(box, per_side)
    while True:
        vals = F.many(pts)
        v = np.asarray(vals) - tgt
        ang = np.arctan2(v[:, 1], v[:, 0])
        inc = np.abs((np.diff(np.concatenate([ang, ang[:1]])) + math.pi) % (2 * math.pi) - math.pi)
        bad = np.nonzero(inc > max_angle)[0]
        if not len(bad) or len(pts) >= max_points:
            return winding_number(vals, tgt), pts
        new = []
        for i, p in enumerate(pts):
            new.append(p)
            if i in set(bad.tolist()):
                q = pts[(i + 1) % len(pts)]
                new.append(tuple(np.sqrt(np.asarray(p) * np.asarray(q))))
        pts = new


# --------------------------------------------------------------------------
# S1 x R3: reduce to F1(-f0) = b-slope of F(1, -f0)


def _crossings(xs, vals, target):
    out = []
    for i in range(len(xs) - 1):
        g0, g1 = vals[i] - target, vals[i + 1] - target
        if g0 == 0.0:
            out.append((xs[i], xs[i]))
        elif g0 * g1 < 0:
            out.append((xs[i], xs[i + 1]))
    return out


def degree_s1r3(target_b_slope: float, f0_range=(1e-3, 1e2),
                params: IntegrationParams = IntegrationParams(), n_grid: int = 26,
                F: Optional[FCache] = None, xtol: float = 1e-7) -> DegreeReport:
    """Signed count of solutions of F1(-f0) = target on (f0_range) in the -f0 variable.

    The grid is refined once (midpoints added) and the crossing count must be
    stable under that refinement.  Each crossing is polished by Brent's method.
    """
    lo, hi = f0_range
    if not (0 < lo < hi):
        raise InvalidParameters("f0_range must satisfy 0 < lo < hi in the -f0 variable")
    if not target_b_slope > 0:
        raise InvalidParameters("target slope must be positive")
    F = F or FCache(Topology.S1xR3, params)

    def F1(x):
        return float(F(1.0, x)[1])

    coarse = np.geomspace(lo, hi, n_grid)
    fine = np.geomspace(lo, hi, 2 * n_grid - 1)
    F.many([(1.0, x) for x in fine])
    v_lo, v_hi = F1(lo), F1(hi)
    if not (v_lo > target_b_slope > v_hi):
        raise BracketFailure(f"F1({lo:g})={v_lo:.4g}, F1({hi:g})={v_hi:.4g} do not straddle "
                             f"{target_b_slope:g}; widen f0_range")
    c_coarse = _crossings(coarse, [F1(x) for x in coarse], target_b_slope)
    c_fine = _crossings(fine, [F1(x) for x in fine], target_b_slope)
    preimages = []
    for x0, x1 in c_fine:
        if x0 == x1:
            root = x0
        else:
            root = math.exp(brentq(lambda u: F1(math.exp(u)) - target_b_slope,
                                   math.log(x0), math.log(x1), xtol=xtol))
        F0 = float(F(1.0, root)[0])
        # det DF = F0 * F1' in (a0, -f0); F1' sign from the bracket
        s_f1 = 1 if (x0 == x1 or F1(x1) > F1(x0)) else -1
        sign = int(np.sign(F0)) * s_f1
        preimages.append(Preimage(InitialConditions(Topology.S1xR3, 1.0, -root), sign,
                                  abs(F1(root) - target_b_slope), math.nan))
    count = sum(p.sign for p in preimages)
    report = DegreeReport(
        topology=Topology.S1xR3, target=float(target_b_slope), preimages=preimages,
        winding=None, certificate=Certificate.SignedCount, search_box=None, signed_count=count,
        details=dict(f0_range=(lo, hi), F1_endpoints=(v_lo, v_hi),
                     crossings_coarse=len(c_coarse), crossings_fine=len(c_fine),
                     F1_grid=[(float(x), F1(x)) for x in fine]))
    if len(c_coarse) != len(c_fine):
        raise Refine(f"crossing count changed under refinement ({len(c_coarse)} -> {len(c_fine)})")
    if abs(count) != 1:
        report.details["failed"] = f"|signed count| = {abs(count)}"
    return report


def s1r3_winding(box: Box, target=None, params: IntegrationParams = IntegrationParams(),
                 per_side: int = 8, F: Optional[FCache] = None) -> DegreeReport:
    """Winding certificate for S1xR3 around a generic target inside the image."""
    F = F or FCache(Topology.S1xR3, params)
    if target is None:
        mid = (math.sqrt(box.orbit_lo * box.orbit_hi), math.sqrt(box.x_lo * box.x_hi))
        target = F(*mid) * np.array([1.1, 0.9])
    w, pts = loop_winding(F, box, target, per_side)
    return DegreeReport(Topology.S1xR3, ConeSlopes(float(target[0]), float(target[1])), [], w,
                        Certificate.Winding, box, details=dict(loop_points=len(pts)))


# --------------------------------------------------------------------------
# S2 x R2


@dataclass(frozen=True)
class LevelSetPoint:
    b0: float
    x: float
    a_slope: float


def level_set_b_slope(b0_values, level: float = 1.0, x_range=(1e-1, 1e2),
                      params: IntegrationParams = IntegrationParams(), F: Optional[FCache] = None,
                      n_scan: int = 7, xtol: float = 1e-7):
    """Trace {b'_inf = level} by root-finding in -f0 for each b0.

    Returns (points, missing) where missing lists b0 values with no root in x_range.
    """
    F = F or FCache(Topology.S2xR2, params)
    scan = np.geomspace(x_range[0], x_range[1], n_scan)
    F.many([(b0, x) for b0 in b0_values for x in scan])
    points, missing = [], []
    for b0 in b0_values:
        def g(u, b0=b0):
            return float(F(b0, math.exp(u))[1]) - level
        vals = []
        for x in scan:
            try:
                vals.append(g(math.log(x)))
            except SolitonForgeError:
                vals.append(math.nan)
        bracket = None
        for i in range(len(scan) - 1):
            if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] <= 0:
                bracket = (math.log(scan[i]), math.log(scan[i + 1]))
                break
        if bracket is None:
            missing.append(LevelSetNotFound(f"b'_inf = {level} not attained for b0={b0:g} "
                                            f"with -f0 in {x_range}"))
            continue
        x = math.exp(brentq(g, *bracket, xtol=xtol))
        points.append(LevelSetPoint(float(b0), x, float(F(b0, x)[0])))
    return points, missing


def degree_s2r2(box: Box = Box(0.2, 5.0, 0.1, 10.0), params: IntegrationParams = IntegrationParams(),
                n_b0: int = 12, level_x_range=(1e-1, 1e2), per_side: int = 8,
                F: Optional[FCache] = None) -> DegreeReport:
    """Non-surjectivity and winding certificates for S2xR2."""
    F = F or FCache(Topology.S2xR2, params)
    b0s = np.geomspace(box.orbit_lo, box.orbit_hi, n_b0)
    points, missing = level_set_b_slope(b0s, 1.0, level_x_range, params, F)
    if not points:
        raise LevelSetNotFound("b'_inf = 1 was not attained for any b0 in the box")
    a_max = max(p.a_slope for p in points)
    target = np.array([2.0 * a_max, 1.0])
    try:
        pre = invert_F(target, Topology.S2xR2, box, params, F=F)
    except NoneFound:
        pre = []
    w, pts = loop_winding(F, box, target, per_side)
    return DegreeReport(
        topology=Topology.S2xR2, target=ConeSlopes(float(target[0]), 1.0), preimages=pre,
        winding=w, certificate=Certificate.NonSurjectivity, search_box=box,
        signed_count=sum(p.sign for p in pre),
        details=dict(level_set=points, level_set_missing=[str(m) for m in missing],
                     level_set_max_a_slope=a_max, none_found=not pre, loop_points=len(pts)))
