"""Long-range integration of the profile equations from the series handoff."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from . import _kernel
from .errors import (BlowUp, InvalidParameters, MonotonicityViolation, NotReached,
                     SolitonForgeError, StepLimitExceeded)
from .profile_ode import (DEFAULT_ORDER, R_SERIES_MAX, InitialConditions, ProfileState,
                          SeriesJet, boundary_jet, jet_eval)

if TYPE_CHECKING:
    from .cone_map import ConeSlopes

R0_LEVEL = -1.0


@dataclass(frozen=True)
class IntegrationParams:
    """Tolerances and the outer-radius policy.

    ``r_max=None`` selects the adaptive policy: integrate to 40, 80, 160, ...
    until the radius is at least 4*r0 and both slopes change by less than
    ``plateau_tol`` between r/2 and r, or ``r_cap`` is hit.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    r_max: Optional[float] = None
    max_steps: int = 50_000_000
    dense_output_stride: float = 1.05
    r_series_max: float = R_SERIES_MAX
    series_order: int = DEFAULT_ORDER
    plateau_tol: float = 2e-5
    plateau_min_r: float = 20.0
    r_min_auto: float = 40.0
    r_cap: float = 10240.0
    sign_tol: float = 1e-12
    overflow_guard: float = 1e150
    einstein: bool = False
    extra_radii: tuple = ()

    def validate(self) -> None:
        if not (0 < self.abs_tol <= self.rel_tol < 1e-3):
            raise InvalidParameters("need 0 < abs_tol <= rel_tol < 1e-3")
        if self.r_max is not None and not self.r_max > 1:
            raise InvalidParameters("r_max must exceed 1")
        if not self.dense_output_stride > 1:
            raise InvalidParameters("dense_output_stride must exceed 1")
        if not 0 < self.r_series_max <= 1e-2:
            raise InvalidParameters("r_series_max must lie in (0, 1e-2]")
        if self.max_steps < 1:
            raise InvalidParameters("max_steps must be positive")


@dataclass(frozen=True)
class Diagnostics:
    termination: str
    steps: int
    rejected: int
    max_trace_residual: float = math.nan
    max_bianchi_residual: float = math.nan
    tail_curvature_sup: float = math.nan


@dataclass(frozen=True)
class SolitonSolution:
    """Sampled trajectory plus derived asymptotic data. Treat as immutable."""

    ic: InitialConditions
    params: IntegrationParams
    jet: SeriesJet
    r: np.ndarray
    y: np.ndarray
    diagnostics: Diagnostics
    r0: Optional[float] = None
    K: Optional[float] = None
    slopes: Optional["ConeSlopes"] = None
    r0_state: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def samples(self) -> tuple:
        return tuple(ProfileState.from_array(ri, yi) for ri, yi in zip(self.r, self.y))

    def column(self, name: str) -> np.ndarray:
        return self.y[:, ["a", "da", "b", "db", "f", "df"].index(name)]

    def sample_index(self, r: float) -> int:
        """Index of the sample at radius r (exact grid match within 1e-12)."""
        i = int(np.searchsorted(self.r, r))
        for j in (i - 1, i):
            if 0 <= j < len(self.r) and abs(self.r[j] - r) <= 1e-12 * max(1.0, r):
                return j
        raise KeyError(r)

    def evaluate(self, radii) -> np.ndarray:
        """States at arbitrary radii by re-integrating from the closest sample below."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        out = np.empty((len(radii), 6))
        order = np.argsort(radii)
        for k in order:
            rk = radii[k]
            if rk <= self.r[0]:
                out[k] = jet_eval(self.jet, rk).as_array()
                continue
            if rk > self.r[-1] * (1 + 1e-12):
                raise ValueError(f"radius {rk} beyond the integrated range")
            i = int(np.searchsorted(self.r, rk))
            if i < len(self.r) and abs(self.r[i] - rk) <= 1e-14 * rk:
                out[k] = self.y[i]
                continue
            i -= 1
            res = _kernel.march(self.y[i].copy(), float(self.r[i]), np.array([rk]),
                                self.params.rel_tol, self.params.abs_tol,
                                0.1 * (rk - self.r[i]), self.params.max_steps, False, 0.0,
                                self.params.overflow_guard, R0_LEVEL, False)
            out[k] = res[2][0]
        return out

    def state_at(self, r: float) -> ProfileState:
        return ProfileState.from_array(r, self.evaluate([r])[0])


def _grid(r_lo: float, r_hi: float, stride: float, extras=()) -> np.ndarray:
    n = max(1, int(math.floor(math.log(r_hi / r_lo) / math.log(stride))))
    pts = r_lo * stride ** np.arange(1, n + 1)
    pts = np.concatenate([pts[pts < r_hi], [r_hi], [e for e in extras if r_lo < e < r_hi]])
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * pts[1:]])
    pts = pts[keep]
    pts[-1] = r_hi
    return pts


class _Marcher:
    """Accumulates kernel runs into one sample table."""

    def __init__(self, ic: InitialConditions, params: IntegrationParams):
        self.ic = ic
        self.params = params
        self.jet = boundary_jet(ic, params.series_order, params.r_series_max)
        y0 = jet_eval(self.jet, params.r_series_max).as_array()
        self.rs = [np.array([params.r_series_max])]
        self.ys = [y0[None, :]]
        self.r = params.r_series_max
        self.y = y0
        self.h = 1e-2 * params.r_series_max
        self.steps = 0
        self.rejected = 0
        self.r0 = None
        self.r0_state = None
        self.check_signs = not ic.is_einstein

    def advance(self, r_hi: float, extras=()):
        p = self.params
        grid = _grid(self.r, r_hi, p.dense_output_stride, extras)
        (status, n, Y, steps, rej, h, r_last, y_last,
         ev, r_ev, y_ev) = _kernel.march(self.y.copy(), self.r, grid, p.rel_tol, p.abs_tol,
                                         self.h, p.max_steps - self.steps, self.check_signs,
                                         p.sign_tol, p.overflow_guard, R0_LEVEL,
                                         self.r0 is None and not self.ic.is_einstein)
        self.steps += steps
        self.rejected += rej
        self.rs.append(grid[:n])
        self.ys.append(Y[:n])
        if ev and self.r0 is None:
            self.r0 = float(r_ev)
            self.r0_state = y_ev.copy()
        if n:
            self.r = float(grid[n - 1])
            self.y = Y[n - 1].copy()
        self.h = h
        if status != _kernel.STATUS_OK:
            self._fail(status, float(r_last), y_last)

    def arrays(self):
        r = np.concatenate(self.rs)
        y = np.concatenate(self.ys)
        if self.r0 is not None:
            i = int(np.searchsorted(r, self.r0))
            if not (i < len(r) and r[i] == self.r0):
                r = np.insert(r, i, self.r0)
                y = np.insert(y, i, self.r0_state, axis=0)
        r.flags.writeable = False
        y.flags.writeable = False
        return r, y

    def build(self, termination: str) -> SolitonSolution:
        r, y = self.arrays()
        return SolitonSolution(ic=self.ic, params=self.params, jet=self.jet, r=r, y=y,
                               diagnostics=Diagnostics(termination, self.steps, self.rejected),
                               r0=self.r0, r0_state=self.r0_state)

    def _fail(self, status, r_last, y_last):
        partial = self.build(f"guard:{status}")
        where = f"at r={r_last:.6g} (state {np.array2string(y_last, precision=4)})"
        if status == _kernel.STATUS_SIGN:
            raise MonotonicityViolation(f"sign invariant of a', b' or f' broken {where}", partial)
        if status == _kernel.STATUS_STEPS:
            raise StepLimitExceeded(f"max_steps={self.params.max_steps} reached {where}", partial)
        if status == _kernel.STATUS_UNDERFLOW:
            raise StepLimitExceeded(f"step size underflow {where}", partial)
        raise BlowUp(f"trajectory left the admissible region {where}", partial)


def _plateau_reached(m: _Marcher, r_hi: float, r_half_state) -> bool:
    p = m.params
    if r_hi < p.plateau_min_r:
        return False
    if m.r0 is None or r_hi < 4.0 * m.r0:
        return False
    return (abs(m.y[1] - r_half_state[1]) < p.plateau_tol
            and abs(m.y[3] - r_half_state[3]) < p.plateau_tol)


def _finalize(sol: SolitonSolution) -> SolitonSolution:
    from . import cone_map, geometry

    diag = geometry.residual_summary(sol)
    sol = replace(sol, diagnostics=replace(sol.diagnostics, **diag))
    if sol.ic.is_einstein:
        return sol
    try:
        K = cone_map.estimate_K(sol)
    except SolitonForgeError:
        return sol
    sol = replace(sol, K=K)
    try:
        slopes = cone_map.extract_slopes(sol)
    except SolitonForgeError:
        return sol
    return replace(sol, slopes=slopes)


def integrate(ic: InitialConditions, params: IntegrationParams = IntegrationParams()) -> SolitonSolution:
    """Integrate from the jet handoff radius to r_max (fixed or adaptive)."""
    ic.validate()
    params.validate()
    if ic.is_einstein and not params.einstein:
        raise InvalidParameters("f0 = 0 is only accepted in Einstein reference mode")
    if params.einstein and not ic.is_einstein:
        raise InvalidParameters("Einstein reference mode requires f0 = 0")
    m = _Marcher(ic, params)
    if params.r_max is not None:
        extras = tuple(params.extra_radii) + (0.5 * params.r_max,)
        m.advance(params.r_max, extras)
        return _finalize(m.build("r_max"))
    if ic.is_einstein:
        raise InvalidParameters("Einstein reference mode needs an explicit r_max")
    r_hi = params.r_min_auto
    m.advance(r_hi, tuple(params.extra_radii) + (0.5 * r_hi,))
    half = m.ys[-1][np.argmin(np.abs(m.rs[-1] - 0.5 * r_hi))] if len(m.rs[-1]) else m.y
    while True:
        if _plateau_reached(m, r_hi, half):
            return _finalize(m.build("plateau"))
        if 2.0 * r_hi > params.r_cap:
            return _finalize(m.build("r_cap"))
        half = m.y.copy()
        r_hi *= 2.0
        m.advance(r_hi, tuple(params.extra_radii))


def detect_r0(solution: SolitonSolution) -> float:
    """Radius where f' = -1, located during integration by bisection in the bracketing step."""
    if solution.ic.is_einstein:
        raise NotReached("f' vanishes identically in Einstein mode")
    df = solution.column("df")
    if np.any(np.diff(df[solution.r > 0]) > solution.params.sign_tol * (1 + np.abs(df[1:]))):
        raise SolitonForgeError("f' is not monotone along the run; root would not be unique")
    if solution.r0 is None:
        raise NotReached(f"f' > -1 up to r={solution.r_max}; increase r_max")
    return solution.r0


def thread_count() -> int:
    raw = os.environ.get("SOLITON_FORGE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParameters(f"SOLITON_FORGE_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise InvalidParameters("SOLITON_FORGE_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


@dataclass(frozen=True)
class PointFailure:
    ic: InitialConditions
    error: SolitonForgeError


def sweep(grid: Sequence[InitialConditions], params: IntegrationParams = IntegrationParams(),
          threads: Optional[int] = None) -> list:
    """Independent integrations in input order. Failures come back as PointFailure."""
    for ic in grid:
        ic.validate()

    def one(ic):
        try:
            return integrate(ic, params)
        except SolitonForgeError as exc:
            return PointFailure(ic, exc)

    n = threads if threads is not None else thread_count()
    if n <= 1 or len(grid) <= 1:
        return [one(ic) for ic in grid]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(one, grid))
