"""Profile equations for g = dr^2 + a(r)^2 g_S1 + b(r)^2 g_S2 with potential f(r).

The phase point is (a, a', b, b', f, f').  Both orbit types degenerate at
r = 0, so trajectories start from a Taylor jet evaluated at a small radius.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegeneratePoint, InvalidParameters, OutOfRange

R_SERIES_MAX = 1e-3
DEFAULT_ORDER = 6


class Topology(enum.Enum):
    S1xR3 = "S1xR3"
    S2xR2 = "S2xR2"

    @property
    def cli_tag(self) -> str:
        return {"S1xR3": "s1r3", "S2xR2": "s2r2"}[self.value]

    @classmethod
    def parse(cls, text) -> "Topology":
        if isinstance(text, Topology):
            return text
        key = str(text).strip().lower().replace("x", "").replace("_", "")
        table = {"s1r3": cls.S1xR3, "s2r2": cls.S2xR2}
        if key not in table:
            raise InvalidParameters(f"unknown topology {text!r}")
        return table[key]


@dataclass(frozen=True)
class InitialConditions:
    """Shooting parameters: orbit size (a0 or b0) and f0 = f''(0)."""

    topology: Topology
    orbit_size: float
    f0: float

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology.parse(self.topology))
        object.__setattr__(self, "orbit_size", float(self.orbit_size))
        object.__setattr__(self, "f0", float(self.f0))

    def validate(self) -> None:
        if not (math.isfinite(self.orbit_size) and self.orbit_size > 0):
            raise InvalidParameters(f"orbit size must be positive, got {self.orbit_size}")
        if not math.isfinite(self.f0) or self.f0 > 0:
            raise InvalidParameters(f"f0 must be <= 0, got {self.f0}")

    @property
    def is_einstein(self) -> bool:
        return self.f0 == 0.0


@dataclass(frozen=True)
class ProfileState:
    r: float
    a: float
    da: float
    b: float
    db: float
    f: float
    df: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.da, self.b, self.db, self.f, self.df])

    @classmethod
    def from_array(cls, r: float, y) -> "ProfileState":
        return cls(float(r), *(float(v) for v in y))


def second_derivatives(a, da, b, db, df):
    """(a'', b'', f'') in the fixed substitution order. Works on scalars and arrays."""
    dda = -2.0 * da * db / b + da * df + a
    ddb = (1.0 - db * db) / b - da * db / a + db * df + b
    ddf = dda / a + 2.0 * ddb / b - 1.0
    return dda, ddb, ddf


_second_derivatives_nb = njit(cache=True, nogil=True)(second_derivatives)


def rhs(state: ProfileState) -> np.ndarray:
    """(a', a'', b', b'', f', f'') at a non-degenerate phase point."""
    if not (state.r > 0 and state.a > 0 and state.b > 0):
        raise DegeneratePoint(
            f"rhs needs r, a, b > 0 (r={state.r}, a={state.a}, b={state.b}); use the series jet"
        )
    dda, ddb, ddf = second_derivatives(state.a, state.da, state.b, state.db, state.df)
    return np.array([state.da, dda, state.db, ddb, state.df, ddf])


# --------------------------------------------------------------------------
# series jet


@dataclass(frozen=True)
class SeriesJet:
    """Taylor coefficients of a, b, f at r = 0 (index k is the r^k coefficient)."""

    ic: InitialConditions
    order: int
    a: np.ndarray
    b: np.ndarray
    f: np.ndarray
    a_parity: str
    b_parity: str
    f_parity: str = "even"
    r_series_max: float = R_SERIES_MAX
    residual: float = field(default=0.0, compare=False)

    def derivative_at_origin(self, name: str, k: int) -> float:
        """k-th derivative of a, b or f at r = 0."""
        coeffs = getattr(self, name)
        if k >= len(coeffs):
            return 0.0
        return float(coeffs[k] * math.factorial(k))


def _parities(topology: Topology):
    if topology is Topology.S1xR3:
        return "even", "odd"
    return "odd", "even"


def _cleared_residuals(A, B, Fc, n_rows):
    """Taylor coefficients (degrees < n_rows) of the polynomial-cleared equations.

    E_a = a''b + 2a'b' - a'f'b - ab
    E_b = b''ab - a(1 - b'^2) + a'b'b - b'f'ab - ab^2
    E_f = f''ab - a''b - 2b''a + ab
    """
    P = np.polynomial.polynomial

    def mul(*ps):
        out = ps[0]
        for p in ps[1:]:
            out = P.polymul(out, p)[: n_rows + 2]
        return out

    def d(p):
        return P.polyder(p) if len(p) > 1 else np.zeros(1, dtype=p.dtype)

    da, db, df = d(A), d(B), d(Fc)
    dda, ddb, ddf = d(da), d(db), d(df)
    ab = mul(A, B)
    one = np.zeros(1, dtype=A.dtype)
    one[0] = 1.0
    Ea = P.polyadd(P.polyadd(mul(dda, B), 2 * mul(da, db)), -P.polyadd(mul(da, df, B), ab))
    Eb = P.polysub(mul(ddb, ab), mul(A, P.polysub(one, mul(db, db))))
    Eb = P.polyadd(Eb, P.polysub(mul(da, db, B), P.polyadd(mul(db, df, ab), mul(ab, B))))
    Ef = P.polysub(mul(ddf, ab), P.polyadd(mul(dda, B), 2 * mul(ddb, A)))
    Ef = P.polyadd(Ef, ab)

    def rows(p):
        out = np.zeros(n_rows, dtype=p.dtype)
        m = min(n_rows, len(p))
        out[:m] = p[:m]
        return out

    return np.concatenate([rows(Ea), rows(Eb), rows(Ef)])


def boundary_jet(ic: InitialConditions, order: int = DEFAULT_ORDER,
                 r_series_max: float = R_SERIES_MAX) -> SeriesJet:
    """Taylor jet at the singular orbit, found by automated order matching.

    All free coefficients up to an internal degree ``order + 3`` are solved at
    once against the Taylor rows of the cleared equations (Gauss-Newton with
    an exact complex-step Jacobian).  Coupled pairs of rows at neighbouring
    degrees are handled without special casing.  The result is truncated to
    ``order``.
    """
    ic.validate()
    if int(order) != order or order < 3:
        raise InvalidParameters(f"jet order must be an integer >= 3, got {order}")
    order = int(order)
    top = ic.topology
    M = order + 3
    a_par, b_par = _parities(top)
    p = ic.orbit_size

    A0 = np.zeros(M + 1)
    B0 = np.zeros(M + 1)
    F0 = np.zeros(M + 1)
    F0[2] = ic.f0 / 2.0
    if top is Topology.S1xR3:
        A0[0], B0[1] = p, 1.0
        a_free = [k for k in range(2, M + 1, 2)]
        b_free = [k for k in range(3, M + 1, 2)]
    else:
        A0[1], B0[0] = 1.0, p
        a_free = [k for k in range(3, M + 1, 2)]
        b_free = [k for k in range(2, M + 1, 2)]
    f_free = [k for k in range(4, M + 1, 2)]
    slots = [("a", k) for k in a_free] + [("b", k) for k in b_free] + [("f", k) for k in f_free]
    n_rows = M - 1

    def assemble(x):
        A = A0.astype(x.dtype)
        B = B0.astype(x.dtype)
        Fc = F0.astype(x.dtype)
        tgt = {"a": A, "b": B, "f": Fc}
        for (name, k), v in zip(slots, x):
            tgt[name][k] = v
        return A, B, Fc

    def resid(x):
        return _cleared_residuals(*assemble(x), n_rows)

    x = np.zeros(len(slots))
    h = 1e-30
    scale = 1.0 + p + 1.0 / p + abs(ic.f0)
    for _ in range(60):
        r0 = resid(x)
        J = np.empty((len(r0), len(x)))
        for j in range(len(x)):
            xc = x.astype(complex)
            xc[j] += 1j * h
            J[:, j] = resid(xc).imag / h
        step = np.linalg.lstsq(J, -r0, rcond=None)[0]
        x = x + step
        if np.max(np.abs(step)) <= 1e-16 * scale * (1.0 + np.max(np.abs(x))):
            break
    res = float(np.max(np.abs(resid(x))))
    A, B, Fc = assemble(x)
    return SeriesJet(
        ic=ic,
        order=order,
        a=A[: order + 1].copy(),
        b=B[: order + 1].copy(),
        f=Fc[: order + 1].copy(),
        a_parity=a_par,
        b_parity=b_par,
        r_series_max=r_series_max,
        residual=res,
    )


def _poly_and_derivative(coeffs, r):
    P = np.polynomial.polynomial
    return P.polyval(r, coeffs), P.polyval(r, P.polyder(coeffs))


def jet_eval(jet: SeriesJet, r: float) -> ProfileState:
    """Evaluate the jet and its first derivatives at a small radius."""
    if r < 0 or r > jet.r_series_max * (1 + 1e-12):
        raise OutOfRange(f"r={r} outside [0, {jet.r_series_max}]")
    a, da = _poly_and_derivative(jet.a, r)
    b, db = _poly_and_derivative(jet.b, r)
    f, df = _poly_and_derivative(jet.f, r)
    return ProfileState(float(r), float(a), float(da), float(b), float(db), float(f), float(df))


def jet_second_derivatives(jet: SeriesJet, r: float):
    """(a'', b'', f'') of the truncated jet at r."""
    P = np.polynomial.polynomial
    return tuple(float(P.polyval(r, P.polyder(c, 2))) for c in (jet.a, jet.b, jet.f))


def equation_residuals(state: ProfileState, dda: float, ddb: float, ddf: float):
    """Residuals of the three profile equations given second derivatives."""
    ea, eb, ef = second_derivatives(state.a, state.da, state.b, state.db, state.df)
    return dda - ea, ddb - eb, ddf - (dda / state.a + 2.0 * ddb / state.b - 1.0)


# --------------------------------------------------------------------------
# transformed S2xR2 system in the variable rho = a^2


def transformed_numerator(state, rho: float) -> np.ndarray:
    """rho * d/drho of (F, h, b, B); finite at rho = 0.

    Coordinates: rho = a^2, h = (a')^2, F = f'/(2 a a'), B = b'/(2 a a').
    """
    F, h, b, B = (float(v) for v in state)
    if not (h > 0 and b > 0):
        raise DegeneratePoint(f"transformed system needs h, b > 0 (h={h}, b={b})")
    r = rho
    dF = (1.0 + b * b - 4.0 * B * B * h * r - b * b * F * (1.0 + 2.0 * F * h) * r
          + 4.0 * b * B * h * (-1.0 + 2.0 * F * r)) / (2.0 * b * b * h)
    dh = -4.0 * h * r * B / b + 2.0 * h * r * F + r
    db = B * r
    dB = 1.0 / (4.0 * h * b) - B + r * B * B / b - r * B / (2.0 * h) + b / (4.0 * h)
    return np.array([dF, dh, db, dB])


def rhs_transformed_s2r2(state, rho: float) -> np.ndarray:
    """d/drho of (F, h, b, B)."""
    if not rho > 0:
        raise DegeneratePoint("transformed system needs rho > 0")
    return transformed_numerator(state, rho) / rho


def transformed_boundary_state(b0: float, f0: float) -> np.ndarray:
    """(F, h, b, B) at rho = 0."""
    return np.array([f0 / 2.0, 1.0, b0, 0.25 * (b0 + 1.0 / b0)])


def transformed_from_profile(state: ProfileState) -> tuple[float, np.ndarray]:
    """Map a profile phase point to (rho, (F, h, b, B))."""
    two_aa = 2.0 * state.a * state.da
    return state.a ** 2, np.array([state.df / two_aa, state.da ** 2, state.b, state.db / two_aa])


def profile_from_transformed(rho: float, u) -> tuple[float, float, float, float, float]:
    """(a, a', b, b', f') from (rho, (F, h, b, B))."""
    F, h, b, B = u
    a = math.sqrt(rho)
    da = math.sqrt(h)
    two_aa = 2.0 * a * da
    return a, da, b, two_aa * B, two_aa * F
