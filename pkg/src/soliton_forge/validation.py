"""Invariant checks over a canned parameter grid; used by ``validate`` and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import cone_map, degree, geometry
from .integrator import IntegrationParams, SolitonSolution, integrate
from .profile_ode import InitialConditions, Topology, boundary_jet, second_derivatives

CANNED_GRID = (
    InitialConditions(Topology.S1xR3, 1.0, -1.0),
    InitialConditions(Topology.S1xR3, 0.5, -3.0),
    InitialConditions(Topology.S1xR3, 2.0, -0.3),
    InitialConditions(Topology.S2xR2, 1.0, -1.0),
    InitialConditions(Topology.S2xR2, 0.5, -2.0),
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def c1_constant(ic: InitialConditions) -> float:
    c = 3.0 if ic.topology is Topology.S1xR3 else 2.0
    return math.sqrt(-c * ic.f0)


# each check takes a solution and returns (passed, detail)


def fd_consistency(sol: SolitonSolution, radii=(0.5, 2.0, 8.0), h: float = 1e-3):
    """Centered differences of (a', b', f') against the rhs second derivatives."""
    worst = 0.0
    for r in radii:
        if r + h > sol.r_max:
            continue
        ym, y0, yp = sol.evaluate([r - h, r, r + h])
        sd = second_derivatives(y0[0], y0[1], y0[2], y0[3], y0[5])
        for k, col in enumerate((1, 3, 5)):
            fd = (yp[col] - ym[col]) / (2 * h)
            worst = max(worst, abs(fd - sd[k]) / (1 + abs(sd[k]) + abs(y0[col])))
    return worst < 1e-5, f"max scaled FD mismatch {worst:.2e}"


def parity_ok(ic: InitialConditions, order: int = 8):
    jet = boundary_jet(ic, order)
    even = np.arange(order + 1) % 2 == 0
    bad = []
    for name, par in (("a", jet.a_parity), ("b", jet.b_parity), ("f", jet.f_parity)):
        c = getattr(jet, name)
        wrong = c[~even] if par == "even" else c[even]
        if np.any(wrong != 0):
            bad.append(name)
    ok = not bad and jet.f[0] == 0 and jet.f[1] == 0 and jet.f[2] == ic.f0 / 2
    return ok, "parity and f-boundary data exact" if ok else f"wrong parity in {bad}"


def handoff_agreement(ic: InitialConditions, r1=1e-3, r2=2.5e-4, rtol=1e-10):
    p = IntegrationParams(rel_tol=rtol, abs_tol=rtol * 1e-2, r_max=2.0, extra_radii=(1.0,))
    s1 = integrate(ic, replace(p, r_series_max=r1))
    s2 = integrate(ic, replace(p, r_series_max=r2))
    y1, y2 = s1.y[s1.sample_index(1.0)], s2.y[s2.sample_index(1.0)]
    d = float(np.max(np.abs(y1 - y2) / (1 + np.abs(y1))))
    return d <= 10 * rtol, f"max scaled difference at r=1: {d:.2e}"


def tolerance_convergence(ic: InitialConditions, rtol=1e-9):
    out = []
    for tol in (rtol, rtol / 2):
        p = IntegrationParams(rel_tol=tol, abs_tol=tol * 1e-2, r_max=20.0, extra_radii=(10.0,))
        s = integrate(ic, p)
        y = s.y[s.sample_index(10.0)]
        out.append(np.array([y[0], y[2], y[5]]))
    d = float(np.max(np.abs(out[0] - out[1]) / np.maximum(1.0, np.abs(out[0]))))
    return d < rtol, f"max relative change of a, b, f' at r=10: {d:.2e}"


def log_derivative_bound(sol: SolitonSolution, margin=1e-9):
    y1 = sol.evaluate([1.0])[0]
    a1, da1, b1, db1 = y1[:4]
    C = max(math.sqrt(1 + 1 / b1 ** 2), db1 / b1, da1 / a1)
    m = sol.r >= 1.0
    a, da, b, db = sol.y[m, 0], sol.y[m, 1], sol.y[m, 2], sol.y[m, 3]
    worst = float(max(np.max(da / a), np.max(db / b)))
    return worst <= C + margin, f"max(a'/a, b'/b) on [1, r_max] = {worst:.6f} vs C = {C:.6f}"


def fprime_sandwich(sol: SolitonSolution, slack=1e-9):
    m = sol.r >= 1.0
    r = sol.r[m]
    df = sol.y[m, 5]
    ddf = geometry.curvature_arrays(sol.y[m])["ddf"]
    eps = float(np.min(np.abs(ddf)))
    C1 = c1_constant(sol.ic)
    lower = np.min(df + (r + C1))
    upper = np.max(df + eps * (r - 1))
    ok = lower >= -slack * (1 + r.max()) and upper <= slack * (1 + r.max())
    return ok, f"min(f'+r+C1)={lower:.3e}, max(f'+eps(r-1))={upper:.3e}, eps={eps:.3e}"


def p_ratio_persistence(sol: SolitonSolution, tol=1e-9):
    a, da, b, db = sol.y[:, 0], sol.y[:, 1], sol.y[:, 2], sol.y[:, 3]
    dP = (db * a - da * b) / a ** 2
    idx = np.nonzero(dP >= 0)[0]
    if not len(idx):
        return True, "P' < 0 throughout (condition never triggered)"
    later = dP[idx[0]:]
    worst = float(np.min(later / (1 + np.abs(b / a)[idx[0]:])))
    return worst >= -tol, f"P' >= 0 from r={sol.r[idx[0]]:.4g}; min scaled P' after = {worst:.2e}"


def exponential_dominance(sol: SolitonSolution):
    r, a = sol.r, sol.y[:, 0]
    with np.errstate(over="ignore"):
        if sol.ic.topology is Topology.S1xR3:
            bound = sol.ic.orbit_size * np.exp(r)
        else:
            bound = np.sinh(r)
    ok = bool(np.all(a <= bound * (1 + 1e-12)))
    worst = float(np.max(a / bound))
    return ok, f"max a/bound = {worst:.6f}"


def soliton_residuals(sol: SolitonSolution, env=1e-7):
    res = geometry.residual_arrays(sol.r, sol.y, sol.ic)
    scale = 1 + sol.r ** 2
    worst = max(float(np.max(np.abs(res[k]) / scale)) for k in ("soliton11", "soliton22", "soliton33"))
    return worst <= env, f"max |Ric_ii + Hess_ii + 1| / (1+r^2) = {worst:.2e}"


def identity_residuals(sol: SolitonSolution, env=1e-7):
    res = geometry.residual_arrays(sol.r, sol.y, sol.ic)
    scale = 1 + sol.r ** 2
    worst = max(float(np.max(np.abs(res[k]) / scale)) for k in ("trace", "bianchi", "potential"))
    return worst <= env, f"max trace/Bianchi/potential residual / (1+r^2) = {worst:.2e}"


def warped_symmetry(sol: SolitonSolution):
    fr = geometry.curvature_arrays(sol.y)
    ok = np.array_equal(fr["rm1331"], fr["rm1441"]) and np.array_equal(fr["rm2332"], fr["rm2442"])
    trace = 2 * (fr["rm1221"] + 2 * fr["rm1331"] + 2 * fr["rm2332"] + fr["rm3443"])
    d = float(np.max(np.abs(trace - fr["scalar"]) / (1 + np.abs(fr["scalar"]))))
    return ok and d < 1e-12, f"symmetric pairs equal; scalar trace mismatch {d:.1e}"


def scalar_lower_bound(sol: SolitonSolution, slack=1e-9):
    R = geometry.curvature_arrays(sol.y)["scalar"]
    return float(R.min()) >= -4 - slack, f"min R = {R.min():.9f}"


def curvature_decay_continuity(ic: InitialConditions, rel_step=1e-2):
    base = integrate(ic)
    moved = integrate(replace(ic, f0=ic.f0 * (1 + rel_step)))
    c0, c1 = cone_map.decay_constant(base), cone_map.decay_constant(moved)
    jump = abs(c1 - c0) / c0
    return math.isfinite(c0) and jump < 10 * rel_step, \
        f"sup r^2|Rm| = {c0:.5f}, neighbour {c1:.5f} (relative jump {jump:.2e})"


def estimator_agreement(ic: InitialConditions):
    cs = []
    for tol in (1e-10, 5e-11):
        s = integrate(ic, IntegrationParams(rel_tol=tol, abs_tol=tol / 100, r_max=320.0))
        K = cone_map.estimate_K(s)
        (pa, sa, _), (pb, sb, _) = cone_map.slope_estimates(s, K)
        cs.append(max(abs(pa - sa), abs(pb - sb)) * s.r_max ** 2)
    ok = abs(cs[0] - cs[1]) <= 0.05 * cs[0]
    return ok, f"r_max^2 |primary - secondary| = {cs[0]:.6f} vs {cs[1]:.6f} at half tolerance"


def scaling_equivariance(f0=-1.0, cs=(0.5, 2.0)):
    base = cone_map.eval_F(InitialConditions(Topology.S1xR3, 1.0, f0))
    worst = 0.0
    ok = True
    for c in cs:
        s = cone_map.eval_F(InitialConditions(Topology.S1xR3, c, f0))
        da = abs(s.a_slope - c * base.a_slope)
        db = abs(s.b_slope - base.b_slope)
        bound = 2 * max(s.err_estimate, base.err_estimate)
        ok &= da <= bound and db <= bound and bound <= 2e-4
        worst = max(worst, da, db)
    return ok, f"max discrepancy {worst:.2e}"


def gh_surrogate(sol: SolitonSolution, lambdas=(0.5, 0.25, 0.125)):
    """lambda * max_{r <= R/lambda} |a - a_slope r| is linear in lambda."""
    alpha = sol.slopes.a_slope
    R = sol.r_max * lambdas[-1]
    vals = []
    for lam in lambdas:
        m = sol.r <= R / lam
        vals.append(lam * float(np.max(np.abs(sol.y[m, 0] - alpha * sol.r[m]))))
    C = [v / lam for v, lam in zip(vals, lambdas)]
    ok = max(C) <= 1.5 * min(C)
    return ok, "C(lambda) = " + ", ".join(f"{c:.4f}" for c in C)


def certificate_agreement(target_b=1.0, f0_range=(1e-2, 1e2), box=degree.Box(0.5, 2.0, 0.1, 10.0)):
    F = degree.FCache(Topology.S1xR3, IntegrationParams())
    rep = degree.degree_s1r3(target_b, f0_range, F=F)
    w = degree.s1r3_winding(box, F=F).winding
    ok = rep.signed_count == w
    return ok, f"signed count {rep.signed_count}, winding {w}", F


def homotopy_surrogate(targets=(0.1, 1.0, 10.0, 100.0), f0_range=(1e-3, 1e2), F=None):
    F = F or degree.FCache(Topology.S1xR3, IntegrationParams())
    counts = [degree.degree_s1r3(t, f0_range, F=F).signed_count for t in targets]
    return len(set(counts)) == 1 and abs(counts[0]) == 1, f"signed counts {counts}"


def orientation_consistency(F=None, box=degree.Box(0.5, 2.0, 0.1, 10.0)):
    F = F or degree.FCache(Topology.S1xR3, IntegrationParams())
    target = F(1.0, 1.0) * np.array([1.1, 0.9])
    w, pts = degree.loop_winding(F, box, target)
    w_rev = degree.winding_number(F.many(pts[::-1]), target)
    J = degree.jacobian(F, 1.0, 1.0)
    s = int(np.sign(np.linalg.det(J)))
    s_flip = int(np.sign(np.linalg.det(J[:, ::-1])))
    return w_rev == -w and s_flip == -s, f"winding {w} -> {w_rev}; det sign {s} -> {s_flip}"


def properness_surrogate(rect=(0.2, 2.0, 0.2, 2.0), orbits=(0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0),
                         xs=(0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0)):
    F = degree.FCache(Topology.S1xR3, IntegrationParams())
    pts = [(o, x) for o in orbits for x in xs]
    vals = F.many(pts)
    inside = [p for p, v in zip(pts, vals)
              if rect[0] <= v[0] <= rect[1] and rect[2] <= v[1] <= rect[3]]
    if not inside:
        return False, "no grid value fell in the target rectangle"
    o_in = [p[0] for p in inside]
    x_in = [p[1] for p in inside]
    ok = (min(o_in) > orbits[0] and max(o_in) < orbits[-1]
          and min(x_in) > xs[0] and max(x_in) < xs[-1])
    return ok, (f"{len(inside)} grid points map into the rectangle; orbit in "
                f"[{min(o_in):g}, {max(o_in):g}], -f0 in [{min(x_in):g}, {max(x_in):g}]")


def run_all(progress: Callable[[str], None] | None = None) -> list:
    """Every invariant on the canned grid. Returns CheckResult rows."""
    rows = []

    def add(name, fn, *args):
        try:
            ok, detail, *_ = fn(*args)
        except Exception as exc:  # a crash is a failed check, reported as such
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append(CheckResult(name, bool(ok), detail))
        if progress:
            progress(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")

    sols = {ic: integrate(ic) for ic in CANNED_GRID}
    for ic, sol in sols.items():
        tag = f"{ic.topology.cli_tag}(orbit={ic.orbit_size:g}, f0={ic.f0:g})"
        add(f"fd_consistency {tag}", fd_consistency, sol)
        add(f"jet_parity {tag}", parity_ok, ic)
        add(f"identity_residuals {tag}", identity_residuals, sol)
        add(f"soliton_residuals {tag}", soliton_residuals, sol)
        add(f"warped_symmetry {tag}", warped_symmetry, sol)
        add(f"scalar_lower_bound {tag}", scalar_lower_bound, sol)
        add(f"ratio_bound {tag}", log_derivative_bound, sol)
        add(f"fprime_sandwich {tag}", fprime_sandwich, sol)
        add(f"p_ratio_persistence {tag}", p_ratio_persistence, sol)
        add(f"exponential_dominance {tag}", exponential_dominance, sol)
        add(f"gh_surrogate {tag}", gh_surrogate, sol)
    first = CANNED_GRID[0]
    add("jet_handoff", handoff_agreement, first)
    add("jet_handoff s2r2", handoff_agreement, CANNED_GRID[3])
    add("tolerance_convergence", tolerance_convergence, first)
    add("curvature_decay_continuity", curvature_decay_continuity, first)
    add("estimator_agreement", estimator_agreement, first)
    add("scaling_equivariance", scaling_equivariance)
    add("certificate_agreement", certificate_agreement)
    add("homotopy_surrogate", homotopy_surrogate)
    add("orientation_consistency", orientation_consistency)
    add("properness_surrogate", properness_surrogate)
    return rows
