import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soliton_forge import (IntegrationParams, InitialConditions, detect_r0, integrate, sweep)
from soliton_forge.errors import (BlowUp, InvalidParameters, NotReached,
                                  StepLimitExceeded)
from soliton_forge.geometry import curvature_arrays
from soliton_forge.integrator import PointFailure, thread_count
from soliton_forge.profile_ode import profile_from_transformed
from soliton_forge import validation

from conftest import solved
from oracles import scipy_r0, scipy_trajectory, transformed_trajectory

# frozen from scripts/reference_values.py (scipy DOP853 at rtol 1e-12 from the sympy jet)
R0_S1 = 1.0352563575237035
R0_S2 = 1.2374077967633943
STATE10_S1 = [6.775496567169556, 0.6794018839659479, 9.440585353997017,
              0.957486147041555, -48.18457516134495, -9.76774184239565]


def test_einstein_run_matches_closed_form():
    s = integrate(InitialConditions("s1r3", 1.0, 0.0), IntegrationParams(r_max=5.0, einstein=True))
    r = s.r
    a = np.cosh(r / math.sqrt(3))
    b = math.sqrt(3) * np.sinh(r / math.sqrt(3))
    assert np.max(np.abs(s.y[:, 0] / a - 1)) < 10 * 1e-10
    assert np.max(np.abs(s.y[:, 2] / b - 1)) < 10 * 1e-10
    assert np.max(np.abs(s.y[:, 4])) < 1e-8


def test_roundoff_floor_does_not_grow_with_tighter_tolerance():
    # without compensated updates the ulp losses in b' near 1 pile up with the step count
    errs = []
    for rt in (1e-10, 1e-12):
        s = integrate(InitialConditions("s1r3", 1.0, 0.0),
                      IntegrationParams(r_max=5.0, einstein=True, rel_tol=rt, abs_tol=rt / 100))
        errs.append(float(np.max(np.abs(s.y[:, 4]))))
    assert errs[1] < 2 * errs[0] and max(errs) < 1e-8
    assert s.r_max == 5.0


def test_einstein_mode_is_explicit():
    with pytest.raises(InvalidParameters):
        integrate(InitialConditions("s1r3", 1.0, 0.0), IntegrationParams(r_max=5.0))
    with pytest.raises(InvalidParameters):
        integrate(InitialConditions("s1r3", 1.0, -1.0), IntegrationParams(r_max=5.0, einstein=True))


def test_fprime_lower_bound_s1(s1_ref):
    assert np.all(s1_ref.y[:, 5] >= -(s1_ref.r + math.sqrt(3)) - 1e-9)


def test_matches_scipy_oracle_state(s1_ref):
    y = s1_ref.evaluate([10.0])[0]
    assert np.allclose(y, STATE10_S1, rtol=2e-9, atol=1e-9)


def test_matches_independent_trajectory_s2():
    ref = scipy_trajectory("s2r2", 0.6, -1.7, 15.0)
    sol = solved("s2r2", 0.6, -1.7)
    rs = np.array([0.5, 2.0, 7.0, 15.0])
    got = sol.evaluate(rs)
    want = ref.sol(rs).T
    assert np.allclose(got, want, rtol=1e-8, atol=1e-9)


def test_transformed_oracle_agreement_s2():
    b0, f0 = 1.0, -1.0
    out = transformed_trajectory(b0, f0, rho_end=1.2)
    t = np.linspace(math.log(1e-4), math.log(1.1), 25)
    Z = out.sol(t)
    sol = solved("s2r2", b0, f0)
    direct = sol.evaluate(Z[4])
    for k in range(len(t)):
        a, da, b, db, df = profile_from_transformed(math.exp(t[k]), Z[:4, k])
        d = direct[k]
        assert np.allclose([a, da, b, db, df], d[[0, 1, 2, 3, 5]], atol=1e-6)


def test_detect_r0_regression(s1_ref, s2_ref):
    assert detect_r0(s1_ref) == pytest.approx(R0_S1, abs=1e-9)
    assert detect_r0(s2_ref) == pytest.approx(R0_S2, abs=1e-9)
    # the event state really sits on f' = -1
    assert s1_ref.r0_state[5] == pytest.approx(-1.0, abs=1e-12)


def test_r0_against_event_oracle():
    assert detect_r0(solved("s1r3", 0.7, -0.4)) == pytest.approx(scipy_r0("s1r3", 0.7, -0.4), abs=1e-8)


def test_r0_grows_as_f0_tends_to_zero():
    r0s = [detect_r0(solved("s1r3", 1.0, f0)) for f0 in (-1e-1, -1e-2, -1e-3)]
    assert r0s[0] < r0s[1] < r0s[2]


def test_r0_positive_for_large_f0():
    assert detect_r0(solved("s1r3", 1.0, -3.0)) > 0


def test_not_reached_on_short_runs():
    s = integrate(InitialConditions("s1r3", 1.0, -0.01), IntegrationParams(r_max=2.0))
    with pytest.raises(NotReached):
        detect_r0(s)


def test_sweep_singleton_equals_integrate():
    ic = InitialConditions("s2r2", 1.0, -1.0)
    [one] = sweep([ic], IntegrationParams(r_max=50.0))
    ref = integrate(ic, IntegrationParams(r_max=50.0))
    assert np.array_equal(one.y, ref.y) and np.array_equal(one.r, ref.r)


def test_sweep_b_profile_independent_of_a0():
    grid = [InitialConditions("s1r3", a0, -0.7) for a0 in (0.5, 1.0, 2.0)]
    sols = sweep(grid, IntegrationParams(r_max=30.0))
    rs = np.array([0.5, 3.0, 10.0, 30.0])
    bs = [s.evaluate(rs)[:, 2] for s in sols]
    assert np.allclose(bs[0], bs[1], rtol=1e-9) and np.allclose(bs[1], bs[2], rtol=1e-9)


def test_sweep_r0_decreasing_in_abs_f0():
    grid = [InitialConditions("s1r3", 1.0, f0) for f0 in (-0.5, -1.0, -2.0)]
    r0s = [detect_r0(s) for s in sweep(grid, IntegrationParams(r_max=40.0))]
    assert r0s[0] > r0s[1] > r0s[2]


def test_sweep_records_failures_without_aborting():
    grid = [InitialConditions("s1r3", 1.0, -1.0), InitialConditions("s1r3", 1.0, -1.0)]
    res = sweep(grid, IntegrationParams(r_max=40.0, max_steps=10))
    assert all(isinstance(r, PointFailure) for r in res)
    assert isinstance(res[0].error, StepLimitExceeded)


def test_sweep_threaded_matches_serial():
    grid = [InitialConditions("s2r2", b0, -1.0) for b0 in (0.5, 1.0, 2.0)]
    p = IntegrationParams(r_max=40.0)
    a = sweep(grid, p, threads=1)
    b = sweep(grid, p, threads=3)
    assert all(np.array_equal(x.y, y.y) for x, y in zip(a, b))


def test_thread_env(monkeypatch):
    monkeypatch.setenv("SOLITON_FORGE_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("SOLITON_FORGE_THREADS", "0")
    assert thread_count() >= 1
    monkeypatch.setenv("SOLITON_FORGE_THREADS", "x")
    with pytest.raises(InvalidParameters):
        thread_count()


def test_overflow_guard_raises_blowup_with_partial():
    with pytest.raises(BlowUp) as err:
        integrate(InitialConditions("s1r3", 1.0, -1.0), IntegrationParams(r_max=50.0, overflow_guard=1e3))
    part = err.value.partial
    assert part is not None and part.r[-1] < 50.0


def test_kernel_flags_sign_violation():
    from soliton_forge import _kernel
    from soliton_forge.integrator import _grid
    # f' > 0 is outside the monotone class and must trip the monitor
    y0 = np.array([1.0, 0.5, 1.0, 1.0, 0.0, 0.5])
    out = _kernel.march(y0, 1.0, _grid(1.0, 2.0, 1.05, ()), 1e-10, 1e-12, 1e-3, 10 ** 5,
                        True, 1e-12, 1e150, -1.0, False)
    assert out[0] == 2


def test_params_validation():
    with pytest.raises(InvalidParameters):
        IntegrationParams(rel_tol=1e-2).validate()
    with pytest.raises(InvalidParameters):
        IntegrationParams(abs_tol=1e-8, rel_tol=1e-10).validate()
    with pytest.raises(InvalidParameters):
        IntegrationParams(r_max=0.5).validate()


def test_samples_strictly_increasing_and_start_at_handoff(s1_ref):
    assert s1_ref.r[0] <= s1_ref.params.r_series_max
    assert np.all(np.diff(s1_ref.r) > 0)
    assert len(s1_ref.samples) == len(s1_ref.r)


def test_geometric_sampling(s1_ref):
    ratios = s1_ref.r[1:] / s1_ref.r[:-1]
    # stride 1.05 except next to inserted event or stage points
    assert np.median(ratios) == pytest.approx(1.05, rel=1e-9)
    assert np.max(ratios) <= 1.05 * (1 + 1e-9)


def test_adaptive_rmax_policy(s1_ref):
    assert s1_ref.diagnostics.termination == "plateau"
    assert s1_ref.r_max >= max(40.0, 4 * s1_ref.r0)
    half = s1_ref.y[s1_ref.sample_index(s1_ref.r_max / 2)]
    assert abs(s1_ref.y[-1, 1] - half[1]) < s1_ref.params.plateau_tol
    assert abs(s1_ref.y[-1, 3] - half[3]) < s1_ref.params.plateau_tol


@settings(deadline=None, max_examples=15)
@given(top=st.sampled_from(["s1r3", "s2r2"]), orbit=st.floats(0.3, 3.0), x=st.floats(0.05, 5.0))
def test_monotonicity_invariants(top, orbit, x):
    s = integrate(InitialConditions(top, orbit, -x), IntegrationParams(r_max=40.0))
    assert np.all(s.y[:, 1] > 0) and np.all(s.y[:, 3] > 0)
    assert np.all(s.y[:, 4] < 0) and np.all(s.y[:, 5] < 0)
    assert np.all(curvature_arrays(s.y)["ddf"] < 0)
    C1 = validation.c1_constant(s.ic)
    assert np.all(s.y[:, 5] >= -(s.r + C1) - 1e-9)


@settings(deadline=None, max_examples=10)
@given(top=st.sampled_from(["s1r3", "s2r2"]), orbit=st.floats(0.3, 3.0), x=st.floats(0.05, 5.0))
def test_growth_and_ratio_bounds(top, orbit, x):
    s = integrate(InitialConditions(top, orbit, -x), IntegrationParams(r_max=40.0))
    for check in (validation.log_derivative_bound, validation.fprime_sandwich,
                  validation.p_ratio_persistence, validation.exponential_dominance):
        ok, detail = check(s)
        assert ok, detail


def test_tolerance_self_convergence():
    ok, detail = validation.tolerance_convergence(InitialConditions("s2r2", 0.8, -0.6))
    assert ok, detail


@pytest.mark.parametrize("ic", [InitialConditions("s1r3", 1.0, -1.0), InitialConditions("s2r2", 2.0, -0.5)])
def test_handoff_radius_independence(ic):
    ok, detail = validation.handoff_agreement(ic)
    assert ok, detail


def test_evaluate_between_samples_is_consistent(s2_ref):
    r = 3.3
    y = s2_ref.evaluate([r])[0]
    s = integrate(s2_ref.ic, IntegrationParams(r_max=10.0, extra_radii=(r,)))
    assert np.allclose(y, s.y[s.sample_index(r)], rtol=1e-9, atol=1e-11)
