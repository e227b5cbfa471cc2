import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from soliton_forge.errors import DegeneratePoint, InvalidParameters, OutOfRange
from soliton_forge.profile_ode import (InitialConditions, ProfileState, Topology, boundary_jet,
                                       equation_residuals, jet_eval, jet_second_derivatives,
                                       rhs, rhs_transformed_s2r2, transformed_boundary_state,
                                       transformed_numerator)

from oracles import symbolic_jet

SQ3 = math.sqrt(3.0)


def hyperbolic_state(r, a0=1.0):
    return ProfileState(r, a0 * math.cosh(r / SQ3), a0 * math.sinh(r / SQ3) / SQ3,
                        SQ3 * math.sinh(r / SQ3), math.cosh(r / SQ3), 0.0, 0.0)


def test_rhs_hyperbolic_closed_form_is_a_solution():
    s = hyperbolic_state(1.0)
    d = rhs(s)
    # exact second derivatives of the closed form
    assert d[1] == pytest.approx(math.cosh(1 / SQ3) / 3, rel=1e-14)
    assert d[3] == pytest.approx(math.sinh(1 / SQ3) / SQ3, rel=1e-14)
    assert abs(d[5]) < 1e-14


def test_rhs_trivial_state():
    d = rhs(ProfileState(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0))
    # f'' = a''/a + 2 b''/b - 1 = 1 + 4 - 1
    assert d.tolist() == [0.0, 1.0, 0.0, 2.0, 0.0, 4.0]


@pytest.mark.parametrize("bad", [dict(r=0.0), dict(a=0.0), dict(b=-1.0)])
def test_rhs_rejects_degenerate_points(bad):
    base = dict(r=1.0, a=1.0, da=0.0, b=1.0, db=0.0, f=0.0, df=0.0)
    base.update(bad)
    with pytest.raises(DegeneratePoint):
        rhs(ProfileState(**base))


def test_rhs_matches_centered_differences_of_s2r2_run(s2_ref):
    h = 1e-3
    for r in (0.7, 3.0, 12.0):
        ym, y0, yp = s2_ref.evaluate([r - h, r, r + h])
        d = rhs(ProfileState.from_array(r, y0))
        for col in (1, 3, 5):
            fd = (yp[col] - ym[col]) / (2 * h)
            assert abs(fd - d[col]) <= 1e-5 * (1 + abs(d[col]))


def test_jet_s1r3_low_orders():
    jet = boundary_jet(InitialConditions("s1r3", 1.0, -1.0), 3)
    assert np.allclose(jet.a, [1, 0, 1 / 6, 0], atol=1e-15)
    assert jet.derivative_at_origin("a", 2) == pytest.approx(1 / 3, abs=1e-15)
    assert jet.derivative_at_origin("f", 2) == -1.0


def test_jet_s2r2_second_derivative_of_b():
    jet = boundary_jet(InitialConditions("s2r2", 1.0, -1.0), 3)
    assert jet.derivative_at_origin("b", 2) == pytest.approx(1.0, abs=1e-14)
    for b0 in (0.3, 2.0, 7.0):
        jet = boundary_jet(InitialConditions("s2r2", b0, -0.4), 6)
        assert jet.derivative_at_origin("b", 2) == pytest.approx((b0 + 1 / b0) / 2, rel=1e-13)


def test_jet_einstein_matches_hyperbolic_taylor_series():
    jet = boundary_jet(InitialConditions("s1r3", 1.0, 0.0), 4)
    a_ref = [1, 0, 1 / 6, 0, 1 / 216]
    b_ref = [0, 1, 0, 1 / 18, 0]
    assert np.allclose(jet.a, a_ref, atol=1e-15)
    assert np.allclose(jet.b, b_ref, atol=1e-15)
    assert np.allclose(jet.f, 0.0, atol=1e-15)


@pytest.mark.parametrize("top", ["s1r3", "s2r2"])
def test_jet_matches_symbolic_oracle_generic(top):
    p, f0 = sp.symbols("p f0", positive=True)
    sym = symbolic_jet(top, p, -f0, 6)
    for orbit, x in [(0.7, 0.3), (1.9, 2.5), (0.25, 0.01)]:
        jet = boundary_jet(InitialConditions(top, orbit, -x), 6)
        for name in ("a", "b", "f"):
            ref = [float(c.subs({p: orbit, f0: x})) for c in sym[name]]
            got = getattr(jet, name)
            assert np.allclose(got, ref, rtol=1e-12, atol=1e-14), (name, got, ref)


@settings(deadline=None, max_examples=40)
@given(top=st.sampled_from(["s1r3", "s2r2"]), orbit=st.floats(0.1, 10.0),
       x=st.floats(0.0, 20.0), order=st.integers(3, 9))
def test_jet_parity_and_boundary_data(top, orbit, x, order):
    jet = boundary_jet(InitialConditions(top, orbit, -x), order)
    k = np.arange(order + 1)
    a_zero = k % 2 == 1 if top == "s1r3" else k % 2 == 0
    b_zero = ~a_zero
    assert np.all(jet.a[a_zero] == 0) and np.all(jet.b[b_zero] == 0)
    assert np.all(jet.f[k % 2 == 1] == 0)
    assert jet.f[0] == 0 and jet.f[2] == -x / 2
    assert len(jet.a) == order + 1


@settings(deadline=None, max_examples=30)
@given(top=st.sampled_from(["s1r3", "s2r2"]), orbit=st.floats(0.2, 5.0), x=st.floats(0.01, 10.0))
def test_jet_residual_shrinks_like_high_power(top, orbit, x):
    jet = boundary_jet(InitialConditions(top, orbit, -x), 6)
    res = []
    for r in (1e-2, 5e-3):
            # evaluate beyond the handoff radius directly from the polynomials
        P = np.polynomial.polynomial
        vals = [P.polyval(r, c) for c in (jet.a, jet.b, jet.f)]
        ders = [P.polyval(r, P.polyder(c)) for c in (jet.a, jet.b, jet.f)]
        st_ = ProfileState(r, vals[0], ders[0], vals[1], ders[1], vals[2], ders[2])
        sd = [P.polyval(r, P.polyder(c, 2)) for c in (jet.a, jet.b, jet.f)]
        ea, eb, ef = equation_residuals(st_, *sd)
        # polynomial-cleared forms: multiply through by the vanishing warping factors
        ab = st_.a * st_.b
        res.append(max(abs(ea * st_.b), abs(eb * ab), abs(ef * ab)))
    # O(r^(order-1)) = O(r^5): halving r shrinks the residual by 2^5 (slack for roundoff)
    assert res[1] <= res[0] / 24 + 1e-15


def test_jet_eval_at_origin_and_out_of_range():
    jet = boundary_jet(InitialConditions("s2r2", 1.5, -0.5))
    s0 = jet_eval(jet, 0.0)
    assert (s0.a, s0.da, s0.b, s0.db, s0.f, s0.df) == (0.0, 1.0, 1.5, 0.0, 0.0, 0.0)
    with pytest.raises(OutOfRange):
        jet_eval(jet, 2e-3)


def test_jet_eval_einstein_matches_closed_form():
    jet = boundary_jet(InitialConditions("s1r3", 1.0, 0.0))
    s = jet_eval(jet, 1e-3)
    ref = hyperbolic_state(1e-3)
    for k in ("a", "da", "b", "db"):
        assert abs(getattr(s, k) - getattr(ref, k)) < 1e-12 * max(1.0, abs(getattr(ref, k)))


def test_jet_eval_agrees_with_integration_from_smaller_radius():
    from dataclasses import replace

    from soliton_forge import IntegrationParams, integrate
    ic = InitialConditions("s1r3", 1.0, -2.0)
    p = IntegrationParams(r_max=1.01, extra_radii=(1e-2,), r_series_max=1e-4, rel_tol=1e-12, abs_tol=1e-14)
    sol = integrate(ic, p)
    jet = replace(boundary_jet(ic), r_series_max=1e-2)
    ref = jet_eval(jet, 1e-2).as_array()
    got = sol.evaluate([1e-2])[0]
    # jet truncation at r=1e-2 is ~1e-14; the floor is roundoff in (1 - b'^2)/b^2
    # near the start, about eps / r_start^2 per unit radius in f''
    floor = 2.2e-16 / 1e-4 ** 2 * 1e-2
    assert np.max(np.abs(got - ref)[:5]) < 1e-11
    assert abs(got[5] - ref[5]) < 3 * floor


def test_jet_rejects_bad_parameters():
    with pytest.raises(InvalidParameters):
        boundary_jet(InitialConditions("s1r3", 1.0, 0.5))
    with pytest.raises(InvalidParameters):
        boundary_jet(InitialConditions("s1r3", -1.0, -0.5))
    with pytest.raises(InvalidParameters):
        boundary_jet(InitialConditions("s1r3", 1.0, -0.5), 2)


def test_topology_parse():
    assert Topology.parse("s1r3") is Topology.S1xR3
    assert Topology.parse("S2xR2") is Topology.S2xR2
    with pytest.raises(InvalidParameters):
        Topology.parse("s3")


def test_transformed_boundary_values():
    u0 = transformed_boundary_state(1.0, -1.0)
    assert u0.tolist() == [-0.5, 1.0, 1.0, 0.5]
    # the boundary is a rest point of rho * d/drho
    assert np.allclose(transformed_numerator(u0, 0.0), 0.0, atol=1e-15)


def test_transformed_jacobian_eigenvalues():
    for b0, f0 in [(1.0, -1.0), (0.4, -3.0), (3.0, -0.2)]:
        u0 = transformed_boundary_state(b0, f0)
        J = np.empty((4, 4))
        h = 1e-6
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            J[:, j] = (transformed_numerator(u0 + e, 0.0) - transformed_numerator(u0 - e, 0.0)) / (2 * h)
        ev = np.sort(np.linalg.eigvals(J).real)
        assert np.allclose(ev, [-1, 0, 0, 0], atol=1e-6)
        # char poly m^3 (m + 1)
        assert np.allclose(np.poly(J), [1, 1, 0, 0, 0], atol=1e-6)


def test_transformed_rejects_degenerate():
    with pytest.raises(DegeneratePoint):
        rhs_transformed_s2r2([0, -1, 1, 0], 0.1)
    with pytest.raises(DegeneratePoint):
        rhs_transformed_s2r2([0, 1, 1, 0], 0.0)


def test_jet_second_derivatives_consistent_with_rhs_at_handoff():
    jet = boundary_jet(InitialConditions("s2r2", 0.8, -1.2))
    s = jet_eval(jet, 1e-3)
    d = rhs(s)
    sd = jet_second_derivatives(jet, 1e-3)
    assert abs(d[1] - sd[0]) < 1e-9 and abs(d[3] - sd[1]) < 1e-9 and abs(d[5] - sd[2]) < 1e-9
