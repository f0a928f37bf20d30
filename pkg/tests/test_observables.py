import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupled_bohm import observables as ob
from coupled_bohm.model import OscillatorParams
from coupled_bohm.spectral import project_coefficients

from conftest import length_scale


def test_density_vanishes_at_origin(params_marginal, spectral_marginal):
    for t in (0.0, 3.0, 20.0):
        assert ob.joint_density(0.0, 0.0, t, spectral_marginal) < 1e-30
        assert ob.joint_density_closed_form(0.0, 0.0, t, params_marginal) == 0.0


def test_density_evaluator_kinds(params_marginal):
    a = ob.joint_density(0.4, -1.0, 2.0, ("first-order", params_marginal))
    b = ob.joint_density(0.4, -1.0, 2.0, ("first-order-printed", params_marginal))
    assert a > 0 and b > 0 and a != b
    with pytest.raises(ValueError):
        ob.joint_density(0.0, 0.0, 0.0, ("bogus", params_marginal))


def test_closed_form_density_matches_first_order_wavefunction():
    errs = []
    for r in (0.02, 0.01):
        p = OscillatorParams.from_frequencies(1.0, r)
        L = length_scale(p)
        x = np.linspace(-3 * L, 3 * L, 25)
        X1, X2 = np.meshgrid(x, x)
        d_wave = ob.joint_density(X1, X2, 7.0, ("first-order", p))
        errs.append(np.max(np.abs(ob.joint_density_closed_form(X1, X2, 7.0, p) - d_wave)) * L**2)
    assert errs[0] < 10 * 0.02**2
    assert errs[1] / errs[0] == pytest.approx(0.25, abs=0.08)


@pytest.mark.parametrize("which", [1, 2])
def test_marginal_norm_second_order(which, params_marginal):
    L = length_scale(params_marginal)
    x = np.linspace(-10 * L, 10 * L, 4001)
    r = params_marginal.frequencies().ratio
    for t in np.linspace(0, 60, 8):
        curve = ob.marginal(which, x, t, params=params_marginal)
        assert abs(curve.trapezoid_norm() - 1.0) <= 2 * r * r + 1e-8


@pytest.mark.parametrize("which", ["particle-1", "particle-2"])
def test_marginal_routes_agree_to_second_order(which):
    errs = []
    for r in (0.02, 0.01):
        p = OscillatorParams.from_frequencies(1.0, r)
        s = project_coefficients(params=p)
        L = length_scale(p)
        x = np.linspace(-4 * L, 4 * L, 81)
        t = 0.3 * math.pi / p.frequencies().delta_omega
        a = ob.marginal(which, x, t, params=p).density
        b = ob.marginal(which, x, t, spectral=s, method="quadrature").density
        errs.append(np.max(np.abs(a - b)) * L)
    assert math.log2(errs[0] / errs[1]) > 1.9


def test_marginal_printed_sign_is_first_order(params_marginal, spectral_marginal):
    L = length_scale(params_marginal)
    x = np.linspace(-4 * L, 4 * L, 81)
    ref = ob.marginal(2, x, 0.0, spectral=spectral_marginal, method="quadrature").density
    good = ob.marginal(2, x, 0.0, params=params_marginal).density
    bad = ob.marginal(2, x, 0.0, params=params_marginal, printed=True).density
    assert np.max(np.abs(good - ref)) < 0.2 * np.max(np.abs(bad - ref))


def test_marginal_shapes_at_start():
    p = OscillatorParams(m=1, k=1, lam=0.0)
    a = p.m * p.frequencies().omega_bar / p.hbar
    x = np.linspace(-12, 12, 49)
    ground = math.sqrt(a / math.pi) * np.exp(-a * x * x)
    assert np.allclose(ob.marginal_closed_form(1, x, 0.0, p), ground, atol=1e-15)
    assert np.allclose(ob.marginal_closed_form(2, x, 0.0, p), 2 * a * x * x * ground, atol=1e-15)


def test_marginal_curve_properties(params_marginal):
    x = np.linspace(-10, 10, 11)
    c = ob.marginal("x1", x, 1.0, params=params_marginal)
    assert c.which == "particle-1" and c.source == "closed-form"
    assert len(c.samples()) == 11
    assert c.min_density == pytest.approx(np.min(c.density))
    with pytest.raises(ValueError):
        ob.marginal(3, x, 1.0, params=params_marginal)
    with pytest.raises(ValueError):
        ob.marginal(1, x, 1.0, params=params_marginal, method="bogus")
    with pytest.raises(ValueError):
        ob.marginal(1, x, 1.0, params=params_marginal, method="quadrature")


def test_far_tail_negativity_reported_not_clipped():
    p = OscillatorParams.from_frequencies(1.0, 0.2)
    L = length_scale(p)
    x = np.linspace(-6 * L, 6 * L, 2001)
    found = any(ob.marginal(1, x, t, params=p).has_negative for t in np.linspace(0, 15, 31))
    assert found


def test_energy_closed_form_values(params_marginal):
    f = params_marginal.frequencies()
    hw = params_marginal.hbar * f.omega
    e = ob.energy_closed_form(0.0, params_marginal)
    assert (e.E1, e.E2) == pytest.approx((0.5 * hw, 1.5 * hw))
    e = ob.energy_closed_form(math.pi / (2 * f.delta_omega), params_marginal)
    assert (e.E1, e.E2) == pytest.approx((1.5 * hw, 0.5 * hw))
    assert e.E_interaction == pytest.approx(2 * params_marginal.hbar * f.delta_omega)
    assert e.as_dict()["E_total"] == pytest.approx(e.E_total)


def test_closed_form_energy_period(params_marginal):
    f = params_marginal.frequencies()
    t = np.linspace(0, 25, 13)
    a = [ob.energy_closed_form(tt, params_marginal).E1 for tt in t]
    b = [ob.energy_closed_form(tt + 2 * math.pi / f.delta_omega, params_marginal).E1 for tt in t]
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_quadrature_energy_conserved(spectral_marginal):
    reps = ob.energy_quadrature([0.0, 9.0, 31.4], spectral_marginal)
    totals = [r.E_total for r in reps]
    assert np.ptp(totals) < 1e-9 * totals[0]


def test_quadrature_energy_near_closed_form(params_marginal, spectral_marginal):
    hw = params_marginal.hbar * params_marginal.frequencies().omega_bar
    for t in (0.0, 7.0, 15.0):
        q = ob.energy_expectations(t, spectral=spectral_marginal)
        c = ob.energy_expectations(t, method="closed-form", params=params_marginal)
        assert abs(q.E1 - c.E1) < 0.05 * hw
        assert abs(q.E2 - c.E2) < 0.05 * hw
    with pytest.raises(ValueError):
        ob.energy_expectations(0.0, method="quadrature")
    with pytest.raises(ValueError):
        ob.energy_expectations(0.0, method="bogus", spectral=spectral_marginal)
    assert len(ob.energy_expectations([0.0, 1.0], method="closed-form", params=params_marginal)) == 2


def test_fock_interaction_energy(params_marginal):
    f = params_marginal.frequencies()
    unit = 0.5 * params_marginal.lam * params_marginal.hbar / (params_marginal.m * f.omega)
    assert ob.fock_interaction_energy(0, 0, params_marginal) == pytest.approx(unit)
    assert ob.fock_interaction_energy(0, 1, params_marginal) == pytest.approx(2 * unit)
    assert ob.fock_interaction_energy(2, 3, params_marginal) == pytest.approx(6 * unit)
    with pytest.raises(ValueError):
        ob.fock_interaction_energy(-1, 0, params_marginal)


@settings(max_examples=30, deadline=None)
@given(n1=st.integers(0, 10), n2=st.integers(0, 10))
def test_fock_energy_monotone(n1, n2):
    p = OscillatorParams.from_frequencies(1.0, 0.1)
    assert ob.fock_interaction_energy(n1 + 1, n2, p) > ob.fock_interaction_energy(n1, n2, p)
    assert ob.fock_interaction_energy(n1, n2, p) == ob.fock_interaction_energy(n2, n1, p)


def test_coherent_scan(params_marginal):
    f = params_marginal.frequencies()
    phases = np.linspace(-math.pi, math.pi, 361)
    scan = ob.coherent_interaction_scan(1.5, 1.5, phases, params_marginal)
    vacuum = 0.5 * params_marginal.lam * params_marginal.hbar / (params_marginal.m * f.omega)
    assert scan.min_phase == pytest.approx(0.0, abs=1e-12)
    assert scan.min_normal_ordered == pytest.approx(0.0, abs=1e-14)
    assert scan.min_bare == pytest.approx(vacuum)
    assert np.argmax(scan.bare) in (0, 360)
    assert len(scan.rows()) == 361
    with pytest.raises(ValueError):
        ob.coherent_interaction_scan(-1.0, 1.0, phases, params_marginal)
