import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupled_bohm import classical as cl
from coupled_bohm.model import OscillatorParams


@pytest.fixture
def scenario():
    return cl.ClassicalScenario.displaced(1.3)


def test_canonical_constants(params_marginal, scenario):
    sol = cl.classical_solution(scenario, params_marginal)
    assert sol.A == pytest.approx(1.3) and sol.A_prime == pytest.approx(-1.3)
    assert sol.theta == 0.0 and sol.theta_prime == 0.0


def test_initial_positions(params_marginal, scenario):
    x1, x2 = cl.classical_positions(0.0, scenario, params_marginal)
    assert x1 == 0.0 and x2 == pytest.approx(1.3, abs=1e-15)


def test_return_to_particle_two(params_marginal, scenario):
    f = params_marginal.frequencies()
    t = math.pi / f.delta_omega
    x1, x2 = cl.classical_positions(t, scenario, params_marginal, form="beat")
    # envelope cos(dw t) = -1; carrier cos(w_bar t) = cos(10 pi) = 1
    assert x1 == pytest.approx(0.0, abs=1e-12)
    assert x2 == pytest.approx(-1.3 * math.cos(f.omega_bar * t), abs=1e-12)
    assert x2 == pytest.approx(-1.3, abs=1e-12)


def test_uncoupled_limit(scenario):
    p = OscillatorParams(m=1, k=0.64, lam=0.0)
    t = np.linspace(0, 50, 501)
    x1, x2 = cl.classical_positions(t, scenario, p)
    assert np.max(np.abs(x1)) < 1e-15
    assert np.max(np.abs(x2 - 1.3 * np.cos(0.8 * t))) < 1e-13


def test_beat_identity(params_marginal, scenario):
    f = params_marginal.frequencies()
    t = np.linspace(0, 2 * math.pi / f.delta_omega, 20001)
    a = np.array(cl.classical_positions(t, scenario, params_marginal))
    b = np.array(cl.classical_positions(t, scenario, params_marginal, form="beat"))
    assert np.max(np.abs(a - b)) < 1e-13


def test_beat_form_needs_canonical(params_marginal):
    with pytest.raises(ValueError):
        cl.classical_positions(1.0, cl.ClassicalScenario(0.1, 1.0, 0, 0), params_marginal, form="beat")


def test_ode_residual_of_closed_form(params_marginal):
    sc = cl.ClassicalScenario(0.2, -0.7, 0.3, 0.1)
    p = params_marginal
    t = np.linspace(0.5, 60, 1000)
    h = 1e-3
    x1p, x2p = cl.classical_positions(t + h, sc, p)
    x10, x20 = cl.classical_positions(t, sc, p)
    x1m, x2m = cl.classical_positions(t - h, sc, p)
    a1 = (x1p - 2 * x10 + x1m) / h**2
    a2 = (x2p - 2 * x20 + x2m) / h**2
    r1 = p.m * a1 + p.k * x10 + p.lam * (x10 - x20)
    r2 = p.m * a2 + p.k * x20 - p.lam * (x10 - x20)
    assert max(np.max(np.abs(r1)), np.max(np.abs(r2))) < 1e-6


def test_general_initial_conditions_reproduced(params_marginal):
    sc = cl.ClassicalScenario(0.2, -0.7, 0.3, 0.1)
    x1, x2 = cl.classical_positions(0.0, sc, params_marginal)
    v1, v2 = cl.classical_velocities(0.0, sc, params_marginal)
    assert (x1, x2, v1, v2) == pytest.approx((0.2, -0.7, 0.3, 0.1), abs=1e-14)


def test_energies_at_start(params_marginal, scenario):
    en = cl.classical_energies(0.0, scenario, params_marginal)
    half_k_d2 = 0.5 * params_marginal.k * 1.3**2
    assert en.E1 == pytest.approx(0.0, abs=1e-15)
    assert en.E2 == pytest.approx(half_k_d2, rel=1e-14)
    assert en.E2_first_order == pytest.approx(half_k_d2, rel=1e-14)


def test_energy_periodicity(params_marginal, scenario):
    f = params_marginal.frequencies()
    t = np.linspace(0, 40, 97)
    a = cl.classical_energies(t, scenario, params_marginal)
    b = cl.classical_energies(t + 2 * math.pi / f.delta_omega, scenario, params_marginal)
    assert np.max(np.abs(a.E1 - b.E1)) < 1e-12
    assert np.max(np.abs(a.E1_first_order - b.E1_first_order)) < 1e-12


def test_first_order_energies_converge_linearly(scenario):
    errs = []
    for r in (0.004, 0.002):
        p = OscillatorParams.from_frequencies(1.0, r)
        t = np.linspace(0, 2 * math.pi / r, 40001)
        e = cl.classical_energies(t, scenario, p)
        errs.append(np.max(np.abs(e.E1 - e.E1_first_order)) / (0.5 * p.k * 1.3**2))
    assert errs[1] < 0.6 * errs[0]
    assert errs[0] < 10 * 0.004


def test_energy_exchange_antiphase(params_marginal, scenario):
    f = params_marginal.frequencies()
    t = np.linspace(0, 2 * math.pi / f.delta_omega, 20001)
    e = cl.classical_energies(t, scenario, params_marginal)
    assert np.corrcoef(e.E1, e.E2)[0, 1] < -0.9
    fast = 2 * math.pi / f.omega_bar
    half = t <= math.pi / f.delta_omega
    assert abs(t[half][np.argmax(e.E1[half])] - t[half][np.argmin(e.E2[half])]) < fast


def test_total_energy_values(scenario):
    p0 = OscillatorParams(m=1, k=0.81, lam=0.0)
    tot = cl.classical_total_energy(scenario, p0)
    assert tot.exact == pytest.approx(0.5 * 0.81 * 1.3**2)
    assert tot.first_order == pytest.approx(tot.exact)
    p = OscillatorParams(m=1, k=0.81, lam=0.05)
    tot = cl.classical_total_energy(scenario, p)
    assert tot.exact == pytest.approx(0.5 * 0.81 * 1.3**2 + 0.5 * 0.05 * 1.3**2, rel=1e-14)


def test_total_energy_formula_second_order():
    sc = cl.ClassicalScenario.displaced(1.0)
    gaps = []
    for r in (0.02, 0.01):
        p = OscillatorParams.from_frequencies(1.0, r)
        tot = cl.classical_total_energy(sc, p)
        gaps.append(abs(tot.exact - tot.first_order))
    assert gaps[1] / gaps[0] == pytest.approx(0.25, abs=0.05)


def test_no_coupling_energy_for_velocity_kick(params_marginal):
    sc = cl.ClassicalScenario(0.0, 0.0, 0.9, 0.0)
    state = sc.state(params_marginal)
    assert cl.hamiltonian(state, params_marginal) == pytest.approx(0.5 * params_marginal.m * 0.81)


def test_hamilton_oracle_matches_closed_form(params_marginal, scenario):
    f = params_marginal.frequencies()
    T = 2 * math.pi / f.delta_omega
    sol = cl.integrate_hamilton(scenario, params_marginal, (0, T))
    t = np.linspace(0, T, 5001)
    x1, x2 = cl.classical_positions(t, scenario, params_marginal)
    y = sol(t)
    assert max(np.max(np.abs(y[:, 0] - x1)), np.max(np.abs(y[:, 1] - x2))) < 1e-8
    h = cl.hamiltonian(sol.y, params_marginal)
    assert np.max(np.abs(h / h[0] - 1)) < 1e-9


def test_exchange_period_is_half_the_envelope_period(params_marginal, scenario):
    f = params_marginal.frequencies()
    T = 2 * math.pi / f.delta_omega
    sol = cl.integrate_hamilton(scenario, params_marginal, (0, 3 * T))
    t = np.linspace(0, 3 * T, 60001)
    _, e2 = cl.particle_energies(sol(t), params_marginal)
    period, peaks = cl.exchange_period(t, e2)
    assert period == pytest.approx(math.pi / f.delta_omega, rel=1e-4)
    assert len(peaks) >= 5


def test_exchange_period_needs_two_peaks():
    t = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        cl.exchange_period(t, np.sin(t))
    with pytest.raises(ValueError):
        cl.exchange_period(t, np.ones_like(t))


@settings(max_examples=20, deadline=None)
@given(x1=st.floats(-2, 2), x2=st.floats(-2, 2), v1=st.floats(-1, 1), v2=st.floats(-1, 1))
def test_closed_form_conserves_energy(x1, x2, v1, v2):
    p = OscillatorParams.from_frequencies(1.0, 0.05)
    sc = cl.ClassicalScenario(x1, x2, v1, v2)
    t = np.linspace(0, 100, 201)
    a1, a2 = cl.classical_positions(t, sc, p)
    b1, b2 = cl.classical_velocities(t, sc, p)
    h = cl.hamiltonian(np.stack([a1, a2, p.m * b1, p.m * b2], axis=-1), p)
    assert np.max(np.abs(h - h[0])) < 1e-12 * max(1.0, h[0])
