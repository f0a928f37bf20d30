import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupled_bohm import spectral as sp
from coupled_bohm.errors import QuadratureError
from coupled_bohm.model import OscillatorParams, gauss_hermite_rule, tensor_grid


def test_initial_state_examples():
    p = OscillatorParams(m=1.0, k=1.0, lam=0.0, hbar=1.0)
    assert sp.initial_state(0.0, 0.0, p) == 0.0
    assert sp.initial_state(0.0, 1.0, p) == pytest.approx(math.sqrt(2 / math.pi) * math.exp(-0.5), rel=1e-15)
    assert sp.initial_state(0.3, -1.0, p) == pytest.approx(-math.sqrt(2 / math.pi) * math.exp(-0.5 * 1.09), rel=1e-15)


def test_initial_state_normalised(params_marginal):
    L = math.sqrt(params_marginal.hbar / math.sqrt(params_marginal.m * params_marginal.k))
    rule = gauss_hermite_rule(40, L)
    x1, x2, w = tensor_grid(rule, rule)
    assert np.sum(w * sp.initial_state(x1, x2, params_marginal) ** 2) == pytest.approx(1.0, abs=1e-13)


def test_parity_selection(spectral_marginal):
    c = spectral_marginal.coefficients
    assert c[0, 0] == 0.0
    for n in range(c.shape[0]):
        for npr in range(c.shape[1]):
            if (n + npr) % 2 == 0:
                assert abs(c[n, npr]) < 1e-12


def test_uncoupled_coefficients():
    p = OscillatorParams(m=1, k=1, lam=0.0)
    s = sp.project_coefficients(params=p)
    assert s.coefficient(1, 0) == pytest.approx(1 / math.sqrt(2), abs=1e-13)
    assert s.coefficient(0, 1) == pytest.approx(-1 / math.sqrt(2), abs=1e-13)
    assert s.retained_norm == pytest.approx(1.0, abs=1e-13)
    assert s.tail_bound < 1e-12


def test_coefficient_out_of_truncation(spectral_marginal):
    assert spectral_marginal.coefficient(5, 0) == 0.0
    assert spectral_marginal.truncation == sp.DEFAULT_TRUNCATION


@settings(max_examples=12, deadline=None)
@given(r=st.floats(0.005, 0.3), n=st.integers(0, 1), j=st.integers(0, 3))
def test_closed_form_matches_projection(r, n, j):
    p = OscillatorParams.from_frequencies(1.0, r)
    s = sp.project_coefficients(params=p)
    n_prime = 2 * j + (1 - n)
    assert sp.coefficient_closed_form(n, n_prime, p.frequencies()) == pytest.approx(
        s.coefficient(n, n_prime), abs=1e-11
    )


def test_closed_form_rejects_negative(params_marginal):
    with pytest.raises(ValueError):
        sp.coefficient_closed_form(-1, 0, params_marginal.frequencies())
    assert sp.coefficient_closed_form(2, 0, params_marginal.frequencies()) == 0.0


@pytest.mark.parametrize("n", [0, 1])
def test_coefficient_ratio(n, spectral_marginal):
    f = spectral_marginal.freqs
    for n_prime in range(1 - n, 4, 2):
        ratio = spectral_marginal.coefficient(n, n_prime + 2) / spectral_marginal.coefficient(n, n_prime)
        assert ratio == pytest.approx(sp.coefficient_ratio(n, n_prime, f), rel=1e-9)
    with pytest.raises(ValueError):
        sp.coefficient_ratio(2, 0, f)


def test_tail_bound_covers_extension(params_marginal, spectral_marginal):
    wide = sp.project_coefficients(params=params_marginal, truncation=(1, 21))
    missing = wide.retained_norm - spectral_marginal.retained_norm
    assert 0 <= missing <= spectral_marginal.tail_bound
    assert spectral_marginal.retained_norm + spectral_marginal.tail_bound >= 1 - 1e-12


def test_first_order_coefficients_close(spectral_marginal):
    r = spectral_marginal.freqs.ratio
    for key, value in sp.first_order_coefficients(spectral_marginal.freqs).items():
        assert abs(spectral_marginal.coefficient(*key) - value) < 2 * r * r


def test_quadrature_order_too_low(params_marginal):
    with pytest.raises(QuadratureError):
        sp.project_coefficients(params=params_marginal, order=10)
    with pytest.raises(ValueError):
        sp.project_coefficients(params=params_marginal, truncation=(-1, 3))
    with pytest.raises(ValueError):
        sp.project_coefficients()


def test_exact_series_at_start(params_marginal, spectral_marginal):
    x = np.linspace(-20, 20, 41)
    X1, X2 = np.meshgrid(x, x)
    psi = sp.psi_exact(X1, X2, 0.0, spectral_marginal).value
    diff = np.abs(psi - sp.initial_state(X1, X2, params_marginal))
    # pointwise error is bounded by the tail norm times the largest basis-function product
    sup_basis = 1.0 / math.sqrt(params_marginal.hbar / params_marginal.m)
    assert np.max(diff) < math.sqrt(spectral_marginal.tail_bound) * sup_basis


@pytest.mark.parametrize("t", [0.0, 37.3])
def test_unitarity(t, params_marginal, spectral_marginal):
    f = params_marginal.frequencies()
    L = math.sqrt(params_marginal.hbar / (params_marginal.m * f.omega_bar))
    rule = gauss_hermite_rule(48, L)
    x1, x2, w = tensor_grid(rule, rule)
    psi = sp.psi_exact(x1, x2, t, spectral_marginal, gradient=False).value
    assert np.sum(w * np.abs(psi) ** 2) == pytest.approx(spectral_marginal.retained_norm, abs=1e-10)


def test_uncoupled_density_stationary():
    p = OscillatorParams(m=1, k=1, lam=0.0)
    s = sp.project_coefficients(params=p)
    x = np.linspace(-8, 8, 17)
    X1, X2 = np.meshgrid(x, x)
    d0 = sp.psi_exact(X1, X2, 0.0, s).density
    d1 = sp.psi_exact(X1, X2, 12.345, s).density
    assert np.max(np.abs(d1 - d0)) < 1e-15


@pytest.mark.parametrize("kind", ["exact", "first"])
def test_gradient_by_finite_differences(kind, params_marginal, spectral_marginal):
    rng = np.random.default_rng(3)
    x1, x2 = rng.uniform(-6, 6, (2, 25))
    t = 4.2

    def ev(a, b):
        if kind == "exact":
            return sp.psi_exact(a, b, t, spectral_marginal)
        return sp.psi_first_order(a, b, t, params_marginal)

    g = ev(x1, x2).grad
    errs = []
    for h in (1e-2, 5e-3):
        fd1 = (ev(x1 + h, x2).value - ev(x1 - h, x2).value) / (2 * h)
        fd2 = (ev(x1, x2 + h).value - ev(x1, x2 - h).value) / (2 * h)
        errs.append(max(np.max(np.abs(fd1 - g[0])), np.max(np.abs(fd2 - g[1]))))
    assert errs[1] < 1e-6
    assert math.log2(errs[0] / errs[1]) > 1.9


def test_first_order_node_at_origin(params_marginal):
    for t in (0.0, 1.0, 17.0):
        assert sp.psi_first_order(0.0, 0.0, t, params_marginal).value == 0.0


def test_first_order_close_to_exact(spectral_marginal, params_marginal):
    x = np.linspace(-15, 15, 31)
    X1, X2 = np.meshgrid(x, x)
    for t in (0.0, 5.0, 15.7):
        e = sp.psi_exact(X1, X2, t, spectral_marginal, gradient=False).value
        a = sp.psi_first_order(X1, X2, t, params_marginal).value
        b = sp.psi_first_order_printed(X1, X2, t, params_marginal).value
        assert np.max(np.abs(a - e)) < np.max(np.abs(b - e))


def test_first_order_error_is_second_order():
    errs = []
    for r in (0.04, 0.02):
        p = OscillatorParams.from_frequencies(1.0, r)
        s = sp.project_coefficients(params=p)
        x = np.linspace(-12, 12, 25)
        X1, X2 = np.meshgrid(x, x)
        errs.append(np.max(np.abs(sp.psi_exact(X1, X2, 3.0, s).value - sp.psi_first_order(X1, X2, 3.0, p).value)))
    assert math.log2(errs[0] / errs[1]) > 1.7


def test_spectral_energy_against_quadrature(params_marginal, spectral_marginal):
    from coupled_bohm import observables as ob

    rep = ob.energy_quadrature(11.0, spectral_marginal)
    assert rep.E_total == pytest.approx(spectral_marginal.energy(), rel=1e-8)
