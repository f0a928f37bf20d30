import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite as npherm

from coupled_bohm.errors import FirstOrderWarning, QuadratureError
from coupled_bohm.model import (
    MAX_QUADRATURE_ORDER,
    OscillatorParams,
    check_first_order,
    derive_frequencies,
    eigenfunction,
    eigenvalue,
    from_normal_coords,
    gauss_hermite_rule,
    hermite,
    hermite_functions,
    mode_functions,
    tensor_grid,
    to_normal_coords,
)

# explicit physicists' Hermite polynomials H0..H5
HARD_CODED = [
    lambda x: np.ones_like(x),
    lambda x: 2 * x,
    lambda x: 4 * x**2 - 2,
    lambda x: 8 * x**3 - 12 * x,
    lambda x: 16 * x**4 - 48 * x**2 + 12,
    lambda x: 32 * x**5 - 160 * x**3 + 120 * x,
]


def test_zero_coupling_frequencies():
    f = derive_frequencies(OscillatorParams(m=1, k=1, lam=0, hbar=10))
    assert f.omega == f.omega_prime == f.omega_bar == 1.0
    assert f.delta_omega == 0.0


def test_frequencies_lambda_point_one():
    f = derive_frequencies(OscillatorParams(m=1, k=1, lam=0.1))
    assert f.omega == 1.0
    assert f.omega_prime == pytest.approx(1.0954451150103321, abs=1e-15)
    assert f.delta_omega == pytest.approx(0.047722557505166, abs=1e-12)
    assert f.omega_bar == pytest.approx(1.047722557505166, abs=1e-12)


def test_perturbative_delta_omega_is_second_order_close():
    f = derive_frequencies(OscillatorParams(m=1, k=1, lam=0.2))
    assert f.delta_omega == pytest.approx(0.0916079783, abs=1e-9)
    approx = 0.2 / (2 * math.sqrt(1 * 1))
    assert f.delta_omega_perturbative == pytest.approx(approx)
    assert abs(f.delta_omega - approx) < 0.2**2


@given(
    m=st.floats(0.1, 10), k=st.floats(0.1, 10), lam=st.floats(0, 5), hbar=st.floats(0.5, 20)
)
def test_frequency_identities(m, k, lam, hbar):
    f = derive_frequencies(OscillatorParams(m=m, k=k, lam=lam, hbar=hbar))
    assert f.omega_prime >= f.omega
    assert f.delta_omega >= 0
    assert f.omega <= f.omega_bar <= f.omega_prime
    assert f.omega_bar + f.delta_omega == pytest.approx(f.omega_prime, rel=1e-15, abs=0)
    assert f.omega_bar - f.delta_omega == pytest.approx(f.omega, rel=1e-14, abs=0)
    assert f.epsilon == pytest.approx(2 * lam / k)


def test_from_frequencies_round_trip():
    p = OscillatorParams.from_frequencies(1.0, 0.1)
    f = p.frequencies()
    assert f.omega == pytest.approx(0.9, abs=1e-15)
    assert f.omega_prime == pytest.approx(1.1, abs=1e-15)
    assert f.ratio == pytest.approx(0.1, abs=1e-15)
    assert OscillatorParams.from_frequencies(1.0, 0.0).lam == 0.0


@pytest.mark.parametrize("kwargs", [{"m": 0}, {"k": -1}, {"hbar": 0}, {"lam": -0.1}, {"m": math.nan}])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ValueError):
        OscillatorParams(**kwargs)


def test_first_order_guard():
    with warnings.catch_warnings():
        warnings.simplefilter("error", FirstOrderWarning)
        check_first_order(OscillatorParams(k=1, lam=0.1))
        with pytest.raises(FirstOrderWarning):
            check_first_order(OscillatorParams(k=1, lam=0.2))
    with pytest.raises(ValueError):
        check_first_order(OscillatorParams(k=1, lam=0.2), strict=True)


@pytest.mark.parametrize(
    "x, expected",
    [((0.0, 0.0), (0.0, 0.0)), ((1.0, 1.0), (math.sqrt(2), 0.0)), ((1.0, -1.0), (0.0, math.sqrt(2)))],
)
def test_normal_coords_examples(x, expected):
    assert to_normal_coords(*x) == pytest.approx(expected, abs=1e-15)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_normal_coords_round_trip(x1, x2):
    xp, xm = to_normal_coords(x1, x2)
    y1, y2 = from_normal_coords(xp, xm)
    scale = max(1.0, abs(x1), abs(x2))
    assert abs(y1 - x1) <= 4e-16 * scale and abs(y2 - x2) <= 4e-16 * scale
    assert xp**2 + xm**2 == pytest.approx(x1**2 + x2**2, rel=1e-14, abs=1e-300)


def test_hermite_examples():
    assert hermite(0, 3.7) == 1.0
    assert hermite(2, 2.0) == 14.0
    assert hermite(3, 1.0) == -4.0
    with pytest.raises(ValueError):
        hermite(-1, 0.0)


def test_hermite_matches_hard_coded():
    x = np.linspace(-5, 5, 100)
    for n, ref in enumerate(HARD_CODED):
        expect = ref(x)
        got = hermite(n, x)
        denom = np.maximum(np.abs(expect), 1.0)
        assert np.max(np.abs(got - expect) / denom) < 1e-12


@given(st.integers(0, 30), st.floats(-6, 6))
def test_hermite_matches_numpy(n, x):
    ref = npherm.hermval(x, [0] * n + [1])
    assert hermite(n, x) == pytest.approx(ref, rel=1e-10, abs=1e-10 * max(1.0, abs(ref)))


def test_hermite_function_derivative_by_finite_difference():
    y = np.linspace(-4, 4, 33)
    h = 1e-5
    _, d = hermite_functions(8, y, derivative=True)
    fp = hermite_functions(8, y + h)
    fm = hermite_functions(8, y - h)
    assert np.max(np.abs(d - (fp - fm) / (2 * h))) < 1e-8


def test_eigenfunction_values():
    p = OscillatorParams(m=1, k=1, lam=0.1)
    f = p.frequencies()
    assert eigenfunction("+", 1, 0.0, p, f) == 0.0
    peak = (p.m * f.omega_prime / (math.pi * p.hbar)) ** 0.25
    assert eigenfunction("-", 0, 0.0, p, f) == pytest.approx(peak, rel=1e-14)
    with pytest.raises(ValueError):
        eigenfunction("+", -1, 0.0, p, f)


@pytest.mark.parametrize("mode", ["+", "-"])
def test_eigenfunction_orthonormality(mode):
    p = OscillatorParams(m=1, k=1, lam=0.1)
    f = p.frequencies()
    w = f.omega if mode == "+" else f.omega_prime
    rule = gauss_hermite_rule(64, math.sqrt(p.hbar / (p.m * w)))
    phi = mode_functions(mode, 10, rule.nodes, p, f)
    gram = (phi * rule.full_weights) @ phi.T
    assert np.max(np.abs(gram - np.eye(11))) < 1e-10


def test_eigenvalues():
    p1 = OscillatorParams(m=1, k=1, lam=0, hbar=10)
    assert eigenvalue("+", 0, p1, p1.frequencies()) == pytest.approx(5.0)
    p2 = OscillatorParams(m=1, k=1, lam=0.22, hbar=10)
    f2 = p2.frequencies()
    assert f2.omega_prime == pytest.approx(1.2, rel=1e-14)
    assert eigenvalue("-", 1, p2, f2) == pytest.approx(18.0, rel=1e-14)
    for n in range(1, 12):
        gap = eigenvalue("+", n, p2, f2) - eigenvalue("+", n - 1, p2, f2)
        assert gap == pytest.approx(p2.hbar * f2.omega, rel=1e-13)
    with pytest.raises(ValueError):
        eigenvalue("-", -2, p2, f2)


@pytest.mark.parametrize("order", [2, 3, 10, 64, 200])
def test_gauss_hermite_moments(order):
    rule = gauss_hermite_rule(order)
    assert np.all(rule.weights > 0)
    assert abs(np.sum(rule.weights) - math.sqrt(math.pi)) < 1e-12
    assert abs(np.sum(rule.weights * rule.nodes**2) - math.sqrt(math.pi) / 2) < 1e-12


def test_gauss_hermite_exact_to_degree():
    order = 12
    rule = gauss_hermite_rule(order)
    for k in range(0, 2 * order, 2):
        exact = math.gamma((k + 1) / 2)
        assert np.sum(rule.weights * rule.nodes**k) == pytest.approx(exact, rel=1e-11)


def test_gauss_hermite_scaled_and_limits():
    rule = gauss_hermite_rule(40, length_scale=2.5)
    # int exp(-x^2/s^2) dx = s sqrt(pi)
    assert np.sum(rule.weights) == pytest.approx(2.5 * math.sqrt(math.pi), rel=1e-13)
    with pytest.raises((QuadratureError, ValueError)):
        gauss_hermite_rule(1)
    with pytest.raises((QuadratureError, ValueError)):
        gauss_hermite_rule(MAX_QUADRATURE_ORDER + 1)


def test_tensor_grid_integrates_product():
    ra, rb = gauss_hermite_rule(20, 1.0), gauss_hermite_rule(30, 2.0)
    a, b, w = tensor_grid(ra, rb)
    # full weights integrate functions carrying their own decay
    g = np.exp(-(a**2)) * np.exp(-(b**2) / 4.0) * (1 + a**2 * b**2)
    assert np.sum(w * g) == pytest.approx(math.pi * 2.0 * (1 + 0.5 * 2.0), rel=1e-12)
    assert a.shape == b.shape == w.shape
