"""Normal-mode expansion of the initial state and its exact and first-order evolution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError
from .model import (
    SQRT2,
    DerivedFrequencies,
    OscillatorParams,
    check_first_order,
    derive_frequencies,
    from_normal_coords,
    gauss_hermite_rule,
    mode_functions,
    mode_inverse_length,
    tensor_grid,
    to_normal_coords,
)

DEFAULT_TRUNCATION = (1, 7)


@dataclass(frozen=True)
class SpectralState:
    """Coefficients ``C[n, n']`` of the state in the product eigenbasis.

    ``tail_bound`` bounds the squared norm left out by the truncation.
    """

    coefficients: np.ndarray
    params: OscillatorParams
    freqs: DerivedFrequencies
    tail_bound: float
    initial_norm: float = 1.0

    @property
    def truncation(self):
        n, n_p = self.coefficients.shape
        return n - 1, n_p - 1

    @property
    def retained_norm(self) -> float:
        return float(np.sum(self.coefficients**2))

    def mode_energies(self):
        """``E_n + E'_{n'}`` on the coefficient grid."""
        nmax, npmax = self.truncation
        hb = self.params.hbar
        e_plus = hb * self.freqs.omega * (np.arange(nmax + 1) + 0.5)
        e_minus = hb * self.freqs.omega_prime * (np.arange(npmax + 1) + 0.5)
        return e_plus[:, None] + e_minus[None, :]

    def energy(self) -> float:
        """``<H>`` from the spectral weights; time independent by construction."""
        return float(np.sum(self.coefficients**2 * self.mode_energies()) / self.retained_norm)

    def coefficient(self, n, n_prime) -> float:
        nmax, npmax = self.truncation
        if n > nmax or n_prime > npmax:
            return 0.0
        return float(self.coefficients[n, n_prime])


@dataclass(frozen=True)
class WavefunctionEval:
    value: np.ndarray
    grad: tuple
    mode: str

    @property
    def density(self):
        return np.abs(self.value) ** 2


def initial_state(x1, x2, params: OscillatorParams):
    """Particle 1 in its ground state, particle 2 in its first excited state (uncoupled)."""
    a = math.sqrt(params.m * params.k) / params.hbar
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return math.sqrt(2.0 / math.pi) * a * x2 * np.exp(-0.5 * a * (x1 * x1 + x2 * x2))


def _projection_rules(params, freqs, order):
    # |phi_+ * psi0| decays like exp(-a xi+^2), |phi_- * psi0| like exp(-(a+a')/2 xi-^2)
    a = mode_inverse_length("+", params, freqs) ** 2
    ap = mode_inverse_length("-", params, freqs) ** 2
    return (
        gauss_hermite_rule(order, 1.0 / math.sqrt(a)),
        gauss_hermite_rule(order, 1.0 / math.sqrt(0.5 * (a + ap))),
    )


def _project(initial, params, freqs, truncation, order):
    nmax, npmax = truncation
    rule_p, rule_m = _projection_rules(params, freqs, order)
    xp, xm, w = tensor_grid(rule_p, rule_m)
    x1, x2 = from_normal_coords(xp, xm)
    psi0 = np.asarray(initial(x1, x2), dtype=float)
    fp = mode_functions("+", nmax, rule_p.nodes, params, freqs)
    fm = mode_functions("-", npmax, rule_m.nodes, params, freqs)
    coeffs = np.einsum("ia,jb,ab->ij", fp, fm, w * psi0)
    norm = float(np.sum(w * psi0 * psi0))
    return coeffs, norm


def project_coefficients(
    initial=None,
    params: OscillatorParams | None = None,
    truncation=DEFAULT_TRUNCATION,
    order=None,
    check_stability=True,
) -> SpectralState:
    """Project ``initial(x1, x2)`` onto ``phi_+^(n) phi_-^(n')`` by 2-D Gauss-Hermite quadrature.

    ``initial`` defaults to :func:`initial_state`. The quadrature is repeated
    at doubled order; a change above 1e-8 in any coefficient raises
    :class:`QuadratureError`.
    """
    if params is None:
        raise ValueError("params are required")
    freqs = derive_frequencies(params)
    nmax, npmax = truncation
    if nmax < 0 or npmax < 0:
        raise ValueError("truncation indices must be non-negative")
    if initial is None:
        def initial(x1, x2):
            return initial_state(x1, x2, params)
    min_order = 2 * max(nmax, npmax) + 16
    if order is None:
        order = max(64, min_order)
    elif order < min_order:
        raise QuadratureError(f"quadrature order {order} too low for truncation {truncation}; need >= {min_order}")
    coeffs, norm = _project(initial, params, freqs, truncation, order)
    if check_stability:
        fine, _ = _project(initial, params, freqs, truncation, min(2 * order, 300))
        drift = float(np.max(np.abs(fine - coeffs)))
        if drift > 1e-8:
            raise QuadratureError(f"coefficients unstable under order doubling (max change {drift:.3g})")
    # rounding-level noise in structurally-zero entries (parity) is cleaned below 1e-15
    coeffs = np.where(np.abs(coeffs) < 1e-15, 0.0, coeffs)
    deficit = max(norm - float(np.sum(coeffs**2)), 0.0)
    tail = max(deficit, _geometric_tail(coeffs, freqs)) + 1e-13
    return SpectralState(coefficients=coeffs, params=params, freqs=freqs, tail_bound=tail, initial_norm=norm)


def _geometric_tail(coeffs, freqs):
    """Extrapolated norm beyond the last retained ``n'`` assuming ratio ``(w'-w)/(w+w')`` per two steps."""
    r = (freqs.omega_prime - freqs.omega) / (freqs.omega_prime + freqs.omega)
    if r == 0:
        return 0.0
    q = r * r
    last = coeffs[:, -2:] ** 2
    return float(np.sum(last) * q / (1.0 - q))


def coefficient_closed_form(n: int, n_prime: int, freqs: DerivedFrequencies) -> float:
    """Closed-form ``C_{n,n'}`` for :func:`initial_state`, transcribed term by term.

    Non-zero only for ``n = 1`` with even ``n'`` and ``n = 0`` with odd ``n'``.
    Treated as a formula under test: :func:`project_coefficients` is the reference.
    """
    if n < 0 or n_prime < 0:
        raise ValueError("indices must be non-negative")
    w, wp = freqs.omega, freqs.omega_prime
    if n == 1 and n_prime % 2 == 0:
        j = n_prime // 2
        bracket = math.sqrt(1.0 / w) * math.factorial(2 * j) / math.factorial(j)
    elif n == 0 and n_prime % 2 == 1:
        j = (n_prime - 1) // 2
        bracket = -(
            math.sqrt(2.0 / (w + wp))
            * math.factorial(2 * j + 1)
            / math.factorial(j)
            * math.sqrt(2.0 * wp / (w + wp))
        )
    else:
        return 0.0
    pre = (
        math.sqrt(w)
        * (w / (2 ** (2 * n) * math.factorial(n) ** 2)) ** 0.25
        * (wp / (2 ** (2 * n_prime) * math.factorial(n_prime) ** 2)) ** 0.25
        * math.sqrt(2.0 / (w + wp))
        * ((wp - w) / (w + wp)) ** j
    )
    return pre * bracket


def coefficient_ratio(n: int, n_prime: int, freqs: DerivedFrequencies) -> float:
    """Predicted ``C_{n,n'+2} / C_{n,n'}`` for ``n`` in {0, 1}."""
    r = (freqs.omega_prime - freqs.omega) / (freqs.omega + freqs.omega_prime)
    if n == 0:
        return r * math.sqrt((n_prime + 2) / (n_prime + 1))
    if n == 1:
        return r * math.sqrt((n_prime + 1) / (n_prime + 2))
    raise ValueError("ratio is defined for n in {0, 1}")


def first_order_coefficients(freqs: DerivedFrequencies) -> dict:
    """The four retained coefficients to first order in ``delta_omega/omega_bar``."""
    r = freqs.ratio
    return {
        (1, 0): math.sqrt(2.0) / 2.0,
        (0, 1): -math.sqrt(2.0) / 2.0,
        (1, 2): 0.5 * r,
        (0, 3): -math.sqrt(3.0) / 2.0 * r,
    }


class _SeriesKernel:
    """Precomputed constants for evaluating one truncated series on flat point arrays.

    Both normal modes share one normalised Hermite recurrence, so a call costs
    a fixed handful of array operations however many terms are retained.
    """

    def __init__(self, spectral: SpectralState):
        c = spectral.coefficients
        rows = np.flatnonzero(np.any(c != 0, axis=1))
        cols = np.flatnonzero(np.any(c != 0, axis=0))
        if rows.size == 0:
            rows = cols = np.array([0])
        self.rows, self.cols = rows, cols
        self.c = c[np.ix_(rows, cols)].astype(complex)
        p, f = spectral.params, spectral.freqs
        kappa = np.array([mode_inverse_length("+", p, f), mode_inverse_length("-", p, f)])
        self.kappa = kappa[:, None]
        self.amp = np.sqrt(kappa)[:, None]
        self.top = int(max(rows.max(), cols.max())) + 1
        n = np.arange(self.top + 1)
        self.rec_a = np.sqrt(2.0 / (n + 1.0))
        self.rec_b = np.sqrt(n / (n + 1.0))
        k = np.arange(self.top)
        self.d_lo = np.sqrt(k / 2.0)[:, None, None]
        self.d_hi = np.sqrt((k + 1) / 2.0)[:, None, None]
        self.w_p = f.omega * (rows + 0.5)
        self.w_m = f.omega_prime * (cols + 0.5)

    def evaluate(self, x1, x2, t, gradient=True):
        """``psi`` and, optionally, ``(d psi/dx1, d psi/dx2)`` for 1-D arrays of equal length."""
        y = np.stack(((x1 + x2), (x1 - x2))) * (self.kappa / SQRT2)
        h = np.empty((self.top + 1,) + y.shape)
        h[0] = math.pi**-0.25 * np.exp(-0.5 * y * y)
        h[1] = SQRT2 * y * h[0]
        for j in range(1, self.top):
            h[j + 1] = self.rec_a[j] * y * h[j] - self.rec_b[j] * h[j - 1]
        rows, cols = self.rows, self.cols
        fp = self.amp[0] * h[rows, 0]
        fm = self.amp[1] * h[cols, 1]
        ph_p = np.exp(np.multiply.outer(-1j * self.w_p, t))
        ph_m = np.exp(np.multiply.outer(-1j * self.w_m, t))
        wp = ph_p * fp
        am = ph_m * fm
        inner = _contract(self.c, am)
        value = _dot_rows(wp, inner)
        if not gradient:
            return value, None
        d = np.empty((self.top,) + y.shape)
        d[0] = -y * h[0]
        d[1:] = self.d_lo[1:] * h[: self.top - 1] - self.d_hi[1:] * h[2 : self.top + 1]
        scale = self.amp * self.kappa
        dfp = scale[0] * d[rows, 0]
        dfm = scale[1] * d[cols, 1]
        dp = _dot_rows(ph_p * dfp, inner)
        dm = _dot_rows(wp, _contract(self.c, ph_m * dfm))
        return value, ((dp + dm) / SQRT2, (dp - dm) / SQRT2)


# Explicit accumulation keeps every point's arithmetic independent of how many
# points share the call, so batched trajectories are bit-identical however
# they are chunked (BLAS kernels may reorder sums by array shape).


def _contract(c, a):
    """``c @ a`` for a small matrix ``c`` and ``a`` of shape ``(cols, N)``."""
    out = c[:, :1] * a[0]
    for j in range(1, c.shape[1]):
        out = out + c[:, j : j + 1] * a[j]
    return out


def _dot_rows(a, b):
    """``sum_i a[i] * b[i]`` with a fixed summation order."""
    out = a[0] * b[0]
    for i in range(1, a.shape[0]):
        out = out + a[i] * b[i]
    return out


def _kernel(spectral: SpectralState) -> _SeriesKernel:
    k = spectral.__dict__.get("_kernel")
    if k is None:
        k = _SeriesKernel(spectral)
        object.__setattr__(spectral, "_kernel", k)
    return k


def psi_exact(x1, x2, t, spectral: SpectralState, gradient=True) -> WavefunctionEval:
    """Truncated eigen-series ``sum C e^{-i(E_n+E'_n')t/hbar} phi_+ phi_-`` and its gradient."""
    x1, x2, t = np.broadcast_arrays(
        np.asarray(x1, dtype=float), np.asarray(x2, dtype=float), np.asarray(t, dtype=float)
    )
    shape = x1.shape
    value, grad = _kernel(spectral).evaluate(x1.ravel(), x2.ravel(), t.ravel(), gradient)
    value = value.reshape(shape)
    if grad is not None:
        grad = (grad[0].reshape(shape), grad[1].reshape(shape))
    return WavefunctionEval(value=value, grad=grad, mode="exact-series")


def psi_first_order(x1, x2, t, params: OscillatorParams, freqs=None, warn=True) -> WavefunctionEval:
    """Four-mode first-order wavefunction as a closed form in ``x1, x2, t``, with analytic gradient.

    Not renormalised. The two static ``O(delta_omega/omega_bar)`` corrections
    carry the sign obtained by expanding the exact Gaussian ground state, so the
    result agrees with :func:`psi_exact` up to second-order terms.
    """
    freqs = freqs or derive_frequencies(params)
    if warn:
        check_first_order(params)
    return _first_order(x1, x2, t, params, freqs, static_sign=-1.0)


def psi_first_order_printed(x1, x2, t, params: OscillatorParams, freqs=None, warn=True) -> WavefunctionEval:
    """Variant with the opposite sign on the two static corrections.

    Retained for comparison only. Its sup-norm deviation from the exact state is
    first order in ``delta_omega/omega_bar`` rather than second.
    """
    freqs = freqs or derive_frequencies(params)
    if warn:
        check_first_order(params)
    return _first_order(x1, x2, t, params, freqs, static_sign=+1.0)


def _first_order(x1, x2, t, params, freqs, static_sign):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    t = np.asarray(t, dtype=float)
    wb, dw = freqs.omega_bar, freqs.delta_omega
    r = dw / wb
    a = params.m * wb / params.hbar
    pref = math.sqrt(1.0 / (2.0 * math.pi)) * a
    gauss = np.exp(-0.5 * a * (x1 * x1 + x2 * x2))
    glob = np.exp(-2j * wb * t)
    s, c = np.sin(dw * t), np.cos(dw * t)
    e1 = np.exp(-1j * (2 * wb + dw) * t)
    e3 = np.exp(-1j * (2 * wb + 3 * dw) * t)
    u = x1 - x2
    v = x1 + x2
    g = static_sign * r

    sin_amp = x1 + x2 * (0.5 - a * x1 * x1) * g
    cos_amp = x2 + x1 * (0.5 - a * x2 * x2) * g
    brace = (
        2j * sin_amp * s
        + 2.0 * cos_amp * c
        + 0.5 * r * v * (a * u * u - 1.0) * e1
        - 0.5 * r * u * (a * u * u - 3.0) * e3
    )
    # d(brace)/dx1 and d(brace)/dx2
    d_sin_1 = 1.0 + x2 * (-2.0 * a * x1) * g
    d_sin_2 = (0.5 - a * x1 * x1) * g
    d_cos_1 = (0.5 - a * x2 * x2) * g
    d_cos_2 = 1.0 + x1 * (-2.0 * a * x2) * g
    d_t1_du = 0.5 * r * v * 2.0 * a * u
    d_t1_dv = 0.5 * r * (a * u * u - 1.0)
    d_t3_du = -0.5 * r * (3.0 * a * u * u - 3.0)
    db1 = 2j * d_sin_1 * s + 2.0 * d_cos_1 * c + (d_t1_dv + d_t1_du) * e1 + d_t3_du * e3
    db2 = 2j * d_sin_2 * s + 2.0 * d_cos_2 * c + (d_t1_dv - d_t1_du) * e1 - d_t3_du * e3

    base = pref * gauss * glob
    value = base * brace
    grad = (base * (db1 - a * x1 * brace), base * (db2 - a * x2 * brace))
    return WavefunctionEval(value=value, grad=grad, mode="first-order")
