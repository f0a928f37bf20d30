"""Parameters, normal modes, Hermite functions and Gauss-Hermite quadrature.

Units throughout are electron masses, angstroms and femtoseconds; the default
reduced Planck constant is ``hbar = 10 m_e A^2 / fs``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import FirstOrderWarning, QuadratureError

DEFAULT_HBAR = 10.0
#: Largest coupling ratio ``eps = 2*lam/k`` for which first-order closed forms are trusted.
FIRST_ORDER_EPS_LIMIT = 0.2
#: Beyond this node count the smallest Gauss-Hermite weights underflow to zero.
MAX_QUADRATURE_ORDER = 300

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class OscillatorParams:
    """Two identical oscillators (mass ``m``, spring ``k``) joined by a spring ``lam``.

    ``d`` is the equilibrium offset of the original coordinates. The canonical
    shift removes it from every equation of motion, so it is carried only for
    bookkeeping.
    """

    m: float = 1.0
    k: float = 1.0
    lam: float = 0.0
    hbar: float = DEFAULT_HBAR
    d: float = 0.0

    def __post_init__(self):
        for name in ("m", "k", "lam", "hbar", "d"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.m <= 0 or self.k <= 0 or self.hbar <= 0:
            raise ValueError("m, k and hbar must be strictly positive")
        if self.lam < 0:
            raise ValueError("coupling lam must be non-negative")

    @property
    def epsilon(self) -> float:
        return 2.0 * self.lam / self.k

    @classmethod
    def from_frequencies(cls, omega_bar, delta_ratio, m=1.0, hbar=DEFAULT_HBAR):
        """Build parameters from the mean frequency and ``delta_omega / omega_bar``.

        This is how the figure scenarios are specified: ``omega = omega_bar*(1-r)``
        and ``omega' = omega_bar*(1+r)`` exactly, with ``k`` and ``lam`` solved from them.
        """
        if omega_bar <= 0:
            raise ValueError("omega_bar must be positive")
        if not 0 <= delta_ratio < 1:
            raise ValueError("delta_ratio must lie in [0, 1)")
        omega = omega_bar * (1.0 - delta_ratio)
        omega_p = omega_bar * (1.0 + delta_ratio)
        k = m * omega**2
        lam = 0.5 * (m * omega_p**2 - k)
        return cls(m=m, k=k, lam=lam, hbar=hbar)

    def frequencies(self) -> DerivedFrequencies:
        return derive_frequencies(self)


@dataclass(frozen=True)
class DerivedFrequencies:
    omega: float
    omega_prime: float
    delta_omega: float
    omega_bar: float
    epsilon: float

    @property
    def ratio(self) -> float:
        """``delta_omega / omega_bar``, the small parameter of all first-order formulas."""
        return self.delta_omega / self.omega_bar

    @property
    def delta_omega_perturbative(self) -> float:
        """The weak-coupling estimate ``lam / (2 sqrt(k m))``; diagnostic only."""
        return 0.5 * self.omega * self.epsilon / 2.0


def derive_frequencies(params: OscillatorParams) -> DerivedFrequencies:
    omega = math.sqrt(params.k / params.m)
    omega_p = math.sqrt((params.k + 2.0 * params.lam) / params.m)
    if params.lam == 0:
        omega_p = omega
    return DerivedFrequencies(
        omega=omega,
        omega_prime=omega_p,
        delta_omega=0.5 * (omega_p - omega),
        omega_bar=0.5 * (omega_p + omega),
        epsilon=params.epsilon,
    )


def check_first_order(params: OscillatorParams, strict=False):
    """Warn (or raise with ``strict``) when ``eps`` exceeds the first-order validity limit."""
    eps = params.epsilon
    if eps > FIRST_ORDER_EPS_LIMIT:
        msg = (
            f"coupling eps=2*lam/k={eps:.4g} exceeds {FIRST_ORDER_EPS_LIMIT}; "
            "first-order closed forms carry O((delta_omega/omega_bar)^2) errors of visible size"
        )
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, FirstOrderWarning, stacklevel=3)


# -- coordinates ---------------------------------------------------------------


def to_normal_coords(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return (x1 + x2) / SQRT2, (x1 - x2) / SQRT2


def from_normal_coords(xi_plus, xi_minus):
    xi_plus = np.asarray(xi_plus, dtype=float)
    xi_minus = np.asarray(xi_minus, dtype=float)
    return (xi_plus + xi_minus) / SQRT2, (xi_plus - xi_minus) / SQRT2


# -- Hermite polynomials and functions -----------------------------------------


def hermite(n: int, x):
    """Physicists' Hermite polynomial ``H_n(x)`` by three-term recurrence."""
    if n < 0:
        raise ValueError(f"Hermite order must be non-negative, got {n}")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev
    h = 2.0 * x
    for j in range(1, n):
        h_prev, h = h, 2.0 * x * h - 2.0 * j * h_prev
    return h


def hermite_functions(nmax: int, y, derivative=False):
    """Orthonormal Hermite functions ``psi_0 .. psi_nmax`` at dimensionless ``y``.

    ``psi_n(y) = H_n(y) exp(-y^2/2) / sqrt(2^n n! sqrt(pi))``, built with the
    normalised recurrence so nothing overflows for large ``n`` or ``|y|``.
    Returns an array of shape ``(nmax + 1,) + y.shape``; with ``derivative``
    also returns ``d psi_n / dy`` of the same shape.
    """
    if nmax < 0:
        raise ValueError("nmax must be non-negative")
    y = np.asarray(y, dtype=float)
    # one extra row so the derivative identity can reach psi_{nmax+1}
    top = nmax + 1 if derivative else nmax
    out = np.empty((top + 1,) + y.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * y * y)
    if top >= 1:
        out[1] = SQRT2 * y * out[0]
    for n in range(1, top):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * y * out[n] - math.sqrt(n / (n + 1.0)) * out[n - 1]
    if not derivative:
        return out
    d = np.empty((nmax + 1,) + y.shape)
    d[0] = -y * out[0]
    for n in range(1, nmax + 1):
        d[n] = math.sqrt(n / 2.0) * out[n - 1] - math.sqrt((n + 1) / 2.0) * out[n + 1]
    return out[: nmax + 1], d


def _mode_frequency(mode, freqs: DerivedFrequencies):
    if mode in ("+", "plus", 1):
        return freqs.omega
    if mode in ("-", "minus", -1):
        return freqs.omega_prime
    raise ValueError(f"mode must be '+' or '-', got {mode!r}")


def mode_inverse_length(mode, params: OscillatorParams, freqs: DerivedFrequencies) -> float:
    """``sqrt(m w / hbar)`` for the requested normal mode (w = omega or omega')."""
    return math.sqrt(params.m * _mode_frequency(mode, freqs) / params.hbar)


def eigenfunction(mode, n: int, xi, params: OscillatorParams, freqs: DerivedFrequencies):
    """Normalised eigenfunction of the ``+`` (frequency omega) or ``-`` (omega') mode."""
    if n < 0:
        raise ValueError(f"quantum number must be non-negative, got {n}")
    kappa = mode_inverse_length(mode, params, freqs)
    xi = np.asarray(xi, dtype=float)
    return math.sqrt(kappa) * hermite_functions(n, kappa * xi)[n]


def mode_functions(mode, nmax, xi, params, freqs, derivative=False):
    """All eigenfunctions ``0..nmax`` of one mode at ``xi`` (and their xi-derivatives)."""
    kappa = mode_inverse_length(mode, params, freqs)
    y = kappa * np.asarray(xi, dtype=float)
    if derivative:
        f, df = hermite_functions(nmax, y, derivative=True)
        return math.sqrt(kappa) * f, kappa * math.sqrt(kappa) * df
    return math.sqrt(kappa) * hermite_functions(nmax, y)


def eigenvalue(mode, n: int, params: OscillatorParams, freqs: DerivedFrequencies) -> float:
    if n < 0:
        raise ValueError(f"quantum number must be non-negative, got {n}")
    return params.hbar * _mode_frequency(mode, freqs) * (n + 0.5)


# -- Gauss-Hermite quadrature --------------------------------------------------


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights for ``int f(x) exp(-x^2/L^2) dx ~ sum(weights * f(nodes))``.

    ``full_weights`` integrate a function that already carries its own decay:
    ``int g(x) dx ~ sum(full_weights * g(nodes))``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    full_weights: np.ndarray = field(repr=False)
    order: int
    length_scale: float = 1.0

    def integrate(self, values):
        """Apply ``full_weights`` along the leading axis of ``values``."""
        return np.tensordot(self.full_weights, np.asarray(values), axes=(0, 0))


def gauss_hermite_rule(order: int, length_scale: float = 1.0) -> QuadratureRule:
    """Golub-Welsch nodes with Newton polishing; Christoffel-function weights."""
    if order < 2:
        raise QuadratureError(f"quadrature order must be >= 2, got {order}")
    if order > MAX_QUADRATURE_ORDER:
        raise QuadratureError(
            f"quadrature order {order} exceeds the stable limit {MAX_QUADRATURE_ORDER} "
            "(smallest weights underflow)"
        )
    if not length_scale > 0:
        raise QuadratureError("length_scale must be positive")
    off = np.sqrt(np.arange(1, order) / 2.0)
    y = eigh_tridiagonal(np.zeros(order), off, eigvals_only=True)
    for _ in range(3):
        f, df = hermite_functions(order, y, derivative=True)
        y = y - f[order] / df[order]
    y = 0.5 * (y - y[::-1])  # exact antisymmetry
    psi = hermite_functions(order - 1, y)
    christoffel = 1.0 / np.sum(psi * psi, axis=0)  # = w_i * exp(y_i^2)
    weights = christoffel * np.exp(-y * y)
    return QuadratureRule(
        nodes=length_scale * y,
        weights=length_scale * weights,
        full_weights=length_scale * christoffel,
        order=order,
        length_scale=float(length_scale),
    )


def tensor_grid(rule_a: QuadratureRule, rule_b: QuadratureRule):
    """Meshgrid of nodes and the product ``full_weights`` for 2-D integration."""
    a, b = np.meshgrid(rule_a.nodes, rule_b.nodes, indexing="ij")
    w = np.outer(rule_a.full_weights, rule_b.full_weights)
    return a, b, w


def normal_mode_rules(params: OscillatorParams, order=64, freqs=None):
    """Rules sized to ``|psi|^2`` in each normal coordinate of the coupled problem."""
    freqs = freqs or derive_frequencies(params)
    lp = 1.0 / mode_inverse_length("+", params, freqs)
    lm = 1.0 / mode_inverse_length("-", params, freqs)
    return gauss_hermite_rule(order, lp), gauss_hermite_rule(order, lm)
