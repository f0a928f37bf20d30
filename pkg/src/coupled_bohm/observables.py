"""Densities, marginals and energy expectations of the coupled-oscillator state.

Every observable has two routes: a first-order closed form in
``delta_omega/omega_bar`` and a quadrature evaluation on the truncated exact
eigen-series. The quadrature route is the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError
from .model import (
    OscillatorParams,
    derive_frequencies,
    from_normal_coords,
    gauss_hermite_rule,
    normal_mode_rules,
    tensor_grid,
)
from .spectral import SpectralState, psi_exact, psi_first_order, psi_first_order_printed

PARTICLES = ("particle-1", "particle-2")


def _which(which) -> int:
    if which in (1, "1", "x1", "particle-1"):
        return 1
    if which in (2, "2", "x2", "particle-2"):
        return 2
    raise ValueError(f"which must name particle 1 or 2, got {which!r}")


# -- joint density ---------------------------------------------------------------


def joint_density(x1, x2, t, evaluator):
    """``|psi|^2`` from a :class:`SpectralState` (exact series) or ``("first-order", params)``."""
    if isinstance(evaluator, SpectralState):
        return psi_exact(x1, x2, t, evaluator, gradient=False).density
    kind, params = evaluator
    if kind == "first-order":
        return psi_first_order(x1, x2, t, params, warn=False).density
    if kind == "first-order-printed":
        return psi_first_order_printed(x1, x2, t, params, warn=False).density
    raise ValueError(f"unknown evaluator {kind!r}")


def joint_density_closed_form(x1, x2, t, params: OscillatorParams, printed=False):
    """Expanded first-order density (products of ``|psi|^2`` kept to first order).

    ``printed=True`` uses the opposite sign on the static ``x1*x2`` corrections,
    matching :func:`psi_first_order_printed`.
    """
    f = derive_frequencies(params)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    t = np.asarray(t, dtype=float)
    a = params.m * f.omega_bar / params.hbar
    r = f.ratio
    g = r if printed else -r
    s, c = np.sin(f.delta_omega * t), np.cos(f.delta_omega * t)
    ph1 = (2 * f.omega_bar + f.delta_omega) * t
    ph3 = (2 * f.omega_bar + 3 * f.delta_omega) * t
    u2 = (x1 - x2) ** 2
    body = (
        4 * (x2**2 + 2 * x1 * x2 * (0.5 - a * x2**2) * g) * c**2
        + 4 * (x1**2 + 2 * x1 * x2 * (0.5 - a * x1**2) * g) * s**2
        + 2 * x2 * r * (x1 + x2) * (a * u2 - 1) * c * np.cos(ph1)
        - 2 * x2 * r * (x1 - x2) * (a * u2 - 3) * c * np.cos(ph3)
        - 2 * x1 * r * (x1 + x2) * (a * u2 - 1) * s * np.sin(ph1)
        + 2 * x1 * r * (x1 - x2) * (a * u2 - 3) * s * np.sin(ph3)
    )
    return a**2 / (2 * math.pi) * np.exp(-a * (x1**2 + x2**2)) * body


# -- marginals -------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalCurve:
    which: str
    t: float
    x: np.ndarray
    density: np.ndarray
    source: str

    @property
    def min_density(self) -> float:
        return float(np.min(self.density))

    @property
    def has_negative(self) -> bool:
        """First-order curves may dip below zero far out; reported, never clipped."""
        return self.min_density < 0.0

    def trapezoid_norm(self) -> float:
        return float(np.trapezoid(self.density, self.x))

    def samples(self):
        return list(zip(self.x.tolist(), self.density.tolist()))


def marginal_closed_form(which, x, t, params: OscillatorParams, printed=False):
    """First-order marginal density of particle 1 or 2 at time ``t``.

    The ``y (3/2 - y)`` correction carries the sign obtained by integrating the
    first-order density. ``printed=True`` flips it, which leaves an
    ``O(delta_omega/omega_bar)`` error (visible already in the ``t=0``
    particle-2 marginal).
    """
    i = _which(which)
    f = derive_frequencies(params)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    a = params.m * f.omega_bar / params.hbar
    r = f.ratio
    y = a * x * x
    sgn = 1.0 if printed else -1.0
    s, c = np.sin(f.delta_omega * t), np.cos(f.delta_omega * t)
    ph1 = (2 * f.omega_bar + f.delta_omega) * t
    ph3 = (2 * f.omega_bar + 3 * f.delta_omega) * t
    if i == 1:
        lead = c**2 + 2 * y * s**2
        corr = (0.25 - 0.5 * y) * (3 * np.cos(ph3) - np.cos(ph1)) * c - sgn * y * (1.5 - y) * (
            np.sin(ph3) - np.sin(ph1)
        ) * s
    else:
        lead = s**2 + 2 * y * c**2
        corr = (0.25 - 0.5 * y) * (3 * np.sin(ph3) + np.sin(ph1)) * s - sgn * y * (1.5 - y) * (
            np.cos(ph3) + np.cos(ph1)
        ) * c
    return math.sqrt(a / math.pi) * np.exp(-y) * (lead - r * corr)


def marginal_quadrature(which, x, t, spectral: SpectralState, order=64, check=True):
    """Integrate ``|psi_exact|^2`` over the other coordinate by Gauss-Hermite quadrature.

    With ``check`` the result is recomputed at ``order + 16`` nodes and a
    :class:`QuadratureError` raised if the two disagree beyond ``1e-10`` of the peak.
    """
    i = _which(which)
    x = np.asarray(x, dtype=float)
    t = float(t)
    f = spectral.freqs
    p = spectral.params
    # |psi|^2 decays in the integrated variable like exp(-(alpha + alpha') y^2 / 2)
    scale = 1.0 / math.sqrt(0.5 * p.m * (f.omega + f.omega_prime) / p.hbar)

    def run(n):
        rule = gauss_hermite_rule(n, scale)
        xx, yy = np.meshgrid(x.ravel(), rule.nodes, indexing="ij")
        x1, x2 = (xx, yy) if i == 1 else (yy, xx)
        dens = psi_exact(x1, x2, t, spectral, gradient=False).density
        return (dens @ rule.full_weights).reshape(x.shape)

    out = run(order)
    if check:
        ref = run(order + 16)
        peak = max(float(np.max(np.abs(ref))), 1e-300)
        if np.max(np.abs(out - ref)) > 1e-10 * peak:
            raise QuadratureError("marginal quadrature did not stabilise; increase the order")
    return out


def marginal(which, x, t, params=None, method="closed-form", spectral=None, order=64, printed=False) -> MarginalCurve:
    """Marginal density as a :class:`MarginalCurve` from either route."""
    name = PARTICLES[_which(which) - 1]
    x = np.asarray(x, dtype=float)
    if method == "closed-form":
        if params is None:
            params = spectral.params
        dens = marginal_closed_form(which, x, t, params, printed=printed)
    elif method == "quadrature":
        if spectral is None:
            raise ValueError("quadrature marginals need a SpectralState")
        dens = marginal_quadrature(which, x, t, spectral, order=order)
    else:
        raise ValueError(f"unknown method {method!r}")
    return MarginalCurve(which=name, t=float(t), x=x, density=dens, source=method)


# -- energies --------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E1: float
    E2: float
    E_interaction: float
    source: str

    @property
    def E_total(self) -> float:
        return self.E1 + self.E2 + self.E_interaction

    def as_dict(self):
        return {
            "t": self.t,
            "E1": self.E1,
            "E2": self.E2,
            "E_interaction": self.E_interaction,
            "E_total": self.E_total,
            "source": self.source,
        }


def energy_closed_form(t, params: OscillatorParams) -> EnergyReport:
    f = derive_frequencies(params)
    hw = params.hbar * f.omega
    s2 = math.sin(f.delta_omega * t) ** 2
    return EnergyReport(
        t=float(t),
        E1=hw * (0.5 + s2),
        E2=hw * (1.5 - s2),
        E_interaction=2.0 * params.hbar * f.delta_omega,
        source="closed-form",
    )


class _EnergyGrid:
    """Normal-mode tensor grid reused across times."""

    def __init__(self, spectral: SpectralState, order):
        rp, rm = normal_mode_rules(spectral.params, order=order, freqs=spectral.freqs)
        xp, xm, self.w = tensor_grid(rp, rm)
        self.x1, self.x2 = from_normal_coords(xp, xm)

    def evaluate(self, t, spectral):
        p = spectral.params
        ev = psi_exact(self.x1, self.x2, t, spectral)
        rho = ev.density
        d1, d2 = ev.grad
        w = self.w
        kin = p.hbar**2 / (2 * p.m)
        e1 = kin * np.sum(w * np.abs(d1) ** 2) + 0.5 * p.k * np.sum(w * self.x1**2 * rho)
        e2 = kin * np.sum(w * np.abs(d2) ** 2) + 0.5 * p.k * np.sum(w * self.x2**2 * rho)
        ei = 0.5 * p.lam * np.sum(w * (self.x1 - self.x2) ** 2 * rho)
        norm = np.sum(w * rho)
        return float(e1), float(e2), float(ei), float(norm)


def energy_quadrature(t, spectral: SpectralState, order=64, normalise=True):
    """``<H1>``, ``<H2>``, ``<H_I>`` on the exact state; scalar ``t`` or a sequence of times.

    The kinetic parts use ``int |d_i psi|^2``, equal to ``<-d_i^2>`` for a
    decaying state. With ``normalise`` each value is divided by ``<psi|psi>`` on
    the same grid, removing the truncation deficit.
    """
    grid = _EnergyGrid(spectral, order)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    out = []
    for tt in times:
        e1, e2, ei, norm = grid.evaluate(float(tt), spectral)
        n = norm if normalise else 1.0
        out.append(EnergyReport(t=float(tt), E1=e1 / n, E2=e2 / n, E_interaction=ei / n, source="quadrature"))
    return out[0] if np.ndim(t) == 0 else out


def energy_expectations(t, method="quadrature", params=None, spectral=None, order=64):
    if method == "closed-form":
        params = params or spectral.params
        if np.ndim(t) == 0:
            return energy_closed_form(float(t), params)
        return [energy_closed_form(float(tt), params) for tt in np.asarray(t, dtype=float)]
    if method == "quadrature":
        if spectral is None:
            raise ValueError("quadrature energies need a SpectralState")
        return energy_quadrature(t, spectral, order=order)
    raise ValueError(f"unknown method {method!r}")


def fock_interaction_energy(n1: int, n2: int, params: OscillatorParams, freqs=None) -> float:
    """``<n1, n2| (lam/2)(x1 - x2)^2 |n1, n2>`` for uncoupled oscillator eigenstates.

    The cross term ``<x1><x2>`` vanishes, leaving ``(lam/2)(<x1^2> + <x2^2>)``.
    """
    if n1 < 0 or n2 < 0:
        raise ValueError("occupation numbers must be non-negative")
    freqs = freqs or derive_frequencies(params)
    x2_unit = params.hbar / (params.m * freqs.omega)
    return 0.5 * params.lam * x2_unit * (n1 + n2 + 1)


@dataclass(frozen=True)
class CoherentScan:
    phases: np.ndarray
    bare: np.ndarray
    normal_ordered: np.ndarray

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.bare))

    @property
    def min_phase(self) -> float:
        return float(self.phases[self.argmin])

    @property
    def min_bare(self) -> float:
        return float(self.bare[self.argmin])

    @property
    def min_normal_ordered(self) -> float:
        return float(self.normal_ordered[self.argmin])

    def rows(self):
        return list(zip(self.phases.tolist(), self.bare.tolist(), self.normal_ordered.tolist()))


def coherent_interaction_scan(alpha_mag, beta_mag, phase_grid, params: OscillatorParams, freqs=None) -> CoherentScan:
    """Interaction energy at ``t=0`` for ``|alpha> (x) |beta>`` over relative phases of ``beta``.

    ``alpha`` is taken real; ``beta = |beta| e^{i phi}``. The bare value carries
    the irreducible vacuum spread ``(lam/2) hbar/(m omega)``; the normal-ordered
    value drops it and vanishes when the two mean displacements coincide.
    """
    if alpha_mag < 0 or beta_mag < 0:
        raise ValueError("coherent amplitudes must be non-negative")
    freqs = freqs or derive_frequencies(params)
    phases = np.asarray(phase_grid, dtype=float)
    x0 = math.sqrt(2.0 * params.hbar / (params.m * freqs.omega))
    mean_gap = x0 * (alpha_mag - beta_mag * np.cos(phases))
    normal = 0.5 * params.lam * mean_gap**2
    bare = normal + 0.5 * params.lam * params.hbar / (params.m * freqs.omega)
    return CoherentScan(phases=phases, bare=bare, normal_ordered=normal)
