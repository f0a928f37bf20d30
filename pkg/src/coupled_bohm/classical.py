"""Classical coupled oscillators: closed-form motion, energies and a Hamilton-equation oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .model import OscillatorParams, derive_frequencies
from .ode import OdeProblem, OdeSolution, solve


@dataclass(frozen=True)
class ClassicalScenario:
    """Initial positions and velocities of the two particles (shifted coordinates)."""

    x1: float = 0.0
    x2: float = 1.0
    v1: float = 0.0
    v2: float = 0.0

    @classmethod
    def displaced(cls, D: float) -> ClassicalScenario:
        """Particle 1 at rest at equilibrium, particle 2 at rest and displaced by ``D``."""
        return cls(x1=0.0, x2=float(D), v1=0.0, v2=0.0)

    @property
    def D(self) -> float:
        return self.x2

    @property
    def is_canonical(self) -> bool:
        return self.x1 == 0.0 and self.v1 == 0.0 and self.v2 == 0.0

    def state(self, params: OscillatorParams) -> np.ndarray:
        """Phase-space vector ``(x1, x2, p1, p2)``."""
        return np.array([self.x1, self.x2, params.m * self.v1, params.m * self.v2], dtype=float)


@dataclass(frozen=True)
class ClassicalSolution:
    """``x1 + x2 = A cos(omega t + theta)`` and ``x1 - x2 = A' cos(omega' t + theta')``."""

    A: float
    A_prime: float
    theta: float
    theta_prime: float
    omega: float
    omega_prime: float

    def positions(self, t):
        t = np.asarray(t, dtype=float)
        s = self.A * np.cos(self.omega * t + self.theta)
        d = self.A_prime * np.cos(self.omega_prime * t + self.theta_prime)
        return 0.5 * (s + d), 0.5 * (s - d)

    def velocities(self, t):
        t = np.asarray(t, dtype=float)
        s = -self.A * self.omega * np.sin(self.omega * t + self.theta)
        d = -self.A_prime * self.omega_prime * np.sin(self.omega_prime * t + self.theta_prime)
        return 0.5 * (s + d), 0.5 * (s - d)


def _mode_constants(q0, qdot0, w):
    # choose the sign of the amplitude so that theta lies in (-pi/2, pi/2]
    if q0 == 0.0 and qdot0 == 0.0:
        return 0.0, 0.0
    if q0 == 0.0:
        return abs(qdot0) / w, -math.copysign(math.pi / 2, qdot0)
    theta = math.atan(-qdot0 / (w * q0))
    return q0 / math.cos(theta), theta


def classical_solution(scenario: ClassicalScenario, params: OscillatorParams) -> ClassicalSolution:
    f = derive_frequencies(params)
    A, th = _mode_constants(scenario.x1 + scenario.x2, scenario.v1 + scenario.v2, f.omega)
    Ap, thp = _mode_constants(scenario.x1 - scenario.x2, scenario.v1 - scenario.v2, f.omega_prime)
    return ClassicalSolution(A, Ap, th, thp, f.omega, f.omega_prime)


def _require_canonical(scenario):
    if not scenario.is_canonical:
        raise ValueError("this closed form needs particle 1 at rest at the origin and particle 2 at rest")


def classical_positions(t, scenario: ClassicalScenario, params: OscillatorParams, form="two-cosine"):
    """Closed-form ``(x1, x2)``.

    ``form="two-cosine"`` works for any initial data; ``form="beat"`` is the
    product (envelope times carrier) form, available for the displaced start.
    """
    if form == "two-cosine":
        return classical_solution(scenario, params).positions(t)
    if form == "beat":
        _require_canonical(scenario)
        f = derive_frequencies(params)
        t = np.asarray(t, dtype=float)
        D = scenario.D
        x1 = D * np.sin(f.delta_omega * t) * np.sin(f.omega_bar * t)
        x2 = D * np.cos(f.delta_omega * t) * np.cos(f.omega_bar * t)
        return x1, x2
    raise ValueError(f"unknown form {form!r}")


def classical_velocities(t, scenario: ClassicalScenario, params: OscillatorParams):
    """Analytic time derivative of :func:`classical_positions`."""
    return classical_solution(scenario, params).velocities(t)


@dataclass(frozen=True)
class ClassicalEnergies:
    """Per-particle energies ``p^2/2m + k x^2/2``: exact values and the first-order estimate."""

    t: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    E1_first_order: np.ndarray
    E2_first_order: np.ndarray
    E_interaction: np.ndarray

    @property
    def E_total(self):
        return self.E1 + self.E2 + self.E_interaction


def classical_energies(t, scenario: ClassicalScenario, params: OscillatorParams) -> ClassicalEnergies:
    _require_canonical(scenario)
    f = derive_frequencies(params)
    t = np.asarray(t, dtype=float)
    x1, x2 = classical_positions(t, scenario, params)
    v1, v2 = classical_velocities(t, scenario, params)
    m, k = params.m, params.k
    e1 = 0.5 * m * v1**2 + 0.5 * k * x1**2
    e2 = 0.5 * m * v2**2 + 0.5 * k * x2**2
    scale = 0.5 * k * scenario.D**2
    r = f.ratio
    s, c = np.sin(f.delta_omega * t), np.cos(f.delta_omega * t)
    sb, cb = np.sin(f.omega_bar * t), np.cos(f.omega_bar * t)
    e1_fo = scale * s**2 * (1.0 + 4.0 * r * cb**2)
    e2_fo = scale * c**2 * (1.0 + 4.0 * r * sb**2)
    e_int = 0.5 * params.lam * (x1 - x2) ** 2
    return ClassicalEnergies(t, e1, e2, e1_fo, e2_fo, e_int)


def hamiltonian(state, params: OscillatorParams):
    """Total energy of phase-space point(s) ``(..., 4)`` in the shifted coordinates."""
    state = np.asarray(state, dtype=float)
    x1, x2, p1, p2 = np.moveaxis(state, -1, 0)
    return (
        (p1**2 + p2**2) / (2.0 * params.m)
        + 0.5 * params.k * (x1**2 + x2**2)
        + 0.5 * params.lam * (x1 - x2) ** 2
    )


@dataclass(frozen=True)
class TotalEnergy:
    first_order: float
    exact: float


def classical_total_energy(scenario: ClassicalScenario, params: OscillatorParams) -> TotalEnergy:
    """First-order estimate ``(kD^2/2)(1 + 2 delta_omega/omega_bar)`` and the exact conserved value."""
    f = derive_frequencies(params)
    exact = float(hamiltonian(scenario.state(params), params))
    first = 0.5 * params.k * scenario.D**2 * (1.0 + 2.0 * f.ratio) if scenario.is_canonical else math.nan
    return TotalEnergy(first_order=first, exact=exact)


def hamilton_rhs(params: OscillatorParams):
    m, k, lam = params.m, params.k, params.lam

    def rhs(t, y):
        x1, x2, p1, p2 = y
        return np.array([
            p1 / m,
            p2 / m,
            -k * x1 - lam * (x1 - x2),
            -k * x2 + lam * (x1 - x2),
        ])

    return rhs


def integrate_hamilton(scenario: ClassicalScenario, params: OscillatorParams, t_span, rtol=1e-12, atol=1e-14) -> OdeSolution:
    """Integrate Hamilton's equations for state ``(x1, x2, p1, p2)``; dense output included."""
    problem = OdeProblem(hamilton_rhs(params), tuple(t_span), scenario.state(params))
    return solve(problem, rtol=rtol, atol=atol)


def particle_energies(states, params: OscillatorParams):
    """``(E1, E2)`` of each particle, excluding the coupling spring, for state rows ``(x1, x2, p1, p2)``."""
    states = np.asarray(states, dtype=float)
    x1, x2, p1, p2 = np.moveaxis(states, -1, 0)
    m, k = params.m, params.k
    return p1**2 / (2 * m) + 0.5 * k * x1**2, p2**2 / (2 * m) + 0.5 * k * x2**2


def exchange_period(t, energy, min_prominence=0.5):
    """Mean spacing of the dominant maxima of a sampled energy curve.

    Only maxima whose prominence exceeds ``min_prominence`` times the sampled
    range count, which discards the carrier ripple. Each peak is refined with a
    parabola through its neighbours. Returns ``(period, peak_times)``.
    """
    t = np.asarray(t, dtype=float)
    energy = np.asarray(energy, dtype=float)
    span = float(np.ptp(energy))
    if span == 0.0:
        raise ValueError("energy curve is flat; no exchange to detect")
    idx, _ = find_peaks(energy, prominence=min_prominence * span)
    if idx.size < 2:
        raise ValueError("fewer than two exchange peaks in the sampled window")
    dt = t[1] - t[0]
    refined = []
    for i in idx:
        if 0 < i < t.size - 1:
            y0, y1, y2 = energy[i - 1 : i + 2]
            den = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            refined.append(t[i] + shift * dt)
        else:
            refined.append(t[i])
    peaks = np.array(refined)
    return float(np.mean(np.diff(peaks))), peaks
