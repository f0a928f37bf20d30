"""Bohmian trajectories of the two coupled oscillators.

Two velocity fields are available. The *reduced* field is the leading-order
closed form ``v = grad(S)/m`` with all ``O(delta_omega/omega_bar)`` terms
dropped; it is cheap, scale invariant under a change of coupling, and is what
the trajectory, energy and quantum-potential closed forms refer to. The
*exact* field ``(hbar/m) Im(grad psi / psi)`` is built from the truncated
eigen-series and is the one that transports ``|psi|^2``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GuardTriggered, SingularityError, StepUnderflow
from .model import OscillatorParams, derive_frequencies
from .observables import marginal_closed_form
from .ode import OdeProblem, OdeSolution, StepRecord, solve, solve_batch
from .spectral import SpectralState, psi_exact

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
#: Relative singularity floor, in units of the squared length ``hbar/(m omega_bar)``.
FLOOR_FACTOR = 1e-10


def singularity_floor(params: OscillatorParams, freqs=None) -> float:
    freqs = freqs or derive_frequencies(params)
    return FLOOR_FACTOR * params.hbar / (params.m * freqs.omega_bar)


def guidance_denominator(x1, x2, t, freqs):
    s, c = np.sin(freqs.delta_omega * t), np.cos(freqs.delta_omega * t)
    return np.asarray(x1) ** 2 * s * s + np.asarray(x2) ** 2 * c * c


def _check_floor(den, floor, x1, x2, t, what):
    bad = np.asarray(den) < floor
    if np.any(bad):
        raise SingularityError(
            f"{what}: guidance denominator below floor {floor:.3g}",
            t=t,
            state=(np.asarray(x1)[bad] if np.ndim(x1) else x1, np.asarray(x2)[bad] if np.ndim(x2) else x2),
        )


def phase_S(x1, x2, t, params: OscillatorParams, freqs=None, check=True):
    """Reduced phase ``S`` with ``psi ~ |psi| exp(-i S/hbar)`` on the principal branch.

    The spatial part is ``-hbar atan2(x1 sin, x2 cos)``; the carrier
    ``exp(-2i omega_bar t)`` adds the uniform term ``2 hbar omega_bar t``. Use
    :func:`unwrap_phase` on a sequence of values to make it continuous.
    """
    freqs = freqs or derive_frequencies(params)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s, c = np.sin(freqs.delta_omega * t), np.cos(freqs.delta_omega * t)
    a, b = x1 * s, x2 * c
    if check:
        _check_floor(a * a + b * b, singularity_floor(params, freqs), x1, x2, t, "phase undefined")
    return -params.hbar * (np.arctan2(a, b) - 2.0 * freqs.omega_bar * t)


def phase_gradient(x1, x2, t, params: OscillatorParams, freqs=None):
    """Analytic ``(dS/dx1, dS/dx2)`` of :func:`phase_S`."""
    v1, v2 = guidance_field(x1, x2, t, params, freqs)
    return params.m * v1, params.m * v2


def unwrap_phase(values, hbar):
    """Remove ``2 pi hbar`` branch jumps from a sequence of phase values."""
    return hbar * np.unwrap(np.asarray(values, dtype=float) / hbar)


def guidance_field(x1, x2, t, params: OscillatorParams, freqs=None, check=True):
    """Reduced guidance velocities ``(v1, v2)``; raises :class:`SingularityError` below the floor."""
    freqs = freqs or derive_frequencies(params)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s, c = np.sin(freqs.delta_omega * t), np.cos(freqs.delta_omega * t)
    den = x1 * x1 * s * s + x2 * x2 * c * c
    if check:
        _check_floor(den, singularity_floor(params, freqs), x1, x2, t, "guidance field")
    g = params.hbar / params.m * c * s / den
    return -g * x2, g * x1


def exact_guidance_field(x1, x2, t, spectral: SpectralState):
    """``(hbar/m) Im(grad psi / psi)`` from the truncated eigen-series (NaN at nodes)."""
    ev = psi_exact(x1, x2, t, spectral)
    psi = ev.value
    p = spectral.params
    with np.errstate(divide="ignore", invalid="ignore"):
        v1 = p.hbar / p.m * np.imag(ev.grad[0] / psi)
        v2 = p.hbar / p.m * np.imag(ev.grad[1] / psi)
    return v1, v2


def exact_denominator(x1, x2, t, spectral: SpectralState):
    """``|psi|^2`` expressed on the scale of the reduced denominator.

    To leading order ``|psi|^2 = (2 a^2/pi) exp(-a r^2) den`` with
    ``a = m omega_bar / hbar``, so the same floor applies to both fields.
    """
    p, f = spectral.params, spectral.freqs
    a = p.m * f.omega_bar / p.hbar
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    rho = psi_exact(x1, x2, t, spectral, gradient=False).density
    return rho * math.pi / (2 * a * a) * np.exp(a * (x1 * x1 + x2 * x2))


# -- trajectories ----------------------------------------------------------------


@dataclass
class TrajectorySample:
    """Accepted states of one trajectory plus per-step interpolants."""

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    steps: list = field(repr=False, default_factory=list)
    stats: dict = field(default_factory=dict)
    delta_omega: float = math.nan

    def __call__(self, t):
        """Dense positions ``(..., 2)`` at times inside the integrated span."""
        sol = OdeSolution(steps=self.steps, t=self.t, y=np.column_stack([self.x1, self.x2]))
        return sol(t)

    @property
    def states(self):
        return np.column_stack([self.t, self.x1, self.x2])


def _sample_from_solution(sol: OdeSolution, freqs) -> TrajectorySample:
    return TrajectorySample(
        t=sol.t, x1=sol.y[:, 0], x2=sol.y[:, 1], steps=sol.steps, stats=sol.stats, delta_omega=freqs.delta_omega
    )


def integrate_trajectory(
    x0,
    t_span,
    params: OscillatorParams,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    freqs=None,
    field="reduced",
    spectral: SpectralState | None = None,
) -> TrajectorySample:
    """Integrate the guidance equations from ``x0 = (x1, x2)`` across ``t_span``.

    Steps whose stages fall below the singularity floor are rejected and
    shrunk; if that drives the step size to underflow, a
    :class:`SingularityError` carrying the last safe time and state is raised.
    """
    freqs = freqs or derive_frequencies(params)
    floor = singularity_floor(params, freqs)
    t0 = float(t_span[0])
    if field == "reduced":
        if guidance_denominator(x0[0], x0[1], t0, freqs) < floor:
            raise SingularityError("initial point lies on the guidance singularity", t=t0, state=tuple(x0))
        if freqs.delta_omega == 0.0:
            rhs = lambda t, y: np.zeros(2)  # noqa: E731 - uncoupled: the field vanishes identically
        else:
            def rhs(t, y):
                return np.array(guidance_field(y[0], y[1], t, params, freqs, check=False))

        def guard(t, y):
            return bool(guidance_denominator(y[0], y[1], t, freqs) >= floor)
    elif field == "exact":
        if spectral is None:
            raise ValueError("the exact field needs a SpectralState")

        def rhs(t, y):
            return np.array(exact_guidance_field(y[0], y[1], t, spectral))

        def guard(t, y):
            return bool(exact_denominator(y[0], y[1], t, spectral) >= floor)

        if not guard(t0, np.asarray(x0, dtype=float)):
            raise SingularityError("initial point lies on a node of the state", t=t0, state=tuple(x0))
    else:
        raise ValueError(f"unknown field {field!r}")
    problem = OdeProblem(rhs, (t0, float(t_span[1])), np.asarray(x0, dtype=float))
    try:
        sol = solve(problem, rtol=rtol, atol=atol, guard=guard)
    except GuardTriggered as exc:
        err = SingularityError(
            f"trajectory reached the guidance singularity near t={exc.t:.6g}", t=exc.t, state=exc.state
        )
        err.partial = _sample_from_solution(exc.solution, freqs)
        raise err from exc
    except StepUnderflow as exc:
        exc.partial = _sample_from_solution(exc.solution, freqs)
        raise
    if sol.status == "failed":
        err = StepUnderflow(sol.message, t=float(sol.t[-1]), state=sol.y[-1])
        err.partial = _sample_from_solution(sol, freqs)
        raise err
    return _sample_from_solution(sol, freqs)


def scaling_map(sample: TrajectorySample, delta_old: float, delta_new: float) -> TrajectorySample:
    """Map a trajectory at coupling ``delta_old`` to coupling ``delta_new``.

    ``t' = (d/d') t`` and ``x' = sqrt(d/d') x``. Step interpolants are mapped
    too, so the result supports dense evaluation.
    """
    if not (delta_old > 0 and delta_new > 0):
        raise ValueError("beat frequencies must be positive")
    k = delta_old / delta_new
    q = math.sqrt(k)
    steps = [
        StepRecord(
            t_start=s.t_start * k,
            t_end=s.t_end * k,
            y_start=s.y_start * q,
            y_end=s.y_end * q,
            coeffs=None if s.coeffs is None else s.coeffs * q,
            error=s.error,
        )
        for s in sample.steps
    ]
    return replace(sample, t=sample.t * k, x1=sample.x1 * q, x2=sample.x2 * q, steps=steps, delta_omega=delta_new)


# -- quantum potential and energies ----------------------------------------------


def quantum_potential(x1, x2, t, params: OscillatorParams, freqs=None, check=True):
    """``(Q1, Q2, Q)`` of the leading-order amplitude; ``Q`` is the combined closed form."""
    freqs = freqs or derive_frequencies(params)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s, c = np.sin(freqs.delta_omega * t), np.cos(freqs.delta_omega * t)
    a2, b2 = x1 * x1 * s * s, x2 * x2 * c * c
    den = a2 + b2
    if check:
        _check_floor(den, singularity_floor(params, freqs), x1, x2, t, "quantum potential")
    hw = params.hbar * freqs.omega_bar
    mw2 = 0.5 * params.m * freqs.omega_bar**2
    h2m = 0.5 * params.hbar**2 / params.m
    cs2 = (c * s) ** 2
    q1 = hw - mw2 * x1**2 + 0.5 * hw * (a2 - b2) / den - h2m * x2**2 * cs2 / den**2
    q2 = hw - mw2 * x2**2 + 0.5 * hw * (b2 - a2) / den - h2m * x1**2 * cs2 / den**2
    q = 2 * hw - mw2 * (x1**2 + x2**2) - h2m * (x1**2 + x2**2) * cs2 / den**2
    return q1, q2, q


@dataclass(frozen=True)
class EnergyBreakdown:
    K1: np.ndarray
    K2: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    E1: np.ndarray
    E2: np.ndarray

    @property
    def E_total(self):
        return self.E1 + self.E2

    @property
    def E1_assembled(self):
        return self.K1 + self.V1 + self.Q1

    @property
    def E2_assembled(self):
        return self.K2 + self.V2 + self.Q2


def reduced_energies(x1, x2, t, params: OscillatorParams, freqs=None):
    """``E1 = hbar w (1 + f/2)``, ``E2 = hbar w (1 - f/2)`` with ``f = (x1^2 s^2 - x2^2 c^2)/den``."""
    freqs = freqs or derive_frequencies(params)
    s, c = np.sin(freqs.delta_omega * t), np.cos(freqs.delta_omega * t)
    a2 = np.asarray(x1, dtype=float) ** 2 * s * s
    b2 = np.asarray(x2, dtype=float) ** 2 * c * c
    hw = params.hbar * freqs.omega_bar
    frac = (a2 - b2) / (a2 + b2)
    return hw + 0.5 * hw * frac, hw - 0.5 * hw * frac


def bohmian_energies(x1, x2, t, params: OscillatorParams, freqs=None) -> EnergyBreakdown:
    """Kinetic, potential and quantum parts at a trajectory point, plus the reduced totals."""
    freqs = freqs or derive_frequencies(params)
    v1, v2 = guidance_field(x1, x2, t, params, freqs)
    q1, q2, _ = quantum_potential(x1, x2, t, params, freqs, check=False)
    e1, e2 = reduced_energies(x1, x2, t, params, freqs)
    mw2 = 0.5 * params.m * freqs.omega_bar**2
    return EnergyBreakdown(
        K1=0.5 * params.m * v1**2,
        K2=0.5 * params.m * v2**2,
        V1=mw2 * np.asarray(x1, dtype=float) ** 2,
        V2=mw2 * np.asarray(x2, dtype=float) ** 2,
        Q1=q1,
        Q2=q2,
        E1=e1,
        E2=e2,
    )


# -- ensembles -------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    count: int
    seed: int
    times: tuple = (0.0,)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("ensemble count must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _sample_one(rng, sigma1, alpha):
    x1 = rng.normal(0.0, sigma1)
    # rejection for x^2 exp(-alpha x^2) from the proposal exp(-alpha x^2 / 2);
    # the ratio x^2 exp(-alpha x^2/2) peaks at x^2 = 2/alpha with value 2/(alpha e)
    bound = 2.0 / (alpha * math.e)
    sd = 1.0 / math.sqrt(alpha)
    while True:
        x = rng.normal(0.0, sd)
        if rng.uniform() * bound <= x * x * math.exp(-0.5 * alpha * x * x):
            return x1, x


def sample_initial_ensemble(spec: EnsembleSpec, params: OscillatorParams) -> np.ndarray:
    """Positions ``(count, 2)`` drawn from the initial density.

    Particle 1 follows the ground-state Gaussian, particle 2 the first excited
    density of the uncoupled oscillator. Trajectory ``i`` uses its own child
    stream of ``SeedSequence(seed)``, so sample ``i`` is the same however the
    ensemble is split.
    """
    freqs = derive_frequencies(params)
    alpha = params.m * freqs.omega / params.hbar
    sigma1 = math.sqrt(0.5 / alpha)
    children = np.random.SeedSequence(spec.seed).spawn(spec.count)
    out = np.empty((spec.count, 2))
    for i, child in enumerate(children):
        out[i] = _sample_one(np.random.default_rng(child), sigma1, alpha)
    return out


@dataclass
class EquivarianceResult:
    times: np.ndarray
    distance_x1: np.ndarray
    distance_x2: np.ndarray
    lost: int
    count: int
    positions: np.ndarray = field(repr=False)
    status: np.ndarray = field(repr=False, default=None)

    @property
    def lost_fraction(self) -> float:
        return self.lost / self.count

    def as_dict(self):
        return {
            "times": self.times.tolist(),
            "distance_x1": self.distance_x1.tolist(),
            "distance_x2": self.distance_x2.tolist(),
            "lost": self.lost,
            "count": self.count,
            "lost_fraction": self.lost_fraction,
        }


def _chunk_worker(args):
    kind, params, coeffs, tail, norm, x0, t_eval, rtol, atol = args
    freqs = derive_frequencies(params)
    floor = singularity_floor(params, freqs)
    # the floor test is folded into the velocity: NaN marks a guarded stage,
    # which the batch driver rejects exactly like a failed guard
    if kind == "exact":
        spectral = SpectralState(coefficients=coeffs, params=params, freqs=freqs, tail_bound=tail, initial_norm=norm)
        a = params.m * freqs.omega_bar / params.hbar

        def rhs(t, Y):
            x1, x2 = Y[:, 0], Y[:, 1]
            ev = psi_exact(x1, x2, t, spectral)
            den = ev.density * math.pi / (2 * a * a) * np.exp(a * (x1 * x1 + x2 * x2))
            v = params.hbar / params.m * np.imag(np.stack(ev.grad, axis=1) / ev.value[:, None])
            v[den < floor] = np.nan
            return v
    else:

        def rhs(t, Y):
            den = guidance_denominator(Y[:, 0], Y[:, 1], t, freqs)
            v = np.column_stack(guidance_field(Y[:, 0], Y[:, 1], t, params, freqs, check=False))
            v[den < floor] = np.nan
            return v

    t_pos = [t for t in t_eval if t > 0]
    out = np.full((len(t_eval), x0.shape[0], 2), np.nan)
    zero = [i for i, t in enumerate(t_eval) if t == 0]
    for i in zero:
        out[i] = x0
    status = np.zeros(x0.shape[0], dtype=int)
    if t_pos:
        res = solve_batch(rhs, 0.0, x0, t_pos, rtol=rtol, atol=atol)
        out[len(zero):] = res.y
        status = res.status
    return out, status


def cdf_distance(samples, x_grid, density):
    """Kolmogorov sup distance between an empirical sample and a tabulated density."""
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.size
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(x_grid))])
    cdf = np.interp(samples, x_grid, cum)
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(np.abs(cdf - upper)), np.max(np.abs(cdf - lower))))


def evolve_ensemble(
    x0,
    t_eval,
    params: OscillatorParams,
    spectral: SpectralState | None = None,
    field="exact",
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    workers=1,
    chunk_size=512,
):
    """Transport initial positions to each time in ``t_eval`` (increasing, ``>= 0``).

    Returns ``(positions, status)`` with positions shaped ``(times, count, 2)``;
    ``status`` is nonzero for trajectories stopped by the singularity guard.
    Chunks are cut by trajectory index, so the output does not depend on
    ``workers``.
    """
    x0 = np.asarray(x0, dtype=float)
    t_eval = [float(t) for t in t_eval]
    if any(b <= a for a, b in zip(t_eval, t_eval[1:])) or t_eval[0] < 0:
        raise ValueError("t_eval must be increasing and non-negative")
    if field == "exact":
        if spectral is None:
            raise ValueError("the exact field needs a SpectralState")
        payload = (spectral.coefficients, spectral.tail_bound, spectral.initial_norm)
    else:
        payload = (None, None, None)
    jobs = [
        (field, params, *payload, x0[i : i + chunk_size], t_eval, rtol, atol)
        for i in range(0, x0.shape[0], chunk_size)
    ]
    workers = max(1, int(workers))
    if workers == 1 or len(jobs) == 1:
        results = [_chunk_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs), os.cpu_count() or 1) or 1) as pool:
            results = list(pool.map(_chunk_worker, jobs))
    positions = np.concatenate([r[0] for r in results], axis=1)
    status = np.concatenate([r[1] for r in results])
    return positions, status


def equivariance_check(
    spec: EnsembleSpec,
    params: OscillatorParams,
    spectral: SpectralState | None = None,
    t_eval=None,
    field="exact",
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
    workers=1,
    chunk_size=512,
    grid_points=4001,
) -> EquivarianceResult:
    """Sample ``|psi_0|^2``, transport, and compare marginal CDFs with the closed-form marginals."""
    freqs = derive_frequencies(params)
    times = np.asarray(spec.times if t_eval is None else t_eval, dtype=float)
    x0 = sample_initial_ensemble(spec, params)
    positions, status = evolve_ensemble(
        x0, times, params, spectral, field=field, rtol=rtol, atol=atol, workers=workers, chunk_size=chunk_size
    )
    keep = status == 0
    L = math.sqrt(params.hbar / (params.m * freqs.omega_bar))
    grid = np.linspace(-10 * L, 10 * L, grid_points)
    d1, d2 = [], []
    for k, t in enumerate(times):
        pts = positions[k, keep]
        d1.append(cdf_distance(pts[:, 0], grid, marginal_closed_form(1, grid, t, params)))
        d2.append(cdf_distance(pts[:, 1], grid, marginal_closed_form(2, grid, t, params)))
    return EquivarianceResult(
        times=times,
        distance_x1=np.array(d1),
        distance_x2=np.array(d2),
        lost=int(np.count_nonzero(~keep)),
        count=spec.count,
        positions=positions,
        status=status,
    )
