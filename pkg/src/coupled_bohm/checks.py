"""Acceptance checks shared by the test suite and the ``validate`` command.

Each ``check_*`` function runs one criterion at its stated tolerance and
returns a :class:`CheckResult`. Nothing here relaxes a threshold: a check that
cannot be met reports ``passed=False`` with the measured value and diagnostics
in ``detail``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bohmian, classical, observables
from .errors import FirstOrderWarning
from .model import OscillatorParams, derive_frequencies
from .spectral import (
    coefficient_closed_form,
    first_order_coefficients,
    project_coefficients,
    psi_exact,
    psi_first_order,
    psi_first_order_printed,
)

#: Mean frequency and coupling ratios of the figure scenarios.
OMEGA_BAR = 1.0
MARGINAL_RATIO = 0.1
TRAJECTORY_RATIO = 0.01
RESCALED_RATIO = 0.005
ENSEMBLE_SEED = 20240601


@dataclass
class CheckResult:
    key: str
    name: str
    passed: bool
    value: float
    threshold: float
    detail: dict = field(default_factory=dict)
    runtime: float = 0.0
    budget: float = math.inf
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.key} {self.name}: value={self.value:.6g} threshold={self.threshold:.6g} ({self.runtime:.1f}s)"
        return f"{text}; {self.note}" if self.note else text

    def as_dict(self):
        return {
            "key": self.key,
            "name": self.name,
            "passed": bool(self.passed),
            "value": float(self.value),
            "threshold": float(self.threshold),
            "runtime_s": self.runtime,
            "runtime_budget_s": self.budget,
            "note": self.note,
            "detail": _plain(self.detail),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _failing(**conditions) -> str:
    """Names of the secondary conditions that did not hold, for the status line."""
    bad = [name.replace("_", " ") for name, ok in conditions.items() if not ok]
    return "failing: " + ", ".join(bad) if bad else ""


def _timed(key, name, budget):
    def wrap(fn):
        def run(*args, **kwargs):
            start = time.perf_counter()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", FirstOrderWarning)
                res = fn(*args, **kwargs)
            res.key, res.name, res.budget = key, name, budget
            res.runtime = time.perf_counter() - start
            return res

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.key = key
        return run

    return wrap


def _length(params, freqs=None):
    freqs = freqs or derive_frequencies(params)
    return math.sqrt(params.hbar / (params.m * freqs.omega_bar))


def marginal_params():
    return OscillatorParams.from_frequencies(OMEGA_BAR, MARGINAL_RATIO)


def trajectory_params(ratio=TRAJECTORY_RATIO):
    return OscillatorParams.from_frequencies(OMEGA_BAR, ratio)


# -- spectral layer ---------------------------------------------------------------


@_timed("C1", "coefficient closed form vs projection", 5.0)
def check_coefficients(eps_values=(0.02, 0.1, 0.2), truncation=(1, 7)):
    """Closed-form coefficients against 2-D quadrature projection."""
    worst, rows = 0.0, []
    for eps in eps_values:
        p = OscillatorParams(m=1.0, k=1.0, lam=0.5 * eps)
        st = project_coefficients(params=p, truncation=truncation)
        cf = np.array([[coefficient_closed_form(n, j, st.freqs) for j in range(truncation[1] + 1)] for n in range(truncation[0] + 1)])
        err = float(np.max(np.abs(cf - st.coefficients)))
        worst = max(worst, err)
        rows.append({"eps": eps, "max_abs_error": err, "tail_bound": st.tail_bound})
    return CheckResult("", "", worst < 1e-8, worst, 1e-8, {"per_eps": rows})


@_timed("C2", "first-order coefficients", 5.0)
def check_first_order_coefficients(eps=0.2):
    p = OscillatorParams(m=1.0, k=1.0, lam=0.5 * eps)
    st = project_coefficients(params=p)
    r = st.freqs.ratio
    approx = first_order_coefficients(st.freqs)
    errs = {f"C{n}{j}": abs(st.coefficient(n, j) - v) for (n, j), v in approx.items()}
    worst = max(errs.values())
    thr = 2 * r * r
    return CheckResult("", "", worst < thr, worst, thr, {"ratio": r, "errors": errs})


@_timed("C3", "exact vs first-order wavefunction", 10.0)
def check_wavefunction(ratio=MARGINAL_RATIO, points=41, extent=4.0):
    p = OscillatorParams.from_frequencies(OMEGA_BAR, ratio)
    f = derive_frequencies(p)
    st = project_coefficients(params=p)
    L = _length(p, f)
    g = np.linspace(-extent * L, extent * L, points)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    times = [0.0, math.pi / (2 * f.delta_omega), math.pi / f.delta_omega]
    rel, rel_printed = [], []
    for t in times:
        ex = psi_exact(X1, X2, t, st, gradient=False).value
        scale = float(np.max(np.abs(ex)))
        rel.append(float(np.max(np.abs(ex - psi_first_order(X1, X2, t, p, warn=False).value))) / scale)
        rel_printed.append(float(np.max(np.abs(ex - psi_first_order_printed(X1, X2, t, p, warn=False).value))) / scale)
    thr = 5 * f.ratio**2
    worst = max(rel)
    return CheckResult(
        "", "", worst < thr, worst, thr,
        {"times": times, "relative_sup": rel, "relative_sup_printed_static_sign": rel_printed},
    )


@_timed("C4", "quantum energies", 10.0)
def check_energies(ratio=MARGINAL_RATIO, samples=41):
    p = OscillatorParams.from_frequencies(OMEGA_BAR, ratio)
    f = derive_frequencies(p)
    st = project_coefficients(params=p)
    hw_bar = p.hbar * f.omega_bar
    tol = 2 * f.ratio * hw_bar
    times = np.linspace(0.0, 2 * math.pi / f.delta_omega, samples)
    reports = observables.energy_quadrature(times, st)
    dev = 0.0
    for rep in reports:
        ref = observables.energy_closed_form(rep.t, p)
        dev = max(dev, abs(rep.E1 - ref.E1), abs(rep.E2 - ref.E2), abs(rep.E_interaction - ref.E_interaction))
    totals = np.array([rep.E_total for rep in reports])
    drift = float(np.max(np.abs(totals / totals[0] - 1)))
    e0 = reports[0]
    # the quoted reference values use hbar*omega_bar; they are held to the same tolerance
    quoted = max(abs(e0.E1 - 0.5 * hw_bar), abs(e0.E2 - 1.5 * hw_bar), abs(e0.E_interaction - 2.0 * p.hbar * f.delta_omega))
    passed = dev < tol and quoted < tol and drift < 1e-8
    return CheckResult(
        "", "", passed, dev, tol, note=_failing(quoted_values=quoted < tol, total_drift=drift < 1e-8), detail=
        {
            "total_relative_drift": drift,
            "total_drift_threshold": 1e-8,
            "quoted_value_deviation": quoted,
            "E1_0": e0.E1,
            "E2_0": e0.E2,
            "H_I_0": e0.E_interaction,
        },
    )


@_timed("C5", "marginal swap", 5.0)
def check_marginal_swap(ratio=MARGINAL_RATIO, points=801, extent=6.0):
    """``P(x1, pi/dw)`` against ``P(x2, 0)`` at the stated time.

    ``detail`` also carries the same comparison at ``pi/(2 dw)``, where the
    first-order energies put the completed exchange.
    """
    p = OscillatorParams.from_frequencies(OMEGA_BAR, ratio)
    f = derive_frequencies(p)
    L = _length(p, f)
    x = np.linspace(-extent * L, extent * L, points)
    ref = observables.marginal_closed_form(2, x, 0.0, p)
    peak = float(np.max(ref))
    thr = 3 * f.ratio * peak

    def sup_at(t):
        return float(np.max(np.abs(observables.marginal_closed_form(1, x, t, p) - ref)))

    value = sup_at(math.pi / f.delta_omega)
    half = sup_at(math.pi / (2 * f.delta_omega))
    return CheckResult(
        "", "", value < thr, value, thr,
        {"t": math.pi / f.delta_omega, "sup_at_half_time": half, "half_time_passes": half < thr, "peak": peak},
    )


# -- Bohmian layer ----------------------------------------------------------------


@_timed("C6", "Bohmian energy identities", 30.0)
def check_bohmian_energies(count=20, outputs=401, seed=ENSEMBLE_SEED):
    p = trajectory_params()
    f = derive_frequencies(p)
    hw = p.hbar * f.omega_bar
    x0 = bohmian.sample_initial_ensemble(bohmian.EnsembleSpec(count=count, seed=seed), p)
    times = np.linspace(0.0, 2 * math.pi / f.delta_omega, outputs)
    pos, status = bohmian.evolve_ensemble(x0, times, p, field="reduced", chunk_size=count)
    sum_dev, assembled_dev = 0.0, 0.0
    for k, t in enumerate(times):
        x1, x2 = pos[k, status == 0, 0], pos[k, status == 0, 1]
        e = bohmian.bohmian_energies(x1, x2, t, p, f)
        sum_dev = max(sum_dev, float(np.max(np.abs(e.E_total - 2 * hw))) / (2 * hw))
        assembled_dev = max(
            assembled_dev,
            float(np.max(np.abs(e.E1_assembled - e.E1))),
            float(np.max(np.abs(e.E2_assembled - e.E2))),
        )
    thr = 3 * f.ratio * hw
    lost = int(np.count_nonzero(status))
    passed = sum_dev < 1e-12 and assembled_dev < thr and lost == 0
    return CheckResult(
        "", "", passed, assembled_dev, thr, note=_failing(reduced_sum=sum_dev < 1e-12, lost_trajectories=lost == 0), detail=
        {"reduced_sum_relative_deviation": sum_dev, "sum_threshold": 1e-12, "lost": lost, "outputs": outputs},
    )


def scaled_pair(fraction=1.0, rtol=bohmian.DEFAULT_RTOL, atol=bohmian.DEFAULT_ATOL):
    """Integrate the two scaling scenarios over ``fraction`` of the first beat period."""
    p3, p4 = trajectory_params(TRAJECTORY_RATIO), trajectory_params(RESCALED_RATIO)
    f3, f4 = derive_frequencies(p3), derive_frequencies(p4)
    T3 = fraction * 2 * math.pi / f3.delta_omega
    s3 = bohmian.integrate_trajectory((0.0, -1.0), (0.0, T3), p3, rtol=rtol, atol=atol)
    s4 = bohmian.integrate_trajectory((0.0, -math.sqrt(2.0)), (0.0, T3 * f3.delta_omega / f4.delta_omega), p4, rtol=rtol, atol=atol)
    mapped = bohmian.scaling_map(s3, f3.delta_omega, f4.delta_omega)
    return mapped, s4, p4


def overlay_distance(a, b, samples=20001):
    t = np.linspace(0.0, min(a.t[-1], b.t[-1]), samples)
    t = np.union1d(t, np.intersect1d(a.t, b.t))
    return float(np.max(np.linalg.norm(a(t) - b(t), axis=1)))


@_timed("C7", "scaling invariance", 60.0)
def check_scaling(fraction=1.0):
    """Overlay of the mapped and independently integrated trajectories over one beat period."""
    mapped, direct, _ = scaled_pair(fraction)
    value = overlay_distance(mapped, direct)
    return CheckResult(
        "", "", value < 1e-6, value, 1e-6,
        {
            "span_fs": float(direct.t[-1]),
            "steps_mapped": int(mapped.stats["steps"]),
            "steps_direct": int(direct.stats["steps"]),
        },
    )


@_timed("C8", "equivariance", 300.0)
def check_equivariance(count=10_000, workers=1, seed=ENSEMBLE_SEED, chunk_size=None):
    p = marginal_params()
    f = derive_frequencies(p)
    st = project_coefficients(params=p)
    t = math.pi / (2 * f.delta_omega)
    spec = bohmian.EnsembleSpec(count=count, seed=seed, times=(0.0, t))
    if chunk_size is None:
        chunk_size = count if workers <= 1 else -(-count // workers)
    res = bohmian.equivariance_check(spec, p, st, field="exact", workers=workers, chunk_size=chunk_size)
    value = float(max(res.distance_x1[-1], res.distance_x2[-1]))
    passed = value < 0.03 and res.lost_fraction < 1e-3
    note = _failing(lost_fraction=res.lost_fraction < 1e-3)
    return CheckResult("", "", passed, value, 0.03, {**res.as_dict(), "lost_threshold": 1e-3}, note=note)


def fd_quantum_potential(x1, x2, t, params, h):
    """``-(hbar^2/2m) lap(R)/R`` with ``R = |psi_first_order|`` by the five-point stencil."""

    def R(a, b):
        return np.abs(psi_first_order(a, b, t, params, warn=False).value)

    r0 = R(x1, x2)
    lap = (R(x1 + h, x2) + R(x1 - h, x2) + R(x1, x2 + h) + R(x1, x2 - h) - 4 * r0) / h**2
    return -0.5 * params.hbar**2 / params.m * lap / r0


def q_check_points(params, t, count=200, points=21, extent=2.0):
    """The ``count`` interior grid points with the largest first-order amplitude.

    Ranking by ``|psi|`` keeps the points inside the bulk of the state and away
    from its nodes, where ``lap(R)/R`` is ill-conditioned.
    """
    L = _length(params)
    g = np.linspace(-extent * L, extent * L, points)[1:-1]
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    x1, x2 = X1.ravel(), X2.ravel()
    amp = np.abs(psi_first_order(x1, x2, t, params, warn=False).value)
    idx = np.argsort(-amp, kind="stable")[:count]
    return x1[idx], x2[idx]


@_timed("C9", "quantum potential cross-check", 5.0)
def check_quantum_potential(ratio=MARGINAL_RATIO, step=1e-3, count=200):
    """Finite-difference ``Q`` against the closed form, error in units of ``hbar omega_bar``."""
    p = OscillatorParams.from_frequencies(OMEGA_BAR, ratio)
    f = derive_frequencies(p)
    hw = p.hbar * f.omega_bar
    h = step * _length(p, f)
    times = [j * math.pi / (4 * f.delta_omega) for j in range(5)]
    err, floor, identity = 0.0, 0.0, 0.0
    per_time = []
    for t in times:
        x1, x2 = q_check_points(p, t, count)
        q1, q2, q = bohmian.quantum_potential(x1, x2, t, p, f)
        fd = fd_quantum_potential(x1, x2, t, p, h)
        fd2 = fd_quantum_potential(x1, x2, t, p, 2 * h)
        e = float(np.max(np.abs(fd - q))) / hw
        per_time.append(e)
        err = max(err, e)
        # Richardson estimate of the O(h^2) truncation plus rounding
        floor = max(floor, float(np.max(np.abs(fd2 - fd))) * 4 / 3 / hw)
        identity = max(identity, float(np.max(np.abs(q1 + q2 - q))) / hw)
    thr = 5 * f.ratio + floor
    passed = err < thr and identity < 1e-12
    return CheckResult(
        "", "", passed, err, thr, note=_failing(split_identity=identity < 1e-12), detail=
        {"times": times, "error_per_time": per_time, "fd_floor": floor, "identity_error": identity, "identity_threshold": 1e-12},
    )


# -- classical and degenerate limits -----------------------------------------------


@_timed("C10", "classical oracle", 5.0)
def check_classical(ratio=MARGINAL_RATIO, beats=4, samples_per_beat=20000):
    """Closed forms against Hamilton integration, and the exchange period from ``E2`` peaks."""
    p = OscillatorParams.from_frequencies(OMEGA_BAR, ratio)
    f = derive_frequencies(p)
    sc = classical.ClassicalScenario.displaced(1.0)
    beat = 2 * math.pi / f.delta_omega
    sol = classical.integrate_hamilton(sc, p, (0.0, beats * beat))
    t1 = np.linspace(0.0, beat, samples_per_beat + 1)
    x1, x2 = classical.classical_positions(t1, sc, p)
    y = sol(t1)
    deviation = float(max(np.max(np.abs(y[:, 0] - x1)), np.max(np.abs(y[:, 1] - x2))))
    t = np.linspace(0.0, beats * beat, beats * samples_per_beat + 1)
    _, e2 = classical.particle_energies(sol(t), p)
    period, peaks = classical.exchange_period(t, e2)
    period_err = abs(period / beat - 1)
    passed = deviation < 1e-8 and period_err < 1e-3
    note = "" if period_err < 1e-3 else f"failing: exchange period {period / beat:.6f} of the expected value"
    return CheckResult(
        "", "", passed, deviation, 1e-8, note=note, detail=
        {
            "measured_period": period,
            "expected_period": beat,
            "period_relative_error": period_err,
            "period_threshold": 1e-3,
            "period_over_pi_by_delta_omega": period * f.delta_omega / math.pi,
            "peaks": peaks,
        },
    )


@_timed("C11", "degenerate limits", 5.0)
def check_degenerate(span=100.0, grid=41):
    p = OscillatorParams.from_frequencies(OMEGA_BAR, 0.0)
    f = derive_frequencies(p)
    atol = bohmian.DEFAULT_ATOL
    st = project_coefficients(params=p)
    starts = [(0.3, -1.0), (-1.2, 0.7), (2.0, 0.5)]
    moved = {"reduced": 0.0, "exact": 0.0}
    for x0 in starts:
        for kind in moved:
            s = bohmian.integrate_trajectory(x0, (0.0, span), p, field=kind, spectral=st)
            moved[kind] = max(moved[kind], float(np.max(np.hypot(s.x1 - x0[0], s.x2 - x0[1]))))
    # the guidance law is the closed-form field; the series field is reported
    # alongside it and only carries rounding noise in the phase factors
    displacement = moved["reduced"]
    L = _length(p, f)
    g = np.linspace(-4 * L, 4 * L, grid)
    X1, X2 = np.meshgrid(g, g, indexing="ij")
    mod0 = np.abs(psi_exact(X1, X2, 0.0, st, gradient=False).value)
    drift = 0.0
    for t in np.linspace(0.0, span, 11)[1:]:
        drift = max(drift, float(np.max(np.abs(np.abs(psi_exact(X1, X2, t, st, gradient=False).value) - mod0))))
    passed = f.delta_omega == 0.0 and displacement < atol and drift < 1e-12
    return CheckResult(
        "", "", passed, displacement, atol, note=_failing(zero_beat=f.delta_omega == 0.0, modulus_drift=drift < 1e-12), detail=
        {
            "delta_omega": f.delta_omega,
            "series_field_displacement": moved["exact"],
            "modulus_drift": drift,
            "modulus_threshold": 1e-12,
        },
    )


ALL_CHECKS = (
    check_coefficients,
    check_first_order_coefficients,
    check_wavefunction,
    check_energies,
    check_marginal_swap,
    check_bohmian_energies,
    check_scaling,
    check_equivariance,
    check_quantum_potential,
    check_classical,
    check_degenerate,
)


def run_checks(selected=None, workers=1, log=None):
    """Run the chosen checks (keys like ``"C3"``), all by default."""
    results = []
    for fn in ALL_CHECKS:
        if selected and fn.key not in selected:
            continue
        res = fn(workers=workers) if fn is check_equivariance else fn()
        if log:
            log(res.line())
        results.append(res)
    return results
