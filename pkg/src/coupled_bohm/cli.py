"""Scenario-driven command line front end.

Usage::

    coupled-bohm <mode> --config scenario.json [--out DIR] [--workers N] [--paper-figures]

A scenario is one JSON document::

    {"params": {"omega_bar": 1.0, "delta_ratio": 0.01},
     "settings": {"x0": [0.0, -1.0]}}

``params`` takes either ``omega_bar``/``delta_ratio`` (plus optional ``m``,
``hbar``) or the raw ``m``/``k``/``lam``/``hbar``. ``settings`` holds the
mode-specific keys listed in ``MODE_SETTINGS``. Time values accept
``{"start", "stop", "num", "unit"}`` with unit ``"fs"`` or
``"pi/delta_omega"``.

Exit codes: 0 success, 2 invalid scenario, 3 numerical failure (partial
artifacts kept and flagged in the manifest), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, bohmian, checks, classical, observables
from .artifacts import emit_grid, sha256, write_json, write_table
from .errors import ConfigError, CoupledBohmError, FirstOrderWarning, QuadratureError, SingularityError, StepUnderflow
from .model import OscillatorParams, derive_frequencies
from .spectral import DEFAULT_TRUNCATION, project_coefficients

MODES = ("classical", "marginals", "energies", "trajectory", "ensemble", "validate")
OUTPUT_ROOT_ENV = "COUPLED_BOHM_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

MODE_SETTINGS = {
    "classical": {"D", "initial", "times", "integrate", "rtol", "atol"},
    "marginals": {"times", "x", "method", "truncation", "order", "printed"},
    "energies": {"times", "method", "truncation", "order", "coherent"},
    "trajectory": {"x0", "t_span", "rtol", "atol", "field", "truncation", "samples", "rescale_to"},
    "ensemble": {"count", "seed", "times", "field", "rtol", "atol", "truncation", "chunk_size"},
    "validate": {"checks", "skip"},
}

#: Built-in reference scenarios materialised by ``--paper-figures``.
REFERENCE_SCENARIOS = {
    "marginals": {
        "marginal-swap": {
            "params": {"m": 1.0, "omega_bar": 1.0, "delta_ratio": 0.1},
            "settings": {
                "times": {"start": 0.0, "stop": 1.0, "num": 41, "unit": "pi/delta_omega"},
                "x": {"extent": 5.0, "num": 201},
                "method": "both",
            },
        },
    },
    "trajectory": {
        "trajectory-base": {
            "params": {"m": 1.0, "omega_bar": 1.0, "delta_ratio": 0.01},
            "settings": {"x0": [0.0, -1.0], "t_span": {"start": 0.0, "stop": 2.0, "unit": "pi/delta_omega"}},
        },
        "trajectory-rescaled": {
            "params": {"m": 1.0, "omega_bar": 1.0, "delta_ratio": 0.005},
            "settings": {"x0": [0.0, -math.sqrt(2.0)], "t_span": {"start": 0.0, "stop": 2.0, "unit": "pi/delta_omega"}},
        },
    },
}


class NumericalFailure(CoupledBohmError):
    """Raised by a mode runner after partial artifacts have been written."""


# -- scenario parsing ---------------------------------------------------------------


def _number(value, name, positive=False, integer=False, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value) if integer else float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value!r}")
    return value


def parse_params(raw) -> OscillatorParams:
    if not isinstance(raw, dict):
        raise ConfigError("params must be an object")
    keys = set(raw)
    try:
        if keys & {"omega_bar", "delta_ratio"}:
            allowed = {"omega_bar", "delta_ratio", "m", "hbar"}
            if keys - allowed:
                raise ConfigError(f"unexpected params keys {sorted(keys - allowed)} alongside omega_bar/delta_ratio")
            if not {"omega_bar", "delta_ratio"} <= keys:
                raise ConfigError("params need both omega_bar and delta_ratio")
            extra = {k: _number(raw[k], f"params.{k}") for k in ("m", "hbar") if k in raw}
            return OscillatorParams.from_frequencies(
                _number(raw["omega_bar"], "params.omega_bar"), _number(raw["delta_ratio"], "params.delta_ratio"), **extra
            )
        allowed = {"m", "k", "lam", "hbar", "d"}
        if keys - allowed:
            raise ConfigError(f"unknown params keys {sorted(keys - allowed)}")
        return OscillatorParams(**{k: _number(v, f"params.{k}") for k, v in raw.items()})
    except ValueError as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def _time_unit(unit, freqs):
    if unit in (None, "fs"):
        return 1.0
    if unit == "pi/delta_omega":
        if freqs.delta_omega == 0:
            raise ConfigError("time unit pi/delta_omega needs a nonzero coupling")
        return math.pi / freqs.delta_omega
    raise ConfigError(f"unknown time unit {unit!r}")


def parse_times(raw, freqs, name="times", default=None):
    """A list of times or ``{"start", "stop", "num", "unit"}``; returns an increasing array in fs."""
    raw = default if raw is None else raw
    if isinstance(raw, list):
        values = np.array([_number(v, name) for v in raw], dtype=float)
    elif isinstance(raw, dict):
        unknown = set(raw) - {"start", "stop", "num", "unit"}
        if unknown:
            raise ConfigError(f"unknown {name} keys {sorted(unknown)}")
        scale = _time_unit(raw.get("unit"), freqs)
        start = _number(raw.get("start", 0.0), f"{name}.start")
        stop = _number(raw.get("stop"), f"{name}.stop") if "stop" in raw else None
        if stop is None:
            raise ConfigError(f"{name}.stop is required")
        num = _number(raw.get("num", 2), f"{name}.num", integer=True, minimum=1)
        values = np.linspace(start, stop, num) * scale
    else:
        raise ConfigError(f"{name} must be a list or an object")
    if values.size == 0 or np.any(values < 0) or np.any(np.diff(values) <= 0):
        raise ConfigError(f"{name} must be non-empty, non-negative and strictly increasing")
    return values


def parse_x_grid(raw, params, freqs):
    raw = raw or {"extent": 5.0, "num": 201}
    if not isinstance(raw, dict):
        raise ConfigError("x must be an object")
    unknown = set(raw) - {"extent", "start", "stop", "num"}
    if unknown:
        raise ConfigError(f"unknown x keys {sorted(unknown)}")
    num = _number(raw.get("num", 201), "x.num", integer=True, minimum=2)
    if "extent" in raw:
        L = math.sqrt(params.hbar / (params.m * freqs.omega_bar))
        e = _number(raw["extent"], "x.extent", positive=True) * L
        return np.linspace(-e, e, num)
    if {"start", "stop"} <= set(raw):
        a, b = _number(raw["start"], "x.start"), _number(raw["stop"], "x.stop")
        if b <= a:
            raise ConfigError("x.stop must exceed x.start")
        return np.linspace(a, b, num)
    raise ConfigError("x needs either extent or start/stop")


def _truncation(raw):
    if raw is None:
        return DEFAULT_TRUNCATION
    if not (isinstance(raw, list) and len(raw) == 2):
        raise ConfigError("truncation must be [nmax, nprime_max]")
    return tuple(_number(v, "truncation", integer=True, minimum=0) for v in raw)


def _choice(value, name, options):
    if value not in options:
        raise ConfigError(f"{name} must be one of {list(options)}, got {value!r}")
    return value


def load_scenario(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("a scenario must be a JSON object")
    return doc


def validate_scenario(doc, mode) -> dict:
    unknown = set(doc) - {"mode", "params", "settings", "output"}
    if unknown:
        raise ConfigError(f"unknown scenario keys {sorted(unknown)}")
    if doc.get("mode", mode) != mode:
        raise ConfigError(f"scenario declares mode {doc['mode']!r} but the command is {mode!r}")
    settings = doc.get("settings", {})
    if not isinstance(settings, dict):
        raise ConfigError("settings must be an object")
    bad = set(settings) - MODE_SETTINGS[mode]
    if bad:
        raise ConfigError(f"unknown {mode} settings {sorted(bad)}")
    if mode != "validate" and "params" not in doc:
        raise ConfigError("scenario needs params")
    return {"mode": mode, "params": doc.get("params"), "settings": settings, "output": doc.get("output")}


# -- run context -------------------------------------------------------------------


class Run:
    """Collects artifacts and diagnostics for one scenario and writes the manifest."""

    def __init__(self, out: Path, scenario: dict, workers: int):
        self.out = out
        self.scenario = scenario
        self.workers = workers
        self.artifacts = []
        self.info = {}
        self.params = None
        self.freqs = None
        self.started = time.perf_counter()

    def path(self, name) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def manifest(self, status="complete", error=None):
        files = {name: sha256(self.out / name) for name in sorted(set(self.artifacts)) if (self.out / name).exists()}
        doc = {
            "tool": "coupled-bohm",
            "version": __version__,
            "mode": self.scenario["mode"],
            "scenario": self.scenario,
            "status": status,
            "params": asdict(self.params) if self.params else None,
            "derived_frequencies": asdict(self.freqs) if self.freqs else None,
            "tail_bound": self.info.pop("tail_bound", None),
            "seed": self.info.pop("seed", None),
            "diagnostics": self.info,
            "artifacts": files,
            "workers": self.workers,
            "environment": {"python": platform.python_version(), "numpy": np.__version__},
            "duration_s": time.perf_counter() - self.started,
        }
        if error is not None:
            doc["error"] = error
        write_json(self.out / "manifest.json", doc)
        return doc


def _spectral(run, settings):
    st = project_coefficients(params=run.params, truncation=_truncation(settings.get("truncation")))
    run.info["tail_bound"] = st.tail_bound
    run.info["norm"] = {"initial": st.initial_norm, "retained": st.retained_norm, "truncation": list(st.truncation)}
    return st


# -- mode runners -------------------------------------------------------------------


def run_classical(run, settings):
    p, f = run.params, run.freqs
    if "initial" in settings:
        init = settings["initial"]
        if not isinstance(init, dict) or set(init) - {"x1", "x2", "v1", "v2"}:
            raise ConfigError("initial must be an object with keys among x1, x2, v1, v2")
        sc = classical.ClassicalScenario(**{k: _number(v, f"initial.{k}") for k, v in init.items()})
    else:
        sc = classical.ClassicalScenario.displaced(_number(settings.get("D", 1.0), "D"))
    beat = 2 * math.pi / f.delta_omega if f.delta_omega > 0 else 2 * math.pi / f.omega
    t = parse_times(settings.get("times"), f, default={"start": 0.0, "stop": beat, "num": 2001})
    x1, x2 = classical.classical_positions(t, sc, p)
    v1, v2 = classical.classical_velocities(t, sc, p)
    states = np.column_stack([x1, x2, p.m * v1, p.m * v2])
    e1, e2 = classical.particle_energies(states, p)
    cols = {"t": t, "x1": x1, "x2": x2, "v1": v1, "v2": v2, "E1": e1, "E2": e2, "E_interaction": 0.5 * p.lam * (x1 - x2) ** 2}
    if sc.is_canonical:
        en = classical.classical_energies(t, sc, p)
        cols["E1_first_order"] = en.E1_first_order
        cols["E2_first_order"] = en.E2_first_order
    energy = classical.classical_total_energy(sc, p)
    run.info["total_energy"] = {"exact": energy.exact, "first_order": energy.first_order}
    if settings.get("integrate", True):
        rtol = _number(settings.get("rtol", 1e-12), "rtol", positive=True)
        atol = _number(settings.get("atol", 1e-14), "atol", positive=True)
        sol = classical.integrate_hamilton(sc, p, (float(t[0]), float(t[-1])), rtol=rtol, atol=atol)
        y = sol(t)
        cols["x1_numeric"], cols["x2_numeric"] = y[:, 0], y[:, 1]
        run.info["integrator"] = sol.stats
        run.info["max_closed_form_deviation"] = float(max(np.max(np.abs(y[:, 0] - x1)), np.max(np.abs(y[:, 1] - x2))))
    write_table(run.path("classical.csv"), list(cols), cols)


def run_marginals(run, settings):
    p, f = run.params, run.freqs
    times = parse_times(settings.get("times"), f, default={"start": 0.0, "stop": 1.0, "num": 41, "unit": "pi/delta_omega"})
    x = parse_x_grid(settings.get("x"), p, f)
    method = _choice(settings.get("method", "both"), "method", ("closed-form", "quadrature", "both"))
    printed = bool(settings.get("printed", False))
    diag = {}
    if method in ("closed-form", "both"):
        for which in (1, 2):
            surf = np.array([observables.marginal_closed_form(which, x, t, p, printed=printed) for t in times])
            emit_grid(run.path(f"marginal_x{which}.csv"), (times, x), surf)
            diag[f"x{which}_closed_form"] = {
                "min_density": float(surf.min()),
                "has_negative": bool(surf.min() < 0),
                "max_norm_deviation": float(np.max(np.abs(np.trapezoid(surf, x, axis=1) - 1))),
            }
    if method in ("quadrature", "both"):
        st = _spectral(run, settings)
        order = _number(settings.get("order", 64), "order", integer=True, minimum=2)
        for which in (1, 2):
            surf = np.array([observables.marginal_quadrature(which, x, t, st, order=order) for t in times])
            emit_grid(run.path(f"marginal_x{which}_quadrature.csv"), (times, x), surf)
            diag[f"x{which}_quadrature"] = {"max_norm_deviation": float(np.max(np.abs(np.trapezoid(surf, x, axis=1) - 1)))}
    run.info["marginals"] = diag


def run_energies(run, settings):
    p, f = run.params, run.freqs
    beat = 2 * math.pi / f.delta_omega if f.delta_omega > 0 else 2 * math.pi / f.omega
    times = parse_times(settings.get("times"), f, default={"start": 0.0, "stop": beat, "num": 201})
    method = _choice(settings.get("method", "both"), "method", ("closed-form", "quadrature", "both"))
    cols = {"t": times}
    if method in ("closed-form", "both"):
        reps = [observables.energy_closed_form(t, p) for t in times]
        for key in ("E1", "E2", "E_interaction", "E_total"):
            cols[f"{key}_closed_form"] = np.array([getattr(r, key) for r in reps])
    if method in ("quadrature", "both"):
        st = _spectral(run, settings)
        order = _number(settings.get("order", 64), "order", integer=True, minimum=2)
        reps = observables.energy_quadrature(times, st, order=order)
        for key in ("E1", "E2", "E_interaction", "E_total"):
            cols[f"{key}_quadrature"] = np.array([getattr(r, key) for r in reps])
        run.info["spectral_energy"] = st.energy()
    write_table(run.path("energies.csv"), list(cols), cols)
    coh = settings.get("coherent")
    if coh is not None:
        if not isinstance(coh, dict) or set(coh) - {"alpha", "beta", "num"}:
            raise ConfigError("coherent must be an object with keys among alpha, beta, num")
        num = _number(coh.get("num", 73), "coherent.num", integer=True, minimum=2)
        scan = observables.coherent_interaction_scan(
            _number(coh.get("alpha", 1.0), "coherent.alpha", minimum=0),
            _number(coh.get("beta", 1.0), "coherent.beta", minimum=0),
            np.linspace(-math.pi, math.pi, num),
            p,
        )
        write_table(run.path("coherent_scan.csv"), ["phase", "bare", "normal_ordered"], [scan.phases, scan.bare, scan.normal_ordered])
        run.info["coherent_minimum"] = {"phase": scan.min_phase, "bare": scan.min_bare, "normal_ordered": scan.min_normal_ordered}


def _trajectory_columns(sample, params, freqs, field):
    cols = {"t": sample.t, "x1": sample.x1, "x2": sample.x2}
    if field == "reduced" and freqs.delta_omega > 0:
        try:
            e = bohmian.bohmian_energies(sample.x1, sample.x2, sample.t, params, freqs)
        except SingularityError:
            return cols
        for key in ("E1", "E2", "K1", "K2", "V1", "V2", "Q1", "Q2"):
            cols[key] = getattr(e, key)
    return cols


def run_trajectory(run, settings):
    p, f = run.params, run.freqs
    x0 = settings.get("x0", [0.0, -1.0])
    if not (isinstance(x0, list) and len(x0) == 2):
        raise ConfigError("x0 must be [x1, x2]")
    x0 = tuple(_number(v, "x0") for v in x0)
    beat = 2 * math.pi / f.delta_omega if f.delta_omega > 0 else 100.0
    span = settings.get("t_span", {"start": 0.0, "stop": beat})
    if isinstance(span, list):
        if len(span) != 2:
            raise ConfigError("t_span must be [start, stop]")
        span = {"start": span[0], "stop": span[1]}
    if not isinstance(span, dict):
        raise ConfigError("t_span must be a list or an object")
    t_span = parse_times({**span, "num": 2}, f, name="t_span")
    rtol = _number(settings.get("rtol", bohmian.DEFAULT_RTOL), "rtol", positive=True)
    atol = _number(settings.get("atol", bohmian.DEFAULT_ATOL), "atol", positive=True)
    field = _choice(settings.get("field", "reduced"), "field", ("reduced", "exact"))
    st = _spectral(run, settings) if field == "exact" else None
    try:
        sample = bohmian.integrate_trajectory(x0, tuple(t_span), p, rtol=rtol, atol=atol, field=field, spectral=st)
    except (SingularityError, StepUnderflow) as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            cols = _trajectory_columns(partial, p, f, field)
            write_table(run.path("trajectory.csv"), list(cols), cols)
            run.info["integrator"] = partial.stats
        raise NumericalFailure(f"{type(exc).__name__}: {exc}") from exc
    run.info["integrator"] = sample.stats
    cols = _trajectory_columns(sample, p, f, field)
    write_table(run.path("trajectory.csv"), list(cols), cols)
    samples = settings.get("samples")
    if samples is not None:
        n = _number(samples, "samples", integer=True, minimum=2)
        td = np.linspace(t_span[0], t_span[1], n)
        y = sample(td)
        write_table(run.path("trajectory_dense.csv"), ["t", "x1", "x2"], [td, y[:, 0], y[:, 1]])
    target = settings.get("rescale_to")
    if target is not None:
        ratio = _number(target, "rescale_to", positive=True)
        new_delta = ratio * f.omega_bar
        if f.delta_omega == 0:
            raise ConfigError("rescale_to needs a nonzero coupling")
        mapped = bohmian.scaling_map(sample, f.delta_omega, new_delta)
        write_table(run.path("trajectory_rescaled.csv"), ["t", "x1", "x2"], [mapped.t, mapped.x1, mapped.x2])
        run.info["rescaled_delta_omega"] = new_delta


def run_ensemble(run, settings):
    p, f = run.params, run.freqs
    count = _number(settings.get("count", 1000), "count", integer=True, minimum=1)
    seed = _number(settings.get("seed", checks.ENSEMBLE_SEED), "seed", integer=True, minimum=0)
    if seed >= 2**64:
        raise ConfigError("seed must fit in 64 bits")
    default_t = {"start": 0.0, "stop": 0.5, "num": 2, "unit": "pi/delta_omega"}
    times = parse_times(settings.get("times"), f, default=default_t)
    field = _choice(settings.get("field", "exact"), "field", ("reduced", "exact"))
    rtol = _number(settings.get("rtol", bohmian.DEFAULT_RTOL), "rtol", positive=True)
    atol = _number(settings.get("atol", bohmian.DEFAULT_ATOL), "atol", positive=True)
    chunk = _number(settings.get("chunk_size", 512), "chunk_size", integer=True, minimum=1)
    st = _spectral(run, settings) if field == "exact" else None
    run.info["seed"] = seed
    spec = bohmian.EnsembleSpec(count=count, seed=seed, times=tuple(times))
    res = bohmian.equivariance_check(spec, p, st, field=field, rtol=rtol, atol=atol, workers=run.workers, chunk_size=chunk)
    T, N = res.positions.shape[:2]
    status = (res.status != 0).astype(int)
    write_table(
        run.path("ensemble.csv"),
        ["t", "index", "x1", "x2", "lost"],
        [np.repeat(times, N), np.tile(np.arange(N), T), res.positions[:, :, 0].ravel(), res.positions[:, :, 1].ravel(), np.tile(status, T)],
    )
    write_table(run.path("equivariance.csv"), ["t", "distance_x1", "distance_x2"], [res.times, res.distance_x1, res.distance_x2])
    run.info["equivariance"] = res.as_dict()


def run_validate(run, settings):
    selected = settings.get("checks")
    skip = set(settings.get("skip", []))
    keys = [fn.key for fn in checks.ALL_CHECKS]
    for k in list(selected or []) + list(skip):
        if k not in keys:
            raise ConfigError(f"unknown check {k!r}; known: {keys}")
    chosen = [k for k in (selected or keys) if k not in skip]
    results = checks.run_checks(chosen, workers=run.workers, log=lambda line: print(line, flush=True))
    report = {
        "all_passed": all(r.passed for r in results),
        "passed": [r.key for r in results if r.passed],
        "failed": [r.key for r in results if not r.passed],
        "results": [r.as_dict() for r in results],
    }
    write_json(run.path("report.json"), report)
    run.info["summary"] = {"passed": len(report["passed"]), "failed": len(report["failed"])}


RUNNERS = {
    "classical": run_classical,
    "marginals": run_marginals,
    "energies": run_energies,
    "trajectory": run_trajectory,
    "ensemble": run_ensemble,
    "validate": run_validate,
}


# -- entry point --------------------------------------------------------------------


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def execute(mode, scenario, out: Path, workers=1) -> dict:
    """Run one validated scenario into ``out``; returns the manifest."""
    out.mkdir(parents=True, exist_ok=True)
    run = Run(out, scenario, workers)
    if scenario.get("params") is not None:
        run.params = parse_params(scenario["params"])
        run.freqs = derive_frequencies(run.params)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FirstOrderWarning)
            RUNNERS[mode](run, scenario["settings"])
    except (NumericalFailure, SingularityError, StepUnderflow, QuadratureError) as exc:
        run.manifest(status="partial", error={"type": type(exc).__name__, "message": str(exc)})
        raise
    return run.manifest()


def _error(exc, code, out=None):
    payload = {"status": "error", "exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    if out is not None and code != EXIT_IO:
        try:
            write_json(Path(out) / "error.json", payload)
        except OSError:
            pass
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="coupled-bohm", description="Coupled quantum oscillators: spectral, Bohmian and classical runs.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run a {mode} scenario")
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV} or ./runs, then the scenario name)")
        p.add_argument("--workers", type=int, default=1, help="worker processes for ensemble runs")
        p.add_argument("--paper-figures", action="store_true", help="run the built-in reference scenarios for this mode")
    parser.add_argument("--version", action="version", version=__version__)
    return parser


def _jobs(args):
    """``(name, scenario, out_dir)`` for each run the command asks for."""
    if args.paper_figures:
        if args.config:
            raise ConfigError("--paper-figures and --config are mutually exclusive")
        builtin = REFERENCE_SCENARIOS.get(args.mode)
        if not builtin:
            raise ConfigError(f"no built-in reference scenario for mode {args.mode!r}; known: {sorted(REFERENCE_SCENARIOS)}")
        base = Path(args.out) if args.out else output_root()
        return [(name, validate_scenario(doc, args.mode), base / name) for name, doc in builtin.items()]
    if args.mode == "validate" and not args.config:
        scenario = validate_scenario({}, "validate")
    elif not args.config:
        raise ConfigError("--config is required (or use --paper-figures)")
    else:
        scenario = validate_scenario(load_scenario(args.config), args.mode)
    if args.out:
        out = Path(args.out)
    else:
        out = output_root() / (scenario["output"] or args.mode)
    return [(args.mode, scenario, out)]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        jobs = _jobs(args)
        for name, scenario, out in jobs:
            manifest = execute(args.mode, scenario, out, workers=args.workers)
            print(json.dumps({"status": manifest["status"], "name": name, "out": str(out)}, sort_keys=True))
    except ConfigError as exc:
        return _error(exc, EXIT_CONFIG, out)
    except (NumericalFailure, SingularityError, StepUnderflow, QuadratureError) as exc:
        return _error(exc, EXIT_NUMERICAL, out)
    except OSError as exc:
        return _error(exc, EXIT_IO, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
