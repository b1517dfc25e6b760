"""Dispatch of validated experiment configs to the engine, analytics and filter functions."""
from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .engine import SimulationSpec, fit_gaussian_decay, run_ensemble, sweep
from .errors import InsufficientData
from .filterfn import (
    PeriodicWindowSpec,
    chi,
    default_omega_max,
    filter_from_schedule,
    filter_ft_sq_closed,
    filter_ft_sq_numeric,
)
from .io import write_manifest, write_series, write_table
from .model import NVParams
from .noise import spectral_density
from .schedule import analytic_coherence, analytic_t2, pair_coefficients
from .config import nv_with_lambda


def pair_label(pair):
    return f"{pair[0] + 1}{pair[1] + 1}"


def build_spec(cfg, schedule=None, model=None):
    return SimulationSpec(
        model=model if model is not None else cfg.model,
        schedule=schedule if schedule is not None else cfg.schedule,
        noise=cfg.noise,
        initial_state=cfg.initial_state,
        trajectories=cfg.trajectories,
        sample_stride=cfg.sample_stride,
        master_seed=cfg.master_seed,
        substep_phase=cfg.substep_phase,
    )


def fit_all(result):
    """Fit every pair; pairs without enough signal map to None."""
    fits = {}
    for s in result.coherences:
        try:
            fits[s.pair] = fit_gaussian_decay(s)
        except InsufficientData:
            fits[s.pair] = None
    return fits


def fit_rows(fits, analytic=None):
    rows = []
    for pair, f in fits.items():
        a = (analytic or {}).get(pair, math.nan)
        if f is None:
            rows.append([pair_label(pair), math.nan, math.nan, math.nan, 0, a])
        else:
            rows.append([pair_label(pair), f.t2, f.t2_stderr, f.amplitude, f.points_used, a])
    return rows


FIT_COLUMNS = ["pair", "t2_fit_us", "t2_fit_stderr_us", "amplitude", "points_used", "t2_analytic_us"]


def static_analytic(spec):
    sigma = getattr(spec.noise, "sigma_b", None)
    if not sigma:
        return {}
    if not spec.schedule.is_balanced():
        return {}
    coeffs = pair_coefficients(spec.schedule, spec.dephase)
    return {p: analytic_t2(c, sigma) for p, c in coeffs.as_dict().items()}


def _simulate(cfg, out, meta, workers):
    spec = build_spec(cfg)
    res = run_ensemble(spec, workers=workers)
    files = [write_series(out / f"{cfg.name}_series", res, meta, cfg.fmt)]
    files.append(write_table(out / f"{cfg.name}_fits", FIT_COLUMNS,
                             fit_rows(fit_all(res), static_analytic(spec)), meta, cfg.fmt))
    return files


def _analytic(cfg, out, meta):
    spec = build_spec(cfg)
    coeffs = pair_coefficients(cfg.schedule, spec.dephase)
    sigma = cfg.noise.sigma_b
    rows = [[pair_label(p), c, analytic_t2(c, sigma) if sigma > 0 else math.inf]
            for p, c in coeffs.as_dict().items()]
    files = [write_table(out / f"{cfg.name}_coefficients", ["pair", "c", "t2_analytic_us"], rows, meta, cfg.fmt)]
    times = spec.times()
    cols = ["time_us"] + [f"abs_rho_{pair_label(p)}" for p in coeffs.pairs()]
    psi = spec.initial_state
    curves = [np.abs(psi[i] * np.conj(psi[j])) * analytic_coherence(coeffs[(i, j)], sigma, times)
              for i, j in coeffs.pairs()]
    files.append(write_table(out / f"{cfg.name}_curves", cols,
                             np.column_stack([times] + curves).tolist(), meta, cfg.fmt))
    return files


def _filter(cfg, out, meta):
    f = cfg.filter
    noise = cfg.noise
    if f["kind"] == "periodic":
        spec = PeriodicWindowSpec.from_schedule_params(f["lam"], f["mu"], f["dt"], f["periods"])
        unit_time = spec.delta
        weight = 1.0
        n_units = spec.periods

        def at(m):
            return PeriodicWindowSpec(spec.delta, spec.delta1, spec.delta2, m)
    else:
        pattern, weight = filter_from_schedule(cfg.schedule, f["pair"], build_spec(cfg).dephase)
        spec = pattern
        unit_time = pattern.period
        n_units = pattern.repeats

        def at(m):
            return pattern.truncated(m * unit_time)
    om = f["omega_max"] or default_omega_max(spec, noise)
    omega = np.linspace(0.0, om, f["omega_points"])
    cols = ["omega_per_us", "C_omega", "fsq_numeric"]
    data = [omega, spectral_density(noise, omega), filter_ft_sq_numeric(spec, omega)]
    if f["kind"] == "periodic":
        cols.append("fsq_closed")
        data.append(filter_ft_sq_closed(spec, omega))
    files = [write_table(out / f"{cfg.name}_spectral", cols, np.column_stack(data).tolist(), meta, cfg.fmt)]
    ms = np.unique(np.linspace(1, n_units, min(f["t_points"], n_units)).round().astype(int))
    rows = [[0.0, 0.0, 0.0, 1.0]]
    for m in ms:
        r = chi(at(int(m)), noise, omega_max=f["omega_max"])
        rows.append([m * unit_time, r.value, r.truncation_bound, math.exp(-weight ** 2 * r.value)])
    files.append(write_table(out / f"{cfg.name}_chi", ["time_us", "chi", "truncation_bound", "W"],
                             rows, meta, cfg.fmt))
    return files


def sweep_columns(pairs):
    cols = ["value", "infeasible"]
    for p in pairs:
        lab = pair_label(p)
        cols += [f"t2_fit_{lab}_us", f"t2_fit_stderr_{lab}_us", f"t2_analytic_{lab}_us"]
    return cols


def sweep_rows(rows, pairs):
    out = []
    for r in rows:
        row = [r.value, int(r.infeasible)]
        for p in pairs:
            f = r.fits.get(p)
            row += [f.t2 if f else math.nan, f.t2_stderr if f else math.nan, r.analytic.get(p, math.nan)]
        out.append(row)
    return out


def _sweep(cfg, out, meta, workers):
    spec = build_spec(cfg)
    prepare = None
    if isinstance(cfg.model, NVParams) and cfg.detuning_scaling and cfg.sweep_param == "lambda":
        def prepare(s, lam):
            return s.replace(model=nv_with_lambda(cfg.model, cfg.detuning_scaling, lam))
    rows = sweep(spec, cfg.sweep_param, cfg.sweep_values, prepare=prepare, workers=workers)
    pairs = [s for s in sorted({p for r in rows for p in list(r.fits) + list(r.analytic)})]
    return [write_table(out / f"{cfg.name}_sweep", sweep_columns(pairs), sweep_rows(rows, pairs), meta, cfg.fmt)]


def run_experiment(cfg):
    """Run a validated config; returns the list of files written (manifest last)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = cfg.workers
    meta = {"config": cfg.echo()}
    t0 = time.perf_counter()
    if cfg.mode == "preset":
        from .presets import run_preset

        files, runtimes = run_preset(cfg.preset, out, seed=cfg.master_seed,
                                     trajectories=cfg.trajectories,
                                     workers=workers, fmt=cfg.fmt)
        files.append(write_manifest(out, cfg.echo(), cfg.master_seed, files, runtimes))
        return files
    if cfg.mode == "simulate":
        files = _simulate(cfg, out, meta, workers)
    elif cfg.mode == "analytic":
        files = _analytic(cfg, out, meta)
    elif cfg.mode == "filter":
        files = _filter(cfg, out, meta)
    else:
        files = _sweep(cfg, out, meta, workers)
    runtimes = {cfg.mode: time.perf_counter() - t0}
    files.append(write_manifest(out, cfg.echo(), cfg.master_seed, files, runtimes))
    return files
