"""
Desk-scale reproductions of the figure experiments.

Each preset writes its curve/table files into ``out_dir`` and returns
``(files, runtimes)``. Parameters below are fixed so that a preset run is
reproducible from its name, seed and trajectory count alone.
"""
from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .config import drive_period_dt, nv_with_lambda
from .engine import SimulationSpec, run_ensemble
from .errors import InvalidParam, UnknownPreset
from .filterfn import PeriodicWindowSpec, chi, filter_ft_sq_closed
from .io import describe_spec, write_series, write_table
from .model import TWO_PI, NVParams, QuditModel, mhz_to_rad_per_us
from .noise import OrnsteinUhlenbeck, StaticGaussian, spectral_density
from .runner import FIT_COLUMNS, fit_all, fit_rows, pair_label, static_analytic
from .schedule import (
    analytic_t2,
    build_amplify_schedule,
    build_one_channel_schedule,
    build_two_channel_schedule,
    mu_from_tau,
    two_channel_coefficients,
)

LAMBDA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0, 2.0, 3.0)
SIGMA_B_GAUSS = 0.2
DEFAULT_TRAJECTORIES = 10_000

# static-noise two-level runs (fig1a/b, fig2a/b)
QUBIT_DT = 0.002
QUBIT_CYCLES = 300
FIG2_LAMBDA = 1.0
FIG2_TAUS = (0.0, 0.25, 0.5, 0.75, 1.0)

# driven NV (fig1c/d)
NV_D_GHZ = 2.87
NV_BZ_GAUSS = 100.0
NV_B1_GAUSS = 1.717
NV_DETUNING_MHZ = 1.9
NV_DT_TARGET = 0.0025
NV_WINDOW_US = 0.6
NV_STRIDE = 2

# OU filter functions (fig2c/d)
OU_L_GAUSS = 0.2
OU_R_PER_US = 1.0
FILTER_LAMBDA = 1.0
FILTER_DT = 0.02
FILTER_TAUS = (0.0, 0.5, 1.0)
FILTER_PERIODS = (1, 8)
FILTER_MAX_PERIODS = 100
FILTER_T_POINTS = 26
FILTER_CUTOFF = 50.0  # omega_max = FILTER_CUTOFF * 2 pi / delta; tail bound reported per row

# three-level maps (fig3)
FIG3_LAMBDA = 1.0
FIG3_DT = 0.005
FIG3_TAUS_A = tuple(np.round(np.linspace(0.0, 2.0, 11), 12))
FIG3_GRID = tuple(np.round(np.linspace(0.0, 2.0, 21), 12))
FIG3_TRAJECTORIES = 2_000


def _sigma():
    return StaticGaussian.from_gauss(SIGMA_B_GAUSS)


def _qubit_state():
    return np.array([1.0, 1.0]) / math.sqrt(2)


def _tag(x):
    return f"{x:g}"


def _fig1_specs(trajectories, seed):
    model = QuditModel.pure_dephasing(2, "pm")
    for lam in LAMBDA_GRID:
        sched = build_amplify_schedule(lam, QUBIT_DT, QUBIT_CYCLES, dim=2)
        yield lam, SimulationSpec(model, sched, _sigma(), _qubit_state(), trajectories, 1, seed)


def fig1a(out, trajectories, seed, workers, fmt):
    files = []
    for lam, spec in _fig1_specs(trajectories, seed):
        res = run_ensemble(spec, workers=workers)
        files.append(write_series(out / f"fig1a_lambda_{_tag(lam)}", res,
                                  {"preset": "fig1a", "lambda": lam}, fmt))
    return files


def fig1b(out, trajectories, seed, workers, fmt):
    rows, meta = [], {"preset": "fig1b", "sigma_b_gauss": SIGMA_B_GAUSS}
    for lam, spec in _fig1_specs(trajectories, seed):
        res = run_ensemble(spec, workers=workers)
        fit = fit_all(res)[(0, 1)]
        rows.append([lam, fit.t2 if fit else math.nan, fit.t2_stderr if fit else math.nan,
                     static_analytic(spec)[(0, 1)]])
        meta.setdefault("spec_lambda0", describe_spec(spec))
    return [write_table(out / "fig1b_t2_vs_lambda",
                        ["lambda", "t2_fit_us", "t2_fit_stderr_us", "t2_analytic_us"], rows, meta, fmt)]


def driven_nv_params(lam):
    """Single drive on the (+1, 0) transition, detuned by 1.9 MHz / (1 + lambda)."""
    base = NVParams.from_lab_units(NV_D_GHZ, NV_BZ_GAUSS, NV_B1_GAUSS)
    e = base.level_energies
    base = NVParams(base.D, base.Bz, base.gamma, base.B1, 0.0,
                    e[0] - e[1] - mhz_to_rad_per_us(NV_DETUNING_MHZ), 0.0)
    info = {"detuning1": mhz_to_rad_per_us(NV_DETUNING_MHZ), "detuning2": 0.0, "scaling": "inverse_1_plus_lambda"}
    p = nv_with_lambda(base, info, lam)
    return NVParams(p.D, p.Bz, p.gamma, p.B1, 0.0, p.omega1, 0.0)


def driven_spec(lam, trajectories, seed, dt_target=NV_DT_TARGET, window=NV_WINDOW_US, stride=NV_STRIDE):
    p = driven_nv_params(lam)
    dt = drive_period_dt(p, dt_target)
    sched = build_amplify_schedule(lam, dt, int(math.ceil(window / dt)))
    psi = np.array([1.0, 0.0, 1.0]) / math.sqrt(2)
    return SimulationSpec(p, sched, _sigma(), psi, trajectories, stride, seed)


def fig1cd(out, trajectories, seed, workers, fmt):
    files, rows = [], []
    for lam in LAMBDA_GRID:
        spec = driven_spec(lam, trajectories, seed)
        res = run_ensemble(spec, workers=workers)
        files.append(write_series(out / f"fig1c_lambda_{_tag(lam)}", res,
                                  {"preset": "fig1cd", "lambda": lam}, fmt))
        fit = fit_all(res)[(0, 2)]
        rows.append([lam, NV_DETUNING_MHZ / (1 + lam), spec.schedule.dt,
                     fit.t2 if fit else math.nan, fit.t2_stderr if fit else math.nan,
                     static_analytic(spec)[(0, 2)]])
    cols = ["lambda", "detuning_mhz", "dt_us", "t2_fit_13_us", "t2_fit_stderr_13_us", "t2_pure_dephasing_13_us"]
    files.append(write_table(out / "fig1d_t2_vs_lambda", cols, rows, {"preset": "fig1cd"}, fmt))
    return files


def fig2ab(out, trajectories, seed, workers, fmt):
    model = QuditModel.pure_dephasing(2, "pm")
    files, rows = [], []
    for tau in FIG2_TAUS:
        mu = mu_from_tau(tau, FIG2_LAMBDA)
        sched = build_one_channel_schedule(FIG2_LAMBDA, mu, QUBIT_DT, QUBIT_CYCLES, dim=2)
        spec = SimulationSpec(model, sched, _sigma(), _qubit_state(), trajectories, 1, seed)
        res = run_ensemble(spec, workers=workers)
        files.append(write_series(out / f"fig2a_tau_{_tag(tau)}", res,
                                  {"preset": "fig2ab", "lambda": FIG2_LAMBDA, "tau": tau}, fmt))
        fit = fit_all(res)[(0, 1)]
        rows.append([tau, mu, fit.t2 if fit else math.nan, fit.t2_stderr if fit else math.nan,
                     static_analytic(spec)[(0, 1)]])
    files.append(write_table(out / "fig2b_t2_vs_tau",
                             ["tau", "mu", "t2_fit_us", "t2_fit_stderr_us", "t2_analytic_us"],
                             rows, {"preset": "fig2ab", "lambda": FIG2_LAMBDA}, fmt))
    return files


def _ou():
    from .model import gauss_to_rad_per_us

    return OrnsteinUhlenbeck(gauss_to_rad_per_us(OU_L_GAUSS), OU_R_PER_US)


def fig2cd(out, trajectories, seed, workers, fmt):
    noise = _ou()
    delta = FILTER_LAMBDA * FILTER_DT
    omega_max = FILTER_CUTOFF * TWO_PI / delta
    meta = {"preset": "fig2cd", "lambda": FILTER_LAMBDA, "dt_us": FILTER_DT,
            "l_rad_per_us": noise.l, "R_per_us": noise.R, "omega_max_per_us": omega_max}
    files = []
    omega = np.linspace(0.0, 6 * TWO_PI / delta, 2001)
    for m in FILTER_PERIODS:
        cols, data = ["omega_per_us", "C_omega"], [omega, spectral_density(noise, omega)]
        for tau in FILTER_TAUS:
            spec = PeriodicWindowSpec.from_schedule_params(FILTER_LAMBDA, mu_from_tau(tau, FILTER_LAMBDA), FILTER_DT, m)
            cols.append(f"fsq_tau_{_tag(tau)}")
            data.append(filter_ft_sq_closed(spec, omega))
        files.append(write_table(out / f"fig2c_spectral_m{m}", cols, np.column_stack(data).tolist(),
                                 {**meta, "periods": m}, fmt))
    ms = np.unique(np.linspace(1, FILTER_MAX_PERIODS, FILTER_T_POINTS).round().astype(int))
    cols = ["time_us"]
    for tau in FILTER_TAUS:
        cols += [f"chi_tau_{_tag(tau)}", f"W_tau_{_tag(tau)}", f"tail_bound_tau_{_tag(tau)}"]
    rows = [[0.0] + [0.0, 1.0, 0.0] * len(FILTER_TAUS)]
    for m in ms:
        row = [m * delta]
        for tau in FILTER_TAUS:
            spec = PeriodicWindowSpec.from_schedule_params(
                FILTER_LAMBDA, mu_from_tau(tau, FILTER_LAMBDA), FILTER_DT, int(m))
            r = chi(spec, noise, omega_max=omega_max)
            row += [r.value, math.exp(-r.value), r.truncation_bound]
        rows.append(row)
    files.append(write_table(out / "fig2d_envelope", cols, rows, meta, fmt))
    return files


def _window(t2s, dt):
    finite = [t for t in t2s if math.isfinite(t)]
    lo, hi = min(finite), max(finite)
    window = min(3 * hi, 30 * lo)
    n = int(math.ceil(window / dt))
    return n, max(1, n // 400)


def _three_level_state():
    return np.ones(3) / math.sqrt(3)


def fig3a(out, trajectories, seed, workers, fmt):
    model = QuditModel.pure_dephasing(3)
    sigma = _sigma()
    pairs = [(0, 1), (0, 2), (1, 2)]
    rows = []
    for tau in FIG3_TAUS_A:
        mu = mu_from_tau(tau, FIG3_LAMBDA)
        probe = build_one_channel_schedule(FIG3_LAMBDA, mu, FIG3_DT, 1)
        ana = static_analytic(SimulationSpec(model, probe, sigma, _three_level_state(), 1))
        n, stride = _window(ana.values(), FIG3_DT)
        sched = build_one_channel_schedule(FIG3_LAMBDA, mu, FIG3_DT, n)
        spec = SimulationSpec(model, sched, sigma, _three_level_state(), trajectories, stride, seed)
        fits = fit_all(run_ensemble(spec, workers=workers))
        row = [tau, mu]
        for p in pairs:
            f = fits.get(p)
            row += [f.t2 if f else math.nan, f.t2_stderr if f else math.nan, ana[p]]
        rows.append(row)
    cols = ["tau", "mu"]
    for p in pairs:
        lab = pair_label(p)
        cols += [f"t2_fit_{lab}_us", f"t2_fit_stderr_{lab}_us", f"t2_analytic_{lab}_us"]
    return [write_table(out / "fig3a_t2_vs_tau", cols, rows,
                        {"preset": "fig3a", "lambda": FIG3_LAMBDA, "dt_us": FIG3_DT}, fmt)]


def fig3bcd(out, trajectories, seed, workers, fmt, monte_carlo=True):
    """
    (tau1, tau2) maps of T2 for all three pairs under the two-channel schedule.

    Points with tau1 > tau2 have no realisable schedule; they carry the
    analytic values only and ``feasible = 0``.
    """
    model = QuditModel.pure_dephasing(3)
    sigma = _sigma()
    pairs = [(0, 1), (0, 2), (1, 2)]
    rows = []
    for tau1 in FIG3_GRID:
        for tau2 in FIG3_GRID:
            mu1, mu2 = mu_from_tau(tau1, FIG3_LAMBDA), mu_from_tau(tau2, FIG3_LAMBDA)
            cs = two_channel_coefficients(FIG3_LAMBDA, mu1, mu2)
            ana = [analytic_t2(c, sigma.sigma_b) for c in cs]
            feasible = mu1 <= mu2
            fits = {}
            if feasible and monte_carlo:
                n, stride = _window(ana, FIG3_DT)
                sched = build_two_channel_schedule(FIG3_LAMBDA, mu1, mu2, FIG3_DT, n)
                spec = SimulationSpec(model, sched, sigma, _three_level_state(), trajectories, stride, seed)
                fits = fit_all(run_ensemble(spec, workers=workers))
            row = [tau1, tau2, mu1, mu2, int(feasible)]
            for p, a in zip(pairs, ana):
                f = fits.get(p)
                row += [f.t2 if f else math.nan, a]
            rows.append(row)
    cols = ["tau1", "tau2", "mu1", "mu2", "feasible"]
    for p in pairs:
        lab = pair_label(p)
        cols += [f"t2_fit_{lab}_us", f"t2_analytic_{lab}_us"]
    return [write_table(out / "fig3bcd_t2_maps", cols, rows,
                        {"preset": "fig3bcd", "lambda": FIG3_LAMBDA, "dt_us": FIG3_DT,
                         "trajectories": trajectories}, fmt)]


PRESET_FUNCS = {
    "fig1a": fig1a,
    "fig1b": fig1b,
    "fig1cd": fig1cd,
    "fig2ab": fig2ab,
    "fig2cd": fig2cd,
    "fig3a": fig3a,
    "fig3bcd": fig3bcd,
}


def run_preset(name, out_dir, seed=0, trajectories=None, workers=1, fmt="csv"):
    """Run a named preset; returns ``(files, runtimes)``."""
    if name not in PRESET_FUNCS:
        raise UnknownPreset(name)
    if trajectories is None:
        trajectories = FIG3_TRAJECTORIES if name in ("fig3a", "fig3bcd") else DEFAULT_TRAJECTORIES
    if trajectories < 1:
        raise InvalidParam("trajectories must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    files = PRESET_FUNCS[name](out, trajectories, seed, workers, fmt)
    return files, {name: time.perf_counter() - t0, "trajectories": trajectories}
