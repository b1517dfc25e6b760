"""
JSON experiment configuration.

Every dimensional field carries its unit in the key (``dt_us``,
``sigma_b_gauss``, ``D_ghz``, ``eps_mhz`` ...). Values are converted to
internal units (us, rad/us) once, here. Unknown keys are rejected so that a
missing unit suffix cannot slip through silently.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import ConfigError, NVDecoherenceError, UnknownPreset
from .model import (
    TWO_PI,
    NVParams,
    QuditModel,
    default_dephase,
    default_labels,
    effective_qudit_model,
    gauss_to_rad_per_us,
    ghz_to_rad_per_us,
    mhz_to_rad_per_us,
)
from .noise import OrnsteinUhlenbeck, StaticGaussian
from .schedule import (
    build_amplify_schedule,
    build_general_schedule,
    build_one_channel_schedule,
    build_two_channel_schedule,
    mu_from_tau,
    parse_sequence_dsl,
)

MODES = ("simulate", "analytic", "filter", "sweep", "preset")
PRESETS = ("fig1a", "fig1b", "fig1cd", "fig2ab", "fig2cd", "fig3a", "fig3bcd")
FORMATS = ("csv", "json")


class _Section:
    """Dict wrapper that tracks consumed keys and names fields in errors."""

    def __init__(self, data, path, base_dir=None):
        if not isinstance(data, dict):
            raise ConfigError(path, "expected an object")
        self.data = data
        self.path = path
        self.used = set()
        self.base_dir = base_dir

    def name(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key):
        return key in self.data

    def get(self, key, default=None, kind=None):
        self.used.add(key)
        if key not in self.data:
            return default
        value = self.data[key]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ConfigError(self.name(key), f"expected a finite number, got {value!r}")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(self.name(key), f"expected an integer, got {value!r}")
            return value
        if kind is str and not isinstance(value, str):
            raise ConfigError(self.name(key), f"expected a string, got {value!r}")
        return value

    def require(self, key, kind=None):
        if key not in self.data:
            raise ConfigError(self.name(key), "required field missing")
        return self.get(key, kind=kind)

    def sub(self, key):
        self.used.add(key)
        return _Section(self.data.get(key, {}), self.name(key), self.base_dir)

    def finish(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(self.name(extra[0]), "unknown field (check the unit suffix)")


@dataclass
class ExperimentConfig:
    """Validated experiment description in internal units."""

    mode: str
    raw: dict
    preset: Optional[str] = None
    model: Any = None
    schedule: Any = None
    noise: Any = None
    initial_state: Optional[np.ndarray] = None
    trajectories: int = 10_000
    sample_stride: int = 1
    master_seed: int = 0
    substep_phase: float = 0.05
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    detuning_scaling: Optional[dict] = None
    filter: dict = field(default_factory=dict)
    out_dir: str = "out"
    fmt: str = "csv"
    name: str = "run"
    workers: int = 1

    def with_overrides(self, seed=None, trajectories=None, out=None, fmt=None, workers=None):
        changes = {}
        if seed is not None:
            if not 0 <= seed < 2 ** 64:
                raise ConfigError("seed", "must be an unsigned 64-bit integer")
            changes["master_seed"] = seed
        if trajectories is not None:
            if trajectories < 1:
                raise ConfigError("trajectories", "must be >= 1")
            changes["trajectories"] = trajectories
        if out is not None:
            changes["out_dir"] = out
        if fmt is not None:
            if fmt not in FORMATS:
                raise ConfigError("format", f"must be one of {FORMATS}")
            changes["fmt"] = fmt
        if workers is not None:
            if workers < 1:
                raise ConfigError("workers", "must be >= 1")
            changes["workers"] = workers
        return replace(self, **changes)

    def echo(self):
        """Config as given plus the effective overrides (used in manifests)."""
        raw = copy.deepcopy(self.raw)
        raw["master_seed"] = self.master_seed
        raw["trajectories"] = self.trajectories
        return raw


def _pair_key(key, dim, where):
    key = str(key)
    if len(key) != 2 or not key.isdigit():
        raise ConfigError(where, f"pair key {key!r} must look like '12'")
    i, j = int(key[0]) - 1, int(key[1]) - 1
    if not (0 <= i < dim and 0 <= j < dim and i != j):
        raise ConfigError(where, f"pair {key!r} invalid for dim {dim}")
    return (min(i, j), max(i, j))


def _load_model(sec):
    kind = sec.get("type", "qudit", kind=str)
    if kind == "qudit":
        dim = sec.get("dim", 2, kind=int)
        if not 2 <= dim <= 8:
            raise ConfigError(sec.name("dim"), "must be between 2 and 8")
        encoding = sec.get("encoding", "pm", kind=str)
        if encoding not in ("pm", "p0"):
            raise ConfigError(sec.name("encoding"), "must be 'pm' or 'p0'")
        eps = np.array(sec.get("eps_mhz", [0.0] * dim), dtype=float)
        if eps.shape != (dim,):
            raise ConfigError(sec.name("eps_mhz"), f"needs {dim} entries")
        J = np.zeros((dim, dim))
        for key, val in dict(sec.get("J_mhz", {})).items():
            i, j = _pair_key(key, dim, sec.name("J_mhz"))
            J[i, j] = J[j, i] = mhz_to_rad_per_us(float(val))
        dephase = sec.get("dephase", None)
        dephase = default_dephase(dim, encoding) if dephase is None else np.array(dephase, float)
        try:
            return QuditModel(mhz_to_rad_per_us(eps), J, dephase, labels=default_labels(dim, encoding)), None
        except NVDecoherenceError as exc:
            raise ConfigError(sec.path, str(exc)) from exc
    if kind == "nv":
        D = sec.require("D_ghz", kind=float)
        Bz = sec.require("Bz_gauss", kind=float)
        B1 = sec.get("B1_gauss", 0.0, kind=float)
        B2 = sec.get("B2_gauss", 0.0, kind=float)
        gamma = sec.get("gamma_mhz_per_gauss", 2.8025, kind=float)
        p = NVParams.from_lab_units(D, Bz, B1, B2, gamma_mhz_per_gauss=gamma)
        e = p.level_energies
        omegas = []
        for k, res in ((1, e[0] - e[1]), (2, e[2] - e[1])):
            f = sec.get(f"f{k}_ghz", None, kind=float)
            det = sec.get(f"detuning{k}_mhz", None, kind=float)
            if f is not None and det is not None:
                raise ConfigError(sec.name(f"f{k}_ghz"), f"give f{k}_ghz or detuning{k}_mhz, not both")
            omegas.append(ghz_to_rad_per_us(f) if f is not None
                          else res - mhz_to_rad_per_us(det or 0.0))
        scaling = sec.get("detuning_scaling", "fixed", kind=str)
        if scaling not in ("fixed", "inverse_1_plus_lambda"):
            raise ConfigError(sec.name("detuning_scaling"), "must be 'fixed' or 'inverse_1_plus_lambda'")
        rwa = sec.get("rwa", False)
        try:
            p = replace(p, omega1=omegas[0], omega2=omegas[1])
        except NVDecoherenceError as exc:
            raise ConfigError(sec.path, str(exc)) from exc
        info = None
        if scaling != "fixed":
            info = {"detuning1": e[0] - e[1] - omegas[0], "detuning2": e[2] - e[1] - omegas[1],
                    "scaling": scaling}
        return (effective_qudit_model(p) if rwa else p), info
    raise ConfigError(sec.name("type"), f"unknown model type {kind!r}")


def _load_schedule(sec, dim):
    kind = sec.get("kind", "amplify", kind=str)
    if kind == "dsl":
        text = sec.get("program", None, kind=str)
        fname = sec.get("program_file", None, kind=str)
        if (text is None) == (fname is None):
            raise ConfigError(sec.name("program"), "give exactly one of program / program_file")
        if fname is not None:
            path = Path(fname)
            if not path.is_absolute() and sec.base_dir is not None:
                path = Path(sec.base_dir) / path
            if not path.exists():
                raise ConfigError(sec.name("program_file"), f"file {str(path)!r} does not exist")
            text = path.read_text()
        try:
            return parse_sequence_dsl(text)
        except NVDecoherenceError as exc:
            raise ConfigError(sec.name("program"), str(exc)) from exc
    dt = sec.require("dt_us", kind=float)
    n = sec.require("n", kind=int)
    lam = sec.get("lambda", 0.0, kind=float)

    def mu_of(mu_key, tau_key):
        mu = sec.get(mu_key, None, kind=float)
        tau = sec.get(tau_key, None, kind=float)
        if mu is not None and tau is not None:
            raise ConfigError(sec.name(mu_key), f"give {mu_key} or {tau_key}, not both")
        if tau is not None:
            return mu_from_tau(tau, lam), tau
        return (mu or 0.0), None

    try:
        if kind == "amplify":
            sched = build_amplify_schedule(lam, dt, n, dim=dim)
        elif kind == "one_channel":
            mu, tau = mu_of("mu", "tau")
            sched = build_one_channel_schedule(lam, mu, dt, n, dim=dim)
            if tau is not None:
                sched = replace(sched, params={**sched.params, "tau": tau})
        elif kind == "two_channel":
            mu1, tau1 = mu_of("mu1", "tau1")
            mu2, tau2 = mu_of("mu2", "tau2")
            if dim != 3:
                raise ConfigError(sec.name("kind"), "two_channel needs a three-level model")
            sched = build_two_channel_schedule(lam, mu1, mu2, dt, n)
            taus = {k: v for k, v in (("tau1", tau1), ("tau2", tau2)) if v is not None}
            sched = replace(sched, params={**sched.params, **taus})
        elif kind == "general":
            waits = {_pair_key(k, dim, sec.name("waits_us")): float(v)
                     for k, v in dict(sec.get("waits_us", {})).items()}
            sched = build_general_schedule(dim, lam, waits, dt, n)
        else:
            raise ConfigError(sec.name("kind"), f"unknown schedule kind {kind!r}")
    except ConfigError:
        raise
    except NVDecoherenceError as exc:
        raise ConfigError(sec.path, str(exc)) from exc
    return sched


def _load_noise(sec):
    kind = sec.get("type", "static", kind=str)
    if kind == "static":
        g = sec.get("sigma_b_gauss", None, kind=float)
        r = sec.get("sigma_b_rad_per_us", None, kind=float)
        if (g is None) == (r is None):
            raise ConfigError(sec.name("sigma_b_gauss"), "give exactly one of sigma_b_gauss / sigma_b_rad_per_us")
        value = gauss_to_rad_per_us(g) if g is not None else r
        if value < 0:
            raise ConfigError(sec.name("sigma_b_gauss" if g is not None else "sigma_b_rad_per_us"),
                              "must be non-negative")
        return StaticGaussian(value)
    if kind == "ou":
        g = sec.get("l_gauss", None, kind=float)
        r = sec.get("l_rad_per_us", None, kind=float)
        if (g is None) == (r is None):
            raise ConfigError(sec.name("l_gauss"), "give exactly one of l_gauss / l_rad_per_us")
        rate = sec.get("R_per_us", None, kind=float)
        tau_c = sec.get("tau_c_us", None, kind=float)
        if (rate is None) == (tau_c is None):
            raise ConfigError(sec.name("R_per_us"), "give exactly one of R_per_us / tau_c_us")
        if rate is None:
            if tau_c <= 0:
                raise ConfigError(sec.name("tau_c_us"), "must be positive")
            rate = 1.0 / tau_c
        l = gauss_to_rad_per_us(g) if g is not None else r
        if l < 0:
            raise ConfigError(sec.name("l_gauss"), "must be non-negative")
        if rate <= 0:
            raise ConfigError(sec.name("R_per_us"), "must be positive")
        return OrnsteinUhlenbeck(l, rate)
    raise ConfigError(sec.name("type"), f"unknown noise type {kind!r}")


def _load_state(value, dim):
    if value is None:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = psi[-1] = 1.0
    else:
        try:
            entries = [complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v) for v in value]
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError("initial_state", "entries must be numbers or [re, im] pairs") from exc
        psi = np.array(entries, dtype=complex)
    if psi.shape != (dim,):
        raise ConfigError("initial_state", f"needs {dim} amplitudes")
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ConfigError("initial_state", "zero vector")
    return psi / norm


def load_config(source, base_dir=None):
    """
    Validate a config given as a dict, JSON text or a path.

    Raises
    ------
    ConfigError
        Naming the offending field.
    """
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        path = Path(source)
        if not path.exists():
            raise ConfigError("config", f"file {str(path)!r} does not exist")
        base_dir = base_dir or path.parent
        source = path.read_text()
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
    raw = copy.deepcopy(source)
    top = _Section(source, "", base_dir)
    mode = top.require("mode", kind=str)
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")
    cfg = ExperimentConfig(mode=mode, raw=raw)

    out = top.sub("output")
    cfg.out_dir = out.get("dir", "out", kind=str)
    cfg.fmt = out.get("format", "csv", kind=str)
    if cfg.fmt not in FORMATS:
        raise ConfigError("output.format", f"must be one of {FORMATS}")
    cfg.name = out.get("name", "run", kind=str)
    out.finish()

    cfg.master_seed = top.get("master_seed", 0, kind=int)
    if not 0 <= cfg.master_seed < 2 ** 64:
        raise ConfigError("master_seed", "must be an unsigned 64-bit integer")
    cfg.trajectories = top.get("trajectories", 10_000, kind=int)
    if cfg.trajectories < 1:
        raise ConfigError("trajectories", "must be >= 1")
    cfg.sample_stride = top.get("sample_stride", 1, kind=int)
    if cfg.sample_stride < 1:
        raise ConfigError("sample_stride", "must be >= 1")
    cfg.substep_phase = top.get("substep_phase", 0.05, kind=float)
    if not cfg.substep_phase > 0:
        raise ConfigError("substep_phase", "must be positive")
    cfg.workers = top.get("workers", 1, kind=int)

    if mode == "preset":
        if not top.has("trajectories"):
            cfg.trajectories = None
        cfg.preset = top.require("preset", kind=str)
        if cfg.preset not in PRESETS:
            raise UnknownPreset(cfg.preset)
        top.finish()
        return cfg

    model_sec = top.sub("model")
    model, scaling = _load_model(model_sec)
    model_sec.finish()
    cfg.model, cfg.detuning_scaling = model, scaling
    dim = 3 if isinstance(model, NVParams) else model.dim

    sched_sec = top.sub("schedule")
    if mode != "filter" or top.has("schedule"):
        cfg.schedule = _load_schedule(sched_sec, dim)
        if cfg.schedule.dim != dim:
            raise ConfigError("schedule", f"schedule dim {cfg.schedule.dim} != model dim {dim}")
    sched_sec.finish()

    noise_sec = top.sub("noise")
    cfg.noise = _load_noise(noise_sec)
    noise_sec.finish()
    cfg.initial_state = _load_state(top.get("initial_state"), dim)

    if mode == "sweep":
        sw = top.sub("sweep")
        cfg.sweep_param = sw.require("param", kind=str)
        from .engine.sweep import SWEEP_PARAMS

        if cfg.sweep_param not in SWEEP_PARAMS:
            raise ConfigError("sweep.param", f"must be one of {SWEEP_PARAMS}")
        values = sw.require("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values", "must be a non-empty list")
        try:
            cfg.sweep_values = tuple(float(v) for v in values)
        except (TypeError, ValueError) as exc:
            raise ConfigError("sweep.values", "must be numbers") from exc
        if not all(math.isfinite(v) for v in cfg.sweep_values):
            raise ConfigError("sweep.values", "must be finite")
        sw.finish()
    if mode == "filter":
        cfg.filter = _load_filter(top.sub("filter"), cfg)
    if mode == "analytic" and not isinstance(cfg.noise, StaticGaussian):
        raise ConfigError("noise.type", "analytic mode needs static noise")
    top.finish()
    return cfg


def _load_filter(sec, cfg):
    if not isinstance(cfg.noise, OrnsteinUhlenbeck):
        raise ConfigError("noise.type", "filter mode needs Ornstein-Uhlenbeck noise")
    out = {}
    kind = sec.get("kind", "periodic", kind=str)
    if kind == "periodic":
        dt = sec.require("dt_us", kind=float)
        lam = sec.require("lambda", kind=float)
        mu = sec.get("mu", None, kind=float)
        tau = sec.get("tau", None, kind=float)
        if (mu is None) == (tau is None):
            raise ConfigError(sec.name("mu"), "give exactly one of mu / tau")
        if mu is None:
            mu = mu_from_tau(tau, lam)
        periods = sec.get("periods", 1, kind=int)
        if not (lam > 0 and 0 <= mu <= lam and dt > 0 and periods >= 1):
            raise ConfigError(sec.path, "need lambda > 0, 0 <= mu <= lambda, dt_us > 0, periods >= 1")
        out.update(kind=kind, lam=lam, mu=mu, dt=dt, periods=periods)
    elif kind == "schedule":
        if cfg.schedule is None:
            raise ConfigError("schedule", "filter kind 'schedule' needs a schedule section")
        pair = sec.get("pair", "12", kind=str)
        out.update(kind=kind, pair=_pair_key(pair, cfg.schedule.dim, sec.name("pair")))
    else:
        raise ConfigError(sec.name("kind"), f"unknown filter kind {kind!r}")
    om = sec.get("omega_max_per_us", None, kind=float)
    if om is not None and om <= 0:
        raise ConfigError(sec.name("omega_max_per_us"), "must be positive")
    out["omega_max"] = om
    out["omega_points"] = sec.get("omega_points", 2001, kind=int)
    out["t_points"] = sec.get("t_points", 41, kind=int)
    if out["omega_points"] < 2 or out["t_points"] < 2:
        raise ConfigError(sec.path, "omega_points and t_points must be >= 2")
    sec.finish()
    return out


def nv_with_lambda(p, info, lam):
    """Re-tune drive frequencies when detunings scale as 1/(1 + lambda)."""
    if info is None:
        return p
    e = p.level_energies
    d1 = info["detuning1"] / (1 + lam)
    d2 = info["detuning2"] / (1 + lam)
    return replace(p, omega1=e[0] - e[1] - d1, omega2=e[2] - e[1] - d2)


def drive_period_dt(p, target_dt, multiple=4):
    """Step closest to ``target_dt`` spanning a whole number of ``multiple``-period drive blocks."""
    freqs = [abs(w) for w, B in ((p.omega1, p.B1), (p.omega2, p.B2)) if B > 0 and w != 0]
    if len(freqs) != 1:
        return target_dt
    block = multiple * TWO_PI / freqs[0]
    return block * max(1, round(target_dt / block))
