"""
Classical dephasing noise b(t).

Two models: a static Gaussian field drawn once per trajectory, and a
stationary Ornstein-Uhlenbeck process with correlation ``l^2 exp(-R|t|)``.

Seeding: trajectory ``k`` of an ensemble with master seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(k,)))``. SeedSequence hashes the pair
(s, k) into the generator state, so every path is reproducible on its own,
independent of worker count and execution order. Normal deviates come from
numpy's ``Generator.standard_normal`` (ziggurat).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidParam
from .model import gauss_to_rad_per_us


@dataclass(frozen=True)
class StaticGaussian:
    """Quasi-static field, ``b ~ Normal(0, sigma_b^2)`` per trajectory (rad/us)."""

    sigma_b: float

    def __post_init__(self):
        # zero is allowed as the noiseless limit
        if not (np.isfinite(self.sigma_b) and self.sigma_b >= 0):
            raise InvalidParam("sigma_b must be finite and non-negative")

    @classmethod
    def from_gauss(cls, sigma_gauss, **kw):
        return cls(gauss_to_rad_per_us(sigma_gauss, **kw))


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """Stationary OU field with strength ``l`` (rad/us) and rate ``R`` (1/us)."""

    l: float
    R: float

    def __post_init__(self):
        if not (np.isfinite(self.l) and self.l >= 0):
            raise InvalidParam("l must be finite and non-negative")
        if not (np.isfinite(self.R) and self.R > 0):
            raise InvalidParam("R must be positive")

    @property
    def tau_c(self):
        return 1.0 / self.R

    def correlation(self, t):
        return self.l ** 2 * np.exp(-self.R * np.abs(t))


NoiseModel = Union[StaticGaussian, OrnsteinUhlenbeck]


def path_rng(master_seed, index):
    """Generator for path ``index`` of the ensemble seeded by ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def sample_static(model, seed, size=None):
    """Draw ``b ~ Normal(0, sigma_b^2)``; deterministic for a given integer seed."""
    return model.sigma_b * _rng(seed).standard_normal(size)


@dataclass(frozen=True, eq=False)
class NoisePath:
    """
    Sampled field values on a time grid.

    ``values`` has shape ``(n_times,)`` for a single path or
    ``(n_paths, n_times)`` for a batch.
    """

    times: np.ndarray
    values: np.ndarray
    seed: int

    def to_csv(self, path):
        if self.values.ndim != 1:
            raise ValueError("CSV export handles a single path")
        with open(path, "w", newline="") as fh:
            fh.write(f"# seed {self.seed}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_us", "b_rad_per_us"])
            for t, b in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(b))])


def sample_ou_path(model, times, seed, n_paths=None):
    """
    Exact stationary OU samples on a uniform grid.

    ``b_0 ~ Normal(0, l^2)`` and ``b_{k+1} = b_k e^{-R dt} + l sqrt(1 - e^{-2R dt}) xi_k``.
    With ``n_paths`` given, path ``p`` uses ``path_rng(seed, p)``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise InvalidParam("times must be a non-empty 1-d grid")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise InvalidParam("times must be strictly increasing")
    if steps.size and not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise InvalidParam("sample_ou_path needs a uniform grid")
    dt = steps[0] if steps.size else 0.0
    decay = np.exp(-model.R * dt)
    kick = model.l * np.sqrt(-np.expm1(-2.0 * model.R * dt))
    if n_paths is None:
        xi = _rng(seed).standard_normal(times.size)
    else:
        xi = np.stack([path_rng(seed, p).standard_normal(times.size) for p in range(n_paths)])
    values = np.empty_like(xi)
    values[..., 0] = model.l * xi[..., 0]
    for k in range(1, times.size):
        values[..., k] = values[..., k - 1] * decay + kick * xi[..., k]
    return NoisePath(times, values, int(seed))


def spectral_density(model, omega):
    """Lorentzian ``l^2 2R / (R^2 + omega^2)``; integrates to ``l^2`` over ``d omega / 2 pi``."""
    omega = np.asarray(omega, dtype=float)
    return model.l ** 2 * 2.0 * model.R / (model.R ** 2 + omega ** 2)


def _bridge_residual_variance(x):
    """
    Conditional variance (in units of ``l^2/R^2``) of the integral of a
    unit-rate OU segment of length ``x`` given its start and end values.
    """
    x = np.asarray(x, dtype=float)
    small = x < 0.05
    out = np.empty_like(x)
    xs = x[small]
    out[small] = xs ** 3 / 6 - xs ** 5 / 60 + 17 * xs ** 7 / 10080 - 31 * xs ** 9 / 181440
    xl = x[~small]
    a = np.exp(-xl)
    full = 2 * xl - 3 + 4 * a - a ** 2
    cov = (1 - a) ** 2
    out[~small] = full - cov ** 2 / (1 - a ** 2)
    return np.maximum(out, 0.0)


def ou_segment_step(model, b0, h, z_end, z_int):
    """
    Advance an OU path exactly across a segment of length ``h``.

    Returns ``(b_end, integral)`` where ``integral`` is the exact integral of
    b over the segment, sampled jointly with the end value from the two
    standard normals ``z_end`` and ``z_int``. Works elementwise on arrays.
    """
    R, l = model.R, model.l
    x = R * np.asarray(h, dtype=float)
    one_minus_a = -np.expm1(-x)
    a = 1.0 - one_minus_a
    sd_end = l * np.sqrt(-np.expm1(-2.0 * x))
    dev_end = sd_end * z_end
    b_end = a * b0 + dev_end
    mean_int = b0 * one_minus_a / R
    # Cov(int, end) / Var(end) = tanh(x/2) / R
    k = np.tanh(0.5 * x) / R
    sd_res = (l / R) * np.sqrt(_bridge_residual_variance(x))
    integral = mean_int + k * dev_end + sd_res * z_int
    return b_end, integral
