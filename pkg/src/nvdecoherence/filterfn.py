"""
Filter-function analysis of pulsed dephasing.

A pulse pattern is a +/-1 valued function ``f(t')`` on ``[0, t]`` that flips
sign at each pulse. The accumulated phase ``int b(t') f(t') dt'`` of a
Gaussian noise field has variance ``2 chi(t)`` with

    chi(t) = int_0^inf d omega / 2 pi  C(omega) |F(omega)|^2,
    F(omega) = int_0^t exp(i omega t') f(t') dt',

so the coherence envelope is ``W = exp(-w^2 chi)`` for a pair whose phase
picks up ``w`` times the field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidParam, OutOfRange, QuadratureNotConverged, UnsupportedSchedule
from .model import default_dephase
from .noise import OrnsteinUhlenbeck, spectral_density

MAX_EVALUATIONS = 1_000_000
RTOL = 1e-8
CUTOFF_FACTOR = 200.0
_OMEGA_BLOCK = 2048

# Gauss-Legendre nodes on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class FilterSpec:
    """
    Sign-switching pattern on ``[0, total_time]``.

    Parameters
    ----------
    pulse_times : sequence of float
        Strictly increasing, inside ``(0, total_time)``.
    total_time : float
    initial_sign : int
        Value of ``f`` before the first pulse.
    """

    pulse_times: tuple
    total_time: float
    initial_sign: int = 1

    def __post_init__(self):
        times = tuple(float(x) for x in self.pulse_times)
        t = float(self.total_time)
        if not (math.isfinite(t) and t > 0):
            raise InvalidParam("total_time must be positive")
        if times and not (0 < times[0] and times[-1] < t and all(a < b for a, b in zip(times, times[1:]))):
            raise InvalidParam("pulse times must satisfy 0 < t1 < ... < tn < t")
        if self.initial_sign not in (1, -1):
            raise InvalidParam("initial_sign must be +1 or -1")
        object.__setattr__(self, "pulse_times", times)
        object.__setattr__(self, "total_time", t)

    def intervals(self):
        """``(starts, lengths, signs)`` of the constant-sign pieces."""
        edges = np.array((0.0,) + self.pulse_times + (self.total_time,))
        signs = self.initial_sign * (-1.0) ** np.arange(len(edges) - 1)
        return edges[:-1], np.diff(edges), signs

    def truncated(self, t):
        """The same pattern observed only up to ``t``."""
        if not 0 < t <= self.total_time * (1 + 1e-12):
            raise OutOfRange(f"t={t} outside (0, {self.total_time}]")
        t = min(t, self.total_time)
        return FilterSpec(tuple(p for p in self.pulse_times if p < t), t, self.initial_sign)


@dataclass(frozen=True)
class PeriodicWindowSpec:
    """``m`` repetitions of (+1 for ``delta1``, -1 for ``delta2``) with ``delta = delta1 + delta2``."""

    delta: float
    delta1: float
    delta2: float
    periods: int = 1

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidParam("delta must be positive")
        if self.delta1 < 0 or self.delta2 < 0:
            raise InvalidParam("delta1 and delta2 must be non-negative")
        if abs(self.delta1 + self.delta2 - self.delta) > 1e-12 * max(1.0, self.delta):
            raise InvalidParam("delta1 + delta2 must equal delta")
        if int(self.periods) != self.periods or self.periods < 1:
            raise InvalidParam("periods must be a positive integer")

    @classmethod
    def from_schedule_params(cls, lam, mu, dt, periods=1):
        return cls(lam * dt, (lam - mu) * dt, mu * dt, periods)

    @property
    def total_time(self):
        return self.periods * self.delta

    def to_filter_spec(self):
        lengths = [self.delta1, self.delta2] * self.periods
        signs = [1, -1] * self.periods
        return filter_from_intervals(lengths, signs)


@dataclass(frozen=True)
class RepeatedPattern:
    """A unit :class:`FilterSpec` repeated ``repeats`` times back to back."""

    unit: FilterSpec
    repeats: int = 1

    def __post_init__(self):
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise InvalidParam("repeats must be a positive integer")

    @property
    def period(self):
        return self.unit.total_time

    @property
    def total_time(self):
        return self.repeats * self.unit.total_time

    def to_filter_spec(self):
        _, h, s = self.unit.intervals()
        return filter_from_intervals(list(h) * self.repeats, list(s) * self.repeats)

    def truncated(self, t):
        n = t / self.period
        if abs(n - round(n)) < 1e-9 and round(n) >= 1:
            return RepeatedPattern(self.unit, int(round(n)))
        return self.to_filter_spec().truncated(t)


def filter_from_intervals(lengths, signs):
    """Build a :class:`FilterSpec` from consecutive (length, sign) pieces, merging where the sign repeats."""
    pieces = [(float(h), int(s)) for h, s in zip(lengths, signs) if h > 0]
    if not pieces:
        raise InvalidParam("pattern has zero total length")
    pulses, t = [], 0.0
    sign = pieces[0][1]
    for h, s in pieces:
        if s != sign:
            pulses.append(t)
            sign = s
        t += h
    return FilterSpec(tuple(pulses), t, pieces[0][1])


def filter_from_schedule(schedule, pair=(0, 1), dephase=None, cycles=None, include_system=True):
    """
    Filter pattern seen by the coherence ``pair`` under a pulse schedule.

    Each segment contributes its wall-clock duration with sign given by
    how the swaps have moved the two levels. Returns
    ``(RepeatedPattern, weight)`` covering ``cycles`` cycles (default: all),
    where ``weight`` is the magnitude of the per-segment phase rate, so the
    envelope is ``exp(-weight**2 * chi)``.

    Raises
    ------
    UnsupportedSchedule
        The pair's phase rate is not a fixed magnitude with switching sign
        (e.g. a three-level pair that is sometimes insensitive).
    """
    if dephase is None:
        dephase = default_dephase(schedule.dim)
    dephase = np.asarray(dephase, dtype=float)
    i, j = pair
    lengths, rates = [], []
    for seg, perm in schedule.gate_permutations():
        if seg.duration == 0 or (not include_system and seg.system_on):
            continue
        slot_i, slot_j = int(np.flatnonzero(perm == i)[0]), int(np.flatnonzero(perm == j)[0])
        rate = dephase[slot_i] - dephase[slot_j] if seg.noise_on else 0.0
        lengths.append(seg.duration)
        rates.append(rate)
    mags = {round(abs(r), 12) for r in rates}
    if len(mags) != 1 or 0.0 in mags:
        raise UnsupportedSchedule(f"pair {pair} phase rates {sorted(mags)} are not a single +/- magnitude")
    weight = abs(rates[0])
    n = schedule.repeats if cycles is None else int(cycles)
    if n < 1:
        raise InvalidParam("cycles must be >= 1")
    signs = [int(np.sign(r)) for r in rates]
    return RepeatedPattern(filter_from_intervals(lengths, signs), n), weight


def filter_value(spec, t_prime):
    """``f(t; t')``; at a pulse time the value of the interval to its left."""
    if not isinstance(spec, FilterSpec):
        spec = spec.to_filter_spec()
    tp = np.asarray(t_prime, dtype=float)
    if np.any(tp < 0) or np.any(tp > spec.total_time):
        raise OutOfRange(f"t' must lie in [0, {spec.total_time}]")
    k = np.searchsorted(np.asarray(spec.pulse_times), tp, side="left")
    out = spec.initial_sign * (1 - 2 * (k % 2))
    return int(out) if out.ndim == 0 else out


def filter_ft(spec, omega):
    """Complex ``F(omega)`` summed exactly over the constant-sign intervals."""
    omega = np.asarray(omega, dtype=float)
    flat = omega.reshape(-1)
    a, h, s = spec.intervals()
    mid = a + 0.5 * h
    out = np.empty(flat.shape, dtype=complex)
    for k in range(0, flat.size, _OMEGA_BLOCK):
        w = flat[k:k + _OMEGA_BLOCK, None]
        # int_a^{a+h} e^{i w t} dt = e^{i w (a + h/2)} h sinc(w h / 2 pi)
        terms = s * h * np.sinc(w * h / (2 * np.pi)) * np.exp(1j * w * mid)
        out[k:k + _OMEGA_BLOCK] = terms.sum(axis=1)
    return out.reshape(omega.shape)


def filter_ft_sq_numeric(spec, omega):
    """``|F(omega)|^2`` in us^2, exact up to rounding for any pattern."""
    if isinstance(spec, PeriodicWindowSpec):
        spec = spec.to_filter_spec()
    if isinstance(spec, RepeatedPattern):
        omega = np.asarray(omega, dtype=float)
        unit = np.abs(filter_ft(spec.unit, omega)) ** 2
        return unit * _period_ratio_sq(omega * spec.period, spec.repeats)
    return np.abs(filter_ft(spec, omega)) ** 2


def _sinc_half(omega, width):
    """``2 sin(omega width / 2) / omega``, finite at omega = 0."""
    return width * np.sinc(omega * width / (2 * np.pi))


def _period_ratio_sq(x, m):
    """``(1 - cos m x) / (1 - cos x)`` with the limit ``m^2`` at ``x = 2 pi k``."""
    y = 0.5 * np.asarray(x, dtype=float)
    e = y - np.pi * np.round(y / np.pi)
    small = np.abs(e) < 1e-4
    safe = np.where(small, 1.0, e)
    ratio = np.where(small, m * (1 - (m * m - 1) * e * e / 6.0), np.sin(m * safe) / np.sin(safe))
    return ratio * ratio


def filter_ft_sq_closed(spec, omega):
    """
    Closed-form ``|F|^2`` for the periodic window pattern:

        (1/omega^2) (6 + 2 cos w d - 4 cos w d1 - 4 cos w d2)
            * (1 - cos w m d) / (1 - cos w d),

    evaluated through ``1 - cos x = 2 sin^2(x/2)`` so that both removable
    singularities (omega -> 0 and omega d = 2 pi k) are handled exactly.
    """
    omega = np.asarray(omega, dtype=float)
    d, d1, d2 = spec.delta, spec.delta1, spec.delta2
    single = (2 * _sinc_half(omega, d1) ** 2 + 2 * _sinc_half(omega, d2) ** 2
              - _sinc_half(omega, d) ** 2)
    return single * _period_ratio_sq(omega * d, spec.periods)


def default_omega_max(spec, noise):
    """``200 max(R, 2 pi / delta)`` with ``delta`` the period or shortest interval."""
    if isinstance(spec, PeriodicWindowSpec):
        scale = spec.delta
    elif isinstance(spec, RepeatedPattern):
        scale = spec.period
    else:
        _, h, _ = spec.intervals()
        scale = float(h.min())
    return CUTOFF_FACTOR * max(noise.R, 2 * np.pi / scale)


def _interval_count(spec):
    if isinstance(spec, PeriodicWindowSpec):
        return 2 * spec.periods
    if isinstance(spec, RepeatedPattern):
        return spec.repeats * (len(spec.unit.pulse_times) + 1)
    return len(spec.pulse_times) + 1


class ChiResult(NamedTuple):
    value: float
    truncation_bound: float
    evaluations: int
    omega_max: float


def truncation_bound(noise, total_time, n_intervals, omega_max):
    """
    Upper bound on the neglected tail ``int_{omega_max}^inf``.

    Uses ``C <= 2 l^2 R / omega^2`` together with ``|F|^2 <= t^2`` and
    ``|F| <= 2 N / omega``.
    """
    pref = noise.l ** 2 * noise.R / np.pi
    return float(min(pref * total_time ** 2 / omega_max,
                     pref * 4 * n_intervals ** 2 / (3 * omega_max ** 3)))


def _panel_edges(t, R, omega_max):
    width = 2 * np.pi / t
    lo = min(R, width) * 1e-4
    geo = lo * 2.0 ** np.arange(0, 60)
    geo = geo[geo < min(width, omega_max)]
    uniform = np.arange(width, omega_max, width)
    edges = np.unique(np.concatenate([[0.0], geo, uniform, [omega_max]]))
    return edges


def _gl(f, a, b):
    w = (b - a)[:, None]
    x = a[:, None] + w * _GL_X[None]
    return (f(x.reshape(-1)).reshape(x.shape) * _GL_W[None]).sum(axis=1) * w[:, 0]


def chi(spec, noise, t=None, omega_max=None, rtol=RTOL, max_evaluations=MAX_EVALUATIONS):
    """
    Attenuation exponent for the pattern under OU noise.

    Parameters
    ----------
    spec : FilterSpec, PeriodicWindowSpec or RepeatedPattern
    noise : OrnsteinUhlenbeck
    t : float, optional
        Observe the pattern only up to ``t`` (defaults to its total time).
    omega_max : float, optional
        Integration cutoff; defaults to :func:`default_omega_max`.

    Returns
    -------
    ChiResult
        ``value`` plus an upper bound on the truncated tail.

    Raises
    ------
    QuadratureNotConverged
        Relative tolerance not reached within ``max_evaluations``.
    """
    if not isinstance(noise, OrnsteinUhlenbeck):
        raise InvalidParam("chi needs an Ornstein-Uhlenbeck noise model")
    if t is not None and isinstance(spec, PeriodicWindowSpec) and not math.isclose(t, spec.total_time):
        spec = spec.to_filter_spec()
    if t is not None and isinstance(spec, (FilterSpec, RepeatedPattern)):
        spec = spec.truncated(t)
    if omega_max is None:
        omega_max = default_omega_max(spec, noise)
    if not omega_max > 0:
        raise InvalidParam("omega_max must be positive")
    total = spec.total_time
    n_int = _interval_count(spec)
    bound = truncation_bound(noise, total, n_int, omega_max)
    if noise.l == 0:
        return ChiResult(0.0, 0.0, 0, omega_max)

    weight = filter_ft_sq_closed if isinstance(spec, PeriodicWindowSpec) else filter_ft_sq_numeric

    def integrand(w):
        return spectral_density(noise, w) * weight(spec, w) / (2 * np.pi)

    edges = _panel_edges(total, noise.R, omega_max)
    a, b = edges[:-1], edges[1:]
    evals = 0
    done = done_err = 0.0
    while True:
        m = 0.5 * (a + b)
        coarse = _gl(integrand, a, b)
        fine = _gl(integrand, a, m) + _gl(integrand, m, b)
        evals += 3 * len(_GL_X) * a.size
        err = np.abs(fine - coarse)
        value = done + fine.sum()
        if done_err + err.sum() <= rtol * abs(value) or value == 0:
            return ChiResult(float(value), bound, evals, omega_max)
        if evals >= max_evaluations:
            raise QuadratureNotConverged(
                f"chi: error {done_err + err.sum():.3e} above {rtol:g} relative after {evals} evaluations")
        # refine the worst panels until the rest carry under half the error budget
        order = np.argsort(err)[::-1]
        budget = 0.5 * rtol * abs(value) - done_err
        tail = np.cumsum(err[order][::-1])[::-1]
        n_refine = max(1, int(np.searchsorted(-tail, -budget, side="left")))
        pick, keep = order[:n_refine], order[n_refine:]
        done += fine[keep].sum()
        done_err += err[keep].sum()
        am, bm, mm = a[pick], b[pick], m[pick]
        a = np.concatenate([am, mm])
        b = np.concatenate([mm, bm])


def chi_free_induction(noise, t):
    """Closed form ``(l/R)^2 (exp(-R t) + R t - 1)`` for an unpulsed window."""
    x = noise.R * np.asarray(t, dtype=float)
    series = x * x / 2 - x ** 3 / 6 + x ** 4 / 24 - x ** 5 / 120
    val = np.where(x < 1e-3, series, np.expm1(-x) + x)
    return (noise.l / noise.R) ** 2 * val


def coherence_envelope(spec, noise, t=None, omega_max=None, weight=1.0):
    """``exp(-weight^2 chi(t))``, a magnitude in [0, 1]."""
    if t is not None and t == 0:
        return 1.0
    return float(np.exp(-(weight ** 2) * chi(spec, noise, t, omega_max).value))
