"""
Trotter-cycle pulse schedules.

A cycle is an ordered list of :class:`Segment` and :class:`GateEvent` items
executed left to right in time. Operator products are written right to
left, so the product ``u e^{-iH t2} u e^{-iH t1}`` becomes the cycle
``[Segment(t1), Gate, Segment(t2), Gate]``. Every builder puts the
system-on slice first.

Gate pairs are 0-based level indices; the conventional 1-based label ``u_12`` is the
pair ``(0, 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Union

import numpy as np

from .. import qmat
from ..errors import InvalidParam

DURATION_TOL = 1e-12


@dataclass(frozen=True)
class Segment:
    duration: float
    system_on: bool
    noise_on: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise InvalidParam(f"segment duration must be finite and >= 0, got {self.duration}")


@dataclass(frozen=True)
class GateEvent:
    pair: tuple

    def __post_init__(self):
        i, j = (int(k) for k in self.pair)
        if not 0 <= i < j:
            raise InvalidParam(f"gate pair must satisfy 0 <= i < j, got {self.pair}")
        object.__setattr__(self, "pair", (i, j))


CycleItem = Union[Segment, GateEvent]


def _close(a, b):
    return math.isclose(a, b, rel_tol=1e-11, abs_tol=1e-15)


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    """
    One Trotter cycle repeated ``repeats`` times.

    ``params`` records the named parameters the schedule was built from and
    ``kind`` the builder; neither takes part in equality. Equality compares
    structure with durations matched to 1e-11 relative, so a schedule equals
    its own round trip through the 12-digit emitter.
    """

    dim: int
    dt: float
    cycle: tuple
    repeats: int
    params: dict = field(default_factory=dict)
    kind: str = "custom"
    source: str = ""

    def __post_init__(self):
        if not 2 <= self.dim <= qmat.MAX_DIM:
            raise InvalidParam(f"dim {self.dim} outside 2..{qmat.MAX_DIM}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise InvalidParam("dt must be positive")
        if int(self.repeats) != self.repeats or self.repeats < 1:
            raise InvalidParam("repeats must be a positive integer")
        cycle = tuple(self.cycle)
        for item in cycle:
            if isinstance(item, GateEvent):
                if item.pair[1] >= self.dim:
                    raise InvalidParam(f"gate {item.pair} outside dim {self.dim}")
            elif not isinstance(item, Segment):
                raise InvalidParam(f"unknown cycle item {item!r}")
        object.__setattr__(self, "cycle", cycle)
        object.__setattr__(self, "repeats", int(self.repeats))
        object.__setattr__(self, "params", dict(self.params))

    def __eq__(self, other):
        if not isinstance(other, PulseSchedule):
            return NotImplemented
        if (self.dim, self.repeats, len(self.cycle)) != (other.dim, other.repeats, len(other.cycle)):
            return False
        if not _close(self.dt, other.dt):
            return False
        for a, b in zip(self.cycle, other.cycle):
            if type(a) is not type(b):
                return False
            if isinstance(a, GateEvent):
                if a.pair != b.pair:
                    return False
            elif (a.system_on, a.noise_on) != (b.system_on, b.noise_on) or not _close(a.duration, b.duration):
                return False
        return True

    __hash__ = None

    @property
    def segments(self):
        return [item for item in self.cycle if isinstance(item, Segment)]

    @property
    def cycle_duration(self):
        """Wall-clock length of one cycle (us)."""
        return sum(s.duration for s in self.segments)

    @property
    def system_time_per_cycle(self):
        return sum(s.duration for s in self.segments if s.system_on)

    @property
    def total_time(self):
        return self.repeats * self.cycle_duration

    @property
    def system_time(self):
        return self.repeats * self.system_time_per_cycle

    @property
    def lam(self):
        """Decoupling-window length per cycle in units of ``dt``."""
        return (self.cycle_duration - self.system_time_per_cycle) / self.dt

    def gate_permutations(self):
        """
        Running permutation in force during each segment.

        Yields ``(segment, perm)`` where ``perm[m]`` is the original level whose
        amplitude currently sits in slot ``m``.
        """
        perm = np.arange(self.dim)
        for item in self.cycle:
            if isinstance(item, GateEvent):
                i, j = item.pair
                perm[[i, j]] = perm[[j, i]]
            else:
                yield item, perm.copy()

    def net_permutation(self):
        perm = np.arange(self.dim)
        for item in self.cycle:
            if isinstance(item, GateEvent):
                i, j = item.pair
                perm[[i, j]] = perm[[j, i]]
        return perm

    def is_balanced(self):
        return bool(np.all(self.net_permutation() == np.arange(self.dim)))

    def with_repeats(self, repeats):
        return PulseSchedule(self.dim, self.dt, self.cycle, repeats, self.params, self.kind, self.source)


def _check_common(lam, dt, n):
    if not (math.isfinite(lam) and lam >= 0):
        raise InvalidParam(f"lambda must be >= 0, got {lam}")
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidParam(f"dt must be > 0, got {dt}")
    if int(n) != n or n < 1:
        raise InvalidParam(f"n must be a positive integer, got {n}")


def mu_from_tau(tau, lam):
    """Convert the spacing parameter ``tau`` to ``mu`` via ``mu dt = tau lam dt / 2``."""
    return tau * lam / 2.0


def build_amplify_schedule(lam, dt, n, dim=3):
    """System-on slice ``dt`` followed by a noise-only window ``lam * dt``."""
    _check_common(lam, dt, n)
    cycle = (Segment(dt, True), Segment(lam * dt, False))
    return PulseSchedule(dim, dt, cycle, n, {"lambda": lam}, "amplify")


def build_one_channel_schedule(lam, mu, dt, n, dim=3):
    """
    Swap pair on the first channel splitting the window into
    ``(lam - mu) dt`` and ``mu dt``. For ``dim=2`` the gate is sigma_x.
    """
    _check_common(lam, dt, n)
    if dim not in (2, 3):
        raise InvalidParam("one-channel schedule supports dim 2 or 3")
    if not (0 <= mu <= lam):
        raise InvalidParam(f"need 0 <= mu <= lambda, got mu={mu}, lambda={lam}")
    g = GateEvent((0, 1))
    cycle = (Segment(dt, True), Segment((lam - mu) * dt, False), g, Segment(mu * dt, False), g)
    return PulseSchedule(dim, dt, cycle, n, {"lambda": lam, "mu": mu}, "one_channel")


def build_two_channel_schedule(lam, mu1, mu2, dt, n):
    """
    Three-level schedule with swaps on both channels. Windows are
    ``(lam - mu2) dt``, ``(mu2 - mu1) dt`` and ``mu1 dt``.

    Requires ``0 <= mu1 <= mu2 <= lam``; with ``mu1 > mu2`` the middle window
    would be negative and the point is infeasible (:class:`InvalidParam`).
    """
    _check_common(lam, dt, n)
    if not (0 <= mu1 <= lam and 0 <= mu2 <= lam):
        raise InvalidParam(f"need 0 <= mu1, mu2 <= lambda, got {mu1}, {mu2}, {lam}")
    if mu1 > mu2:
        raise InvalidParam(f"mu1 > mu2 gives a negative window ({mu2 - mu1} dt); infeasible")
    g12, g23 = GateEvent((0, 1)), GateEvent((1, 2))
    cycle = (
        Segment(dt, True),
        Segment((lam - mu2) * dt, False),
        g23,
        Segment((mu2 - mu1) * dt, False),
        g12,
        Segment(mu1 * dt, False),
        g12,
        g23,
    )
    return PulseSchedule(3, dt, cycle, n, {"lambda": lam, "mu1": mu1, "mu2": mu2}, "two_channel")


def build_general_schedule(dim, lam, waits, dt, n, t0=None):
    """
    d-level sequence with one swap per level pair.

    ``waits`` maps 0-based pairs ``(i, j)`` to absolute wait times (us);
    missing pairs wait zero. Swaps are applied in lexicographic pair order,
    each followed by its wait, then a closing block of the same swaps in the
    same order restores the identity permutation (the product of all
    transpositions in lexicographic order is the level reversal, an
    involution). ``t0`` defaults to the remainder ``lam * dt - sum(waits)``.
    """
    _check_common(lam, dt, n)
    pairs = list(combinations(range(dim), 2))
    waits = {tuple(k): float(v) for k, v in dict(waits).items()}
    unknown = set(waits) - set(pairs)
    if unknown:
        raise InvalidParam(f"pairs {sorted(unknown)} invalid for dim {dim}")
    if any(v < 0 for v in waits.values()):
        raise InvalidParam("waits must be non-negative")
    window = lam * dt
    used = sum(waits.values())
    if t0 is None:
        t0 = window - used
        if t0 < -DURATION_TOL * max(1.0, window):
            raise InvalidParam(f"waits sum to {used} > lambda*dt = {window}")
        t0 = max(t0, 0.0)
    elif t0 < 0 or abs(t0 + used - window) > DURATION_TOL * max(1.0, window):
        raise InvalidParam(f"t0 + sum(waits) = {t0 + used} must equal lambda*dt = {window}")
    cycle = [Segment(dt, True), Segment(t0, False)]
    for p in pairs:
        cycle += [GateEvent(p), Segment(waits.get(p, 0.0), False)]
    cycle += [GateEvent(p) for p in pairs]
    params = {"lambda": lam, "t0": t0}
    params.update({f"t{i + 1}{j + 1}": w for (i, j), w in waits.items()})
    return PulseSchedule(dim, dt, tuple(cycle), n, params, "general")


def rebuild(schedule, **changes):
    """Rebuild a schedule with some named parameters replaced.

    Accepts ``lam``/``lambda``, ``mu``, ``mu1``, ``mu2`` and the spacing
    variants ``tau``, ``tau1``, ``tau2``. A spacing parameter, once set, is
    kept in ``params`` and re-converted whenever ``lambda`` changes; an
    explicit ``mu`` drops the matching ``tau``.
    """
    params = dict(schedule.params)
    if "lam" in changes:
        changes["lambda"] = changes.pop("lam")
    for k in ("mu", "mu1", "mu2"):
        if k in changes:
            params.pop("tau" + k[2:], None)
    params.update(changes)
    lam = params.get("lambda", 0.0)
    taus = {k: params[k] for k in ("tau", "tau1", "tau2") if k in params}
    for k, v in taus.items():
        params["mu" + k[3:]] = mu_from_tau(v, lam)
    dt, n = schedule.dt, schedule.repeats
    if schedule.kind == "amplify":
        out = build_amplify_schedule(lam, dt, n, dim=schedule.dim)
    elif schedule.kind == "one_channel":
        out = build_one_channel_schedule(lam, params.get("mu", 0.0), dt, n, dim=schedule.dim)
    elif schedule.kind == "two_channel":
        out = build_two_channel_schedule(lam, params.get("mu1", 0.0), params.get("mu2", 0.0), dt, n)
    elif schedule.kind == "dsl":
        from .dsl import parse_sequence_dsl

        out = parse_sequence_dsl(schedule.source, overrides=params)
    else:
        raise InvalidParam(f"cannot rebuild a {schedule.kind!r} schedule from parameters")
    return replace(out, params={**out.params, **taus})
