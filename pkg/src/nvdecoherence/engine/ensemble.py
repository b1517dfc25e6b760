"""
Monte Carlo ensembles over noise realizations.

Trajectories are split into fixed-size chunks that do not depend on the
worker count. Each chunk returns moment sums; the sums are merged by a
pairwise tree in chunk order, so the result is bit-identical for any number
of workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Union

import numpy as np

from ..errors import DimensionMismatch, InvalidParam
from ..model import NVParams, QuditModel
from ..noise import NoiseModel
from ..schedule.core import PulseSchedule
from .propagate import propagate

DEFAULT_CHUNK = 256


@dataclass(frozen=True, eq=False)
class SimulationSpec:
    """
    Everything needed to reproduce an ensemble run.

    ``model`` is a rotating-frame :class:`QuditModel` or, for lab-frame
    integration, an :class:`NVParams` (three levels, drive on while the
    schedule's system is on).
    """

    model: Union[QuditModel, NVParams]
    schedule: PulseSchedule
    noise: NoiseModel
    initial_state: np.ndarray
    trajectories: int = 10_000
    sample_stride: int = 1
    master_seed: int = 0
    substep_phase: float = 0.05
    chunk_size: int = DEFAULT_CHUNK

    def __post_init__(self):
        psi = np.asarray(self.initial_state, dtype=complex).reshape(-1)
        norm = float(np.vdot(psi, psi).real)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidParam(f"initial state not normalised (|psi|^2 = {norm!r})")
        if psi.size != self.dim:
            raise DimensionMismatch(f"initial state has {psi.size} amplitudes, model has dim {self.dim}")
        if self.schedule.dim != self.dim:
            raise DimensionMismatch(f"schedule dim {self.schedule.dim} != model dim {self.dim}")
        if int(self.trajectories) != self.trajectories or self.trajectories < 1:
            raise InvalidParam("trajectories must be >= 1")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise InvalidParam("sample_stride must be >= 1")
        if self.chunk_size < 1:
            raise InvalidParam("chunk_size must be >= 1")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise InvalidParam("master_seed must fit in 64 unsigned bits")
        psi.setflags(write=False)
        object.__setattr__(self, "initial_state", psi)

    @property
    def lab_frame(self):
        return isinstance(self.model, NVParams)

    @property
    def dim(self):
        return 3 if self.lab_frame else self.model.dim

    @property
    def dephase(self):
        if self.lab_frame:
            return np.array([1.0, 0.0, -1.0])
        return self.model.dephase

    def record_cycles(self):
        n = self.schedule.repeats // self.sample_stride
        return np.arange(n + 1) * self.sample_stride

    def times(self):
        """System-on (simulated) time at each record, us."""
        return self.record_cycles() * self.schedule.system_time_per_cycle

    def wall_times(self):
        return self.record_cycles() * self.schedule.cycle_duration

    def replace(self, **changes):
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return SimulationSpec(**fields)


@dataclass(frozen=True, eq=False)
class CoherenceSeries:
    """Ensemble-mean ``rho_ij`` over time with the standard error of the mean."""

    pair: tuple
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    wall_times: Optional[np.ndarray] = None

    @property
    def label(self):
        i, j = self.pair
        return f"{i + 1}{j + 1}"

    @property
    def magnitude(self):
        return np.abs(self.values)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    spec: SimulationSpec
    times: np.ndarray
    wall_times: np.ndarray
    rho: np.ndarray
    stderr: np.ndarray
    trajectories: int
    coherences: list = field(default_factory=list)

    @property
    def populations(self):
        return np.real(np.einsum("tii->ti", self.rho))

    @property
    def population_stderr(self):
        return np.einsum("tii->ti", self.stderr)

    def series(self, i, j):
        for s in self.coherences:
            if s.pair == (i, j):
                return s
        raise KeyError((i, j))


def _chunks(spec):
    return [(start, min(start + spec.chunk_size, spec.trajectories))
            for start in range(0, spec.trajectories, spec.chunk_size)]


def _chunk_moments(spec, bounds):
    """Sums of rho and |rho_ij|^2 over the trajectories of one chunk."""
    psi = propagate(spec, range(*bounds))
    rho = psi[:, :, :, None] * psi[:, :, None, :].conj()
    return rho.sum(axis=0), (np.abs(rho) ** 2).sum(axis=0)


def _tree_sum(parts):
    parts = list(parts)
    while len(parts) > 1:
        merged = [tuple(a + b for a, b in zip(parts[k], parts[k + 1]))
                  for k in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def _run_chunk(args):
    spec, bounds = args
    return _chunk_moments(spec, bounds)


def run_ensemble(spec, workers=1):
    """
    Average ``rho(t)`` over ``spec.trajectories`` noise realizations.

    ``workers`` only changes speed; results are bit-identical for any value.
    """
    chunks = _chunks(spec)
    if workers <= 1 or len(chunks) == 1:
        parts = [_chunk_moments(spec, c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(spec, c) for c in chunks]))
    s1, s2 = _tree_sum(parts)
    n = spec.trajectories
    mean = s1 / n
    if n > 1:
        var = np.maximum(s2 - n * np.abs(mean) ** 2, 0.0) / (n - 1)
        stderr = np.sqrt(var / n)
    else:
        stderr = np.zeros(mean.shape)
    times, wall = spec.times(), spec.wall_times()
    coherences = [
        CoherenceSeries((i, j), times, mean[:, i, j].copy(), stderr[:, i, j].copy(), wall)
        for i, j in combinations(range(spec.dim), 2)
    ]
    return EnsembleResult(spec, times, wall, mean, stderr, n, coherences)


def evolve_trajectory(spec, trajectory_index):
    """Density matrices of a single trajectory at every record time."""
    if not 0 <= trajectory_index < spec.trajectories:
        raise InvalidParam(f"trajectory index {trajectory_index} out of range")
    psi = propagate(spec, [trajectory_index])[0]
    return spec.times(), psi[:, :, None] * psi[:, None, :].conj()
