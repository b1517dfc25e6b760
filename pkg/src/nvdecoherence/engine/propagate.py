"""
Trajectory propagation for a batch of noise realizations.

Each trajectory is a pure state evolved by piecewise-constant unitaries, so
the batch carries state vectors of shape ``(C, d)`` and density matrices are
formed only at recording times.

Noise handling per segment:

* static Gaussian: one field value per trajectory;
* Ornstein-Uhlenbeck: the path is advanced exactly across each segment and
  the segment uses its exact time-averaged field, so the accumulated noise
  phase has the exact OU distribution.

Lab-frame mode integrates the microwave-driven NV Hamiltonian in the
interaction picture of its diagonal part with midpoint substeps bounded by
``||H|| h <= substep_phase``. With a single drive the lab Hamiltonian is
periodic, so one drive period is integrated and raised to the needed power.
"""
from __future__ import annotations

import math

import numpy as np

from .. import qmat
from ..errors import SubstepUnderflow
from ..model import SX, drive_field
from ..noise import OrnsteinUhlenbeck, StaticGaussian, ou_segment_step, path_rng
from ..schedule.core import GateEvent

MIN_SUBSTEP = 1e-9


def _ops(schedule):
    """Cycle as ('gate', (i, j)) / ('seg', duration, system_on), zero-length segments dropped."""
    ops = []
    for item in schedule.cycle:
        if isinstance(item, GateEvent):
            ops.append(("gate", item.pair))
        elif item.duration > 0:
            ops.append(("seg", item.duration, item.system_on))
    return ops


def _apply(kind, U, X):
    """Left-multiply the batch ``X`` (C, d, k) by a diagonal (C, d) or full (C, d, d) unitary."""
    if kind == "diag":
        return U[:, :, None] * X
    return U @ X


def _swap_rows(X, pair):
    i, j = pair
    X = X.copy()
    X[:, [i, j]] = X[:, [j, i]]
    return X


class _RotatingFrame:
    """Segment unitaries for a :class:`QuditModel` (time-independent H_S)."""

    def __init__(self, model):
        self.model = model
        self.H_S = model.hamiltonian()
        self.full = bool(np.any(model.J != 0))

    def segment(self, phase_integral, h, on):
        """
        Unitary for a segment of length ``h`` whose noise field integrates to
        ``phase_integral`` (one value per trajectory).
        """
        D = self.model.dephase
        if on and self.full:
            H = self.H_S[None] + (phase_integral / h)[:, None, None] * np.diag(D)[None]
            return "full", qmat.expm_hermitian(H, h)
        energies = phase_integral[:, None] * D[None]
        if on:
            energies = energies + self.model.eps[None] * h
        return "diag", np.exp(-1j * energies)


class _LabFrame:
    """Segment unitaries for the driven lab-frame NV Hamiltonian."""

    def __init__(self, p, substep_phase):
        self.p = p
        self.substep_phase = substep_phase
        self.E0 = p.level_energies
        self.sz = np.array([1.0, 0.0, -1.0])
        freqs = [w for w, B in ((p.omega1, p.B1), (p.omega2, p.B2)) if B > 0]
        self.period = 2 * math.pi / abs(freqs[0]) if len(freqs) == 1 and freqs[0] != 0 else None
        self.drive_norm = p.gamma * (p.B1 + p.B2)

    def energies(self, b):
        return self.E0[None] + b[:, None] * self.sz[None]

    def _substeps(self, E, t0, length):
        norm = float(np.max(np.abs(E))) + self.drive_norm
        n = max(1, math.ceil(length * norm / self.substep_phase))
        h = length / n
        if h < MIN_SUBSTEP:
            raise SubstepUnderflow(f"substep {h:.3e} us below {MIN_SUBSTEP:.0e} us")
        C = E.shape[0]
        U = np.broadcast_to(np.eye(3, dtype=complex), (C, 3, 3)).copy()
        gaps = E[:, :, None] - E[:, None, :]
        for k in range(n):
            tm = t0 + (k + 0.5) * h
            H_I = drive_field(self.p, tm) * SX[None] * np.exp(1j * gaps * tm)
            U = qmat.expm_hermitian(H_I, h) @ U
        left = np.exp(-1j * E * (t0 + length))
        right = np.exp(1j * E * t0)
        return left[:, :, None] * U * right[:, None, :]

    def segment(self, b, t0, h, on):
        E = self.energies(b)
        if not on or self.drive_norm == 0:
            return "diag", np.exp(-1j * E * h)
        if self.period is None:
            return "full", self._substeps(E, t0, h)
        T = self.period
        n_periods = int(math.floor(h / T + 1e-9))
        rem = h - n_periods * T
        phase0 = math.fmod(t0, T)
        U = np.broadcast_to(np.eye(3, dtype=complex), (E.shape[0], 3, 3)).copy()
        if n_periods:
            U = np.linalg.matrix_power(self._substeps(E, phase0, T), n_periods)
        if rem > 1e-12 * T:
            U = self._substeps(E, math.fmod(phase0 + n_periods * T, T), rem) @ U
        return "full", U


def _phase_key(t, period):
    if period is None:
        return round(t, 12)
    frac = (t / period) % 1.0
    if frac > 1 - 1e-9:
        frac = 0.0
    return round(frac, 9)


def _record_steps(spec):
    n_rec = spec.schedule.repeats // spec.sample_stride
    return n_rec + 1


def _static_fields(spec, indices):
    if spec.noise.sigma_b == 0:
        return np.zeros(len(indices))
    z = np.array([path_rng(spec.master_seed, k).standard_normal() for k in indices])
    return spec.noise.sigma_b * z


def propagate(spec, indices):
    """
    Evolve the trajectories ``indices`` of ``spec``.

    Returns state vectors of shape ``(len(indices), n_records, d)`` recorded
    at cycle 0 and after every ``sample_stride`` cycles.
    """
    indices = list(indices)
    if isinstance(spec.noise, StaticGaussian):
        if spec.lab_frame:
            return _static_lab(spec, indices)
        return _static_rotating(spec, indices)
    if isinstance(spec.noise, OrnsteinUhlenbeck):
        return _ou(spec, indices)
    raise TypeError(f"unsupported noise model {spec.noise!r}")


def _initial(spec, C):
    psi = np.broadcast_to(np.asarray(spec.initial_state, dtype=complex), (C, spec.dim))
    return psi[:, :, None].copy()


def _static_rotating(spec, indices):
    C, d = len(indices), spec.dim
    b = _static_fields(spec, indices)
    frame = _RotatingFrame(spec.model)
    U = np.broadcast_to(np.eye(d, dtype=complex), (C, d, d)).copy()
    for op in _ops(spec.schedule):
        if op[0] == "gate":
            U = _swap_rows(U, op[1])
        else:
            _, h, on = op
            kind, V = frame.segment(b * h, h, on)
            U = _apply(kind, V, U)
    step = np.linalg.matrix_power(U, spec.sample_stride)
    n_rec = _record_steps(spec)
    out = np.empty((C, n_rec, d), dtype=complex)
    psi = _initial(spec, C)
    out[:, 0] = psi[:, :, 0]
    for r in range(1, n_rec):
        psi = step @ psi
        out[:, r] = psi[:, :, 0]
    return out


def _static_lab(spec, indices):
    C, d = len(indices), spec.dim
    b = _static_fields(spec, indices)
    frame = _LabFrame(spec.model, spec.substep_phase)
    ops = _ops(spec.schedule)
    cycle_len = spec.schedule.cycle_duration
    cache = {}

    def cycle_unitary(t_start):
        key = _phase_key(t_start, frame.period)
        if key not in cache:
            if len(cache) > 64:
                cache.clear()
            U = np.broadcast_to(np.eye(d, dtype=complex), (C, d, d)).copy()
            t = t_start
            for op in ops:
                if op[0] == "gate":
                    U = _swap_rows(U, op[1])
                else:
                    _, h, on = op
                    kind, V = frame.segment(b, t, h, on)
                    U = _apply(kind, V, U)
                    t += h
            cache[key] = U
        return cache[key]

    n_rec = _record_steps(spec)
    out = np.empty((C, n_rec, d), dtype=complex)
    psi = _initial(spec, C)
    out[:, 0] = psi[:, :, 0]
    cycle = 0
    for r in range(1, n_rec):
        for _ in range(spec.sample_stride):
            psi = cycle_unitary(cycle * cycle_len) @ psi
            cycle += 1
        out[:, r] = psi[:, :, 0]
    return out


def _ou(spec, indices):
    C, d = len(indices), spec.dim
    noise = spec.noise
    ops = _ops(spec.schedule)
    n_seg = sum(1 for op in ops if op[0] == "seg")
    per_block = 2 * n_seg * spec.sample_stride
    rngs = [path_rng(spec.master_seed, k) for k in indices]
    b = noise.l * np.array([g.standard_normal() for g in rngs])
    lab = spec.lab_frame
    frame = _LabFrame(spec.model, spec.substep_phase) if lab else _RotatingFrame(spec.model)
    cycle_len = spec.schedule.cycle_duration
    n_rec = _record_steps(spec)
    out = np.empty((C, n_rec, d), dtype=complex)
    psi = _initial(spec, C)
    out[:, 0] = psi[:, :, 0]
    cycle = 0
    for r in range(1, n_rec):
        z = np.stack([g.standard_normal(per_block) for g in rngs]).reshape(C, -1, 2)
        k = 0
        for _ in range(spec.sample_stride):
            t = cycle * cycle_len
            for op in ops:
                if op[0] == "gate":
                    psi = _swap_rows(psi, op[1])
                    continue
                _, h, on = op
                b, integral = ou_segment_step(noise, b, h, z[:, k, 0], z[:, k, 1])
                k += 1
                if lab:
                    kind, V = frame.segment(integral / h, t, h, on)
                else:
                    kind, V = frame.segment(integral, h, on)
                psi = _apply(kind, V, psi)
                t += h
            cycle += 1
        out[:, r] = psi[:, :, 0]
    return out
