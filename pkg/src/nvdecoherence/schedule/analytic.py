"""
First-order (average-Hamiltonian) analysis of pulse schedules and the
closed-form Gaussian-decay predictions for quasi-static noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .. import qmat
from ..errors import DimensionMismatch, UnsupportedSchedule
from ..model import default_dephase


def permutation_matrix(perm):
    """Matrix ``P`` with ``(P psi)[m] = psi[perm[m]]``."""
    d = len(perm)
    P = np.zeros((d, d), dtype=complex)
    P[np.arange(d), perm] = 1.0
    return P


def _require_balanced(schedule):
    if not schedule.is_balanced():
        raise UnsupportedSchedule(
            f"cycle net permutation {schedule.net_permutation().tolist()} is not the identity")


def _normaliser(schedule):
    on = schedule.system_time_per_cycle
    return on if on > 0 else schedule.dt


def effective_hamiltonian(schedule, model, b):
    """
    Cycle-averaged Hamiltonian at a fixed field ``b``.

    Each segment contributes its Hamiltonian in the toggling frame of the
    gates applied so far, weighted by duration; the sum is normalised by the
    system-on time per cycle so that ``H_S`` keeps unit weight.
    """
    if model.dim != schedule.dim:
        raise DimensionMismatch(f"model dim {model.dim} != schedule dim {schedule.dim}")
    _require_balanced(schedule)
    H_S = model.hamiltonian()
    H_SB = b * model.dephase_op()
    total = np.zeros((schedule.dim, schedule.dim), dtype=complex)
    for seg, perm in schedule.gate_permutations():
        H = H_SB + (H_S if seg.system_on else 0.0)
        total += seg.duration * qmat.conjugate(permutation_matrix(perm), H)
    return total / _normaliser(schedule)


def cycle_unitary(schedule, model, b):
    """
    Exact unitary of one cycle at a fixed field ``b``.

    Items act in cycle order (the first segment is applied first); each
    segment is ``exp(-i (H_S + b Z) h)`` or ``exp(-i b Z h)`` and each gate
    is the level swap.
    """
    if model.dim != schedule.dim:
        raise DimensionMismatch(f"model dim {model.dim} != schedule dim {schedule.dim}")
    d = schedule.dim
    H_S = model.hamiltonian()
    H_SB = b * model.dephase_op()
    U = np.eye(d, dtype=complex)
    for item in schedule.cycle:
        if hasattr(item, "pair"):
            U = qmat.swap(d, *item.pair) @ U
        else:
            H = H_SB + (H_S if item.system_on else 0.0)
            U = qmat.expm_hermitian(H, item.duration) @ U
    return U


def schedule_unitary(schedule, model, b):
    """Unitary of the whole schedule (``repeats`` cycles) at a fixed field ``b``."""
    return np.linalg.matrix_power(cycle_unitary(schedule, model, b), schedule.repeats)


@dataclass(frozen=True, eq=False)
class PairCoefficients:
    """
    Effective dephasing coefficients ``c_ij = w_i - w_j`` for 0-based pairs.

    ``weights`` are the per-level accumulated noise weights per cycle in
    units of the system-on step.
    """

    weights: np.ndarray

    @property
    def dim(self):
        return len(self.weights)

    def __getitem__(self, pair):
        i, j = pair
        return float(self.weights[i] - self.weights[j])

    def pairs(self):
        return list(combinations(range(self.dim), 2))

    def as_dict(self):
        return {p: self[p] for p in self.pairs()}

    def labelled(self):
        """Same table keyed by 1-based labels such as ``"12"``."""
        return {f"{i + 1}{j + 1}": c for (i, j), c in self.as_dict().items()}


def pair_coefficients(schedule, dephase=None):
    """
    Per-level phase bookkeeping over one cycle.

    ``dephase`` is the diagonal of the noise coupling operator (defaults to
    the NV weights for the schedule's dimension). Level ``n`` picks up the
    weight of whichever slot it occupies during each segment.
    """
    _require_balanced(schedule)
    if dephase is None:
        dephase = default_dephase(schedule.dim)
    dephase = np.asarray(dephase, dtype=float)
    if dephase.ndim == 2:
        dephase = np.real(np.diag(dephase))
    if dephase.shape != (schedule.dim,):
        raise DimensionMismatch("dephase weights do not match schedule dim")
    w = np.zeros(schedule.dim)
    for seg, perm in schedule.gate_permutations():
        w[perm] += seg.duration * dephase
    return PairCoefficients(w / _normaliser(schedule))


def one_channel_coefficients(lam, mu):
    """(c12, c13, c23) for the three-level one-channel sequence."""
    return (1 + lam - 2 * mu, 2 + 2 * lam - mu, 1 + lam + mu)


def two_channel_coefficients(lam, mu1, mu2):
    """(c12, c13, c23) for the three-level two-channel sequence.

    Defined for every (mu1, mu2), including the region mu1 > mu2 that no
    non-negative schedule realises.
    """
    return (1 + lam - (mu1 - mu2), 2 + 2 * lam - (2 * mu1 + mu2), 1 + lam - (mu1 + 2 * mu2))


def analytic_t2(c, sigma_b):
    """
    1/e time ``sqrt(2) / (sigma_b |c|)`` of ``exp(-sigma_b^2 c^2 t^2 / 2)``.

    ``c`` is the pair coefficient in system-on time; ``math.inf`` when the
    pair is fully decoupled.
    """
    if not sigma_b > 0:
        raise ValueError("sigma_b must be positive")
    if c == 0:
        return math.inf
    return math.sqrt(2.0) / (sigma_b * abs(c))


def analytic_coherence(c, sigma_b, t):
    """Normalised coherence ``exp(-sigma_b^2 c^2 t^2 / 2)`` under static Gaussian noise."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    return np.exp(-0.5 * (sigma_b * c * t) ** 2)
