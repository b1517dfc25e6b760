"""
Small dense complex-matrix numerics.

Everything here works on ``(..., d, d)`` arrays so the Monte Carlo engine can
push whole batches of trajectories through one call. Dimensions are tiny
(d <= 8), so clarity wins over cleverness.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonHermitianInput,
    NotHermitian,
    NotPSD,
    TraceNotOne,
)

TOL_HERM = 1e-12
TOL_TRACE = 1e-12
TOL_PSD = 1e-10
TOL_UNITARY = 1e-12
MAX_DIM = 8


def _as_square(A, name="matrix"):
    A = np.asarray(A, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    if not 1 <= A.shape[-1] <= MAX_DIM:
        raise DimensionMismatch(f"{name} dimension {A.shape[-1]} outside 1..{MAX_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def dagger(A):
    return np.conj(np.swapaxes(A, -1, -2))


def hermiticity_residual(A):
    """Largest entrywise ``|A - A^dagger|`` (over a whole stack)."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(A - dagger(A))))


def _check_hermitian(H):
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    res = hermiticity_residual(H)
    if res > TOL_HERM * scale:
        raise NonHermitianInput(f"matrix not Hermitian: max|H - H^dagger| = {res:.3e}")


def expm_hermitian(H, t):
    """
    Return ``exp(-1j * H * t)`` for Hermitian ``H``.

    ``H`` may be a single matrix or a stack ``(..., d, d)``; ``t`` is a scalar
    or broadcasts against the stack shape. The exponential is built from the
    Hermitian eigendecomposition, so the result is unitary to rounding.
    Hermiticity is checked relative to ``max(1, max|H|)``.
    """
    H = _as_square(H, "H")
    _check_hermitian(H)
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("t must be finite")
    H = 0.5 * (H + dagger(H))
    w, v = np.linalg.eigh(H)
    phase = np.exp(-1j * w * t[..., None])
    return (v * phase[..., None, :]) @ dagger(v)


def expm_diagonal(diag, t):
    """``exp(-1j * diag(diag) * t)`` returned as the diagonal vector only."""
    return np.exp(-1j * np.asarray(diag, dtype=float) * np.asarray(t, dtype=float)[..., None])


def conjugate(U, A):
    """Return ``U^dagger A U``."""
    U = np.asarray(U, dtype=complex)
    A = np.asarray(A, dtype=complex)
    if U.shape[-2:] != A.shape[-2:] or U.shape[-1] != U.shape[-2]:
        raise DimensionMismatch(f"cannot conjugate {A.shape} by {U.shape}")
    return dagger(U) @ A @ U


def swap(dim, i, j):
    """Permutation unitary exchanging levels ``i`` and ``j`` (0-based)."""
    if not (0 <= i < dim and 0 <= j < dim) or i == j:
        raise DimensionMismatch(f"invalid swap ({i}, {j}) for dim {dim}")
    u = np.eye(dim, dtype=complex)
    u[[i, j]] = u[[j, i]]
    return u


def is_unitary(U, tol=TOL_UNITARY):
    U = np.asarray(U)
    eye = np.eye(U.shape[-1])
    return float(np.max(np.abs(dagger(U) @ U - eye))) <= tol


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density matrix. Build it with :func:`validate_density`."""

    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    def purity(self):
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def coherence(self, i, j):
        return complex(self.matrix[i, j])

    def populations(self):
        return np.real(np.diag(self.matrix)).copy()


def validate_density(rho, tol_herm=TOL_HERM, tol_trace=TOL_TRACE, tol_psd=TOL_PSD):
    """
    Check that ``rho`` is a density matrix and wrap it.

    Raises :class:`NotHermitian`, :class:`TraceNotOne` or :class:`NotPSD`
    with the measured residual. The input array is copied, never modified.
    """
    rho = _as_square(rho, "rho").copy()
    if rho.ndim != 2:
        raise DimensionMismatch("validate_density takes a single matrix")
    res = hermiticity_residual(rho)
    if res > tol_herm:
        raise NotHermitian(res)
    tr_err = abs(np.trace(rho) - 1.0)
    if tr_err > tol_trace:
        raise TraceNotOne(tr_err)
    lowest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lowest < -tol_psd:
        raise NotPSD(-lowest)
    rho.setflags(write=False)
    return DensityMatrix(rho)


def pure_state_density(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.einsum("...i,...j->...ij", psi, psi.conj())
