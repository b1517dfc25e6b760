"""
NV-center Hamiltonians and the effective qudit model.

Units: time in microseconds, angular frequency in rad/us, magnetic field in
Gauss. The level ordering is (m=+1, m=0, m=-1) everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qmat
from .errors import DimensionMismatch, InvalidParam

TWO_PI = 2.0 * np.pi
# electron gyromagnetic ratio for g ~ 2: 2.8025 MHz/G
GAMMA_E = TWO_PI * 2.8025

SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / np.sqrt(2.0)


def ghz_to_rad_per_us(f_ghz):
    return TWO_PI * 1e3 * f_ghz


def mhz_to_rad_per_us(f_mhz):
    return TWO_PI * f_mhz


def gauss_to_rad_per_us(b_gauss, gamma=GAMMA_E):
    return gamma * b_gauss


@dataclass(frozen=True)
class NVParams:
    """Lab-frame NV parameters in internal units (rad/us, Gauss)."""

    D: float
    Bz: float
    gamma: float = GAMMA_E
    B1: float = 0.0
    B2: float = 0.0
    omega1: float = 0.0
    omega2: float = 0.0

    def __post_init__(self):
        if not self.D > 0:
            raise InvalidParam("D must be positive")
        if not self.gamma > 0:
            raise InvalidParam("gamma must be positive")
        for name in ("B1", "B2"):
            if getattr(self, name) < 0:
                raise InvalidParam(f"{name} must be non-negative")

    @classmethod
    def from_lab_units(cls, D_ghz, Bz_gauss, B1_gauss=0.0, B2_gauss=0.0,
                       f1_ghz=0.0, f2_ghz=0.0, gamma_mhz_per_gauss=2.8025):
        return cls(D=ghz_to_rad_per_us(D_ghz), Bz=Bz_gauss,
                   gamma=mhz_to_rad_per_us(gamma_mhz_per_gauss),
                   B1=B1_gauss, B2=B2_gauss,
                   omega1=ghz_to_rad_per_us(f1_ghz), omega2=ghz_to_rad_per_us(f2_ghz))

    @property
    def level_energies(self):
        """Diagonal of the static NV Hamiltonian, (E+1, E0, E-1)."""
        zeeman = self.gamma * self.Bz
        return np.array([self.D + zeeman, 0.0, self.D - zeeman])

    @property
    def drive_count(self):
        return int(self.B1 > 0) + int(self.B2 > 0)


def nv_hamiltonian(p):
    """Static NV Hamiltonian ``D Sz^2 + gamma Bz Sz``."""
    return np.diag(p.level_energies).astype(complex)


def drive_field(p, t):
    """Total x-field term ``gamma (B1 cos w1 t + B2 cos w2 t)`` in rad/us."""
    t = np.asarray(t, dtype=float)
    return p.gamma * (p.B1 * np.cos(p.omega1 * t) + p.B2 * np.cos(p.omega2 * t))


def driven_hamiltonian(p, t):
    """Lab-frame Hamiltonian with both microwave drives at time ``t``."""
    return nv_hamiltonian(p) + drive_field(p, t) * SX


def frame_generator(p):
    """Rotating-frame generator ``w1 |+1><+1| + w2 |-1><-1|``."""
    return np.diag([p.omega1, 0.0, p.omega2]).astype(complex)


def rotating_frame(H, A, t):
    """
    Return ``U^dagger H U - A`` with ``U = exp(-i A t)``.

    ``A`` must be diagonal; the result is the generator of the rotating-frame
    state ``U^dagger |psi>`` at time ``t``.
    """
    H = np.asarray(H, dtype=complex)
    A = np.asarray(A, dtype=complex)
    if H.shape != A.shape:
        raise DimensionMismatch(f"H {H.shape} and A {A.shape} differ")
    if np.any(np.abs(A - np.diag(np.diag(A))) > 0):
        raise InvalidParam("frame generator must be diagonal")
    U = np.diag(np.exp(-1j * np.real(np.diag(A)) * t))
    return qmat.conjugate(U, H) - A


@dataclass(frozen=True, eq=False)
class QuditModel:
    """
    Rotating-frame qudit: ``H_S = diag(eps) + J`` plus the noise coupling.

    ``J`` is a real symmetric non-negative table with zero diagonal and
    ``dephase`` holds the diagonal of the operator multiplying ``b(t)``.
    """

    eps: np.ndarray
    J: np.ndarray
    dephase: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        dim = eps.shape[0]
        J = np.asarray(self.J)
        if np.iscomplexobj(J):
            if np.any(np.abs(J.imag) > 0):
                raise InvalidParam("complex couplings are not supported")
            J = J.real
        J = np.asarray(J, dtype=float)
        dephase = np.asarray(self.dephase)
        if np.iscomplexobj(dephase):
            if np.any(np.abs(dephase.imag) > 0):
                raise InvalidParam("dephasing operator must be real")
            dephase = dephase.real
        dephase = np.asarray(dephase, dtype=float)
        if dephase.ndim == 2:
            if np.any(dephase != np.diag(np.diag(dephase))):
                raise InvalidParam("dephasing operator must be diagonal")
            dephase = np.diag(dephase).copy()
        if J.shape != (dim, dim) or dephase.shape != (dim,):
            raise DimensionMismatch("eps, J and dephase sizes disagree")
        if not 2 <= dim <= qmat.MAX_DIM:
            raise DimensionMismatch(f"dim {dim} outside 2..{qmat.MAX_DIM}")
        if np.any(J != J.T) or np.any(np.diag(J) != 0):
            raise InvalidParam("J must be symmetric with zero diagonal")
        if np.any(J < 0):
            raise InvalidParam("couplings must be non-negative")
        labels = tuple(self.labels) or tuple(str(k + 1) for k in range(dim))
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "dephase", dephase)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self):
        return self.eps.shape[0]

    def hamiltonian(self):
        return (np.diag(self.eps) + self.J).astype(complex)

    def dephase_op(self):
        return np.diag(self.dephase).astype(complex)

    def has_dynamics(self):
        return bool(np.any(self.eps != 0) or np.any(self.J != 0))

    @classmethod
    def pure_dephasing(cls, dim=3, encoding="pm"):
        """Model with ``H_S = 0`` and the default NV coupling for ``dim``."""
        return cls(np.zeros(dim), np.zeros((dim, dim)), default_dephase(dim, encoding),
                   labels=default_labels(dim, encoding))

    @classmethod
    def two_level(cls, encoding="pm", eps=(0.0, 0.0), J=0.0):
        """
        Qubit embedded in the NV triplet.

        ``encoding="pm"`` uses {m=+1, m=-1} (noise weights +1, -1), ``"p0"`` uses
        {m=+1, m=0} (weights +1, 0).
        """
        Jm = np.array([[0.0, J], [J, 0.0]])
        return cls(np.asarray(eps, dtype=float), Jm, default_dephase(2, encoding),
                   labels=default_labels(2, encoding))


def default_dephase(dim, encoding="pm"):
    if dim == 2:
        if encoding == "pm":
            return np.array([1.0, -1.0])
        if encoding == "p0":
            return np.array([1.0, 0.0])
        raise InvalidParam(f"unknown two-level encoding {encoding!r}")
    # spin-like ladder (d-1)/2 ... -(d-1)/2, which is Sz for the NV triplet
    return (dim - 1) / 2.0 - np.arange(dim, dtype=float)


def default_labels(dim, encoding="pm"):
    if dim == 3:
        return ("+1", "0", "-1")
    if dim == 2:
        return ("+1", "-1") if encoding == "pm" else ("+1", "0")
    return tuple(str(k + 1) for k in range(dim))


def effective_qudit_model(p):
    """
    Rotating-wave qudit model of the doubly driven NV center.

    ``eps = (D + gamma Bz - w1, 0, D - gamma Bz - w2)`` and the couplings are
    ``gamma B / (2 sqrt 2)`` on the (+1, 0) and (0, -1) channels.
    """
    e = p.level_energies
    eps = np.array([e[0] - p.omega1, 0.0, e[2] - p.omega2])
    J = np.zeros((3, 3))
    J[0, 1] = J[1, 0] = p.gamma * p.B1 / (2.0 * np.sqrt(2.0))
    J[1, 2] = J[2, 1] = p.gamma * p.B2 / (2.0 * np.sqrt(2.0))
    return QuditModel(eps, J, np.diag(SZ).real, labels=("+1", "0", "-1"))


def coupling_operator(model, b):
    """System-bath term ``b * dephase_op`` for a field value ``b`` (rad/us)."""
    if not np.isfinite(b):
        raise InvalidParam("field value must be finite")
    return b * model.dephase_op()
