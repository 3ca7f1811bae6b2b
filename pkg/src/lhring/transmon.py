"""Flux-tunable asymmetric transmon in the charge basis.

Energies are in GHz (E/h), flux in units of the flux quantum.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .errors import DomainError

DEFAULT_N_CHARGE = 8


@dataclass(frozen=True)
class TransmonParams:
    """Parameters of one SQUID transmon.

    Parameters
    ----------
    E_J0 : float
        Maximum (zero-flux) Josephson energy, GHz.
    E_C : float
        Charging energy, GHz.
    d : float
        Junction asymmetry, ``0 <= d < 1``.
    C_S, C_QM, C_QR : float
        Shunt, ring-coupling and readout-coupling capacitances (fF).
    n_g : float
        Offset charge.
    phi_ext : float
        External flux in units of the flux quantum.
    """

    E_J0: float
    E_C: float
    d: float = 0.0
    C_S: float = 83.0
    C_QM: float = 17.5
    C_QR: float = 2.5
    n_g: float = 0.0
    phi_ext: float = 0.0

    def __post_init__(self):
        if not (self.E_J0 > 0 and self.E_C > 0):
            raise DomainError("E_J0 and E_C must be positive")
        if not 0 <= self.d < 1:
            raise DomainError("asymmetry d must satisfy 0 <= d < 1")
        if self.E_J0 / self.E_C <= 10:
            warnings.warn(
                f"E_J0/E_C = {self.E_J0 / self.E_C:.1f} is outside the transmon regime",
                stacklevel=2,
            )

    def at_flux(self, phi_ext):
        return replace(self, phi_ext=float(phi_ext))


@dataclass(frozen=True)
class TransmonLevels:
    f01: float
    f12: float

    @property
    def anharmonicity(self):
        return self.f12 - self.f01


def josephson_energy(p: TransmonParams, phi_ext=None):
    """SQUID Josephson energy ``E_J0*sqrt(cos^2(pi*phi) + d^2*sin^2(pi*phi))``.

    This is the singularity-free form of ``E_J0*|cos(pi*phi)|*sqrt(1 + d^2 tan^2(pi*phi))``.
    """
    phi = p.phi_ext if phi_ext is None else phi_ext
    x = np.pi * np.asarray(phi, dtype=float)
    return p.E_J0 * np.sqrt(np.cos(x) ** 2 + p.d**2 * np.sin(x) ** 2)


def charge_hamiltonian(p: TransmonParams, n_charge=DEFAULT_N_CHARGE, E_J=None):
    """Charge-basis Hamiltonian on ``n = -n_charge..n_charge``.

    Diagonal ``4*E_C*(n - n_g)**2``, nearest-neighbour ``-E_J/2``.
    """
    if n_charge < 5:
        raise DomainError("n_charge must be at least 5")
    if E_J is None:
        E_J = josephson_energy(p)
    n = np.arange(-n_charge, n_charge + 1)
    H = np.diag(4.0 * p.E_C * (n - p.n_g) ** 2)
    off = -0.5 * E_J * np.ones(2 * n_charge)
    return H + np.diag(off, 1) + np.diag(off, -1)


def charge_operator(n_charge=DEFAULT_N_CHARGE):
    return np.diag(np.arange(-n_charge, n_charge + 1).astype(float))


def eigensystem(p: TransmonParams, n_levels=None, n_charge=DEFAULT_N_CHARGE, E_J=None):
    """Lowest eigenvalues and eigenvectors of :func:`charge_hamiltonian`."""
    H = charge_hamiltonian(p, n_charge, E_J)
    sel = None if n_levels is None else (0, n_levels - 1)
    # tridiagonal, so the banded solver is the cheap route
    return scipy.linalg.eigh_tridiagonal(np.diag(H), np.diag(H, 1), select="a" if sel is None else "i",
                                         select_range=sel)


def levels(p: TransmonParams, n_charge=DEFAULT_N_CHARGE):
    """Transition frequencies f01, f12 (GHz) from charge-basis diagonalization."""
    E, _ = eigensystem(p, 3, n_charge)
    return TransmonLevels(f01=float(E[1] - E[0]), f12=float(E[2] - E[1]))


def f01(p: TransmonParams, phi_ext=None, n_charge=DEFAULT_N_CHARGE):
    q = p if phi_ext is None else p.at_flux(phi_ext)
    return levels(q, n_charge).f01


def flux_for_frequency(p: TransmonParams, target_f01, n_charge=DEFAULT_N_CHARGE):
    """Flux in ``[0, 0.5]`` at which f01 equals ``target_f01`` (GHz).

    f01 decreases monotonically on this interval, so a bracketing root find
    is safe.  The result reproduces the target to well below 1 kHz.

    Raises
    ------
    DomainError
        If the target is outside the tunable band.
    """
    fmax = f01(p, 0.0, n_charge)
    fmin = f01(p, 0.5, n_charge)
    if not fmin - 1e-9 <= target_f01 <= fmax + 1e-9:
        raise DomainError(
            f"target f01 {target_f01:.6f} GHz outside achievable band [{fmin:.6f}, {fmax:.6f}] GHz"
        )
    if abs(target_f01 - fmax) <= 1e-9:
        return 0.0
    if abs(target_f01 - fmin) <= 1e-9:
        return 0.5
    return brentq(lambda x: f01(p, x, n_charge) - target_f01, 0.0, 0.5, xtol=1e-14, rtol=1e-14)


def flux_sweep(p: TransmonParams, phis, n_charge=DEFAULT_N_CHARGE):
    """Rows ``(phi_ext, f01, f12, anharmonicity)`` for each flux value."""
    rows = []
    for phi in phis:
        lv = levels(p.at_flux(phi), n_charge)
        rows.append((float(phi), lv.f01, lv.f12, lv.anharmonicity))
    return np.array(rows)


def charge_zpf(f_q, E_C):
    """Harmonic charge zero-point fluctuation ``sqrt(f_q / (16 E_C))``."""
    return np.sqrt(f_q / (16.0 * E_C))
