"""Truncated two-qubit plus multimode Hamiltonian in the rotating-wave picture.

Qubits are Kerr oscillators ``w n + (delta/2) n (n - 1)``, modes are harmonic,
and each qubit exchanges excitations with each mode at rate ``g``.  Because
the exchange conserves the total excitation number the basis is truncated
by that number.  Energies are in GHz, couplings are taken in MHz.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .coupling import CouplingSet
from .errors import DomainError, LabelingConflict, ResourceError
from .transmon import TransmonLevels

DEFAULT_BASIS_CAP = 20000
TIE_TOL = 1e-6


@dataclass(frozen=True, order=True)
class BasisState:
    """Occupations ``(n_A, n_B)`` of the qubits and of each included mode."""

    qubit_occ: tuple
    mode_occ: tuple = ()

    @property
    def total(self):
        return sum(self.qubit_occ) + sum(self.mode_occ)

    @property
    def label(self):
        q = "".join(str(n) for n in self.qubit_occ)
        if not self.mode_occ:
            return q
        return q + ";" + "".join(str(n) for n in self.mode_occ)


@dataclass
class ModelConfig:
    """Truncation policy for the multimode model.

    Parameters
    ----------
    q_levels : int
        Levels kept per qubit.
    max_excitations : int
        Largest total excitation number in the basis.
    included_modes : list of int or None
        Indices into the coupling table; ``None`` keeps every mode.
    direct_qubit_coupling : float
        Direct qubit-qubit exchange in MHz.
    pair_floor : float
        States with two different modes occupied are kept only when both
        modes couple to some qubit with ``|g|`` above this value (MHz).
    basis_cap : int
        Largest basis allowed before :class:`ResourceError` is raised.
    """

    q_levels: int = 3
    max_excitations: int = 2
    included_modes: Optional[List[int]] = None
    direct_qubit_coupling: float = 0.0
    pair_floor: float = 5.0
    basis_cap: int = DEFAULT_BASIS_CAP

    def __post_init__(self):
        if int(self.q_levels) != self.q_levels or self.q_levels < 2:
            raise DomainError("q_levels must be an integer >= 2")
        if int(self.max_excitations) != self.max_excitations or self.max_excitations < 1:
            raise DomainError("max_excitations must be an integer >= 1")
        if self.pair_floor < 0:
            raise DomainError("pair_floor must be non-negative")

    def mode_indices(self, couplings: Optional[CouplingSet]):
        if self.included_modes is not None:
            return list(self.included_modes)
        return list(range(len(couplings))) if couplings is not None else []


@dataclass
class LabeledSpectrum:
    """Eigenvalues with the eigenvectors assigned to named bare states.

    Attributes
    ----------
    energies : dict
        label -> eigenvalue (GHz).
    overlaps : dict
        label -> squared overlap that decided the assignment.
    raw : ndarray
        All eigenvalues, ascending.
    vectors : dict
        label -> eigenvector, used as reference for tracking.
    indices : dict
        label -> eigenvalue index.
    """

    energies: Dict[str, float]
    overlaps: Dict[str, float]
    raw: np.ndarray
    vectors: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    indices: Dict[str, int] = field(default_factory=dict)

    def frequency(self, label, ground="00"):
        return self.energies[label] - self.energies[ground]


def _compositions(n, total, cap):
    """Occupation tuples of ``n`` modes summing to ``total``, lexicographic ascending."""
    if n == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(cap, total) + 1):
        for rest in _compositions(n - 1, total - first, cap):
            yield (first,) + rest


def _strong_modes(cfg: ModelConfig, couplings: Optional[CouplingSet]):
    idx = cfg.mode_indices(couplings)
    if couplings is None:
        return [True] * len(idx)
    g = np.maximum(np.abs(couplings.g_A), np.abs(couplings.g_B))
    return [bool(g[i] > cfg.pair_floor) for i in idx]


def enumerate_basis(cfg: ModelConfig, couplings: Optional[CouplingSet] = None, n_modes=None):
    """Ordered basis for ``cfg``.

    Ordering is by total excitation, then qubit occupation, then mode
    occupation, each ascending.  Modes hold at most ``min(max_excitations,
    q_levels - 1)`` photons, so double occupation appears only when the qubits
    can hold two excitations as well.  Without ``couplings`` no mode pair is
    filtered.

    Parameters
    ----------
    cfg : ModelConfig
    couplings : CouplingSet, optional
        Needed for the pair filter and to count modes when
        ``cfg.included_modes`` is None.
    n_modes : int, optional
        Mode count to use when neither ``couplings`` nor ``included_modes``
        is given.
    """
    if cfg.included_modes is None and couplings is None:
        nm = int(n_modes or 0)
        strong = [True] * nm
    else:
        nm = len(cfg.mode_indices(couplings))
        strong = _strong_modes(cfg, couplings)
    ql = cfg.q_levels
    cap = min(cfg.max_excitations, ql - 1)
    states = []
    for tot in range(cfg.max_excitations + 1):
        for qa in range(min(ql - 1, tot) + 1):
            for qb in range(min(ql - 1, tot - qa) + 1):
                for occ in _compositions(nm, tot - qa - qb, cap):
                    occupied = [i for i, n in enumerate(occ) if n]
                    if len(occupied) >= 2 and not all(strong[i] for i in occupied):
                        continue
                    states.append(BasisState((qa, qb), occ))
                    if len(states) > cfg.basis_cap:
                        raise ResourceError(
                            f"basis exceeds the cap of {cfg.basis_cap} states; "
                            "reduce max_excitations or the included modes"
                        )
    return states


def assemble(cfg: ModelConfig, couplings: CouplingSet, qubits: Sequence[TransmonLevels], basis=None):
    """Hamiltonian matrix (GHz) on ``basis``.

    Parameters
    ----------
    cfg : ModelConfig
    couplings : CouplingSet
        Mode frequencies (GHz) and signed couplings (MHz).
    qubits : (TransmonLevels, TransmonLevels)
        Bare qubit frequencies and anharmonicities.
    basis : list of BasisState, optional
        Defaults to :func:`enumerate_basis`.
    """
    if basis is None:
        basis = enumerate_basis(cfg, couplings)
    idx = cfg.mode_indices(couplings)
    fm = couplings.freqs[idx]
    g = np.vstack([couplings.g_A[idx], couplings.g_B[idx]]) * 1e-3
    wq = [q.f01 for q in qubits]
    dq = [q.anharmonicity for q in qubits]
    J = cfg.direct_qubit_coupling * 1e-3
    pos = {s: i for i, s in enumerate(basis)}
    n = len(basis)
    H = np.zeros((n, n))
    for i, s in enumerate(basis):
        qa, qb = s.qubit_occ
        H[i, i] = (
            sum(wq[q] * s.qubit_occ[q] + 0.5 * dq[q] * s.qubit_occ[q] * (s.qubit_occ[q] - 1) for q in (0, 1))
            + float(np.dot(fm, s.mode_occ))
        )
        # raise a qubit, lower a mode: b_q^dag a_m
        for m, nm in enumerate(s.mode_occ):
            if nm == 0:
                continue
            for q in (0, 1):
                occ = list(s.qubit_occ)
                occ[q] += 1
                mo = list(s.mode_occ)
                mo[m] -= 1
                j = pos.get(BasisState(tuple(occ), tuple(mo)))
                if j is not None:
                    v = g[q, m] * np.sqrt(occ[q]) * np.sqrt(nm)
                    H[i, j] += v
                    H[j, i] += v
        if J and qa > 0:
            t = pos.get(BasisState((qa - 1, qb + 1), s.mode_occ))
            if t is not None:
                v = J * np.sqrt(qa) * np.sqrt(qb + 1)
                H[i, t] += v
                H[t, i] += v
    return H


def default_targets(basis):
    """Labels for the computational states, the doubly excited qubit states and
    single photons, mapped to their basis index."""
    out = {}
    for i, s in enumerate(basis):
        if any(s.mode_occ):
            if sum(s.qubit_occ) == 0 and sum(s.mode_occ) == 1:
                out[f"mode{s.mode_occ.index(1)}"] = i
            continue
        out["".join(str(n) for n in s.qubit_occ)] = i
    return out


def diagonalize_and_label(H, basis, reference: Optional[LabeledSpectrum] = None, targets=None,
                          resolve=False):
    """Diagonalize ``H`` and assign target labels to eigenvectors.

    Without ``reference`` each label goes to the eigenvector with the largest
    squared overlap with its bare state; with ``reference`` the overlap is
    taken against that spectrum's eigenvector of the same label.  Eigenvectors
    whose overlaps tie within 1e-6 resolve to the lower energy.

    Parameters
    ----------
    H : ndarray
    basis : list of BasisState
    reference : LabeledSpectrum, optional
    targets : dict, optional
        label -> basis index; defaults to :func:`default_targets`.
    resolve : bool
        Settle competing claims by a maximum-overlap assignment instead of
        raising.

    Raises
    ------
    LabelingConflict
        Two labels claim one eigenvector and ``resolve`` is False.
    """
    E, V = np.linalg.eigh(H)
    if targets is None:
        targets = default_targets(basis)
    labels = list(targets)
    if reference is None:
        O = V[[targets[l] for l in labels], :] ** 2
    else:
        R = np.array([reference.vectors[l] for l in labels])
        O = (R @ V) ** 2
    choice = []
    for row in O:
        best = row.max()
        choice.append(int(np.flatnonzero(row >= best - TIE_TOL)[0]))
    seen = {}
    conflict = None
    for li, j in enumerate(choice):
        if j in seen:
            conflict = (seen[j], li, j)
            break
        seen[j] = li
    if conflict is not None:
        a, b, j = conflict
        if not resolve:
            raise LabelingConflict((labels[a], labels[b]), (O[a, j], O[b, j]), j)
        # small bias towards lower eigenvalues keeps ties deterministic
        rows, cols = linear_sum_assignment(-(O - 1e-9 * np.arange(O.shape[1])))
        choice = [0] * len(labels)
        for r, c in zip(rows, cols):
            choice[r] = int(c)
    return LabeledSpectrum(
        energies={l: float(E[j]) for l, j in zip(labels, choice)},
        overlaps={l: float(O[i, j]) for i, (l, j) in enumerate(zip(labels, choice))},
        raw=E,
        vectors={l: V[:, j].copy() for l, j in zip(labels, choice)},
        indices={l: j for l, j in zip(labels, choice)},
    )
