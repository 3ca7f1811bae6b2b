"""Lumped-element model of the left-handed ring resonator and its normal modes.

Units are GHz, fF and nH throughout.  With these units ``1/sqrt(L*C)`` is in
units of 1e12 rad/s, so ``f[GHz] = 1000 / (2*pi*sqrt(L[nH]*C[fF]))``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.constants import hbar, physical_constants

from .errors import ConstructionError, DomainError, NumericalError

PHI0 = physical_constants["mag. flux quantum"][0]

# frequencies closer than this (GHz) count as one degenerate level
DEGENERACY_TOL = 1e-6


class Parity(str, enum.Enum):
    EVEN = "Even"
    ODD = "Odd"
    UNPAIRED = "Unpaired"


@dataclass(frozen=True)
class UnitCellParams:
    """Reactances of one ring cell.

    Parameters
    ----------
    C_L : float
        Series (left-handed) capacitance in fF.
    L_L : float
        Shunt inductance in nH.
    C_R : float
        Stray capacitance in parallel with ``L_L`` (fF); 0 for an ideal cell.
    L_R : float
        Stray inductance in series with ``C_L`` (nH); 0 for an ideal cell.
    """

    C_L: float
    L_L: float
    C_R: float = 0.0
    L_R: float = 0.0

    def __post_init__(self):
        if not (self.C_L > 0 and self.L_L > 0):
            raise ConstructionError("C_L and L_L must be positive")
        if self.C_R < 0 or self.L_R < 0:
            raise ConstructionError("stray reactances C_R, L_R must be non-negative")

    @property
    def ideal(self):
        return self.C_R == 0 and self.L_R == 0


@dataclass(frozen=True)
class WirebondSpec:
    attach_index: int
    L_W: float = 1.5

    def __post_init__(self):
        if not self.L_W > 0:
            raise ConstructionError("wirebond inductance L_W must be positive")


@dataclass(frozen=True)
class RingSpec:
    """Full description of the ring circuit.

    Parameters
    ----------
    N : int
        Number of cells (even).
    cell : UnitCellParams
    C_C : float
        Total center-disk capacitance to ground in fF, shared by the wirebond
        elements.
    wirebonds : sequence of WirebondSpec
    qubit_nodes : mapping of str to int
        Qubit name to the cell it couples to.  Qubits enter as capacitive
        islands: ``C_QM`` to the ring node and ``C_S`` to ground.
    C_QM, C_S : float
        Qubit coupling and shunt capacitances in fF.
    feedline : (int, float) or None
        Cell index and coupling capacitance (fF) of an optional feedline,
        modeled as a capacitance to ground.
    wirebond_model : {"branch", "disk"}
        ``"branch"``: every wirebond is an ``L_W`` branch from its attach cell
        to a disk node carrying ``C_C / n_bonds`` to ground, and ``L_L`` returns
        directly to ground.  ``"disk"``: ``L_L`` of every cell lands on a
        perimeter node of a segmented disk (segments of ``L_seg``, ``C_C/N`` per
        node) that is grounded through ``L_W`` at the attach cells.
    L_seg : float
        Disk segment inductance (nH) for the ``"disk"`` model.
    delta_x : float
        Cell size; only products ``k*delta_x`` matter.
    """

    N: int
    cell: UnitCellParams
    C_C: float = 371.0
    wirebonds: Sequence[WirebondSpec] = ()
    qubit_nodes: Mapping[str, int] = field(default_factory=dict)
    C_QM: float = 17.5
    C_S: float = 83.0
    feedline: Optional[tuple] = None
    wirebond_model: str = "branch"
    L_seg: float = 0.01
    delta_x: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "wirebonds", tuple(self.wirebonds))
        object.__setattr__(self, "qubit_nodes", dict(self.qubit_nodes))
        N = self.N
        if N < 4 or N % 2:
            raise ConstructionError(f"cell count N must be even and >= 4, got {N}")
        bonds = [w.attach_index for w in self.wirebonds]
        if any(not 0 <= b < N for b in bonds):
            raise ConstructionError("wirebond attach_index must lie in [0, N)")
        if len(set(bonds)) != len(bonds):
            raise ConstructionError("wirebond attach indices must be distinct")
        qidx = list(self.qubit_nodes.values())
        if any(not 0 <= q < N for q in qidx):
            raise ConstructionError("qubit node indices must lie in [0, N)")
        if len(set(qidx)) != len(qidx):
            raise ConstructionError("qubit node indices must be distinct")
        if len(qidx) == 2 and abs(qidx[0] - qidx[1]) % 2:
            raise ConstructionError("qubit separation n_AB must be even")
        if self.wirebond_model not in ("branch", "disk"):
            raise ConstructionError("wirebond_model must be 'branch' or 'disk'")
        if self.wirebonds and not self.C_C > 0:
            raise ConstructionError("C_C must be positive when wirebonds are present")
        if self.qubit_nodes and not (self.C_QM > 0 and self.C_S > 0):
            raise ConstructionError("C_QM and C_S must be positive")
        if self.feedline is not None:
            j, cf = self.feedline
            if not 0 <= j < N or not cf > 0:
                raise ConstructionError("feedline needs a valid cell index and positive capacitance")

    @property
    def n_AB(self):
        q = list(self.qubit_nodes.values())
        return abs(q[0] - q[1]) if len(q) == 2 else None

    @property
    def midpoint(self):
        """Cell index halfway between the two qubits, or None."""
        q = list(self.qubit_nodes.values())
        return (q[0] + q[1]) // 2 if len(q) == 2 else None

    @property
    def translation_symmetric(self):
        """True when only the qubits (if any) break rotational symmetry."""
        return not self.wirebonds and self.feedline is None


@dataclass
class CircuitMatrices:
    """Node capacitance (fF) and inverse inductance (1/nH) matrices."""

    cap: np.ndarray
    ind_inv: np.ndarray
    node_labels: list
    ring: Optional[RingSpec] = None

    def __post_init__(self):
        self._index = {lab: i for i, lab in enumerate(self.node_labels)}

    def index(self, label):
        return self._index[label]

    @property
    def ring_nodes(self):
        return np.array([i for i, lab in enumerate(self.node_labels) if lab[0] == "ring"])


@dataclass
class ModeSpec:
    """One normal mode of the circuit.

    ``amplitudes`` holds the eigenvector on the ring nodes in units of
    fF^-1/2 (the full vector satisfies ``v.T @ cap @ v == 1``).  Multiplying an
    amplitude by ``zpf_scale`` gives the zero-point fluctuation of that node's
    reduced flux ``2*pi*Phi/Phi0``; it carries the ``1/sqrt(omega)`` factor.
    """

    freq: float
    amplitudes: np.ndarray
    zpf_scale: float
    parity: Optional[Parity] = None
    k_label: Optional[int] = None
    vector: Optional[np.ndarray] = field(default=None, repr=False)


def dispersion_frequency(k_index, N, cell: UnitCellParams):
    """Ideal left-handed dispersion ``omega(k)/2pi`` in GHz.

    Parameters
    ----------
    k_index : int or array of int
        Wavenumber index, ``k*delta_x = 2*pi*k_index/N``; ``1 <= |k_index| <= N/2``.
    N : int
    cell : UnitCellParams
        Only ``L_L`` and ``C_L`` enter.

    Raises
    ------
    DomainError
        For ``k_index == 0`` or ``|k_index| > N/2``.
    """
    k = np.abs(np.asarray(k_index))
    if np.any(k == 0):
        raise DomainError("ideal dispersion divergent at k=0")
    if np.any(k > N // 2):
        raise DomainError(f"|k_index| must not exceed N/2 = {N // 2}")
    f = 1000.0 / (4 * np.pi * np.sqrt(cell.L_L * cell.C_L) * np.sin(np.pi * k / N))
    return float(f) if np.ndim(f) == 0 else f


def ir_cutoff(cell: UnitCellParams):
    """Ideal infrared cutoff ``1/(4*pi*sqrt(L_L*C_L))`` in GHz."""
    return 1000.0 / (4 * np.pi * np.sqrt(cell.L_L * cell.C_L))


def _stamp(M, a, b, val):
    # two-terminal element between nodes a and b; b=None is ground
    M[a, a] += val
    if b is not None:
        M[b, b] += val
        M[a, b] -= val
        M[b, a] -= val


def build_circuit_matrices(ring: RingSpec) -> CircuitMatrices:
    """Assemble the node capacitance and inverse-inductance matrices.

    Raises
    ------
    ConstructionError
        If some node is floating (no capacitive or inductive path that gives
        it dynamics), i.e. ``cap + beta*ind_inv`` is singular.
    """
    N, cell = ring.N, ring.cell
    labels = [("ring", j) for j in range(N)]
    if cell.L_R > 0:
        labels += [("series", j) for j in range(N)]
    disk = bool(ring.wirebonds) and ring.wirebond_model == "disk"
    if disk:
        labels += [("disk", j) for j in range(N)]
    elif ring.wirebonds:
        labels += [("bond", w.attach_index) for w in ring.wirebonds]
    labels += [("qubit", q) for q in ring.qubit_nodes]
    idx = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    C = np.zeros((n, n))
    Li = np.zeros((n, n))

    for j in range(N):
        a, b = idx["ring", j], idx["ring", (j + 1) % N]
        if cell.L_R > 0:
            s = idx["series", j]
            _stamp(C, a, s, cell.C_L)
            _stamp(Li, s, b, 1.0 / cell.L_R)
        else:
            _stamp(C, a, b, cell.C_L)
        ret = idx["disk", j] if disk else None
        _stamp(Li, a, ret, 1.0 / cell.L_L)
        if cell.C_R > 0:
            _stamp(C, a, ret, cell.C_R)

    if disk:
        for j in range(N):
            _stamp(Li, idx["disk", j], idx["disk", (j + 1) % N], 1.0 / ring.L_seg)
            _stamp(C, idx["disk", j], None, ring.C_C / N)
        for w in ring.wirebonds:
            _stamp(Li, idx["disk", w.attach_index], None, 1.0 / w.L_W)
    elif ring.wirebonds:
        share = ring.C_C / len(ring.wirebonds)
        for w in ring.wirebonds:
            m = idx["bond", w.attach_index]
            _stamp(Li, idx["ring", w.attach_index], m, 1.0 / w.L_W)
            _stamp(C, m, None, share)

    for q, j in ring.qubit_nodes.items():
        _stamp(C, idx["ring", j], idx["qubit", q], ring.C_QM)
        _stamp(C, idx["qubit", q], None, ring.C_S)
    if ring.feedline is not None:
        j, cf = ring.feedline
        _stamp(C, idx["ring", j], None, cf)

    beta = np.trace(C) / np.trace(Li)
    ev = np.linalg.eigvalsh(C + beta * Li)
    if ev[0] <= 1e-12 * ev[-1]:
        raise ConstructionError(
            f"singular capacitance matrix: node set has a floating node "
            f"(smallest eigenvalue {ev[0]:.3e} of cap + beta*ind_inv)"
        )
    return CircuitMatrices(C, Li, labels, ring)


def _reflection(m: CircuitMatrices, center):
    """Permutation matrix of the mirror j -> 2*center - j, or None if not a symmetry."""
    N = m.ring.N
    target = []
    qubits = list(m.ring.qubit_nodes)
    for kind, j in m.node_labels:
        if kind in ("ring", "disk", "bond"):
            lab = (kind, (2 * center - j) % N)
        elif kind == "series":
            lab = (kind, (2 * center - j - 1) % N)
        else:
            lab = ("qubit", qubits[1 - qubits.index(j)]) if len(qubits) == 2 else (kind, j)
        if lab not in m._index:
            return None
        target.append(m.index(lab))
    P = np.zeros((len(target), len(target)))
    P[target, np.arange(len(target))] = 1.0
    if not (np.allclose(P.T @ m.cap @ P, m.cap) and np.allclose(P.T @ m.ind_inv @ P, m.ind_inv)):
        return None
    return P


def _gauge_fix(v, ring_idx):
    a = v[ring_idx]
    amax = np.max(np.abs(a))
    first = np.flatnonzero(np.abs(a) >= (1 - 1e-9) * amax)[0]
    return -v if a[first] < 0 else v


def _dominant_k(a):
    N = len(a)
    spec = np.abs(np.fft.rfft(a))
    return int(np.argmax(spec)) if N else None


def degenerate_groups(freqs, tol=DEGENERACY_TOL):
    """Split sorted frequencies into runs closer than ``tol`` (GHz)."""
    groups, cur = [], [0]
    for i in range(1, len(freqs)):
        if freqs[i] - freqs[i - 1] < tol:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    if len(freqs):
        groups.append(cur)
    return groups


def solve_modes(m: CircuitMatrices, window=None, midpoint=None):
    """Normal modes of ``ind_inv @ phi = omega**2 * cap @ phi``.

    The pencil is shifted to ``(ind_inv, cap + beta*ind_inv)``, which stays
    definite even when ``cap`` is singular (the ideal ring has an
    infinite-frequency uniform mode); eigenvalues map back through
    ``omega**2 = mu / (1 - beta*mu)``.  Zero-frequency (pure drift) and
    infinite-frequency modes are dropped.

    Parameters
    ----------
    m : CircuitMatrices
    window : (float, float), optional
        Keep only modes with ``lo <= f <= hi`` (GHz).
    midpoint : int, optional
        Cell index of a mirror plane.  Degenerate pairs are rotated into the
        basis that is even/odd under that mirror (cosine/sine about the
        midpoint).  Defaults to the qubit midpoint when two qubits are attached.

    Returns
    -------
    list of ModeSpec
        Sorted by frequency, gauge fixed so the largest ring amplitude is
        positive.
    """
    C, Li = m.cap, m.ind_inv
    beta = np.trace(C) / np.trace(Li)
    try:
        mu, V = scipy.linalg.eigh(Li, C + beta * Li)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"generalized eigensolver failed: cond(cap)={np.linalg.cond(C):.3e}, "
            f"cond(ind_inv)={np.linalg.cond(Li):.3e}"
        ) from exc
    keep = (mu > 1e-12 / beta) & (mu < (1 - 1e-9) / beta)
    mu, V = mu[keep], V[:, keep]
    w2 = mu / (1 - beta * mu)
    V = V / np.sqrt(np.einsum("ij,ij->j", V, C @ V))
    f = np.sqrt(w2) * 1e3 / (2 * np.pi)
    order = np.argsort(f)
    f, V = f[order], V[:, order]

    ring = m.ring
    if midpoint is None and ring is not None:
        midpoint = ring.midpoint
    P = _reflection(m, midpoint) if (midpoint is not None and ring is not None) else None
    if P is not None:
        for grp in degenerate_groups(f):
            if len(grp) != 2:
                continue
            Vg = V[:, grp]
            R = Vg.T @ C @ P @ Vg
            _, U = np.linalg.eigh(0.5 * (R + R.T))
            V[:, grp] = Vg @ U[:, ::-1]  # even (+1) first

    ring_idx = m.ring_nodes
    labelled = ring is not None and ring.translation_symmetric
    modes = []
    for i in range(len(f)):
        if window is not None and not (window[0] <= f[i] <= window[1]):
            continue
        v = _gauge_fix(V[:, i], ring_idx)
        omega = 2 * np.pi * f[i] * 1e9
        # reduced-flux zero point per unit amplitude (amplitude in fF^-1/2)
        zpf = 2 * np.pi / PHI0 * np.sqrt(hbar / (2 * omega)) / np.sqrt(1e-15)
        a = v[ring_idx].copy()
        modes.append(
            ModeSpec(
                freq=float(f[i]),
                amplitudes=a,
                zpf_scale=float(zpf),
                k_label=_dominant_k(a) if labelled else None,
                vector=v,
            )
        )
    return modes


def classify_parity(modes, node_A, node_B, rel_tol=1e-12):
    """Return copies of ``modes`` with ``parity`` set from the amplitude signs.

    A mode is Unpaired when either amplitude is below ``rel_tol`` of its
    largest ring amplitude, or when it is the zone-edge (IR, ``k = N/2``) or
    zone-center (``k = 0``) mode of a translation-symmetric ring.
    """
    out = []
    for md in modes:
        a = md.amplitudes
        N = len(a)
        amax = np.max(np.abs(a))
        aA, aB = a[node_A], a[node_B]
        if min(abs(aA), abs(aB)) < rel_tol * amax or md.k_label in (0, N // 2):
            par = Parity.UNPAIRED
        elif np.sign(aA) == np.sign(aB):
            par = Parity.EVEN
        else:
            par = Parity.ODD
        out.append(replace(md, parity=par))
    return out


def pair_partners(freqs):
    """Partner index for each mode: lowest mode alone, then consecutive pairs.

    This matches the spectrum of a ring above its IR cutoff, where the IR mode
    is nondegenerate and every higher level is a (possibly split) pair.
    Returns a list with ``None`` for unpaired modes.
    """
    n = len(freqs)
    partner = [None] * n
    for i in range(1, n - 1, 2):
        partner[i], partner[i + 1] = i + 1, i
    return partner


def pair_splittings(freqs):
    """Splittings (GHz) of the consecutive pairs defined by :func:`pair_partners`."""
    freqs = np.asarray(freqs)
    return np.array([freqs[i + 1] - freqs[i] for i in range(1, len(freqs) - 1, 2)])


def multiplicities(freqs, rel_tol=1e-9):
    """Multiplicity of each distinct level, grouping within ``rel_tol``."""
    freqs = np.sort(np.asarray(freqs))
    counts, start = [], 0
    for i in range(1, len(freqs) + 1):
        if i == len(freqs) or freqs[i] - freqs[start] > rel_tol * freqs[start]:
            counts.append(i - start)
            start = i
    return counts
