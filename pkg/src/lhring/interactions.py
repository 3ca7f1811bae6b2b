"""Effective qubit-qubit exchange J and ZZ shift mediated by the ring modes.

J is obtained from second-order perturbation theory (Schrieffer-Wolff) and
from a least-action block diagonalization of the full multimode model; the
ZZ shift comes from labeled eigenenergies.  Frequencies are in GHz, J and
zeta in MHz.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import transmon
from .coupling import CouplingSet
from .errors import DomainError, LHRingError, NumericalError
from .hamiltonian import (
    LabeledSpectrum,
    ModelConfig,
    assemble,
    default_targets,
    diagonalize_and_label,
    enumerate_basis,
)
from .transmon import TransmonLevels, TransmonParams

SW_GUARD = 3.0
LA_OFFSET = 0.005
ZETA_JUMP = 5.0
UNRELIABLE = "perturbation theory unreliable"
AMBIGUOUS = "ambiguous near resonance"


@dataclass(frozen=True)
class Estimate:
    """A number with the warnings raised while computing it."""

    value: float
    flags: tuple = ()
    detail: dict = field(default_factory=dict, compare=False)

    def __float__(self):
        return float(self.value)

    @property
    def reliable(self):
        return not self.flags


@dataclass(frozen=True)
class DetuningContext:
    """Qubit frequencies and the detunings ``f_q - f_i`` to every mode."""

    f_A: float
    f_B: float
    mode_freqs: tuple
    dressed: bool = False

    @classmethod
    def from_couplings(cls, f_A, f_B, couplings: CouplingSet, dressed=False):
        return cls(float(f_A), float(f_B), tuple(couplings.freqs), dressed)

    @property
    def delta_A(self):
        return self.f_A - np.asarray(self.mode_freqs)

    @property
    def delta_B(self):
        return self.f_B - np.asarray(self.mode_freqs)


@dataclass
class InteractionPoint:
    """One point of a J or ZZ sweep.

    ``f_A`` and ``f_B`` are dressed when ``dressed`` is True; the bare values
    used to build the model are kept in ``diagnostics``.
    """

    sweep_value: float
    f_A: float
    f_B: float
    J_SW: float = float("nan")
    J_LA: float = float("nan")
    zeta: float = float("nan")
    method: str = "Exact"
    dressed: bool = False
    flags: List[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def J(self):
        return self.J_SW if np.isnan(self.J_LA) else self.J_LA


def j_schrieffer_wolff(couplings: CouplingSet, ctx: DetuningContext, guard=SW_GUARD):
    """Second-order exchange ``J = 1/2 sum_i gA gB (1/dA + 1/dB)`` in MHz.

    Every coupling entry contributes.  Detunings smaller than ``guard*|g|``
    produce an :data:`UNRELIABLE` flag instead of an exception.
    """
    gA, gB = couplings.g_A, couplings.g_B
    dA, dB = ctx.delta_A * 1e3, ctx.delta_B * 1e3
    with np.errstate(divide="ignore", invalid="ignore"):
        J = 0.5 * np.sum(gA * gB * (1.0 / dA + 1.0 / dB))
    margin = np.minimum(np.abs(dA) - guard * np.abs(gA), np.abs(dB) - guard * np.abs(gB))
    flags = (UNRELIABLE,) if (len(margin) and margin.min() < 0) or not np.isfinite(J) else ()
    nearest = float(np.min(np.abs(np.concatenate([dA, dB])))) if len(dA) else float("inf")
    return Estimate(float(J), flags, {"nearest_mode_MHz": nearest})


def block_diagonalize_least_action(H, subspace, tol=1e-6):
    """Effective Hamiltonian of ``subspace`` from the minimal-rotation decoupling.

    The eigenvectors with the largest weight on the subspace are selected and
    their projection ``S`` onto it is orthonormalized by its polar factor
    ``U``.  The block ``U diag(E) U^T`` is the subspace Hamiltonian after the
    unitary closest to identity that removes all coupling to the complement.

    Returns
    -------
    H_eff : ndarray
        Block in the order of ``subspace``.
    fidelity : float
        Mean squared singular value of ``S`` (1 when already decoupled).

    Raises
    ------
    NumericalError
        If ``S`` is nearly singular.
    """
    P = list(subspace)
    E, V = np.linalg.eigh(H)
    w = np.sum(V[P, :] ** 2, axis=0)
    sel = np.sort(np.argsort(-w, kind="stable")[: len(P)])
    S = V[np.ix_(P, sel)]
    u, s, vt = np.linalg.svd(S)
    if s.min() < tol:
        raise NumericalError(
            f"subspace poorly represented in the eigenvectors: smallest singular value {s.min():.3e}"
        )
    U = u @ vt
    H_eff = U @ np.diag(E[sel]) @ U.T
    return H_eff, float(np.mean(s**2))


def zz_shift(spectrum: LabeledSpectrum, min_overlap=0.5):
    """``zeta = E00 + E11 - E10 - E01`` in MHz, flagged when labels are weak."""
    e = spectrum.energies
    z = (e["00"] + e["11"] - e["10"] - e["01"]) * 1e3
    low = [l for l in ("00", "01", "10", "11") if spectrum.overlaps[l] < min_overlap]
    return Estimate(float(z), (AMBIGUOUS,) if low else (), {"low_overlap": low})


class MultimodeModel:
    """Two flux-tunable transmons coupled to a set of ring modes.

    Qubit frequencies are set through their external flux, so the
    anharmonicity follows the charge-basis transmon at each point.
    """

    def __init__(self, couplings: CouplingSet, qubits: Sequence[TransmonParams],
                 config: Optional[ModelConfig] = None, n_charge=transmon.DEFAULT_N_CHARGE):
        self.couplings = couplings
        self.qubits = tuple(qubits)
        self.config = config or ModelConfig()
        self.n_charge = n_charge
        self.basis = enumerate_basis(self.config, couplings)
        self.targets = default_targets(self.basis)
        self._levels = {}

    def qubit_levels(self, which, f01):
        key = (which, round(float(f01), 12))
        if key not in self._levels:
            p = self.qubits[which]
            phi = transmon.flux_for_frequency(p, f01, self.n_charge)
            lv = transmon.levels(p.at_flux(phi), self.n_charge)
            # pin f01 to the target so the root-finder tolerance never leaks in
            self._levels[key] = TransmonLevels(float(f01), float(f01) + lv.anharmonicity)
        return self._levels[key]

    def hamiltonian(self, f_A, f_B):
        q = (self.qubit_levels(0, f_A), self.qubit_levels(1, f_B))
        return assemble(self.config, self.couplings, q, self.basis)

    def spectrum(self, f_A, f_B, reference=None, resolve=True):
        return diagonalize_and_label(self.hamiltonian(f_A, f_B), self.basis, reference,
                                     self.targets, resolve=resolve)

    def exchange_block(self, f_A, f_B):
        """Least-action ``{10, 01}`` block (GHz) at bare frequencies."""
        P = [self.targets["10"], self.targets["01"]]
        return block_diagonalize_least_action(self.hamiltonian(f_A, f_B), P)[0]

    def calibrate_bare_fB(self, f_A, f_B_dressed, span=0.05):
        """Bare Q_B frequency whose dressed ``01`` transition equals ``f_B_dressed``."""
        def resid(fb):
            return self.spectrum(f_A, fb).frequency("01") - f_B_dressed
        lo, hi = f_B_dressed - span, f_B_dressed + span
        try:
            return brentq(resid, lo, hi, xtol=1e-12)
        except ValueError:
            raise NumericalError(
                f"no bare Q_B frequency in [{lo:.4f}, {hi:.4f}] GHz gives dressed {f_B_dressed} GHz"
            ) from None


def _la_crossing(model: MultimodeModel, f_B, guess, span):
    def diff(fa):
        h = model.exchange_block(fa, f_B)
        return h[0, 0] - h[1, 1]
    lo, hi = guess - span, guess + span
    a, b = diff(lo), diff(hi)
    if a * b > 0:
        raise NumericalError(f"no qubit-qubit crossing within {span * 1e3:.0f} MHz of {guess:.4f} GHz")
    return brentq(diff, lo, hi, xtol=1e-12)


def j_least_action(model: MultimodeModel, f_B, crossing_f=None, offset=LA_OFFSET, span=0.05):
    """Exchange from least-action block diagonalization near a qubit-qubit crossing.

    The crossing is where the diagonal of the effective ``{10, 01}`` block is
    degenerate, searched within ``span`` of ``crossing_f`` (default ``f_B``).
    The off-diagonal element is evaluated ``offset`` below and above it and
    the two signed values are averaged.

    Returns
    -------
    Estimate
        J in MHz; ``detail`` holds the crossing and the two side values.
    """
    guess = f_B if crossing_f is None else crossing_f
    fc = _la_crossing(model, f_B, guess, span)
    side = [model.exchange_block(fc + s, f_B)[0, 1] * 1e3 for s in (-offset, offset)]
    return Estimate(float(np.mean(side)), (), {"crossing_fA": fc, "J_minus": side[0], "J_plus": side[1]})


def exact_half_gap(model: MultimodeModel, f_B, crossing_f=None, span=0.05):
    """Half the minimum splitting (MHz) of the two eigenstates carrying the
    ``10``/``01`` weight, minimised over bare ``f_A``."""
    P = [model.targets["10"], model.targets["01"]]

    def gap(fa):
        E, V = np.linalg.eigh(model.hamiltonian(fa, f_B))
        w = np.sum(V[P, :] ** 2, axis=0)
        sel = np.sort(np.argsort(-w, kind="stable")[:2])
        return E[sel[1]] - E[sel[0]]

    c = f_B if crossing_f is None else crossing_f
    res = minimize_scalar(gap, bounds=(c - span, c + span), method="bounded",
                          options={"xatol": 1e-9})
    return 0.5 * res.fun * 1e3, float(res.x)


def _zz_point(model, fa, fb_bare, reference):
    sp = model.spectrum(fa, fb_bare, reference=reference, resolve=True)
    z = zz_shift(sp)
    return sp, z


def sweep_interactions(model: MultimodeModel, f_A_targets, f_B, f_B_dressed=True, tracking=False,
                       with_sw=True, jump=ZETA_JUMP):
    """ZZ shift and perturbative J along a sweep of the bare Q_A frequency.

    Parameters
    ----------
    model : MultimodeModel
    f_A_targets : sequence of float
        Bare Q_A frequencies, each reached by tuning its flux.
    f_B : float
        Q_B frequency; with ``f_B_dressed`` the bare value is calibrated once
        at the first sweep point so the dressed ``01`` line sits at ``f_B``.
    tracking : bool
        Label each point by overlap with the previous point's eigenvectors
        instead of with the bare states.  Tracking follows hybridized branches
        through qubit-mode anticrossings, so the default labels by bare-state
        overlap, which keeps the dressed-frequency meaning of each label.
    jump : float
        Sign changes with ``|d zeta|`` above this (MHz) count as discontinuities.

    Returns
    -------
    SweepResult
    """
    targets = [float(f) for f in f_A_targets]
    if not targets:
        raise DomainError("empty sweep")
    fb = model.calibrate_bare_fB(targets[0], f_B) if f_B_dressed else float(f_B)
    points, ref = [], None
    for fa in targets:
        pt = InteractionPoint(sweep_value=fa, f_A=float("nan"), f_B=float("nan"), dressed=True)
        pt.diagnostics.update(f_A_bare=fa, f_B_bare=fb)
        try:
            sp, z = _zz_point(model, fa, fb, ref if tracking else None)
        except LHRingError as exc:
            pt.flags.append(f"failed: {exc}")
            points.append(pt)
            ref = None
            continue
        ref = sp
        pt.f_A, pt.f_B = sp.frequency("10"), sp.frequency("01")
        pt.zeta = z.value
        pt.flags.extend(z.flags)
        pt.diagnostics["overlaps"] = {l: sp.overlaps[l] for l in ("00", "01", "10", "11")}
        if with_sw:
            sw = j_schrieffer_wolff(model.couplings, DetuningContext.from_couplings(fa, fb, model.couplings))
            pt.J_SW = sw.value
            pt.method = "SW+Exact"
            pt.flags.extend(sw.flags)
        points.append(pt)
    return SweepResult(points, fb, jump)


@dataclass
class SweepResult:
    points: List[InteractionPoint]
    f_B_bare: float
    jump: float = ZETA_JUMP

    def arrays(self):
        ok = [p for p in self.points if np.isfinite(p.zeta)]
        return np.array([p.f_A for p in ok]), np.array([p.zeta for p in ok])

    @property
    def zero_crossings(self):
        x, z = self.arrays()
        return zero_crossings(x, z, self.jump)

    @property
    def discontinuities(self):
        x, z = self.arrays()
        return discontinuities(x, z, self.jump)


def _sign_changes(z):
    s = np.sign(z)
    return [i for i in range(len(z) - 1) if s[i] * s[i + 1] < 0]


def zero_crossings(x, z, jump=ZETA_JUMP):
    """Continuous sign changes of ``z`` located by linear interpolation in ``x``."""
    out = []
    for i in _sign_changes(z):
        if abs(z[i + 1] - z[i]) > jump:
            continue
        out.append(float(x[i] - z[i] * (x[i + 1] - x[i]) / (z[i + 1] - z[i])))
    return out


def discontinuities(x, z, jump=ZETA_JUMP):
    """Sign changes of ``z`` with a step larger than ``jump``, reported at the midpoint."""
    return [float(0.5 * (x[i] + x[i + 1])) for i in _sign_changes(z) if abs(z[i + 1] - z[i]) > jump]


def j_sweep(model: MultimodeModel, freqs, least_action=True, offset=LA_OFFSET, span=0.05):
    """J at equal bare qubit frequencies for every value in ``freqs``.

    Each point carries the perturbative value and, when requested, the
    least-action value around the nearby qubit-qubit crossing; failures are
    recorded as flags.
    """
    points = []
    for f in freqs:
        f = float(f)
        sw = j_schrieffer_wolff(model.couplings, DetuningContext.from_couplings(f, f, model.couplings))
        pt = InteractionPoint(sweep_value=f, f_A=f, f_B=f, J_SW=sw.value, method="SW",
                              flags=list(sw.flags), diagnostics=dict(sw.detail))
        if least_action:
            try:
                la = j_least_action(model, f, f, offset, span)
                pt.J_LA = la.value
                pt.method = "SW+LeastAction"
                pt.diagnostics.update(la.detail)
            except LHRingError as exc:
                pt.flags.append(f"least action failed: {exc}")
        points.append(pt)
    return points
