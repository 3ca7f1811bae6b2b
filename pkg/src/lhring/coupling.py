"""Qubit-mode coupling strengths: closed form for the symmetric ring and
numerics from circuit eigenvectors.

Couplings are reported as ``g/2pi`` in MHz, frequencies in GHz.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from typing import List

import numpy as np
from scipy.constants import e as E_CHARGE
from scipy.constants import h as PLANCK

from . import circuit, transmon
from .circuit import Parity, RingSpec
from .errors import DomainError, ValidationError
from .transmon import TransmonParams


@dataclass(frozen=True)
class AnalyticGModel:
    """Prefactors of the symmetric-ring coupling formulas.

    ``alpha_E`` and ``alpha_O`` hold one prefactor per qubit, in ns, such
    that ``g/2pi [GHz] = alpha * 2*pi * sqrt(f_q * f_r**3) / sqrt(N) * trig``
    with frequencies in GHz.
    """

    K: float
    s_AB: float
    C_rat: float
    alpha_E: tuple
    alpha_O: tuple
    f_IR: float
    N: int
    n_AB: int

    @classmethod
    def from_ring(cls, ring: RingSpec, qubits, loading="weak"):
        """Evaluate K, s_AB and the prefactors for an ideal-cell ring.

        The capacitive loading of each qubit, ``c_l = C_QM*(1 - C_rat)``, is
        summed over the finite Brillouin zone; ``k = 0`` is excluded because the
        bare series-capacitor chain has no restoring force there.

        Parameters
        ----------
        ring : RingSpec
        qubits : (TransmonParams, TransmonParams)
        loading : {"weak", "static"}
            ``"weak"`` uses the zero-point prefactor
            ``alpha' = C_rat*(e/2)*sqrt(L_L/E_C)`` for both parities, which is
            the limit of vanishing loading and agrees with the exact circuit
            modes to a few percent away from the band edges.  ``"static"``
            multiplies it by ``K/(1 + s_AB)`` (even) and ``K/(1 - s_AB)`` (odd),
            the quasi-static loading corrections; these overestimate the effect
            because the sums are dominated by modes far above the one probed.
        """
        if loading not in ("weak", "static"):
            raise DomainError("loading must be 'weak' or 'static'")
        N, n_AB, cell = ring.N, ring.n_AB, ring.cell
        if n_AB is None:
            raise DomainError("analytic model needs two qubits attached to the ring")
        C_rat = ring.C_QM / (ring.C_QM + ring.C_S)
        c_l = ring.C_QM * (1 - C_rat)
        q = np.arange(1, N)
        k = 2 * np.pi * q / N
        Lw2 = 1.0 / (4 * cell.C_L * np.sin(k / 2) ** 2)  # L*omega^2(k) in 1/fF
        D_AA = Lw2.sum() / N
        D_AB = (Lw2 * np.cos(k * n_AB)).sum() / N
        K = 1.0 / (1.0 + c_l * D_AA)
        s_AB = K * c_l * D_AB
        a0 = []
        for p in qubits:
            ec_joule = p.E_C * 1e9 * PLANCK
            a0.append(C_rat * E_CHARGE / 2 * np.sqrt(cell.L_L * 1e-9 / ec_joule) * 1e9)
        cE, cO = (K / (1 + s_AB), K / (1 - s_AB)) if loading == "static" else (1.0, 1.0)
        return cls(
            K=float(K),
            s_AB=float(s_AB),
            C_rat=float(C_rat),
            alpha_E=tuple(a * cE for a in a0),
            alpha_O=tuple(a * cO for a in a0),
            f_IR=circuit.ir_cutoff(cell),
            N=N,
            n_AB=n_AB,
        )

    def phase(self, mode_freq):
        """Standing-wave phase ``k*x_AB/2 = n_AB*arcsin(f_IR/f)`` at the qubits."""
        return self.n_AB * np.arcsin(self.f_IR / np.asarray(mode_freq, dtype=float))

    def envelope(self, qubit_f01, mode_freq, parity, qubit=0):
        """Magnitude of the coupling with the trigonometric factor set to one (MHz)."""
        alpha = (self.alpha_E if parity == Parity.EVEN else self.alpha_O)[qubit]
        fr = np.asarray(mode_freq, dtype=float)
        return alpha * 2 * np.pi * np.sqrt(qubit_f01 * fr**3) / np.sqrt(self.N) * 1e3


def analytic_g(model: AnalyticGModel, qubit_f01, mode_freq, parity):
    """Closed-form couplings ``(g_A, g_B)`` in MHz for a paired mode.

    Even modes follow ``cos(n_AB*arcsin(f_IR/f))`` with ``g_A = g_B``; odd modes
    follow the sine with ``g_A = -g_B``.  Both scale as ``sqrt(f_q*f_r**3/N)``.

    Parameters
    ----------
    model : AnalyticGModel
    qubit_f01 : float or (float, float)
        Qubit frequencies in GHz (one value is used for both qubits).
    mode_freq : float
        Mode frequency in GHz, at or above the IR cutoff.
    parity : Parity or str
    """
    parity = Parity(parity)
    if parity == Parity.UNPAIRED:
        raise DomainError("closed form applies to Even or Odd paired modes only")
    if mode_freq < model.f_IR * (1 - 1e-12):
        raise DomainError(f"mode frequency {mode_freq} GHz is below the IR cutoff {model.f_IR:.6f} GHz")
    fq = np.broadcast_to(np.asarray(qubit_f01, dtype=float), (2,))
    x = min(model.f_IR / mode_freq, 1.0)
    theta = model.n_AB * np.arcsin(x)
    env = [model.envelope(fq[i], mode_freq, parity, i) for i in range(2)]
    if parity == Parity.EVEN:
        return float(env[0] * np.cos(theta)), float(env[1] * np.cos(theta))
    return float(env[0] * np.sin(theta)), float(-env[1] * np.sin(theta))


def numeric_g(mode: circuit.ModeSpec, p: TransmonParams, node, qubit_f01=None):
    """Coupling ``g/2pi`` (MHz) of a qubit at ring cell ``node`` to ``mode``.

    ``g = C_rat * n_zpf * omega_r * phi_zpf(node)``, where ``phi_zpf`` is the
    reduced-flux zero point of the ring node and ``n_zpf = sqrt(f_q/16E_C)``
    the qubit charge zero point.  The sign follows the gauge-fixed amplitude.
    """
    fq = transmon.levels(p).f01 if qubit_f01 is None else qubit_f01
    c_rat = p.C_QM / (p.C_QM + p.C_S)
    n_zpf = transmon.charge_zpf(fq, p.E_C)
    g = c_rat * n_zpf * mode.freq * mode.amplitudes[node] * mode.zpf_scale
    return float(g * 1e3)


@dataclass
class CouplingEntry:
    freq: float
    g_A: float
    g_B: float
    parity: Parity


@dataclass
class CouplingSet:
    """Per-mode coupling table.

    Attributes
    ----------
    entries : list of CouplingEntry
        Sorted by frequency; couplings in MHz.
    source : {"Analytic", "Numeric", "Measured"}
    """

    entries: List[CouplingEntry] = field(default_factory=list)
    source: str = "Numeric"

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda en: en.freq)

    def __len__(self):
        return len(self.entries)

    @property
    def freqs(self):
        return np.array([en.freq for en in self.entries])

    @property
    def g_A(self):
        return np.array([en.g_A for en in self.entries])

    @property
    def g_B(self):
        return np.array([en.g_B for en in self.entries])

    @property
    def parities(self):
        return [en.parity for en in self.entries]

    def scaled(self, factor_A=1.0, factor_B=None):
        """Copy with couplings multiplied (``factor_B`` defaults to ``factor_A``)."""
        fb = factor_A if factor_B is None else factor_B
        return CouplingSet(
            [CouplingEntry(en.freq, en.g_A * factor_A, en.g_B * fb, en.parity) for en in self.entries],
            self.source,
        )

    def subset(self, indices):
        return CouplingSet([self.entries[i] for i in indices], self.source)

    def sign_law_violations(self):
        """Indices whose coupling signs contradict their parity label."""
        bad = []
        for i, en in enumerate(self.entries):
            if en.parity == Parity.EVEN and en.g_A * en.g_B < 0:
                bad.append(i)
            elif en.parity == Parity.ODD and en.g_A * en.g_B > 0:
                bad.append(i)
        return bad

    def to_csv(self, fmt="{:.12g}"):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq_GHz", "gA_MHz", "gB_MHz", "parity", "source"])
        for en in self.entries:
            w.writerow([fmt.format(en.freq), fmt.format(en.g_A), fmt.format(en.g_B), en.parity.value, self.source])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, source=None):
        """Parse the CSV written by :meth:`to_csv`.

        Raises
        ------
        ValidationError
            On missing columns or unparsable values, naming the line.
        """
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValidationError("empty coupling table")
        header = [c.strip() for c in rows[0]]
        need = ["freq_GHz", "gA_MHz", "gB_MHz", "parity"]
        missing = [c for c in need if c not in header]
        if missing:
            raise ValidationError(f"missing columns {missing}", line=1)
        col = {c: header.index(c) for c in header}
        entries, src = [], source
        for ln, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                f = float(row[col["freq_GHz"]])
                ga = float(row[col["gA_MHz"]])
                gb = float(row[col["gB_MHz"]])
                par = Parity(row[col["parity"]].strip())
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"bad coupling row: {exc}", line=ln) from None
            if not (np.isfinite(f) and f > 0 and np.isfinite(ga) and np.isfinite(gb)):
                raise ValidationError("frequencies must be positive and couplings finite", line=ln)
            if src is None and "source" in col and len(row) > col["source"]:
                src = row[col["source"]].strip() or None
            entries.append(CouplingEntry(f, ga, gb, par))
        return cls(entries, src or "Measured")


def standing_wave_sign(mode: circuit.ModeSpec, node_A, node_B):
    """Sign that puts a paired mode in the closed-form convention.

    Between the qubits the mode is a pure standing wave about the midpoint
    ``m``.  Even modes are oriented so the amplitude at ``m`` is positive and
    odd modes so the amplitude one cell from ``m`` towards Q_A is positive;
    the closed forms then give the signs of ``g_A`` and ``g_B`` directly.
    """
    if mode.parity not in (Parity.EVEN, Parity.ODD):
        return 1.0
    m = (node_A + node_B) // 2
    j = m if mode.parity == Parity.EVEN else m + (1 if node_A > m else -1)
    a = mode.amplitudes[j]
    return -1.0 if a < 0 else 1.0


def coupling_table(ring: RingSpec, qubits, window=(4.0, 6.5), analytic=False, loading="weak"):
    """Numeric coupling table for the modes of ``ring`` inside ``window``.

    Parameters
    ----------
    ring : RingSpec
        Must have exactly two qubits attached; their order matches ``qubits``.
    qubits : (TransmonParams, TransmonParams)
    window : (float, float)
    analytic : bool
        Also return the closed-form values for paired modes (ideal cells only).

    Returns
    -------
    CouplingSet, or (CouplingSet, list of (g_A, g_B) or None) when ``analytic``.
    """
    if len(ring.qubit_nodes) != 2:
        raise DomainError("coupling_table needs two qubits attached to the ring")
    m = circuit.build_circuit_matrices(ring)
    modes = circuit.solve_modes(m, window=window)
    nA, nB = ring.qubit_nodes.values()
    modes = circuit.classify_parity(modes, nA, nB)
    fq = [transmon.levels(p).f01 for p in qubits]
    entries = []
    for md in modes:
        s = standing_wave_sign(md, nA, nB) if ring.translation_symmetric else 1.0
        gA = s * numeric_g(md, qubits[0], nA, fq[0])
        gB = s * numeric_g(md, qubits[1], nB, fq[1])
        entries.append(CouplingEntry(md.freq, gA, gB, md.parity))
    cs = CouplingSet(entries, "Numeric")
    if not analytic:
        return cs
    model = AnalyticGModel.from_ring(ring, qubits, loading)
    an = []
    for en in cs.entries:
        if en.parity == Parity.UNPAIRED or en.freq < model.f_IR:
            an.append(None)
        else:
            an.append(analytic_g(model, fq, en.freq, en.parity))
    return cs, an


def load_measured_table():
    """Measured coupling table bundled with the package (signed by parity)."""
    text = resources.files("lhring.data").joinpath("measured_couplings.csv").read_text()
    return CouplingSet.from_csv(text, source="Measured")


def parity_disagreements(model: CouplingSet, reference: CouplingSet, max_df=0.05):
    """Match modes by nearest frequency and list parity mismatches.

    Returns a list of ``(ref_freq, model_freq, ref_parity, model_parity)``.
    """
    out = []
    mf = model.freqs
    for en in reference.entries:
        if not len(mf):
            break
        i = int(np.argmin(np.abs(mf - en.freq)))
        if abs(mf[i] - en.freq) <= max_df and model.entries[i].parity != en.parity:
            out.append((en.freq, mf[i], en.parity, model.entries[i].parity))
    return out
