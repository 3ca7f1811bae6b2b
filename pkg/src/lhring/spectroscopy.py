"""Synthetic spectroscopy and Ramsey data with the matching fit pipelines.

Three fits are provided: coupling strengths from vacuum Rabi splittings,
qubit-qubit exchange from the two-level anticrossing, and the ZZ shift
from Ramsey fringes with and without the partner qubit excited.
"""
from __future__ import annotations

import csv
import io
import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np
from scipy import stats
from scipy.optimize import OptimizeWarning, brentq, curve_fit, least_squares, linear_sum_assignment

from . import transmon
from .errors import DomainError, ValidationError
from .transmon import TransmonParams

RAMSEY_MAX_ERR = 0.4  # MHz


@dataclass
class FitResult:
    """Least-squares estimates with 95% confidence half-widths."""

    params: Dict[str, float]
    ci95: Optional[Dict[str, float]]
    residual_norm: float
    converged: bool
    flags: List[str] = field(default_factory=list)
    detail: dict = field(default_factory=dict, repr=False)

    def covers(self, name, truth):
        return self.ci95 is not None and abs(self.params[name] - truth) <= self.ci95[name]

    def to_csv(self, fmt="{:.12g}"):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "estimate", "ci95"])
        for k, v in self.params.items():
            ci = "" if self.ci95 is None else fmt.format(self.ci95[k])
            w.writerow([k, fmt.format(v), ci])
        w.writerow(["residual_norm", fmt.format(self.residual_norm), ""])
        w.writerow(["converged", str(self.converged).lower(), ""])
        if self.flags:
            w.writerow(["flags", ";".join(self.flags), ""])
        return buf.getvalue()


def confidence_halfwidths(jac, resid, level=0.95):
    """Half-widths ``t * sqrt(diag(s^2 (J^T J)^-1))`` from a least-squares Jacobian."""
    m, p = jac.shape
    dof = max(m - p, 1)
    s2 = float(resid @ resid) / dof
    JTJ = jac.T @ jac
    try:
        cov = np.linalg.inv(JTJ)
        if not np.all(np.isfinite(cov)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(JTJ)
    return stats.t.ppf(0.5 + level / 2, dof) * np.sqrt(np.abs(np.diag(cov)) * s2)


# --------------------------------------------------------------------------
# forward models


def _fock_basis(n_modes, n_levels, max_quanta):
    out = []
    for j in range(min(n_levels - 1, max_quanta) + 1):
        for occ in itertools.product(range(max_quanta + 1), repeat=n_modes):
            if j + sum(occ) <= max_quanta:
                out.append((j,) + occ)
    out.sort(key=lambda s: (sum(s), s))
    return out


@dataclass
class SplittingModel:
    """Transmon coupled to up to three modes through its charge operator.

    The transmon is kept in its lowest ``n_levels`` charge-basis eigenstates,
    each mode in Fock states with at most ``max_quanta`` quanta in total.  The
    coupling is ``g_i (n/|n_01|)(a_i + a_i^dag)``, so ``g_i`` is the vacuum
    Rabi rate of the 0-1 transition.  ``chi`` (GHz) shifts the qubit
    transition to account for modes left out of the model.
    """

    qubit: TransmonParams
    mode_freqs: tuple
    g: tuple
    chi: float = 0.0
    n_levels: int = 4
    max_quanta: int = 3
    n_charge: int = transmon.DEFAULT_N_CHARGE

    def __post_init__(self):
        self.mode_freqs = tuple(float(f) for f in self.mode_freqs)
        self.g = tuple(float(x) for x in self.g)
        if len(self.mode_freqs) != len(self.g):
            raise DomainError("one coupling per mode is required")
        if not 1 <= len(self.g) <= 3:
            raise DomainError("splitting model handles one to three modes")
        if self.n_levels < 2:
            raise DomainError("need at least two transmon levels")
        basis = _fock_basis(len(self.g), self.n_levels, self.max_quanta)
        pos = {s: i for i, s in enumerate(basis)}
        self._q = np.array([s[0] for s in basis])
        self._occ = np.array([s[1:] for s in basis], dtype=float)
        self._one = np.array([sum(s) == 1 for s in basis])
        # mode ladder links (i, j, mode, sqrt(n+1)) and qubit level pairs
        links = []
        for s, i in pos.items():
            for m in range(len(self.g)):
                up = list(s)
                up[1 + m] += 1
                for jq in range(self.n_levels):
                    up[0] = jq
                    t = pos.get(tuple(up))
                    if t is not None:
                        links.append((i, t, m, np.sqrt(s[1 + m] + 1), s[0], jq))
        self._links = np.array(links) if links else np.zeros((0, 6))

    @property
    def n_branches(self):
        return len(self.g) + 1

    def with_params(self, g=None, E_J0=None, chi=None):
        q = self.qubit if E_J0 is None else replace(self.qubit, E_J0=float(E_J0))
        return replace(self, qubit=q, g=self.g if g is None else tuple(g),
                       chi=self.chi if chi is None else chi)

    def hamiltonian(self, phi):
        p = self.qubit.at_flux(phi)
        E, vec = transmon.eigensystem(p, self.n_levels, self.n_charge)
        n = vec.T @ transmon.charge_operator(self.n_charge) @ vec
        n = n / abs(n[0, 1])
        E = E - E[0] + self.chi * np.arange(self.n_levels)
        H = np.diag(E[self._q] + self._occ @ np.array(self.mode_freqs))
        if len(self._links):
            L = self._links
            i, t = L[:, 0].astype(int), L[:, 1].astype(int)
            m, a = L[:, 2].astype(int), L[:, 3]
            qa, qb = L[:, 4].astype(int), L[:, 5].astype(int)
            v = np.array(self.g)[m] * 1e-3 * a * n[qa, qb]
            np.add.at(H, (i, t), v)
            np.add.at(H, (t, i), v)
        return H

    def branches(self, phi):
        """The ``n_modes + 1`` transition frequencies (GHz) of the states with
        most weight in the single-excitation sector, ascending."""
        E, V = np.linalg.eigh(self.hamiltonian(phi))
        w = np.sum(V[self._one, :] ** 2, axis=0)
        sel = np.sort(np.argsort(-w, kind="stable")[: self.n_branches])
        return E[sel] - E[0]

    def flux_for(self, f01):
        """Flux (``[0, 0.5]``) at which the uncoupled qubit sits at ``f01``."""
        return transmon.flux_for_frequency(self.qubit, f01 - self.chi, self.n_charge)


@dataclass
class ExchangeModel:
    """Two-level qubits with a direct exchange ``J`` (MHz).

    ``f_A = sqrt(8 E_J(phi) E_C) - E_C + chi``, with ``chi`` the summed
    dispersive pull of the nearby modes, and the fixed dressed ``f_B``.
    """

    E_J0: float
    E_C: float
    d: float
    f_B: float
    J: float
    chi: float = 0.0

    n_branches = 2

    def qubit_freq(self, phi):
        EJ = self.E_J0 * np.sqrt(np.cos(np.pi * phi) ** 2 + self.d**2 * np.sin(np.pi * phi) ** 2)
        return np.sqrt(8 * EJ * self.E_C) - self.E_C + self.chi

    def branches(self, phi):
        fa = self.qubit_freq(phi)
        mean, half = 0.5 * (fa + self.f_B), 0.5 * (fa - self.f_B)
        r = np.sqrt(half**2 + (self.J * 1e-3) ** 2)
        return np.array([mean - r, mean + r])

    def flux_for(self, f_A):
        """Inverse of :meth:`qubit_freq` on ``[0, 0.5]``."""
        EJ = (f_A - self.chi + self.E_C) ** 2 / (8 * self.E_C)
        r2 = (EJ / self.E_J0) ** 2
        c2 = (r2 - self.d**2) / (1 - self.d**2)
        if not 0 <= c2 <= 1:
            raise DomainError(f"f_A = {f_A} GHz is outside the tunable band")
        return float(np.arccos(np.sqrt(c2)) / np.pi)


# --------------------------------------------------------------------------
# spectroscopy traces


@dataclass
class SplittingTrace:
    """Dressed branch frequencies (GHz) at each flux value."""

    flux_grid: np.ndarray
    branch_freqs: List[np.ndarray]
    noise_sigma: float = 0.0

    def __post_init__(self):
        self.flux_grid = np.asarray(self.flux_grid, dtype=float)
        self.branch_freqs = [np.asarray(b, dtype=float) for b in self.branch_freqs]
        if len(self.flux_grid) != len(self.branch_freqs):
            raise ValidationError("one branch list per flux value is required")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")

    @property
    def n_points(self):
        return int(sum(len(b) for b in self.branch_freqs))

    def to_csv(self, fmt="{:.12g}"):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi_ext", "branch", "freq_GHz", "noise_sigma_GHz"])
        for phi, fb in zip(self.flux_grid, self.branch_freqs):
            if not len(fb):
                w.writerow([fmt.format(phi), "", "", fmt.format(self.noise_sigma)])
            for k, f in enumerate(fb):
                w.writerow([fmt.format(phi), k, fmt.format(f), fmt.format(self.noise_sigma)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = _read_rows(text, ["phi_ext", "branch", "freq_GHz", "noise_sigma_GHz"])
        grid, freqs, sigma = [], [], 0.0
        for ln, r in rows:
            try:
                phi = float(r["phi_ext"])
                sigma = float(r["noise_sigma_GHz"])
                f = float(r["freq_GHz"]) if r["freq_GHz"].strip() else None
            except ValueError as exc:
                raise ValidationError(f"bad trace row: {exc}", line=ln) from None
            if not grid or phi != grid[-1]:
                grid.append(phi)
                freqs.append([])
            if f is not None:
                freqs[-1].append(f)
        return cls(np.array(grid), [np.array(f) for f in freqs], sigma)


def _read_rows(text, need):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValidationError("empty dataset", line=1)
    header = [c.strip() for c in rows[0]]
    missing = [c for c in need if c not in header]
    if missing:
        raise ValidationError(f"missing columns {missing}", line=1)
    out = []
    for ln, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValidationError(f"expected {len(header)} fields, got {len(row)}", line=ln)
        out.append((ln, dict(zip(header, row))))
    if not out:
        raise ValidationError("dataset has no rows", line=2)
    return out


def synthesize_splitting(model, flux_grid, window=None, noise_sigma=0.0, seed=0):
    """Branch frequencies of ``model`` over ``flux_grid`` with Gaussian noise.

    Branches outside ``window`` (GHz) are dropped before noise is added.
    """
    rng = np.random.default_rng(seed)
    out = []
    for phi in flux_grid:
        b = model.branches(float(phi))
        if window is not None:
            b = b[(b >= window[0]) & (b <= window[1])]
        out.append(b + rng.normal(0.0, noise_sigma, size=len(b)) if noise_sigma > 0 else b.copy())
    return SplittingTrace(np.asarray(flux_grid, dtype=float), out, float(noise_sigma))


def _matched_residuals(model, trace):
    res = []
    for phi, data in zip(trace.flux_grid, trace.branch_freqs):
        if not len(data):
            continue
        b = model.branches(float(phi))
        if len(b) == len(data):
            # in one dimension sorted order is the optimal assignment
            order = np.argsort(data, kind="stable")
            out = np.empty(len(data))
            out[order] = data[order] - b
            res.append(out)
            continue
        cost = np.abs(data[:, None] - b[None, :])
        r, c = linear_sum_assignment(cost)
        out = np.empty(len(data))
        out[r] = data[r] - b[c]
        res.append(out)
    return np.concatenate(res) if res else np.zeros(0)


def _run_fit(fun, x0, names, max_nfev, scale):
    try:
        sol = least_squares(fun, x0, method="lm", max_nfev=max_nfev, x_scale=scale)
    except ValueError as exc:
        return FitResult(dict(zip(names, map(float, x0))), None, float("nan"), False, [f"fit failed: {exc}"])
    resid = sol.fun
    converged = bool(sol.success) and np.all(np.isfinite(sol.x))
    ci = None
    if converged:
        ci = dict(zip(names, map(float, confidence_halfwidths(sol.jac, resid))))
    return FitResult(dict(zip(names, map(float, sol.x))), ci, float(np.linalg.norm(resid)), converged,
                     detail={"nfev": sol.nfev, "status": sol.status})


def fit_g_from_splitting(trace: SplittingTrace, init: SplittingModel, n_modes=None, max_nfev=400):
    """Fit ``|g_i|`` and ``E_J0`` of a :class:`SplittingModel` to a trace.

    Data points are matched to model branches per flux value by minimum
    total frequency distance.  Mode frequencies, ``E_C``, ``d`` and ``chi``
    stay fixed.

    Returns
    -------
    FitResult
        Parameters ``g0, g1, ...`` (MHz) and ``E_J0`` (GHz).
    """
    nm = len(init.g) if n_modes is None else int(n_modes)
    if nm != len(init.g):
        raise DomainError(f"init has {len(init.g)} modes, n_modes={nm}")
    names = [f"g{i}" for i in range(nm)] + ["E_J0"]

    def fun(x):
        return _matched_residuals(init.with_params(g=np.abs(x[:nm]), E_J0=x[nm]), trace) * 1e3

    x0 = np.array(list(np.abs(init.g)) + [init.qubit.E_J0])
    out = _run_fit(fun, x0, names, max_nfev, np.array([10.0] * nm + [0.1]))
    for k in names[:nm]:
        out.params[k] = abs(out.params[k])
    return out


def fit_j_from_spectroscopy(trace: SplittingTrace, init: ExchangeModel, max_nfev=400, profile=True):
    """Fit ``|J|`` (MHz) and ``E_J0`` (GHz) of an :class:`ExchangeModel`.

    The branches depend on ``J`` only through ``J**2``, so the curvature-based
    interval collapses when the gap is unresolved.  With ``profile`` the
    interval for ``J`` is instead taken from the profile sum of squares,
    ``SSR(J) <= SSR_min * (1 + F(0.95; 1, n-p) / (n-p))``, with ``E_J0``
    refitted at each trial ``J``.
    """
    names = ["J", "E_J0"]

    def fun(x):
        return _matched_residuals(replace(init, J=x[0], E_J0=x[1]), trace) * 1e3

    out = _run_fit(fun, np.array([init.J, init.E_J0]), names, max_nfev, np.array([1.0, 0.1]))
    out.params["J"] = J_hat = abs(out.params["J"])
    if not (profile and out.converged):
        return out
    n = trace.n_points
    ssr = out.residual_norm**2
    if n <= 2 or ssr <= 1e-20:
        return out
    thr = ssr * (1 + stats.f.ppf(0.95, 1, n - 2) / (n - 2))
    ej = [out.params["E_J0"]]

    def excess(J):
        sol = least_squares(lambda x: fun([J, x[0]]), [ej[0]], method="lm", x_scale=[0.1])
        return float(sol.fun @ sol.fun) - thr

    step = max(J_hat, 1e-3)
    hi = J_hat + step
    while excess(hi) < 0:
        step *= 2
        hi = J_hat + step
    upper = brentq(excess, J_hat, hi, xtol=1e-9)
    lower = 0.0 if excess(0.0) <= 0 else brentq(excess, 0.0, J_hat, xtol=1e-9)
    out.ci95["J"] = float(max(upper - J_hat, J_hat - lower))
    out.detail["J_interval"] = (lower, upper)
    return out


def dispersive_chi(g, f_q, f_modes):
    """Pull (GHz) of the qubit 0-1 line by empty far-detuned modes, ``sum g^2/D``.

    ``g`` in MHz and ``D = f_q - f_mode`` in GHz.
    """
    g = np.asarray(g, dtype=float) * 1e-3
    D = f_q - np.asarray(f_modes, dtype=float)
    return float(np.sum(g**2 / D))


# --------------------------------------------------------------------------
# Ramsey


_TIME_SCALE = {"us": 1e3, "ns": 1.0}  # GHz * unit -> cycles


@dataclass
class RamseyDataset:
    """Excited-state probability of Q_A after a Ramsey sequence.

    ``p1[i, j]`` belongs to ``drive_freqs[i]`` (GHz) and ``idle_times[j]``,
    which are in ``time_unit`` (``"us"`` or ``"ns"``); ``T2`` is in µs.
    """

    drive_freqs: np.ndarray
    idle_times: np.ndarray
    p1: np.ndarray
    prep_B_excited: bool
    T2: float
    time_unit: str = "us"

    def __post_init__(self):
        self.drive_freqs = np.asarray(self.drive_freqs, dtype=float)
        self.idle_times = np.asarray(self.idle_times, dtype=float)
        self.p1 = np.asarray(self.p1, dtype=float)
        if self.time_unit not in _TIME_SCALE:
            raise ValidationError(f"time_unit must be one of {sorted(_TIME_SCALE)}")
        if self.p1.shape != (len(self.drive_freqs), len(self.idle_times)):
            raise ValidationError("p1 must have shape (n_drive, n_times)")
        if np.any(self.p1 < 0) or np.any(self.p1 > 1) or not np.all(np.isfinite(self.p1)):
            raise ValidationError("probabilities must lie in [0, 1]")
        for name, g in (("drive_freqs", self.drive_freqs), ("idle_times", self.idle_times)):
            if len(g) == 0 or np.any(np.diff(g) <= 0):
                raise ValidationError(f"{name} must be nonempty and strictly increasing")


def synthesize_ramsey(f_qubit_ground, f_qubit_excited, T2, drive_freqs, idle_times, noise_sigma=0.0,
                      seed=0, time_unit="us"):
    """Ramsey fringes for Q_B in the ground and in the excited state.

    ``p1 = (1 + cos(2 pi (f_d - f_A) t) exp(-t/T2)) / 2`` plus Gaussian noise,
    clipped to ``[0, 1]``.  ``f_qubit_excited`` may be an array with one value
    per drive frequency to model drifts.  The two datasets draw noise from
    independent streams of the same seed.

    Returns
    -------
    (RamseyDataset, RamseyDataset)
        Q_B in the ground state, Q_B excited.
    """
    fd = np.asarray(drive_freqs, dtype=float)
    t = np.asarray(idle_times, dtype=float)
    if not len(fd) or not len(t):
        raise DomainError("drive and time grids must be nonempty")
    scale = _TIME_SCALE[time_unit]
    T2_t = T2 * 1e3 / scale
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2)]
    out = []
    for excited, fq, rng in ((False, f_qubit_ground, streams[0]), (True, f_qubit_excited, streams[1])):
        fq = np.broadcast_to(np.asarray(fq, dtype=float), fd.shape)
        phase = 2 * np.pi * ((fd - fq) * scale)[:, None] * t[None, :]
        p = 0.5 * (1 + np.cos(phase) * np.exp(-t / T2_t)[None, :])
        if noise_sigma > 0:
            p = p + rng.normal(0.0, noise_sigma, size=p.shape)
        out.append(RamseyDataset(fd, t, np.clip(p, 0.0, 1.0), excited, T2, time_unit))
    return tuple(out)


def _damped_cos(t, A, f, phi, rate, c):
    return c + A * np.cos(2 * np.pi * f * t + phi) * np.exp(-rate * t)


def fit_ramsey_frequency(t, p, T2, time_unit="us"):
    """Ramsey frequency and its 1-sigma error, both in MHz.

    The damped cosine is initialised from the peak of a zero-padded
    periodogram, amplitude 1/2 and a decay rate of 1/``T2`` (``T2`` in µs).
    Fits whose covariance cannot be estimated return an infinite error.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    dt = np.median(np.diff(t))
    nfft = 16 * len(t)
    spec = np.abs(np.fft.rfft(p - p.mean(), nfft))
    fr = np.fft.rfftfreq(nfft, dt)
    f0 = fr[int(np.argmax(spec))]
    # decay as a rate so that T2 -> infinity stays well conditioned
    rate0 = _TIME_SCALE[time_unit] / (T2 * 1e3)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(_damped_cos, t, p, p0=[0.5, f0, 0.0, rate0, 0.5], maxfev=5000)
    except (RuntimeError, ValueError):
        return float("nan"), float("inf")
    to_mhz = 1e3 / _TIME_SCALE[time_unit]  # cycles per time unit -> MHz
    err = np.sqrt(pcov[1, 1]) if np.isfinite(pcov[1, 1]) else float("inf")
    return float(abs(popt[1]) * to_mhz), float(err * to_mhz)


def _line_fit(fd, fr, err):
    """Locate ``f0`` (GHz) from Ramsey frequencies ``|f_d - f0|`` (MHz) with unit slope."""
    w = 1.0 / np.maximum(err, 1e-9)

    def resid(x):
        return (fr - np.abs(fd - x[0]) * 1e3) * w

    cands = np.concatenate([fd + fr * 1e-3, fd - fr * 1e-3])
    start = cands[int(np.argmin([np.sum(resid([c]) ** 2) for c in cands]))]
    sol = least_squares(resid, [start], method="lm", x_scale=[1e-3])
    ci = confidence_halfwidths(sol.jac, sol.fun)[0]
    return float(sol.x[0]), float(ci), sol


def extract_zeta_ramsey(datasets, max_err=RAMSEY_MAX_ERR):
    """ZZ shift (MHz) from a ground/excited pair of Ramsey datasets.

    Each drive frequency gives one Ramsey frequency from a damped-cosine fit;
    fits with a 1-sigma error above ``max_err`` (MHz) are dropped.  A unit-slope
    line ``|f_d - f0|`` through the rest locates ``f0`` for each dataset and
    ``zeta = f0(excited) - f0(ground)``, with the two 95% half-widths added in
    quadrature.
    """
    by_state = {bool(ds.prep_B_excited): ds for ds in datasets}
    if set(by_state) != {False, True}:
        raise ValidationError("need one dataset with Q_B in the ground state and one excited")
    f0, ci, flags, detail = {}, {}, [], {}
    for excited, ds in by_state.items():
        fits = [fit_ramsey_frequency(ds.idle_times, row, ds.T2, ds.time_unit) for row in ds.p1]
        fr = np.array([f for f, _ in fits])
        er = np.array([e for _, e in fits])
        keep = np.isfinite(fr) & (er <= max_err)
        tag = "excited" if excited else "ground"
        detail[tag] = {"f_ramsey_MHz": fr, "err_MHz": er, "kept": keep}
        if keep.sum() * 2 < len(keep):
            flags.append(f"rejection removed more than half of the {tag} grid")
        if keep.sum() < 3:
            return FitResult({"zeta": float("nan")}, None, float("nan"), False,
                             flags + [f"fewer than 3 usable Ramsey fits for Q_B {tag}"], detail)
        f0[excited], ci[excited], sol = _line_fit(ds.drive_freqs[keep], fr[keep], er[keep])
        detail[f"f0_{tag}"] = f0[excited]
    zeta = (f0[True] - f0[False]) * 1e3
    half = float(np.hypot(ci[True], ci[False]) * 1e3)
    return FitResult({"zeta": float(zeta)}, {"zeta": half}, 0.0, True, flags, detail)


def ramsey_to_csv(datasets, fmt="{:.12g}"):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["prep_B_excited", "drive_GHz", "t", "p1", "T2_us", "time_unit"])
    for ds in datasets:
        for i, fd in enumerate(ds.drive_freqs):
            for j, t in enumerate(ds.idle_times):
                w.writerow([int(ds.prep_B_excited), fmt.format(fd), fmt.format(t), fmt.format(ds.p1[i, j]),
                            fmt.format(ds.T2), ds.time_unit])
    return buf.getvalue()


def ramsey_from_csv(text):
    rows = _read_rows(text, ["prep_B_excited", "drive_GHz", "t", "p1", "T2_us", "time_unit"])
    groups = {}
    for ln, r in rows:
        try:
            key = bool(int(r["prep_B_excited"]))
            vals = (float(r["drive_GHz"]), float(r["t"]), float(r["p1"]), float(r["T2_us"]))
        except ValueError as exc:
            raise ValidationError(f"bad Ramsey row: {exc}", line=ln) from None
        if not 0 <= vals[2] <= 1:
            raise ValidationError("p1 outside [0, 1]", field="p1", line=ln)
        groups.setdefault(key, []).append(vals + (r["time_unit"].strip(),))
    out = []
    for key in sorted(groups):
        g = groups[key]
        fd = sorted({v[0] for v in g})
        ts = sorted({v[1] for v in g})
        p = np.full((len(fd), len(ts)), np.nan)
        fi = {f: i for i, f in enumerate(fd)}
        ti = {t: j for j, t in enumerate(ts)}
        for v in g:
            p[fi[v[0]], ti[v[1]]] = v[2]
        if np.isnan(p).any():
            raise ValidationError("Ramsey grid is incomplete")
        out.append(RamseyDataset(fd, ts, p, key, g[0][3], g[0][4]))
    return tuple(out)
