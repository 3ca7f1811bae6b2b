"""Independent reference computations used by the tests.

Nothing here imports the solvers under test; each oracle rebuilds its
answer from a different formulation of the same physics.
"""
import itertools

import numpy as np
from scipy.constants import e as E_CHARGE
from scipy.constants import h as PLANCK
from scipy.constants import hbar
from scipy.optimize import brentq

PHI0 = PLANCK / (2 * E_CHARGE)


# ---------------------------------------------------------------------------
# ideal ring with two capacitively loaded nodes: lattice Green's function
# ---------------------------------------------------------------------------

def _ring_terms(N, n_AB, parity_sign, L, C):
    q = np.arange(N)
    k = 2 * np.pi * q / N
    t = 1.0 + parity_sign * np.cos(k * n_AB)
    with np.errstate(divide="ignore"):
        wk2 = 1.0 / (L * C * 4 * np.sin(k / 2) ** 2)
    wk2[0] = np.inf
    return t, wk2


def ring_green(w, N, n_AB, parity_sign, L, C):
    """Symmetric (+1) or antisymmetric (-1) combination of the on-site and
    transfer Green's functions of the bare ring, in nH (w in 1e12 rad/s)."""
    t, wk2 = _ring_terms(N, n_AB, parity_sign, L, C)
    return L / N * np.sum(t / (1.0 - w**2 / wk2))


def loaded_ring_modes(N, n_AB, parity_sign, L, C, c_load, w_max):
    """Angular frequencies (1e12 rad/s) of the modes of one parity sector.

    Each sector satisfies ``1 = w**2 * c_load * G(w)``; between consecutive
    bare poles there is exactly one root, found by bracketing.
    """
    t, wk2 = _ring_terms(N, n_AB, parity_sign, L, C)
    poles = np.sort(np.sqrt(wk2[1:][t[1:] > 1e-9]))
    # k and N-k share a pole; merge them
    poles = poles[np.concatenate([[True], np.diff(poles) > 1e-9 * poles[1:]])]
    poles = poles[poles < w_max]
    f = lambda w: 1.0 - w**2 * c_load * ring_green(w, N, n_AB, parity_sign, L, C)
    roots = []
    edges = np.concatenate([[1e-9], poles])
    for lo, hi in zip(edges[:-1], edges[1:]):
        a, b = lo * (1 + 1e-12), hi * (1 - 1e-12)
        if f(a) * f(b) < 0:
            roots.append(brentq(f, a, b, xtol=1e-15, rtol=1e-15))
    return np.array(roots)


def loaded_ring_amplitude(w, N, n_AB, parity_sign, L, C, c_load):
    """Amplitude at a loaded node of the mode at ``w``, normalized to unit
    capacitive energy (fF^-1/2)."""
    t, wk2 = _ring_terms(N, n_AB, parity_sign, L, C)
    with np.errstate(invalid="ignore", divide="ignore"):
        term = np.where(np.isinf(wk2), 0.0, t / wk2 / (1.0 - w**2 / wk2) ** 2)
    Rp = L / N * np.sum(term)
    return 1.0 / np.sqrt(2 * w**4 * c_load**2 * Rp + 2 * c_load)


def ring_coupling_oracle(N, n_AB, L, C, C_QM, C_S, f_q, E_C, f_max):
    """Magnitudes of the qubit-mode coupling (MHz) of an ideal ring with two
    identical capacitive loads, for both parities.

    Returns
    -------
    dict
        ``{+1: (freqs, |g|), -1: (freqs, |g|)}``; frequencies in GHz.
    """
    C_rat = C_QM / (C_QM + C_S)
    c_load = C_QM * (1 - C_rat)
    n_zpf = np.sqrt(f_q / (16 * E_C))
    out = {}
    for P in (+1, -1):
        w = loaded_ring_modes(N, n_AB, P, L, C, c_load, 2 * np.pi * f_max * 1e-3)
        f = w * 1e3 / (2 * np.pi)
        g = []
        for wi, fi in zip(w, f):
            v = loaded_ring_amplitude(wi, N, n_AB, P, L, C, c_load)
            zpf = 2 * np.pi / PHI0 * np.sqrt(hbar / (2 * wi * 1e12)) / np.sqrt(1e-15)
            g.append(C_rat * n_zpf * fi * v * zpf * 1e3)
        out[P] = (f, np.array(g))
    return out


# ---------------------------------------------------------------------------
# basis counting
# ---------------------------------------------------------------------------

def count_basis(q_levels, max_exc, strong):
    """Number of states in the truncated basis, counted recursively.

    ``strong`` flags each mode; states with two or more occupied modes are
    allowed only when every occupied mode is strong.
    """
    cap = min(max_exc, q_levels - 1)
    strong = list(strong)

    def modes(i, budget, n_occ, weak):
        if i == len(strong):
            return 1 if (n_occ < 2 or not weak) else 0
        total = modes(i + 1, budget, n_occ, weak)
        for n in range(1, min(cap, budget) + 1):
            total += modes(i + 1, budget - n, n_occ + 1, weak or not strong[i])
        return total

    count = 0
    for qa in range(q_levels):
        for qb in range(q_levels):
            if qa + qb <= max_exc:
                count += modes(0, max_exc - qa - qb, 0, False)
    return count


# ---------------------------------------------------------------------------
# Kronecker-product Hamiltonian
# ---------------------------------------------------------------------------

def _lower(d):
    return np.diag(np.sqrt(np.arange(1, d)), 1)


def kron_hamiltonian(wq, dq, fm, gA, gB, dims, J=0.0):
    """Full product-space RWA Hamiltonian (GHz) for two Kerr qubits and modes.

    Parameters
    ----------
    wq, dq : (float, float)
        Qubit frequencies and anharmonicities (GHz).
    fm : sequence of float
        Mode frequencies (GHz).
    gA, gB : sequence of float
        Couplings in MHz.
    dims : sequence of int
        Local dimensions, qubits first.
    J : float
        Direct qubit exchange (MHz).
    """
    n_osc = len(dims)
    eye = [np.eye(d) for d in dims]

    def op(i, m):
        mats = list(eye)
        mats[i] = m
        out = mats[0]
        for x in mats[1:]:
            out = np.kron(out, x)
        return out

    a = [op(i, _lower(d)) for i, d in enumerate(dims)]
    num = [x.T @ x for x in a]
    dim = int(np.prod(dims))
    H = np.zeros((dim, dim))
    for q in (0, 1):
        H += wq[q] * num[q] + 0.5 * dq[q] * num[q] @ (num[q] - np.eye(dim))
    for i, f in enumerate(fm):
        H += f * num[2 + i]
        for q, g in ((0, gA[i]), (1, gB[i])):
            H += g * 1e-3 * (a[q].T @ a[2 + i] + a[2 + i].T @ a[q])
    if J:
        H += J * 1e-3 * (a[0].T @ a[1] + a[1].T @ a[0])
    assert n_osc == 2 + len(fm)
    return H


def product_index(occ, dims):
    idx = 0
    for n, d in zip(occ, dims):
        idx = idx * d + n
    return idx


# ---------------------------------------------------------------------------
# ZZ shift of two transmons sharing one mode, full product space
# ---------------------------------------------------------------------------

def brute_force_zeta(wq, dq, f_mode, gA, gB, levels=4):
    """``E00 + E11 - E10 - E01`` (MHz) with ``levels`` states per oscillator,
    labels by maximum overlap with the bare product states."""
    dims = (levels, levels, levels)
    H = kron_hamiltonian(wq, dq, [f_mode], [gA], [gB], dims)
    E, V = np.linalg.eigh(H)
    e = {}
    for lab, occ in (("00", (0, 0, 0)), ("10", (1, 0, 0)), ("01", (0, 1, 0)), ("11", (1, 1, 0))):
        i = product_index(occ, dims)
        e[lab] = E[int(np.argmax(V[i, :] ** 2))]
    return (e["00"] + e["11"] - e["10"] - e["01"]) * 1e3


def all_occupations(dims):
    return list(itertools.product(*[range(d) for d in dims]))
