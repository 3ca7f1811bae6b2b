import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhring import coupling, interactions, presets
from lhring.circuit import Parity
from lhring.coupling import CouplingEntry, CouplingSet
from lhring.errors import NumericalError
from lhring.hamiltonian import ModelConfig, assemble, diagonalize_and_label, enumerate_basis
from lhring.interactions import (
    AMBIGUOUS,
    UNRELIABLE,
    DetuningContext,
    MultimodeModel,
    block_diagonalize_least_action,
    exact_half_gap,
    j_least_action,
    j_schrieffer_wolff,
    sweep_interactions,
    zz_shift,
)
from lhring.transmon import TransmonLevels

from oracles import brute_force_zeta

QUBITS = (presets.QUBIT_A, presets.QUBIT_B)


@pytest.fixture(scope="module")
def table():
    return coupling.load_measured_table()


@pytest.fixture(scope="module")
def fixture_model(table):
    return MultimodeModel(table, QUBITS)


# Schrieffer-Wolff -----------------------------------------------------------

@pytest.mark.parametrize("delta", [-0.5, 0.25])
def test_single_mode_exchange(delta):
    g = 30.0
    cs = CouplingSet([CouplingEntry(5.0, g, g, Parity.EVEN)])
    J = j_schrieffer_wolff(cs, DetuningContext.from_couplings(5.0 + delta, 5.0 + delta, cs))
    assert J.value == pytest.approx(g**2 / (delta * 1e3), rel=1e-15)
    assert J.reliable


@settings(max_examples=30)
@given(st.floats(0.05, 5.0), st.floats(3.5, 4.2))
def test_exchange_scales_quadratically(c, f):
    t = coupling.load_measured_table()
    ctx = DetuningContext.from_couplings(f, f + 0.03, t)
    J1 = j_schrieffer_wolff(t, ctx).value
    Jc = j_schrieffer_wolff(t.scaled(c), ctx).value
    assert Jc == pytest.approx(c**2 * J1, rel=1e-12)


@settings(max_examples=30)
@given(st.floats(3.5, 6.5), st.floats(3.5, 6.5))
def test_flipping_one_qubit_sign_negates_exchange(fa, fb):
    t = coupling.load_measured_table()
    ctx = DetuningContext.from_couplings(fa, fb, t)
    assert j_schrieffer_wolff(t.scaled(1.0, -1.0), ctx).value == -j_schrieffer_wolff(t, ctx).value


def test_guard_flags_near_resonance(table):
    J = j_schrieffer_wolff(table, DetuningContext.from_couplings(5.31, 5.31, table))
    assert UNRELIABLE in J.flags
    assert J.detail["nearest_mode_MHz"] == pytest.approx(5.1, abs=1e-6)


def test_exchange_below_cutoff_is_small(table):
    for f in (4.0, 4.1):
        J = j_schrieffer_wolff(table, DetuningContext.from_couplings(f, f, table))
        assert 2.1 / 2 <= abs(J.value) <= 2.1 * 2
        assert J.reliable


# least action ---------------------------------------------------------------

def test_block_diagonal_input_is_fixed_point():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(2, 2))
    B = rng.normal(size=(3, 3))
    H = np.zeros((5, 5))
    H[:2, :2] = A + A.T + np.diag([10, 11])
    H[2:, 2:] = B + B.T
    Heff, fid = block_diagonalize_least_action(H, [0, 1])
    np.testing.assert_allclose(Heff, H[:2, :2], atol=1e-12)
    assert fid == pytest.approx(1.0)


def test_two_level_exchange_is_returned_unchanged():
    H = np.array([[5.0, 0.002], [0.002, 5.001]])
    Heff, _ = block_diagonalize_least_action(H, [0, 1])
    assert Heff[0, 1] == pytest.approx(0.002, rel=1e-12)


def test_singular_projection_raises():
    H = np.diag([1.0, 2.0, 3.0])
    with pytest.raises(NumericalError, match="singular value"):
        block_diagonalize_least_action(H, [0, 1], tol=1.1)


def test_least_action_matches_dispersive_toy():
    # two far-detuned modes, couplings well inside the perturbative regime
    cs = CouplingSet([CouplingEntry(5.0, 20.0, 20.0, Parity.EVEN), CouplingEntry(5.6, 15.0, -15.0, Parity.ODD)])
    m = MultimodeModel(cs, QUBITS)
    f = 4.6
    ctx = DetuningContext.from_couplings(f, f, cs)
    assert np.min(np.abs(ctx.delta_A)) * 1e3 >= 5 * 20.0
    sw = j_schrieffer_wolff(cs, ctx).value
    la = j_least_action(m, f).value
    assert la == pytest.approx(sw, rel=0.10)


def test_least_action_sign_for_mode_above_qubits():
    # one even mode above both qubits: negative detunings give g^2/delta < 0,
    # and the non-perturbative value keeps that sign
    cs = CouplingSet([CouplingEntry(5.0, 25.0, 25.0, Parity.EVEN)])
    m = MultimodeModel(cs, QUBITS)
    la = j_least_action(m, 4.7).value
    sw = j_schrieffer_wolff(cs, DetuningContext.from_couplings(4.7, 4.7, cs)).value
    assert la < 0 and sw < 0


def test_least_action_finite_where_perturbation_fails():
    cs = CouplingSet([CouplingEntry(5.0, 20.0, 20.0, Parity.EVEN)])
    m = MultimodeModel(cs, QUBITS)
    f = 5.03
    sw = j_schrieffer_wolff(cs, DetuningContext.from_couplings(f, f, cs))
    assert UNRELIABLE in sw.flags
    la = j_least_action(m, f, span=0.02)
    assert np.isfinite(la.value) and abs(la.value) > 0


@pytest.mark.parametrize("fB", [4.0, 4.2])
def test_least_action_matches_half_gap(fixture_model, fB):
    la = j_least_action(fixture_model, fB)
    half, _ = exact_half_gap(fixture_model, fB, la.detail["crossing_fA"])
    assert abs(la.value) == pytest.approx(half, rel=0.01)


# ZZ -------------------------------------------------------------------------

def test_zeta_zero_without_one_qubit(table):
    for scale in ((1.0, 0.0), (0.0, 1.0)):
        m = MultimodeModel(table.scaled(*scale), QUBITS)
        for fa in (4.4, 5.2):
            z = zz_shift(m.spectrum(fa, 5.04)).value
            assert abs(z) < 1e-10


@pytest.mark.parametrize("fm,g", [(6.5, 60.0), (3.2, 50.0)])
def test_zeta_matches_brute_force_dispersive(fm, g):
    wq, dq = (5.0, 5.35), (-0.25, -0.23)
    cs = CouplingSet([CouplingEntry(fm, g, g, Parity.EVEN)])
    cfg = ModelConfig()
    b = enumerate_basis(cfg, cs)
    H = assemble(cfg, cs, tuple(TransmonLevels(w, w + d) for w, d in zip(wq, dq)), b)
    z = zz_shift(diagonalize_and_label(H, b)).value
    ref = brute_force_zeta(wq, dq, fm, g, g, levels=4)
    assert abs(ref) > 1e-3
    assert z == pytest.approx(ref, rel=0.10)


def test_ambiguous_labels_flagged():
    from lhring.hamiltonian import LabeledSpectrum
    sp = LabeledSpectrum({"00": 0.0, "01": 5.0, "10": 5.1, "11": 10.1},
                         {"00": 1.0, "01": 0.45, "10": 0.9, "11": 0.9}, np.zeros(4))
    z = zz_shift(sp)
    assert AMBIGUOUS in z.flags and z.detail["low_overlap"] == ["01"]


def test_zeta_small_below_cutoff(fixture_model):
    r = sweep_interactions(fixture_model, np.linspace(3.95, 4.15, 11), 4.05, f_B_dressed=False)
    z = np.array([p.zeta for p in r.points])
    assert np.all(np.isfinite(z)) and np.max(np.abs(z)) < 1.0


def test_halved_couplings_shrink_zeta(table):
    fa = np.linspace(4.9, 5.4, 11)
    full = sweep_interactions(MultimodeModel(table, QUBITS), fa, 5.04, f_B_dressed=False, with_sw=False)
    half = sweep_interactions(MultimodeModel(table.scaled(0.5), QUBITS), fa, 5.04, f_B_dressed=False,
                              with_sw=False)
    for p, q in zip(full.points, half.points):
        assert abs(q.zeta) < abs(p.zeta)


def test_sweep_direction_independent(fixture_model):
    fa = np.linspace(5.1, 5.3, 9)
    fwd = sweep_interactions(fixture_model, fa, 5.04, f_B_dressed=False)
    bwd = sweep_interactions(fixture_model, fa[::-1], 5.04, f_B_dressed=False)
    np.testing.assert_allclose([p.zeta for p in fwd.points], [p.zeta for p in bwd.points][::-1], atol=1e-9)


def test_failed_points_are_recorded(fixture_model):
    r = sweep_interactions(fixture_model, [5.2, 9.0, 5.25], 5.04, f_B_dressed=False)
    assert len(r.points) == 3
    assert r.points[1].flags and r.points[1].flags[0].startswith("failed")
    assert np.isfinite(r.points[2].zeta)


def test_dressed_qubit_b_is_calibrated(fixture_model):
    r = sweep_interactions(fixture_model, [5.15], 5.04)
    assert r.points[0].f_B == pytest.approx(5.04, abs=1e-9)


def test_crossing_helpers():
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    z = np.array([-1.0, 1.0, 3.0, -10.0, -9.0])
    assert interactions.zero_crossings(x, z, jump=5.0) == [0.5]
    assert interactions.discontinuities(x, z, jump=5.0) == [2.5]
