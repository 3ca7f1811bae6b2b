import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lhring import circuit, coupling, presets, transmon
from lhring.circuit import Parity, RingSpec
from lhring.coupling import AnalyticGModel, CouplingEntry, CouplingSet, analytic_g
from lhring.errors import DomainError, ValidationError

from oracles import ring_coupling_oracle

QA, QB = presets.QUBIT_A, presets.QUBIT_B
QUBITS = (QA, QB)
FQ = [transmon.levels(p).f01 for p in QUBITS]


@pytest.fixture(scope="module")
def model24():
    # identical qubits, so the parity law is exact in the closed form
    return AnalyticGModel.from_ring(presets.ideal_ring(24, n_AB=6), (QA, QA))


@pytest.fixture(scope="module")
def fixture_table():
    return coupling.coupling_table(presets.fixture_ring(), QUBITS)


# closed form ----------------------------------------------------------------

@pytest.mark.parametrize("f", [4.6, 5.3, 7.0, 12.0])
def test_even_couplings_equal(model24, f):
    gA, gB = analytic_g(model24, FQ[0], f, Parity.EVEN)
    assert gA - gB == 0.0


@pytest.mark.parametrize("f", [4.6, 5.3, 7.0, 12.0])
def test_odd_couplings_opposite(model24, f):
    gA, gB = analytic_g(model24, FQ[0], f, Parity.ODD)
    assert gA + gB == 0.0


@pytest.mark.parametrize("ratio", [2 / np.sqrt(3), 2.0])
def test_odd_zero(model24, ratio):
    # n_AB * arcsin(f_IR/f) is a multiple of pi
    g, _ = analytic_g(model24, FQ[0], ratio * model24.f_IR, Parity.ODD)
    assert abs(g) < 1e-10


@pytest.mark.parametrize("angle", [np.pi / 12, np.pi / 4, 5 * np.pi / 12])
def test_even_zero(model24, angle):
    # n_AB * arcsin(f_IR/f) = pi/2 + m*pi
    g, _ = analytic_g(model24, FQ[0], model24.f_IR / np.sin(angle), Parity.EVEN)
    assert abs(g) < 1e-10


def test_even_coupling_is_extremal_at_twice_cutoff(model24):
    f = 2 * model24.f_IR
    g, _ = analytic_g(model24, FQ[0], f, Parity.EVEN)
    assert g == pytest.approx(-model24.envelope(FQ[0], f, Parity.EVEN), rel=1e-12)


def test_doubling_cells_scales_by_inverse_sqrt2():
    ms = [AnalyticGModel.from_ring(presets.ideal_ring(N, n_AB=6), QUBITS) for N in (24, 48)]
    for par in (Parity.EVEN, Parity.ODD):
        a = analytic_g(ms[0], FQ, 5.3, par)[0]
        b = analytic_g(ms[1], FQ, 5.3, par)[0]
        assert b / a == pytest.approx(1 / np.sqrt(2), rel=1e-12)


def test_static_loading_factors():
    ring = presets.ideal_ring(24, n_AB=6)
    w = AnalyticGModel.from_ring(ring, QUBITS, "weak")
    s = AnalyticGModel.from_ring(ring, QUBITS, "static")
    assert s.alpha_E[0] / w.alpha_E[0] == pytest.approx(s.K / (1 + s.s_AB))
    assert s.alpha_O[1] / w.alpha_O[1] == pytest.approx(s.K / (1 - s.s_AB))
    assert 0 < s.K < 1


def test_closed_form_domain(model24):
    with pytest.raises(DomainError):
        analytic_g(model24, FQ[0], 4.0, Parity.EVEN)
    with pytest.raises(DomainError):
        analytic_g(model24, FQ[0], 5.0, Parity.UNPAIRED)
    with pytest.raises(DomainError):
        AnalyticGModel.from_ring(presets.ideal_ring(24), QUBITS)
    with pytest.raises(DomainError):
        AnalyticGModel.from_ring(presets.ideal_ring(24, n_AB=6), QUBITS, loading="dynamic")


# numeric couplings ----------------------------------------------------------

@pytest.mark.parametrize("N", [24, 48])
def test_numeric_matches_green_function_oracle(N):
    ring = presets.ideal_ring(N, n_AB=6)
    q = (QA, QA)  # identical qubits keep the exact parity sectors
    f_max = 60.0
    cs = coupling.coupling_table(ring, q, window=(0, f_max))
    o = ring_coupling_oracle(N, 6, ring.cell.L_L, ring.cell.C_L, ring.C_QM, ring.C_S,
                             transmon.levels(QA).f01, QA.E_C, f_max)
    n_checked = 0
    for en in cs.entries:
        if en.parity == Parity.UNPAIRED:
            continue
        fo, go = o[1 if en.parity == Parity.EVEN else -1]
        i = int(np.argmin(np.abs(fo - en.freq)))
        assert fo[i] == pytest.approx(en.freq, rel=1e-10)
        assert abs(en.g_A) == pytest.approx(go[i], rel=1e-8)
        n_checked += 1
    assert n_checked >= N // 2 + 4


@settings(max_examples=8, deadline=None)
@given(st.sampled_from([12, 16, 24, 32]), st.integers(1, 4))
def test_parity_sign_law_on_symmetric_rings(N, half):
    n_AB = 2 * half
    if n_AB >= N // 2:
        n_AB = 2
    ring = presets.ideal_ring(N, n_AB=n_AB)
    cs = coupling.coupling_table(ring, QUBITS, window=(0, 1e4))
    for en in cs.entries:
        scale = max(abs(en.g_A), abs(en.g_B), 1e-9)
        # equal magnitudes up to the qubits' different charge zero points
        nA = transmon.charge_zpf(FQ[0], QA.E_C)
        nB = transmon.charge_zpf(FQ[1], QB.E_C)
        if en.parity == Parity.EVEN:
            assert en.g_A / nA - en.g_B / nB == pytest.approx(0, abs=1e-8 * scale)
        elif en.parity == Parity.ODD:
            assert en.g_A / nA + en.g_B / nB == pytest.approx(0, abs=1e-8 * scale)
    assert cs.sign_law_violations() == []


def test_numeric_sign_changes_bracket_closed_form_roots():
    ring = presets.ideal_ring(240, n_AB=6)
    cs = coupling.coupling_table(ring, QUBITS, window=(0, 30))
    f_IR = circuit.ir_cutoff(ring.cell)
    roots = {Parity.EVEN: f_IR / np.sin(np.array([np.pi / 12, np.pi / 4, 5 * np.pi / 12])),
             Parity.ODD: f_IR / np.sin(np.array([np.pi / 6, np.pi / 3]))}
    for par, rs in roots.items():
        f = np.array([e.freq for e in cs.entries if e.parity == par])
        g = np.array([e.g_A for e in cs.entries if e.parity == par])
        changes = [(f[i], f[i + 1]) for i in range(len(f) - 1) if g[i] * g[i + 1] < 0]
        for r in rs:
            near = [c for c in changes if c[0] - (c[1] - c[0]) <= r <= c[1] + (c[1] - c[0])]
            assert near, f"no sign change near {r:.4f} GHz for {par.value}"


def test_zero_amplitude_node_gives_zero():
    m = circuit.ModeSpec(freq=5.0, amplitudes=np.array([0.1, 0.0, -0.1]), zpf_scale=3.0)
    assert coupling.numeric_g(m, QA, 1) == 0.0


def test_fixture_table_shape(fixture_table):
    assert len(fixture_table) == 13
    g = np.abs(np.concatenate([fixture_table.g_A, fixture_table.g_B]))
    assert g.max() <= 80
    assert np.all(g < np.concatenate([fixture_table.freqs] * 2) * 1e3 / 10)


def test_fixture_has_mode_dark_to_one_qubit(fixture_table):
    gA, gB = np.abs(fixture_table.g_A), np.abs(fixture_table.g_B)
    dark = (gA < 2.0) & (gB > 20.0)
    assert dark.any()
    assert 4.5 < fixture_table.freqs[dark][0] < 4.7


def test_parity_disagreements_are_reported(fixture_table):
    ref = coupling.load_measured_table()
    out = coupling.parity_disagreements(fixture_table, ref)
    for ref_f, model_f, ref_p, model_p in out:
        assert ref_p != model_p and abs(ref_f - model_f) <= 0.05


# tables ---------------------------------------------------------------------

def test_measured_table_signs_follow_parity():
    t = coupling.load_measured_table()
    assert len(t) == 13 and t.source == "Measured"
    assert t.sign_law_violations() == []


def test_csv_round_trip(fixture_table):
    back = CouplingSet.from_csv(fixture_table.to_csv())
    np.testing.assert_allclose(back.g_A, fixture_table.g_A, rtol=1e-11)
    assert back.parities == fixture_table.parities
    assert back.source == "Numeric"


@pytest.mark.parametrize("text,line", [
    ("freq_GHz,gA_MHz\n4.5,1\n", 1),
    ("freq_GHz,gA_MHz,gB_MHz,parity\n4.5,1,2,Even\n4.6,x,2,Odd\n", 3),
    ("freq_GHz,gA_MHz,gB_MHz,parity\n4.5,1,2,Sideways\n", 2),
    ("freq_GHz,gA_MHz,gB_MHz,parity\n-4.5,1,2,Even\n", 2),
])
def test_csv_errors_name_the_line(text, line):
    with pytest.raises(ValidationError) as exc:
        CouplingSet.from_csv(text)
    assert exc.value.line == line


def test_scaled_and_subset():
    t = coupling.load_measured_table()
    s = t.scaled(0.5, -1.0)
    assert s.g_A[0] == pytest.approx(0.5 * t.g_A[0])
    assert s.g_B[1] == -t.g_B[1]
    assert len(t.subset([0, 2])) == 2


def test_sign_law_violation_detected():
    cs = CouplingSet([CouplingEntry(5.0, 10.0, -10.0, Parity.EVEN), CouplingEntry(5.1, 1.0, -1.0, Parity.ODD)])
    assert cs.sign_law_violations() == [0]


def test_coupling_table_needs_two_qubits():
    with pytest.raises(DomainError):
        coupling.coupling_table(RingSpec(N=24, cell=presets.CELL_THEORY), QUBITS)
