import math
import warnings

import networkx as nx
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from conftest import NV, SC
from qecbench import channels as ch
from qecbench.calibration import (
    CalibrationWarning,
    NoiseModel,
    PRESET_DIR_ENV,
    damping_probs,
    depol_from_total_error,
    build_noise_model,
    dump_device,
    load_device,
    preset_names,
    uniform_noise_model,
)
from qecbench.circuit import PARAMETRIC, gate_matrix
from qecbench.errors import ConfigurationError, DeviceFileError, ParameterError

times = st.floats(1e-3, 1e3, allow_nan=False)


def full_gate_channel(noise, kind, qubits):
    """Kraus set of ``(⊗ damp∘depol) ∘ U`` on the gate's qubits (qubits[0] least significant)."""
    gn = noise.gate_noise(kind, qubits)
    params = (0.3,) if kind in PARAMETRIC else ()
    u = gate_matrix(kind, params, len(qubits))
    return ch.compose(ch.tensor(*gn.qubit_channels), ch.unitary_channel(u)), u


# -- damping_probs ---------------------------------------------------------


def test_damping_probs_examples():
    assert damping_probs(1.0, 1.0, 0.0) == (0.0, 0.0)
    p_ad, p_pd = damping_probs(0.1, 0.1, 0.001)
    assert p_ad == pytest.approx(0.0099502, abs=5e-8) and p_pd == 0.0
    p_ad, p_pd = damping_probs(5.7, 0.4, 0.1)
    assert p_ad == pytest.approx(0.017391, abs=5e-7)
    # closed form gives 0.2074155; the quoted six-digit value is low by 1.5e-6
    assert p_pd == pytest.approx(0.207414, abs=2e-6)


def test_damping_probs_closed_form_oracle():
    t1, t2, dt = 0.3, 0.2, 0.05
    p_ad, p_pd = damping_probs(t1, t2, dt)
    assert p_ad == pytest.approx(1 - math.exp(-dt / t1), abs=1e-15)
    assert p_pd == pytest.approx(1 - math.exp(-dt / t2) / math.exp(-dt / t1), abs=1e-15)


def test_damping_probs_clamps_with_warning():
    with pytest.warns(CalibrationWarning):
        _, p_pd = damping_probs(0.1, 0.5, 0.01)
    assert p_pd == 0.0
    with pytest.warns(CalibrationWarning):
        assert damping_probs(1e-3, 1.0, 1.0) == (1.0, 0.0)


@pytest.mark.parametrize("t1,t2,dt", [(0, 1, 1), (1, -1, 1), (1, 1, -0.1)])
def test_damping_probs_rejects_bad_input(t1, t2, dt):
    with pytest.raises(ParameterError):
        damping_probs(t1, t2, dt)


@settings(max_examples=100, deadline=None)
@given(t1=times, t2=times, dt=st.floats(0, 10), dt2=st.floats(0, 10))
def test_damping_probs_monotone_in_dt(t1, t2, dt, dt2):
    lo, hi = sorted((dt, dt2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a0, p0 = damping_probs(t1, t2, lo)
        a1, p1 = damping_probs(t1, t2, hi)
    assert a0 <= a1 and p0 <= p1
    assert 0 <= a1 <= 1 and 0 <= p1 <= 1


@settings(max_examples=100, deadline=None)
@given(t1=times, t1b=times, t2=times, dt=st.floats(0, 10))
def test_damping_probs_p_ad_nonincreasing_in_t1(t1, t1b, t2, dt):
    lo, hi = sorted((t1, t1b))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert damping_probs(hi, t2, dt)[0] <= damping_probs(lo, t2, dt)[0]


@settings(max_examples=100, deadline=None)
@given(t1=times, ratio=st.floats(0.01, 1.0), frac=st.floats(0, 1))
def test_damping_probs_round_trip(t1, ratio, frac):
    t2 = t1 * ratio  # t2 <= t1: no clamping
    dt = frac * t2  # gate no longer than t2 keeps 1 - p_pd well away from round-off
    p_ad, p_pd = damping_probs(t1, t2, dt)
    assert math.exp(-dt / t1) == pytest.approx(1 - p_ad, abs=1e-12)
    assert math.exp(-dt / (2 * t2)) == pytest.approx(math.sqrt(1 - p_ad) * math.sqrt(1 - p_pd), abs=1e-12)


# -- depol_from_total_error ------------------------------------------------


def test_depol_zero_when_damping_explains_everything():
    assert depol_from_total_error(0.01, 0.99) == 0.0
    with pytest.warns(CalibrationWarning):
        assert depol_from_total_error(0.01, 0.98) == 0.0


def test_depol_single_qubit_inversion():
    assert depol_from_total_error(0.0008, 1.0) == pytest.approx(0.0016, abs=1e-15)


def test_depol_two_qubit_product_split():
    p = depol_from_total_error(0.05, 1.0, n_qubits=2)
    # oracle: numerically invert the product of per-qubit entanglement fidelities
    fe_target = ch.entanglement_from_average(0.95, 4)
    want = brentq(lambda x: (1 - 3 * x / 4) ** 2 - fe_target, 0, 1, xtol=1e-15)
    assert p == pytest.approx(want, abs=1e-12)
    k = ch.tensor(ch.make_depolarizing(p), ch.make_depolarizing(p))
    assert 1 - ch.average_gate_fidelity(k) == pytest.approx(0.05, abs=1e-12)


def test_depol_with_per_qubit_damping_matches_total():
    damp = [ch.make_amplitude_phase_damping(0.01, 0.02), ch.make_amplitude_phase_damping(0.002, 0.0)]
    f = [ch.average_gate_fidelity(k) for k in damp]
    p = depol_from_total_error(0.03, f, n_qubits=2)
    full = ch.tensor(*(ch.compose(k, ch.make_depolarizing(p)) for k in damp))
    assert 1 - ch.average_gate_fidelity(full) == pytest.approx(0.03, abs=1e-12)


def test_depol_rejects_bad_probability():
    with pytest.raises(ParameterError):
        depol_from_total_error(1.5, 1.0)


# -- noise models ----------------------------------------------------------


def test_sc_noise_single_qubit_gate(devices):
    _, nm = devices[SC]
    gn = nm.gate_noise("SX", (5,))
    assert gn.p_ad[0] == pytest.approx(0.0099502, abs=5e-8)
    assert gn.p_pd[0] == 0.0
    # 1 us of damping at t1 = 0.1 ms already costs more than the calibrated 8e-4
    damp = 1 - ch.average_gate_fidelity(ch.make_amplitude_damping(gn.p_ad[0]))
    assert damp == pytest.approx(0.0033, abs=1e-4) and damp > 0.0008
    assert gn.p_depol[0] == 0.0
    cx = nm.gate_noise("CNOT", (12, 13))
    assert cx.p_depol[0] > 0
    assert 1 - cx.fidelity() == pytest.approx(0.01, abs=1e-9)
    assert nm.gate_noise("RZ", (5,)) is None
    assert nm.spam_prob(0) == 0.03


def test_nv_nuclear_gate_damping(devices):
    d, nm = devices[NV]
    gn = nm.gate_noise("RX", (2,))
    assert (gn.p_ad[0], gn.p_pd[0]) == pytest.approx(damping_probs(250.0, 0.9, 0.01), abs=1e-15)
    assert d.qubit_cal[2].t1 == 250.0 and d.qubit_cal[2].t2 == 0.9


@pytest.mark.parametrize("device", [SC, NV])
def test_noisy_gate_infidelity_matches_calibration(devices, device):
    d, nm = devices[device]
    checked = 0
    for (kind, qubits), gn in nm.gates.items():
        if len(qubits) == 3:
            err = d.multi_by_kind["CCZ"].error
        elif len(qubits) == 2:
            err = d.edge_calibration(*qubits).two_gate_error
        else:
            err = d.qubit_cal[qubits[0]].single_gate_error
        k, u = full_gate_channel(nm, kind, qubits)
        infid = 1 - ch.average_gate_fidelity(k, u)
        if any(gn.p_depol):
            assert infid == pytest.approx(err, abs=1e-9), (kind, qubits)
            checked += 1
        else:
            assert infid >= err - 1e-12  # clamped: damping alone exceeds the calibrated error
        assert gn.fidelity() == pytest.approx(1 - infid, abs=1e-12)
    assert checked > 0


def test_ideal_device_has_no_noise():
    doc = """
name: ideal
n_qubits: 2
native_single: [X, SX, RZ]
native_multi: [CNOT]
qubit_defaults: {t1: 1.0e12, t2: 1.0e12, p_spam: 0, single_gate_error: 0, single_gate_time: 0}
edge_defaults: {error: 0, time: 1.0e-9}
edges: [[0, 1]]
"""
    nm = build_noise_model(load_device(doc))
    for gn in nm.gates.values():
        assert max(gn.p_ad + gn.p_pd + gn.p_depol) < 1e-15
    assert nm.spam_prob(0) == 0


def test_missing_calibration_is_a_configuration_error(devices):
    _, nm = devices[SC]
    with pytest.raises(ConfigurationError):
        nm.gate_noise("CNOT", (0, 5))
    assert NoiseModel({}, strict=False).gate_noise("X", (0,)) is None


def test_uniform_noise_model(devices):
    d, _ = devices[NV]
    nm = uniform_noise_model(d, p_depol=0.01)
    assert all(gn.p_ad == (0.0,) * len(gn.qubits) and set(gn.p_depol) == {0.01} for gn in nm.gates.values())
    nm = uniform_noise_model(d, t1=0.2, t2=0.1, gate_time=0.001)
    assert nm.gate_noise("CCZ", (0, 1, 2)).p_ad == (damping_probs(0.2, 0.1, 0.001)[0],) * 3
    with pytest.raises(ParameterError):
        uniform_noise_model(d, t1=0.2)


# -- device files ----------------------------------------------------------


def test_presets():
    assert {SC, NV} <= set(preset_names())
    sc = load_device(SC)
    assert sc.n_qubits == 27
    g = sc.graph
    assert g.number_of_edges() == 28
    assert max(dict(g.degree).values()) == 3
    assert nx.is_connected(g)
    # heavy-hex: 12-cycles only, no short loops
    assert min(len(c) for c in nx.minimum_cycle_basis(g)) == 12
    nv = load_device(NV)
    assert nv.n_qubits == 5 and nv.hubs == (0,)
    assert sorted(nv.graph.edges) == [(0, 1), (0, 2), (0, 3), (0, 4)]
    assert nv.qubit_cal[0].t2 == 0.4 and nv.qubit_cal[1].t2 == 0.9


@pytest.mark.parametrize("name", [SC, NV, "sc-tee-5"])
def test_device_round_trip(name):
    d = load_device(name)
    assert load_device(dump_device(d)) == d


def test_preset_directory_override(tmp_path, monkeypatch):
    (tmp_path / "tiny.yaml").write_text(dump_device(load_device(NV)).replace("nv-center-5", "tiny"))
    monkeypatch.setenv(PRESET_DIR_ENV, str(tmp_path))
    assert "tiny" in preset_names()
    assert load_device("tiny").name == "tiny"


@pytest.mark.parametrize("text", ["", "   \n", "name: x\n"])
def test_empty_or_incomplete_document_rejected(text):
    with pytest.raises(DeviceFileError):
        load_device(text)


def test_device_errors_reported_together():
    doc = """
name: bad
n_qubits: 2
native_single: [X]
colour: blue
qubit_defaults: {t1: -1, t2: 1, p_spam: 2, single_gate_error: 0, single_gate_time: 0}
"""
    with pytest.raises(DeviceFileError) as err:
        load_device(doc)
    text = str(err.value)
    assert "colour" in text


def test_invalid_values_reported_with_location():
    doc = """
name: bad
n_qubits: 2
native_single: [X]
qubit_defaults: {t1: -1, t2: 1, p_spam: 2, single_gate_error: 0, single_gate_time: 0}
"""
    with pytest.raises(DeviceFileError) as err:
        load_device(doc)
    text = str(err.value)
    assert "qubit 0: t1" in text and "qubit 1: p_spam" in text


def test_yaml_syntax_error_has_line():
    with pytest.raises(DeviceFileError, match="line"):
        load_device("name: x\nedges: [[0, 1]\n")


def test_unknown_preset():
    with pytest.raises(ConfigurationError, match="unknown device"):
        load_device("no-such-device")


def test_t2_above_twice_t1_warns_but_loads():
    doc = dump_device(load_device(NV))
    # electron t2 = 0.4; raise it past 2 * t1 on one qubit
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        d = load_device(doc.replace("t2: 0.4", "t2: 20.0"))
    assert d.qubit_cal[0].t2 == 20.0
    assert any(issubclass(w.category, CalibrationWarning) for w in rec)


@settings(max_examples=30, deadline=None)
@given(
    t1=st.floats(0.01, 100), t2=st.floats(0.01, 100),
    spam=st.floats(0, 1), err=st.floats(0, 1), dt=st.floats(0, 1),
)
def test_device_round_trip_property(t1, t2, spam, err, dt):
    assume(t2 <= 2 * t1)
    base = load_device("sc-tee-5")
    cal = type(base.qubit_cal[0])(t1, t2, spam, err, dt)
    d = base.with_updates(qubit_cal=(cal,) + base.qubit_cal[1:])
    assert load_device(dump_device(d)) == d
    assert np.isfinite(d.qubit_cal[0].t1)
