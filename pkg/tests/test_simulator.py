import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qecbench import channels as ch
from qecbench.calibration import GateNoise, NoiseModel
from qecbench.circuit import Circuit, gate_matrix
from qecbench.errors import ExecutionError, ParameterError, ShapeError
from qecbench.simulator import ExecutionOptions, expectation, final_state, run, sample_counts

Z = np.diag([1.0, -1.0])
X = np.array([[0.0, 1.0], [1.0, 0.0]])


def one_gate_noise(kind, q, p_ad=0.0, p_pd=0.0, p_depol=0.0, spam=0.0):
    gn = GateNoise((q,), (p_ad,), (p_pd,), (p_depol,))
    return NoiseModel({(kind, (q,)): gn}, {q: spam}, strict=False)


def bell() -> Circuit:
    return Circuit(2, 2).h(0).cnot(0, 1).measure(0, 0).measure(1, 1)


def embed(op, qubits, n):
    """Dense operator acting as ``op`` on ``qubits`` (qubits[0] least significant), identity elsewhere."""
    k = len(qubits)
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    for col in range(d):
        sub = sum(((col >> q) & 1) << i for i, q in enumerate(qubits))
        rest = col & ~sum(1 << q for q in qubits)
        for row_sub in range(2**k):
            amp = op[row_sub, sub]
            if amp == 0:
                continue
            row = rest | sum(((row_sub >> i) & 1) << q for i, q in enumerate(qubits))
            out[row, col] += amp
    return out


def dense_reference(c: Circuit, noise: NoiseModel, prep_spam=True) -> np.ndarray:
    """Independent dense-matrix evolution of a measurement-free circuit."""
    n = c.n_qubits
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1

    def kraus(ops, qubits):
        nonlocal rho
        full = [embed(E, qubits, n) for E in ops]
        rho = sum(F @ rho @ F.conj().T for F in full)

    if prep_spam:
        for q in range(n):
            kraus(ch.make_spam_bitflip(noise.spam_prob(q)).operators, [q])
    for ins in c.instructions:
        kraus([gate_matrix(ins.name, ins.params, len(ins.qubits))], list(ins.qubits))
        gn = noise.gate_noise(ins.name, ins.qubits)
        if gn is None:
            continue
        for q, d in zip(ins.qubits, gn.p_depol):
            kraus(ch.make_depolarizing(d).operators, [q])
        for q, a, p in zip(ins.qubits, gn.p_ad, gn.p_pd):
            kraus(ch.make_amplitude_phase_damping(a, p).operators, [q])
    return rho


@st.composite
def noisy_circuits(draw):
    n = draw(st.integers(1, 3))
    c = Circuit(n)
    prob = st.floats(0, 0.5)
    gates = {}
    for _ in range(draw(st.integers(1, 10))):
        kind = draw(st.sampled_from(["H", "SX", "RX", "RZ", "CNOT"] if n > 1 else ["H", "SX", "RX", "RZ"]))
        if kind == "CNOT":
            qs = tuple(draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True)))
            c.cnot(*qs)
        else:
            qs = (draw(st.integers(0, n - 1)),)
            c.gate(kind, *qs, params=(draw(st.floats(-3, 3)),) if kind in ("RX", "RZ") else ())
        if kind != "RZ" and (kind, qs) not in gates:
            gates[(kind, qs)] = GateNoise(
                qs, tuple(draw(prob) for _ in qs), tuple(draw(prob) for _ in qs), tuple(draw(prob) for _ in qs)
            )
    spam = {q: draw(prob) for q in range(n)}
    return c, NoiseModel(gates, spam)


# -- examples -------------------------------------------------------------


def test_bell_exact():
    res = run(bell())
    assert res.exact
    assert res.probabilities.keys() == {"00", "11"}
    assert res.probabilities["00"] == pytest.approx(0.5, abs=1e-12)
    assert res.probabilities["11"] == pytest.approx(0.5, abs=1e-12)


def test_spam_before_measurement():
    c = Circuit(1, 1).x(0).measure(0, 0)
    nm = NoiseModel({}, {0: 0.03}, strict=False)
    res = run(c, ExecutionOptions(noise=nm, prep_spam=False))
    assert res.probabilities["1"] == pytest.approx(0.97, abs=1e-12)
    # the same flip also hits preparation by default: 0.97^2 + 0.03^2
    res = run(c, ExecutionOptions(noise=nm))
    assert res.probabilities["1"] == pytest.approx(0.9418, abs=1e-12)


def test_expectation_examples():
    assert expectation(Circuit(1), Z) == pytest.approx(1.0)
    damped = one_gate_noise("X", 0, p_ad=0.5)
    assert expectation(Circuit(1).x(0), Z, damped) == pytest.approx(0.0, abs=1e-12)
    dephased = one_gate_noise("H", 0, p_pd=0.36)
    assert expectation(Circuit(1).h(0), X, dephased) == pytest.approx(math.sqrt(0.64), abs=1e-12)
    with pytest.raises(ParameterError):
        expectation(Circuit(1), np.array([[0, 1], [0, 0]]))
    with pytest.raises(ShapeError):
        expectation(Circuit(1), np.eye(4))


def test_noise_order_is_depolarize_then_damp():
    # depolarizing then full decay ends in |0>; the other order would leave I/2
    nm = one_gate_noise("X", 0, p_ad=1.0, p_depol=1.0)
    rho = final_state(Circuit(1).x(0), nm).data
    assert np.allclose(rho, np.diag([1, 0]), atol=1e-12)


def test_rz_and_injected_errors_are_exact():
    nm = NoiseModel({("X", (0,)): GateNoise((0,), (1.0,), (0.0,), (0.0,))}, {}, strict=True)
    c = Circuit(1).rz(0.4, 0).gate("X", 0, tag="error")
    rho = final_state(c, nm).data
    assert rho[1, 1] == pytest.approx(1.0)


def test_idle_qubits_untouched():
    nm = one_gate_noise("H", 0, p_ad=0.5, p_pd=0.5, p_depol=0.5)
    rho = final_state(Circuit(2).x(1).h(0), NoiseModel(dict(nm.gates), {}, strict=False)).data
    reduced = rho.reshape(2, 2, 2, 2).trace(axis1=1, axis2=3)  # keep qubit 1
    assert np.allclose(reduced, np.diag([0, 1]), atol=1e-12)


def test_mid_circuit_measurement_and_condition():
    c = Circuit(2, 2).h(0).measure(0, 0).x(1, condition=((0,), 1)).measure(1, 1)
    res = run(c)
    assert res.probabilities == pytest.approx({"00": 0.5, "11": 0.5}, abs=1e-12)


def test_condition_on_unmeasured_bit_fails():
    c = Circuit(2, 2).x(1, condition=((0,), 1)).measure(1, 1)
    with pytest.raises(ExecutionError):
        run(c)


def test_reset_then_spam():
    c = Circuit(1, 1).x(0).reset(0).measure(0, 0)
    assert run(c).probabilities == {"0": 1.0}
    nm = NoiseModel({}, {0: 0.1}, strict=False)
    # reset (ideal) -> SPAM flip -> SPAM flip at measurement
    p1 = run(c, ExecutionOptions(noise=nm, prep_spam=False)).probabilities["1"]
    assert p1 == pytest.approx(2 * 0.1 * 0.9, abs=1e-12)


def test_only_touched_qubits_are_simulated():
    c = Circuit(27, 2).h(20).cnot(20, 26).measure(20, 0).measure(26, 1)
    assert run(c).probabilities == pytest.approx({"00": 0.5, "11": 0.5})


def test_marginal():
    res = run(Circuit(2, 2).x(1).measure(0, 0).measure(1, 1))
    assert res.probabilities == {"10": 1.0}
    assert res.marginal([1]) == {"1": 1.0}
    assert res.marginal([0]) == {"0": 1.0}


def test_negative_shots_rejected():
    with pytest.raises(ParameterError):
        ExecutionOptions(shots=-1)


# -- statistics and determinism ------------------------------------------


def test_shot_statistics_within_four_sigma():
    n = 100_000
    res = run(bell(), ExecutionOptions(shots=n, seed=1234))
    assert sum(res.counts.values()) == n
    sigma = math.sqrt(n * 0.25)
    for k in ("00", "11"):
        assert abs(res.counts[k] - n / 2) <= 4 * sigma


def test_shots_are_deterministic():
    a = run(bell(), ExecutionOptions(shots=5000, seed=7))
    b = run(bell(), ExecutionOptions(shots=5000, seed=7))
    assert a.counts == b.counts
    c = run(bell(), ExecutionOptions(shots=5000, seed=8))
    assert c.counts != a.counts


def test_sampling_prefix_is_stable():
    # shot i always uses the i-th draw of the seeded stream
    probs = {"0": 0.3, "1": 0.7}
    gen = np.random.Generator(np.random.Philox(key=99))
    u = gen.random(1000)
    want = int(np.sum(u >= 0.3))
    assert sample_counts(probs, 1000, 99)["1"] == want


# -- properties -----------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(noisy_circuits(), st.booleans())
def test_matches_dense_reference(case, prep_spam):
    c, nm = case
    got = final_state(c, nm, prep_spam=prep_spam).data
    assert np.allclose(got, dense_reference(c, nm, prep_spam), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(noisy_circuits())
def test_trace_preserved_after_every_instruction(case):
    c, nm = case
    c.n_clbits = c.n_qubits
    for q in range(c.n_qubits):
        c.measure(q, q)
    res = run(c, ExecutionOptions(noise=nm, check_trace=True))
    assert sum(res.probabilities.values()) == pytest.approx(1.0, abs=1e-9)
    assert min(res.probabilities.values()) >= 0


@settings(max_examples=30, deadline=None)
@given(noisy_circuits(), st.integers(0, 2**63 - 1))
def test_identical_options_identical_results(case, seed):
    c, nm = case
    c.n_clbits = c.n_qubits
    for q in range(c.n_qubits):
        c.measure(q, q)
    opts = ExecutionOptions(shots=200, seed=seed, noise=nm)
    assert run(c, opts) == run(c, opts)
