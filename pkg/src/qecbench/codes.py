"""Three-qubit repetition codes: circuits, error injection, decoding.

Register layout shared by every code circuit:

====== ===== ===================================
qubit  role  clbit
====== ===== ===================================
0-2    data  2-4 (final data readout)
3      a0    0   (parity of data 0 and 1)
4      a1    1   (parity of data 1 and 2)
====== ===== ===================================

The bit-flip code protects against X errors and measures ``Z0 Z1`` and
``Z1 Z2``. The phase-flip code is the same circuit conjugated by H on the data,
protects against Z errors and measures ``X0 X1`` and ``X1 X2``. Either way the
decoded bit is the logical Z value of the encoded state.

An error slot per data qubit sits between encoding and the stabilizer
measurement. :func:`inject_error` turns slots into exact Pauli gates.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import DeviceModel, NoiseModel
from .circuit import Circuit, Instruction
from .errors import CircuitError, ParameterError
from .simulator import ExecutionOptions, ShotResult, key_to_bits, run, sample_counts
from .transpiler import TranspileResult, decompose_to_native, transpile

BIT_FLIP = "bit-flip"
PHASE_FLIP = "phase-flip"
POST_PROCESSING = "post-processing"
UNITARY = "unitary"
KINDS = (BIT_FLIP, PHASE_FLIP)
RECOVERIES = (POST_PROCESSING, UNITARY)
PAULI_STATES = ("0", "1", "+", "-", "+i", "-i")

DATA = (0, 1, 2)
ANCILLA = (3, 4)
SYNDROME_CLBITS = (0, 1)
DATA_CLBITS = (2, 3, 4)
# stabilizer pairs (data, data) whose parity lands on each ancilla
_CHECKS = ((0, 1), (1, 2))
# syndrome (s0, s1) -> data qubit to flip
SYNDROME_MAP = {(0, 0): None, (1, 0): 0, (1, 1): 1, (0, 1): 2}


def slot_label(i: int) -> str:
    return f"slot{i}"


# ----------------------------------------------------------------------------
# Specs


def _amplitudes(state) -> tuple[complex, complex]:
    s = 1 / math.sqrt(2)
    table = {
        "0": (1, 0), "1": (0, 1), "+": (s, s), "-": (s, -s),
        "+i": (s, 1j * s), "-i": (s, -1j * s),
    }
    if isinstance(state, str):
        if state not in table:
            raise ParameterError(f"unknown input state {state!r}; expected one of {PAULI_STATES}")
        a, b = table[state]
        return complex(a), complex(b)
    a, b = (complex(x) for x in state)
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-12:
        raise ParameterError(f"input amplitudes ({a}, {b}) are not normalised")
    return a, b


def parse_error(error, kind: str) -> tuple:
    """Normalise an error description.

    Returns ``()`` for no error, ``("random",)`` for a uniformly random single
    error, or a tuple of ``(pauli, qubit)`` pairs. Strings like ``"X1"`` or
    ``"X0+X1"`` are accepted; a bare qubit index uses the code's natural Pauli.
    """
    natural = "X" if kind == BIT_FLIP else "Z"
    if error is None or error == "none" or error == ():
        return ()
    if error == "random":
        return ("random",)
    if isinstance(error, int):
        error = ((natural, error),)
    if isinstance(error, str):
        parts = []
        for tok in error.replace(" ", "").split("+"):
            if tok.isdigit():
                parts.append((natural, int(tok)))
            elif len(tok) >= 2 and tok[0].upper() in "XYZ" and tok[1:].isdigit():
                parts.append((tok[0].upper(), int(tok[1:])))
            else:
                raise ParameterError(f"cannot parse error {error!r}")
        error = tuple(parts)
    out = []
    for pauli, q in error:
        pauli = str(pauli).upper()
        if pauli not in ("X", "Y", "Z") or q not in DATA:
            raise ParameterError(f"bad injected error ({pauli!r}, {q!r})")
        out.append((pauli, int(q)))
    return tuple(out)


@dataclass(frozen=True)
class CodeSpec:
    kind: str = BIT_FLIP
    recovery: str = POST_PROCESSING
    input_state: object = "0"
    error: object = "random"
    random_includes_none: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.recovery not in RECOVERIES:
            raise ParameterError(f"recovery must be one of {RECOVERIES}, got {self.recovery!r}")
        _amplitudes(self.input_state)
        object.__setattr__(self, "error", parse_error(self.error, self.kind))

    @property
    def amplitudes(self) -> tuple[complex, complex]:
        return _amplitudes(self.input_state)

    @property
    def ideal_p_one(self) -> float:
        """Probability of decoding 1 in the absence of noise."""
        return abs(self.amplitudes[1]) ** 2

    def members(self) -> list[tuple[float, tuple]]:
        """Weighted deterministic error patterns this spec stands for."""
        if self.error == ("random",):
            pats = [((("X" if self.kind == BIT_FLIP else "Z"), q),) for q in DATA]
            if self.random_includes_none:
                pats = [()] + pats
            return [(1 / len(pats), p) for p in pats]
        return [(1.0, self.error)]


@dataclass(frozen=True)
class LogicalResult:
    logical_error_rate: float
    syndrome_histogram: dict
    raw: ShotResult
    p_one: float = 0.0
    ideal_p_one: float = 0.0


# ----------------------------------------------------------------------------
# Circuits


def prep_ops(state, q: int = 0) -> list:
    """Gates taking ``|0>`` to the requested input state on qubit ``q``."""

    def g(name, *params):
        return Instruction(name, (q,), tuple(float(p) for p in params))

    if isinstance(state, str):
        _amplitudes(state)
        return {
            "0": [], "1": [g("X")], "+": [g("H")], "-": [g("X"), g("H")],
            "+i": [g("RX", -math.pi / 2)], "-i": [g("RX", math.pi / 2)],
        }[state]
    a, b = _amplitudes(state)
    theta = 2 * math.atan2(abs(b), abs(a))
    phi = cmath.phase(b) - cmath.phase(a) if abs(a) > 0 and abs(b) > 0 else 0.0
    ops = [g("RY", theta)] if theta else []
    return ops + ([g("RZ", phi)] if phi else [])


def _data_h(c: Circuit):
    for q in DATA:
        c.h(q)


def _ctrl_pattern(c: Circuit, target: int, pattern, gate: str):
    """Multi-controlled ``gate`` on ``target`` firing when ancillas read ``pattern``."""
    flips = [a for a, bit in zip(ANCILLA, pattern) if bit == 0]
    for a in flips:
        c.x(a)
    c.gate(gate, *ANCILLA, target)
    for a in flips:
        c.x(a)


def build_code_circuit(spec: CodeSpec, *, with_prep: bool = True) -> Circuit:
    """Five-qubit circuit for ``spec`` with error slots (errors not injected)."""
    c = Circuit(5, 5)
    if with_prep:
        c.extend(prep_ops(spec.input_state, 0))
    c.cnot(0, 1).cnot(0, 2)
    phase = spec.kind == PHASE_FLIP
    if phase:
        _data_h(c)
    for q in DATA:
        c.slot(q, slot_label(q))
    if phase:
        _data_h(c)
    for anc, (a, b) in zip(ANCILLA, _CHECKS):
        c.cnot(a, anc).cnot(b, anc)
    if spec.recovery == UNITARY:
        if phase:
            _data_h(c)
        gate = "CCZ" if phase else "CCX"
        for pattern, q in SYNDROME_MAP.items():
            if q is not None:
                _ctrl_pattern(c, q, pattern, gate)
        if phase:
            _data_h(c)
    for anc, clbit in zip(ANCILLA, SYNDROME_CLBITS):
        c.measure(anc, clbit)
    for q, clbit in zip(DATA, DATA_CLBITS):
        c.measure(q, clbit)
    c.meta["code"] = {"kind": spec.kind, "recovery": spec.recovery}
    return c


def inject_error(c: Circuit, pattern) -> Circuit:
    """Replace error slots by exact Pauli gates (tagged ``"error"``).

    ``pattern`` is a tuple of ``(pauli, data_qubit)`` pairs. Slots keep their
    physical qubit, so this works on transpiled circuits too.
    """
    if pattern == ("random",):
        raise ParameterError("random injection is a family; use CodeSpec.members()")
    want = {slot_label(q): [] for _, q in pattern}
    for pauli, q in pattern:
        want[slot_label(q)].append(pauli)
    found = set()
    ops = []
    for ins in c.instructions:
        if ins.name == "SLOT" and ins.tag in want:
            found.add(ins.tag)
            ops += [Instruction(p, ins.qubits, tag="error") for p in want[ins.tag]]
        ops.append(ins)
    missing = set(want) - found
    if missing:
        raise CircuitError(f"circuit has no error slot(s) {sorted(missing)}")
    return c.with_instructions(ops)


# ----------------------------------------------------------------------------
# Decoding


def decode_postprocess(syndrome, data) -> int:
    """Logical bit from a syndrome and three data bits.

    The syndrome picks one data bit to flip; the corrected word should then be
    000 or 111, with a majority vote as fallback.
    """
    data = [int(b) for b in data]
    q = SYNDROME_MAP[tuple(int(s) for s in syndrome)]
    if q is not None:
        data[q] ^= 1
    return int(sum(data) >= 2)


def majority(data) -> int:
    return int(sum(int(b) for b in data) >= 2)


def decoded_bit(bits, recovery: str) -> int:
    syndrome = [bits[c] for c in SYNDROME_CLBITS]
    data = [bits[c] for c in DATA_CLBITS]
    if recovery == POST_PROCESSING:
        return decode_postprocess(syndrome, data)
    return majority(data)


def logical_error_rate(result: ShotResult, spec: CodeSpec) -> LogicalResult:
    """Distance between the decoded-bit distribution and the ideal one.

    For a single bit this total variation distance is ``|P(1) - P_ideal(1)|``,
    i.e. the probability of a wrong logical bit for basis-state inputs.
    """
    if result.n_clbits != 5:
        raise ParameterError("result does not come from a repetition-code circuit")
    p_one = 0.0
    hist: dict = {}
    for key, p in result.distribution().items():
        bits = key_to_bits(key)
        p_one += p * decoded_bit(bits, spec.recovery)
        s = "".join(str(bits[c]) for c in reversed(SYNDROME_CLBITS))
        hist[s] = hist.get(s, 0.0) + p
    rate = min(max(abs(p_one - spec.ideal_p_one), 0.0), 1.0)
    return LogicalResult(rate, dict(sorted(hist.items())), result, p_one, spec.ideal_p_one)


# ----------------------------------------------------------------------------
# End-to-end evaluation


@dataclass
class CodeBackend:
    """A code circuit placed on a device, reused across input states and errors."""

    device: DeviceModel
    noise: NoiseModel
    transpiled: TranspileResult

    @classmethod
    def build(cls, kind: str, recovery: str, device: DeviceModel, noise: NoiseModel) -> "CodeBackend":
        base = build_code_circuit(CodeSpec(kind, recovery, "0", "none"), with_prep=False)
        return cls(device, noise, transpile(base, device, noise))

    def circuit_for(self, state, pattern) -> Circuit:
        c = self.transpiled.circuit
        prep = [ins.remap({0: self.transpiled.layout[0]}) for ins in prep_ops(state, 0)]
        if prep:
            c = decompose_to_native(c.with_instructions(prep + list(c.instructions)), self.device)
        return inject_error(c, pattern) if pattern else c


def evaluate(
    spec: CodeSpec,
    backend: CodeBackend | None = None,
    opts: ExecutionOptions | None = None,
) -> LogicalResult:
    """Run ``spec`` on a placed backend (or the ideal virtual circuit) and decode.

    A random error spec runs every member exactly and mixes the distributions
    with their weights; with shots, outcomes are sampled from that mixture.
    ``opts.noise`` overrides the backend's noise model when given.
    """
    opts = opts or ExecutionOptions()
    noise = opts.noise
    if noise is None and backend is not None:
        noise = backend.noise
    exact_opts = ExecutionOptions(0, opts.seed, noise, opts.prep_spam)
    mixed: dict = {}
    for w, pattern in spec.members():
        if backend is None:
            c = build_code_circuit(spec)
            c = inject_error(c, pattern) if pattern else c
        else:
            c = backend.circuit_for(spec.input_state, pattern)
        res = run(c, exact_opts)
        for k, p in res.probabilities.items():
            mixed[k] = mixed.get(k, 0.0) + w * p
    mixed = dict(sorted(mixed.items()))
    if opts.shots:
        raw = ShotResult(5, mixed, sample_counts(mixed, opts.shots, opts.seed), opts.shots)
    else:
        raw = ShotResult(5, mixed)
    return logical_error_rate(raw, spec)


@dataclass(frozen=True)
class AveragedResult:
    logical_error_rate: float
    per_state: dict = field(default_factory=dict)


def derived_seed(seed: int, *path: int) -> int:
    """Independent 64-bit seed for position ``path`` of an experiment grid."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in path))
    return int(seq.generate_state(1, np.uint64)[0])


def average_over_states(
    kind: str,
    recovery: str,
    backend: CodeBackend | None,
    *,
    states=PAULI_STATES,
    error="random",
    opts: ExecutionOptions | None = None,
    random_includes_none: bool = False,
) -> AveragedResult:
    """Mean logical error rate over ``states`` (the six Pauli eigenstates by default).

    With shots, each state gets its own seed derived from ``opts.seed``.
    """
    opts = opts or ExecutionOptions()
    per = {}
    for i, s in enumerate(states):
        o = opts
        if opts.shots:
            o = ExecutionOptions(opts.shots, derived_seed(opts.seed, i), opts.noise, opts.prep_spam)
        spec = CodeSpec(kind, recovery, s, error, random_includes_none)
        per[s] = evaluate(spec, backend, o).logical_error_rate
    return AveragedResult(float(np.mean(list(per.values()))), per)
