"""Circuit intermediate representation.

A :class:`Circuit` is an ordered list of :class:`Instruction` values over
``n_qubits`` qubits and ``n_clbits`` classical bits. Besides unitary gates it
supports mid-circuit measurement, reset, classically conditioned gates,
barriers and *slots*: single-qubit identity placeholders carrying a label that
later passes replace (for example with an injected error).

Text format, one instruction per line::

    qubits 3
    clbits 2
    h 0
    cnot 0 1
    rz(0.7853981633974483) 2
    measure 1 -> 0
    x 2 if c0=1
    slot 0 @error

``#`` starts a comment. A ``layout`` header line lists the physical qubit of
each virtual qubit in order.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import CircuitError

# name -> arity; parametrised gates take exactly one angle
GATE_ARITY = {
    "X": 1, "Y": 1, "Z": 1, "H": 1, "SX": 1,
    "RX": 1, "RY": 1, "RZ": 1,
    "CNOT": 2, "CZ": 2, "SWAP": 2, "CROT_X": 2, "CROT_Y": 2,
    "CCZ": 3, "CCX": 3,
}
PARAMETRIC = {"RX", "RY", "RZ", "CROT_X", "CROT_Y"}
# MCX takes its control count from the qubit list: controls then target
VARIADIC = {"MCX"}
NON_GATES = {"MEASURE", "RESET", "BARRIER", "SLOT"}
MULTI_QUBIT = {"CNOT", "CZ", "SWAP", "CROT_X", "CROT_Y", "CCZ", "CCX", "MCX"}


@dataclass(frozen=True)
class Condition:
    """Classical condition: the bits ``clbits`` read as ``value`` (bit i <- clbits[i])."""

    clbits: tuple
    value: int

    def holds(self, register: Sequence[int]) -> bool:
        got = sum(int(register[c]) << i for i, c in enumerate(self.clbits))
        return got == self.value


@dataclass(frozen=True)
class Instruction:
    name: str
    qubits: tuple
    params: tuple = ()
    clbits: tuple = ()
    condition: Condition | None = None
    tag: str | None = None

    @property
    def is_gate(self) -> bool:
        return self.name not in NON_GATES

    @property
    def is_multi_qubit(self) -> bool:
        return self.name in MULTI_QUBIT

    def matrix(self) -> np.ndarray:
        return gate_matrix(self.name, self.params, len(self.qubits))

    def remap(self, mapping) -> "Instruction":
        qs = tuple(mapping[q] for q in self.qubits)
        return Instruction(self.name, qs, self.params, self.clbits, self.condition, self.tag)

    def __str__(self) -> str:
        return format_instruction(self)


def _rx(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t):
    return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex)


def _controlled(u: np.ndarray, n_controls: int) -> np.ndarray:
    """Controls on the low qubits, target block ``u`` on the high qubit(s)."""
    dt = u.shape[0]
    dc = 2**n_controls
    m = np.eye(dc * dt, dtype=complex)
    full = dc - 1
    idx = [full + dc * t for t in range(dt)]
    m[np.ix_(idx, idx)] = u
    return m


_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "SX": np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex) / 2,
    "SWAP": np.eye(4, dtype=complex)[[0, 2, 1, 3]],
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CCZ": np.diag([1, 1, 1, 1, 1, 1, 1, -1]).astype(complex),
}
_FIXED["CNOT"] = _controlled(_FIXED["X"], 1)
_FIXED["CCX"] = _controlled(_FIXED["X"], 2)


def gate_matrix(name: str, params: Sequence[float] = (), n_qubits: int | None = None) -> np.ndarray:
    """Unitary of a gate; ``qubits[0]`` of the instruction is the least significant bit."""
    name = name.upper()
    if name in _FIXED:
        return _FIXED[name].copy()
    if name in ("RX", "RY", "RZ"):
        return {"RX": _rx, "RY": _ry, "RZ": _rz}[name](float(params[0]))
    if name == "CROT_X":
        return _controlled(_rx(float(params[0])), 1)
    if name == "CROT_Y":
        return _controlled(_ry(float(params[0])), 1)
    if name == "MCX":
        if n_qubits is None or n_qubits < 2:
            raise CircuitError("MCX needs the qubit count")
        return _controlled(_FIXED["X"], n_qubits - 1)
    if name in ("SLOT", "BARRIER"):
        return np.eye(2 ** (n_qubits or 1), dtype=complex)
    raise CircuitError(f"no matrix for {name!r}")


class Circuit:
    """Mutable builder for an instruction list. Builder methods return ``self``."""

    def __init__(self, n_qubits: int, n_clbits: int = 0, instructions: Iterable[Instruction] = ()):
        if n_qubits < 0 or n_clbits < 0:
            raise CircuitError("register sizes must be non-negative")
        self.n_qubits = int(n_qubits)
        self.n_clbits = int(n_clbits)
        self.instructions: list[Instruction] = []
        self.meta: dict = {}
        for ins in instructions:
            self.append(ins)

    # -- structure -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Circuit)
            and self.n_qubits == other.n_qubits
            and self.n_clbits == other.n_clbits
            and self.instructions == other.instructions
        )

    def __repr__(self) -> str:
        return f"Circuit(n_qubits={self.n_qubits}, n_clbits={self.n_clbits}, ops={len(self)})"

    def copy(self) -> "Circuit":
        c = Circuit(self.n_qubits, self.n_clbits)
        c.instructions = list(self.instructions)
        c.meta = dict(self.meta)
        return c

    def with_instructions(self, instructions: Iterable[Instruction]) -> "Circuit":
        c = Circuit(self.n_qubits, self.n_clbits)
        c.instructions = list(instructions)
        c.meta = dict(self.meta)
        return c

    def _validate(self, ins: Instruction) -> Instruction:
        name = ins.name.upper()
        if name != ins.name:
            ins = replace(ins, name=name)
        qs = tuple(int(q) for q in ins.qubits)
        if len(set(qs)) != len(qs):
            raise CircuitError(f"{name}: repeated qubit in {qs}")
        for q in qs:
            if not 0 <= q < self.n_qubits:
                raise CircuitError(f"{name}: qubit {q} out of range (n_qubits={self.n_qubits})")
        for c in ins.clbits:
            if not 0 <= c < self.n_clbits:
                raise CircuitError(f"{name}: clbit {c} out of range (n_clbits={self.n_clbits})")
        if name in GATE_ARITY:
            if len(qs) != GATE_ARITY[name]:
                raise CircuitError(f"{name} acts on {GATE_ARITY[name]} qubit(s), got {len(qs)}")
            want = 1 if name in PARAMETRIC else 0
            if len(ins.params) != want:
                raise CircuitError(f"{name} takes {want} parameter(s), got {len(ins.params)}")
            if not all(math.isfinite(p) for p in ins.params):
                raise CircuitError(f"{name}: non-finite angle")
        elif name == "MCX":
            if len(qs) < 2:
                raise CircuitError("MCX needs at least one control and a target")
        elif name == "MEASURE":
            if len(qs) != 1 or len(ins.clbits) != 1:
                raise CircuitError("measure maps one qubit to one clbit")
        elif name in ("RESET", "SLOT"):
            if len(qs) != 1:
                raise CircuitError(f"{name} acts on one qubit")
        elif name == "BARRIER":
            pass
        else:
            raise CircuitError(f"unknown instruction {name!r}")
        if ins.condition is not None:
            if not ins.is_gate:
                raise CircuitError("only gates may be classically conditioned")
            for c in ins.condition.clbits:
                if not 0 <= c < self.n_clbits:
                    raise CircuitError(f"condition references undeclared clbit {c}")
            if not 0 <= ins.condition.value < 2 ** len(ins.condition.clbits):
                raise CircuitError("condition value does not fit its clbits")
        return replace(ins, qubits=qs, params=tuple(float(p) for p in ins.params))

    def append(self, ins: Instruction) -> "Circuit":
        self.instructions.append(self._validate(ins))
        return self

    def extend(self, instructions: Iterable[Instruction]) -> "Circuit":
        for ins in instructions:
            self.append(ins)
        return self

    def gate(self, name: str, *qubits: int, params=(), condition=None, tag=None) -> "Circuit":
        if condition is not None and not isinstance(condition, Condition):
            clbits, value = condition
            condition = Condition(tuple(clbits), int(value))
        return self.append(Instruction(name, tuple(qubits), tuple(params), condition=condition, tag=tag))

    # -- builders --------------------------------------------------------
    def x(self, q, **kw):
        return self.gate("X", q, **kw)

    def y(self, q, **kw):
        return self.gate("Y", q, **kw)

    def z(self, q, **kw):
        return self.gate("Z", q, **kw)

    def h(self, q, **kw):
        return self.gate("H", q, **kw)

    def sx(self, q, **kw):
        return self.gate("SX", q, **kw)

    def rx(self, theta, q, **kw):
        return self.gate("RX", q, params=(theta,), **kw)

    def ry(self, theta, q, **kw):
        return self.gate("RY", q, params=(theta,), **kw)

    def rz(self, theta, q, **kw):
        return self.gate("RZ", q, params=(theta,), **kw)

    def cnot(self, c, t, **kw):
        return self.gate("CNOT", c, t, **kw)

    def cz(self, a, b, **kw):
        return self.gate("CZ", a, b, **kw)

    def swap(self, a, b, **kw):
        return self.gate("SWAP", a, b, **kw)

    def crot_x(self, theta, c, t, **kw):
        return self.gate("CROT_X", c, t, params=(theta,), **kw)

    def crot_y(self, theta, c, t, **kw):
        return self.gate("CROT_Y", c, t, params=(theta,), **kw)

    def ccz(self, a, b, c, **kw):
        return self.gate("CCZ", a, b, c, **kw)

    def ccx(self, c0, c1, t, **kw):
        return self.gate("CCX", c0, c1, t, **kw)

    def mcx(self, controls, t, **kw):
        return self.gate("MCX", *controls, t, **kw)

    def measure(self, q, c) -> "Circuit":
        return self.append(Instruction("MEASURE", (q,), clbits=(c,)))

    def reset(self, q) -> "Circuit":
        return self.append(Instruction("RESET", (q,)))

    def barrier(self, *qubits) -> "Circuit":
        qubits = qubits or tuple(range(self.n_qubits))
        return self.append(Instruction("BARRIER", tuple(qubits)))

    def slot(self, q, label: str) -> "Circuit":
        return self.append(Instruction("SLOT", (q,), tag=label))


# ----------------------------------------------------------------------------
# Whole-circuit helpers


def _apply_unitary_rows(m: np.ndarray, u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Left-multiply ``u`` (on ``qubits``) into a (2^n x cols) matrix."""
    k = len(qubits)
    cols = m.shape[1]
    t = m.reshape((2,) * n + (cols,))
    legs = [n - 1 - q for q in reversed(qubits)]
    out = np.tensordot(u.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), legs))
    out = np.moveaxis(out, list(range(k)), legs)
    return out.reshape(2**n, cols)


def unitary(c: Circuit) -> np.ndarray:
    """Unitary of a circuit made only of unconditioned gates, slots and barriers."""
    n = c.n_qubits
    m = np.eye(2**n, dtype=complex)
    for ins in c.instructions:
        if ins.name in ("SLOT", "BARRIER"):
            continue
        if not ins.is_gate or ins.condition is not None:
            raise CircuitError(f"{ins} has no unitary")
        m = _apply_unitary_rows(m, ins.matrix(), ins.qubits, n)
    return m


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max entry difference after aligning the global phase on ``b``'s largest entry."""
    a = np.asarray(a)
    b = np.asarray(b)
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(a[idx]) < 1e-15:
        return float("inf")
    phase = b[idx] / a[idx]
    phase /= abs(phase)
    return float(np.max(np.abs(a * phase - b)))


def equal_up_to_phase(a, b, atol: float = 1e-9) -> bool:
    return phase_aligned_distance(a, b) <= atol


def _touches(ins: Instruction, qubits) -> bool:
    return any(q in ins.qubits for q in qubits)


def cancel_adjacent_cnots(c: Circuit) -> Circuit:
    """Remove pairs of identical CNOTs with nothing on either qubit in between.

    Iterates to a fixpoint, so nested pairs such as ``CX(0,1) CX(1,2) CX(1,2) CX(0,1)``
    vanish completely.
    """
    ops = list(c.instructions)
    changed = True
    while changed:
        changed = False
        for i, a in enumerate(ops):
            if a.name != "CNOT" or a.condition is not None or a.tag is not None:
                continue
            j = next((j for j in range(i + 1, len(ops)) if _touches(ops[j], a.qubits)), None)
            if j is not None and ops[j] == a:
                del ops[j]
                del ops[i]
                changed = True
                break
    return c.with_instructions(ops)


def count_ops(c: Circuit) -> dict:
    """Instruction counts keyed by name; barriers and slots are not counted."""
    counts = Counter(ins.name for ins in c.instructions if ins.name not in ("BARRIER", "SLOT"))
    return dict(sorted(counts.items()))


def multi_qubit_count(c: Circuit) -> int:
    return sum(1 for ins in c.instructions if ins.is_multi_qubit)


# ----------------------------------------------------------------------------
# Text format


def _fmt_params(params) -> str:
    return "(" + ",".join(repr(float(p)) for p in params) + ")" if params else ""


def format_instruction(ins: Instruction) -> str:
    name = ins.name.lower()
    if ins.name == "MEASURE":
        s = f"measure {ins.qubits[0]} -> {ins.clbits[0]}"
    else:
        s = f"{name}{_fmt_params(ins.params)} " + " ".join(str(q) for q in ins.qubits)
    if ins.condition is not None:
        bits = ",".join(f"c{c}={(ins.condition.value >> i) & 1}" for i, c in enumerate(ins.condition.clbits))
        s += f" if {bits}"
    if ins.tag is not None:
        s += f" @{ins.tag}"
    return s.rstrip()


def dumps(c: Circuit, layout: Sequence[int] | None = None) -> str:
    lines = [f"qubits {c.n_qubits}", f"clbits {c.n_clbits}"]
    layout = layout if layout is not None else c.meta.get("layout")
    if layout is not None:
        lines.append("layout " + " ".join(str(int(p)) for p in layout))
    lines += [format_instruction(ins) for ins in c.instructions]
    return "\n".join(lines) + "\n"


_LINE = re.compile(
    r"^(?P<name>[a-zA-Z_]+)(?:\((?P<params>[^)]*)\))?"
    r"(?P<args>(?:\s+\d+)*)"
    r"(?:\s*->\s*(?P<clbit>\d+))?"
    r"(?:\s+if\s+(?P<cond>c\d+=[01](?:,c\d+=[01])*))?"
    r"(?:\s+@(?P<tag>\S+))?\s*$"
)


def loads(text: str) -> Circuit:
    """Parse the text format; a ``layout`` header is stored in ``circuit.meta``."""
    n_q = n_c = None
    layout = None
    pending: list[tuple[int, Instruction]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head = line.split()
        try:
            if head[0] == "qubits":
                n_q = int(head[1])
                continue
            if head[0] == "clbits":
                n_c = int(head[1])
                continue
            if head[0] == "layout":
                layout = tuple(int(x) for x in head[1:])
                continue
        except (IndexError, ValueError) as exc:
            raise CircuitError(f"line {lineno}: bad header {line!r}") from exc
        m = _LINE.match(line)
        if m is None:
            raise CircuitError(f"line {lineno}: cannot parse {line!r}")
        name = m["name"].upper()
        params = tuple(float(p) for p in m["params"].split(",")) if m["params"] else ()
        qubits = tuple(int(q) for q in m["args"].split())
        clbits = (int(m["clbit"]),) if m["clbit"] is not None else ()
        cond = None
        if m["cond"]:
            pairs = [p.split("=") for p in m["cond"].split(",")]
            bits = tuple(int(p[0][1:]) for p in pairs)
            value = sum(int(p[1]) << i for i, p in enumerate(pairs))
            cond = Condition(bits, value)
        pending.append((lineno, Instruction(name, qubits, params, clbits, cond, m["tag"])))
    if n_q is None:
        raise CircuitError("missing 'qubits' header")
    c = Circuit(n_q, n_c or 0)
    for lineno, ins in pending:
        try:
            c.append(ins)
        except CircuitError as exc:
            raise CircuitError(f"line {lineno}: {exc}") from exc
    if layout is not None:
        c.meta["layout"] = layout
    return c
