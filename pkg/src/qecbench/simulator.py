"""Density-matrix execution with mid-circuit measurement and device noise.

The state is kept as a ``(2,)*2n`` tensor over the qubits the circuit actually
touches, so a circuit placed on a 27-qubit device still simulates as a
five-qubit one. Measurements split the state into branches keyed by the
classical register; branches that reach the same register value are summed,
so at most ``2**n_clbits`` of them are ever alive.

Noise, when a :class:`~qecbench.calibration.NoiseModel` is given:

* every gate applies ``U``, then each acted-on qubit's depolarizing channel,
  then its damping channel; idle qubits are untouched;
* RZ and gates tagged ``"error"`` (injected faults) are exact;
* each qubit receives the SPAM bit flip once at the start (unless
  ``prep_spam`` is off) and again right before every measurement;
* reset is an ideal reset to ``|0>`` followed by the SPAM bit flip.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channels as ch
from .calibration import NoiseModel
from .circuit import Circuit
from .errors import ExecutionError, ParameterError, ShapeError

TRACE_TOL = 1e-10
_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)
_RESET = (np.array([[1, 0], [0, 0]], dtype=complex), np.array([[0, 1], [0, 0]], dtype=complex))


@dataclass(frozen=True)
class ExecutionOptions:
    """``shots=0`` selects the exact-probability mode."""

    shots: int = 0
    seed: int = 0
    noise: NoiseModel | None = None
    prep_spam: bool = True
    check_trace: bool = False

    def __post_init__(self):
        if self.shots < 0:
            raise ParameterError(f"shots must be >= 0, got {self.shots}")


@dataclass(frozen=True)
class ShotResult:
    """Measurement statistics keyed by bitstring, clbit 0 rightmost.

    Exact runs fill ``probabilities``; sampled runs fill ``counts`` and keep the
    exact distribution they were drawn from in ``probabilities`` too.
    """

    n_clbits: int
    probabilities: dict
    counts: dict | None = None
    shots: int = 0

    @property
    def exact(self) -> bool:
        return self.counts is None

    def distribution(self) -> dict:
        """Exact probabilities, or empirical frequencies for sampled runs."""
        if self.counts is None:
            return dict(self.probabilities)
        return {k: v / self.shots for k, v in self.counts.items()}

    def marginal(self, clbits) -> dict:
        """Distribution over ``clbits`` (first listed bit rightmost)."""
        out: dict = {}
        for key, p in self.distribution().items():
            bits = key[::-1]
            sub = "".join(bits[c] for c in reversed(clbits))
            out[sub] = out.get(sub, 0.0) + p
        return dict(sorted(out.items()))


def bits_to_key(register) -> str:
    return "".join(str(int(b)) for b in reversed(register))


def key_to_bits(key: str) -> tuple:
    return tuple(int(b) for b in reversed(key))


# ----------------------------------------------------------------------------
# Core evolution


def _check_conditions(c: Circuit):
    written = set()
    for ins in c.instructions:
        if ins.condition is not None:
            missing = [b for b in ins.condition.clbits if b not in written]
            if missing:
                raise ExecutionError(f"{ins}: condition reads clbit(s) {missing} before any measurement")
        if ins.name == "MEASURE":
            written.add(ins.clbits[0])


def _active_qubits(c: Circuit) -> list[int]:
    used = set()
    for ins in c.instructions:
        if ins.name != "BARRIER":
            used.update(ins.qubits)
    return sorted(used)


def _trace(t: np.ndarray, n: int) -> float:
    return float(np.real(np.trace(t.reshape(2**n, 2**n))))


class _Evolution:
    def __init__(self, c: Circuit, opts: ExecutionOptions, qubits: list[int]):
        self.c = c
        self.opts = opts
        self.noise = opts.noise
        self.phys = qubits
        self.idx = {q: i for i, q in enumerate(qubits)}
        self.n = len(qubits)
        t = np.zeros((2,) * (2 * self.n), dtype=complex)
        t[(0,) * (2 * self.n)] = 1.0
        self.branches = {(0,) * c.n_clbits: t}
        if self.noise is not None and opts.prep_spam:
            for q in qubits:
                self._spam(q)

    def _each(self, fn):
        self.branches = {k: fn(t) for k, t in self.branches.items()}

    def _kraus(self, ops, qubits):
        targets = [self.idx[q] for q in qubits]
        self._each(lambda t: ch.apply_kraus_tensor(t, ops, targets, self.n))

    def _spam(self, q):
        p = self.noise.spam_prob(q) if self.noise is not None else 0.0
        if p > 0:
            self._kraus(ch.make_spam_bitflip(p).operators, [q])

    def _gate(self, ins):
        u = ins.matrix()
        targets = [self.idx[q] for q in ins.qubits]
        gn = None
        if self.noise is not None and ins.tag != "error":
            gn = self.noise.gate_noise(ins.name, ins.qubits)
        out = {}
        for key, t in self.branches.items():
            if ins.condition is not None and not ins.condition.holds(key):
                out[key] = t
                continue
            t = ch.apply_kraus_tensor(t, [u], targets, self.n)
            if gn is not None and not gn.is_trivial:
                for q, k in zip(targets, gn.qubit_channels):
                    t = ch.apply_kraus_tensor(t, k.operators, [q], self.n)
            out[key] = t
        self.branches = out

    def _measure(self, q, clbit):
        self._spam(q)
        target = [self.idx[q]]
        out: dict = {}
        for key, t in self.branches.items():
            for bit, proj in ((0, _P0), (1, _P1)):
                part = ch.apply_kraus_tensor(t, [proj], target, self.n)
                if _trace(part, self.n) <= 1e-15:
                    continue
                new = list(key)
                new[clbit] = bit
                new = tuple(new)
                out[new] = out[new] + part if new in out else part
        self.branches = out

    def _reset(self, q):
        self._kraus(list(_RESET), [q])
        self._spam(q)

    def run(self):
        for i, ins in enumerate(self.c.instructions):
            if ins.name in ("BARRIER", "SLOT"):
                continue
            if ins.name == "MEASURE":
                self._measure(ins.qubits[0], ins.clbits[0])
            elif ins.name == "RESET":
                self._reset(ins.qubits[0])
            else:
                self._gate(ins)
            if self.opts.check_trace:
                tr = sum(_trace(t, self.n) for t in self.branches.values())
                if abs(tr - 1) > TRACE_TOL:
                    raise ExecutionError(f"trace {tr!r} after instruction #{i} ({ins})")
        return self

    def probabilities(self) -> dict:
        probs = {bits_to_key(k): max(_trace(t, self.n), 0.0) for k, t in self.branches.items()}
        total = sum(probs.values())
        return {k: probs[k] / total for k in sorted(probs)}


def _evolve(c: Circuit, opts: ExecutionOptions) -> _Evolution:
    _check_conditions(c)
    return _Evolution(c, opts, _active_qubits(c)).run()


def sample_counts(probabilities: dict, shots: int, seed: int) -> dict:
    """Inverse-CDF sampling with one counter-based draw per shot.

    Shot ``i`` always consumes the ``i``-th output of a Philox stream keyed by
    ``seed``, so results do not depend on how shots are batched or scheduled.
    """
    keys = sorted(probabilities)
    cdf = np.cumsum([probabilities[k] for k in keys])
    cdf[-1] = 1.0
    gen = np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))
    u = gen.random(shots)
    hits = np.searchsorted(cdf, u, side="right")
    hits = np.minimum(hits, len(keys) - 1)
    tally = np.bincount(hits, minlength=len(keys))
    return {k: int(n) for k, n in zip(keys, tally) if n}


def run(c: Circuit, opts: ExecutionOptions | None = None) -> ShotResult:
    """Execute ``c``; exact distribution when ``opts.shots == 0``, else sampled counts."""
    opts = opts or ExecutionOptions()
    probs = _evolve(c, opts).probabilities()
    if opts.shots == 0:
        return ShotResult(c.n_clbits, probs)
    return ShotResult(c.n_clbits, probs, sample_counts(probs, opts.shots, opts.seed), opts.shots)


def final_state(c: Circuit, noise: NoiseModel | None = None, *, prep_spam: bool = True) -> ch.DensityMatrix:
    """Density matrix over all ``c.n_qubits`` qubits, summed over measurement branches."""
    if c.n_qubits > 10:
        raise ExecutionError("final_state supports at most 10 qubits")
    _check_conditions(c)
    opts = ExecutionOptions(noise=noise, prep_spam=prep_spam)
    ev = _Evolution(c, opts, list(range(c.n_qubits))).run()
    n = c.n_qubits
    rho = sum(ev.branches.values()).reshape(2**n, 2**n)
    return ch.DensityMatrix(rho, check=False)


def expectation(c: Circuit, observable, noise: NoiseModel | None = None) -> float:
    """``Tr(O rho)`` for the final state of ``c``."""
    o = np.asarray(observable, dtype=complex)
    d = 2**c.n_qubits
    if o.shape != (d, d):
        raise ShapeError(f"observable must be {d}x{d}, got {o.shape}")
    if not np.allclose(o, o.conj().T, atol=1e-10):
        raise ParameterError("observable is not Hermitian")
    rho = final_state(c, noise).data
    return float(np.real(np.trace(o @ rho)))
