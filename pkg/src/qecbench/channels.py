"""Kraus-channel algebra for qubit noise.

Conventions used throughout the package:

* Vectorization is column stacking: ``vec(E)[i + d*j] = E[i, j]``.
* Qubit 0 is the least-significant bit of a basis-state index, so an operator
  on qubits ``(q0, q1, ...)`` is ``... ⊗ O_q1 ⊗ O_q0``.
* Channels are trace preserving; ``sum_k E_k^† E_k = I`` is enforced to 1e-12.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import ParameterError, ShapeError

COMPLETENESS_TOL = 1e-12

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, PAULI_X, PAULI_Y, PAULI_Z)


def allclose(a, b, atol: float) -> bool:
    """Entrywise comparison with an explicit absolute tolerance."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= atol))


def _check_probability(name: str, p: float) -> float:
    p = float(p)
    if not np.isfinite(p) or p < 0.0 or p > 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {p!r}")
    return p


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KrausSet:
    """A trace-preserving channel given by its Kraus operators."""

    operators: tuple

    def __init__(self, operators: Sequence[np.ndarray], *, check: bool = True):
        ops = tuple(_frozen(op) for op in operators)
        if not ops:
            raise ShapeError("a KrausSet needs at least one operator")
        d = ops[0].shape[0]
        for op in ops:
            if op.ndim != 2 or op.shape != (d, d):
                raise ShapeError(f"Kraus operators must all be {d}x{d}, got {op.shape}")
        object.__setattr__(self, "operators", ops)
        if check:
            gram = sum(op.conj().T @ op for op in ops)
            dev = np.max(np.abs(gram - np.eye(d)))
            if dev > COMPLETENESS_TOL:
                raise ParameterError(f"Kraus operators are not complete (max deviation {dev:.3e})")

    @property
    def dim(self) -> int:
        return self.operators[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.dim)))

    def __len__(self) -> int:
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def completeness_error(self) -> float:
        gram = sum(op.conj().T @ op for op in self.operators)
        return float(np.max(np.abs(gram - np.eye(self.dim))))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        """Apply the channel to a ``dim x dim`` matrix."""
        rho = np.asarray(rho)
        if rho.shape != (self.dim, self.dim):
            raise ShapeError(f"expected a {self.dim}x{self.dim} matrix, got {rho.shape}")
        return sum(E @ rho @ E.conj().T for E in self.operators)


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Choi matrix ``J = sum_k vec(E_k) vec(E_k)^†`` of a channel on dimension ``dim``."""

    dim: int
    entries: np.ndarray

    def partial_trace_output(self) -> np.ndarray:
        d = self.dim
        # index i + d*j reshaped C-order gives axes (j, i); trace over output i
        return np.einsum("jili->jl", self.entries.reshape(d, d, d, d))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return allclose(self.entries, self.entries.conj().T, atol)

    def is_psd(self, atol: float = 1e-10) -> bool:
        return bool(self.eigenvalues().min() >= -atol)

    def is_trace_preserving(self, atol: float = 1e-12) -> bool:
        return allclose(self.partial_trace_output(), np.eye(self.dim), atol)

    def allclose(self, other: "ChoiMatrix", atol: float = 1e-12) -> bool:
        return self.dim == other.dim and allclose(self.entries, other.entries, atol)


class DensityMatrix:
    """An n-qubit density matrix, validated on construction."""

    __slots__ = ("_data",)

    def __init__(self, data, *, check: bool = True):
        data = np.array(data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ShapeError(f"density matrix must be square, got {data.shape}")
        n = int(round(np.log2(data.shape[0])))
        if 2**n != data.shape[0]:
            raise ShapeError(f"dimension {data.shape[0]} is not a power of two")
        if check:
            if not allclose(data, data.conj().T, 1e-10):
                raise ParameterError("density matrix is not Hermitian")
            if abs(np.trace(data) - 1) > 1e-10:
                raise ParameterError(f"density matrix trace is {np.trace(data).real:.12g}")
            if np.linalg.eigvalsh((data + data.conj().T) / 2).min() < -1e-9:
                raise ParameterError("density matrix has a negative eigenvalue")
        data.setflags(write=False)
        self._data = data

    @classmethod
    def from_statevector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, bits: Sequence[int]) -> "DensityMatrix":
        """``|b_{n-1} ... b_0><...|`` where ``bits[q]`` is the value of qubit ``q``."""
        idx = sum(int(b) << q for q, b in enumerate(bits))
        d = 2 ** len(bits)
        rho = np.zeros((d, d), dtype=complex)
        rho[idx, idx] = 1
        return cls(rho)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self._data.shape[0])))

    def __array__(self, dtype=None, copy=None):
        return self._data if dtype is None else self._data.astype(dtype)

    def __repr__(self) -> str:
        return f"DensityMatrix(n_qubits={self.n_qubits})"


# ----------------------------------------------------------------------------
# Constructors


def identity_channel(dim: int = 2) -> KrausSet:
    return KrausSet([np.eye(dim)])


def unitary_channel(u) -> KrausSet:
    return KrausSet([np.asarray(u, dtype=complex)], check=True)


def make_amplitude_damping(p_ad: float) -> KrausSet:
    """Energy relaxation: ``|1>`` decays to ``|0>`` with probability ``p_ad``."""
    p = _check_probability("p_ad", p_ad)
    e0 = np.array([[1, 0], [0, np.sqrt(1 - p)]])
    e1 = np.array([[0, np.sqrt(p)], [0, 0]])
    return KrausSet([e0, e1])


def make_phase_damping(p_pd: float) -> KrausSet:
    """Pure dephasing; coherences shrink by ``sqrt(1 - p_pd)``."""
    p = _check_probability("p_pd", p_pd)
    e0 = np.array([[1, 0], [0, np.sqrt(1 - p)]])
    e1 = np.array([[0, 0], [0, np.sqrt(p)]])
    return KrausSet([e0, e1])


def make_amplitude_phase_damping(p_ad: float, p_pd: float) -> KrausSet:
    """Combined relaxation and dephasing (phase damping after amplitude damping)."""
    a = _check_probability("p_ad", p_ad)
    p = _check_probability("p_pd", p_pd)
    e0 = np.array([[1, 0], [0, np.sqrt(1 - a) * np.sqrt(1 - p)]])
    e1 = np.array([[0, np.sqrt(a)], [0, 0]])
    e2 = np.array([[0, 0], [0, np.sqrt(1 - a) * np.sqrt(p)]])
    return KrausSet([e0, e1, e2])


def pauli_string(labels: Sequence[int]) -> np.ndarray:
    """Tensor product of Paulis, ``labels[q]`` in {0,1,2,3} acting on qubit ``q``."""
    return reduce(np.kron, [PAULIS[i] for i in reversed(labels)], np.eye(1, dtype=complex))


def make_depolarizing(p: float, n_qubits: int = 1) -> KrausSet:
    """Depolarizing channel ``rho -> p I/d + (1 - p) rho`` on ``n_qubits`` qubits."""
    p = _check_probability("p_depol", p)
    if n_qubits not in (1, 2, 3):
        raise ParameterError(f"joint depolarizing supports 1-3 qubits, got {n_qubits}")
    d = 2**n_qubits
    w_id = np.sqrt(1 - p * (d * d - 1) / (d * d))
    w_p = np.sqrt(p) / d
    ops = []
    for labels in itertools.product(range(4), repeat=n_qubits):
        w = w_id if not any(labels) else w_p
        ops.append(w * pauli_string(labels))
    return KrausSet(ops)


def make_spam_bitflip(p_spam: float) -> KrausSet:
    p = _check_probability("p_spam", p_spam)
    return KrausSet([np.sqrt(1 - p) * I2, np.sqrt(p) * PAULI_X])


# ----------------------------------------------------------------------------
# Algebra


def compose(outer: KrausSet, inner: KrausSet) -> KrausSet:
    """Channel ``outer ∘ inner`` (``inner`` acts first)."""
    if outer.dim != inner.dim:
        raise ShapeError(f"cannot compose channels of dimension {outer.dim} and {inner.dim}")
    return KrausSet([a @ b for a in outer.operators for b in inner.operators])


def tensor(*channels: KrausSet) -> KrausSet:
    """Product channel; ``channels[q]`` acts on qubit (subsystem) ``q``."""
    ops = [np.eye(1, dtype=complex)]
    for ch in channels:
        ops = [np.kron(e, o) for o in ops for e in ch.operators]
    return KrausSet(ops)


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def choi(k: KrausSet) -> ChoiMatrix:
    vs = np.array([vec(E) for E in k.operators])
    j = vs.T @ vs.conj()
    j.setflags(write=False)
    return ChoiMatrix(k.dim, j)


def kraus_from_choi(j: ChoiMatrix, tol: float = 1e-14) -> KrausSet:
    """Minimal (canonical) Kraus set from the eigen-decomposition of a Choi matrix."""
    d = j.dim
    herm = (j.entries + j.entries.conj().T) / 2
    w, v = np.linalg.eigh(herm)
    ops = [np.sqrt(lam) * v[:, i].reshape(d, d, order="F") for i, lam in enumerate(w) if lam > tol]
    if not ops:
        ops = [np.zeros((d, d))]
    # eigen-decomposition round-off can exceed the strict completeness tolerance
    ks = KrausSet(ops, check=False)
    if ks.completeness_error() > 1e-10:
        raise ParameterError("Choi matrix does not describe a trace-preserving channel")
    return ks


def simplify(k: KrausSet) -> KrausSet:
    """Equivalent channel with at most ``dim**2`` Kraus operators."""
    if len(k) <= 1:
        return k
    return kraus_from_choi(choi(k))


def _check_unitary(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ShapeError(f"target must be square, got {u.shape}")
    if not allclose(u.conj().T @ u, np.eye(u.shape[0]), 1e-10):
        raise ParameterError("target operator is not unitary")
    return u


def entanglement_fidelity(channel: KrausSet, target=None) -> float:
    """``sum_k |Tr(U^† E_k)|^2 / d^2``; multiplicative over tensor products."""
    d = channel.dim
    u = np.eye(d) if target is None else _check_unitary(target)
    if u.shape[0] != d:
        raise ShapeError(f"channel dimension {d} does not match target {u.shape[0]}")
    udag = u.conj().T
    s = sum(abs(np.trace(udag @ E)) ** 2 for E in channel.operators)
    return float(s / d**2)


def average_gate_fidelity(channel: KrausSet, target=None) -> float:
    """Haar-averaged fidelity of ``channel`` to the unitary ``target`` (identity by default)."""
    d = channel.dim
    fe = entanglement_fidelity(channel, target)
    return float((d * d * fe + d) / (d * (d + 1)))


def entanglement_from_average(f_av: float, dim: int) -> float:
    return ((dim + 1) * f_av - 1) / dim


def average_from_entanglement(f_e: float, dim: int) -> float:
    return (dim * f_e + 1) / (dim + 1)


def depolarizing_entanglement_fidelity(p: float, n_qubits: int = 1) -> float:
    """Entanglement fidelity of :func:`make_depolarizing`; linear in ``p``."""
    d2 = 4**n_qubits
    return 1 - p * (d2 - 1) / d2


def depolarizing_from_entanglement_fidelity(f_e: float, n_qubits: int = 1) -> float:
    """Inverse of :func:`depolarizing_entanglement_fidelity`."""
    d2 = 4**n_qubits
    return (1 - f_e) * d2 / (d2 - 1)


# ----------------------------------------------------------------------------
# Application to density matrices


def _apply_op_tensor(t: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int, col: bool) -> np.ndarray:
    """Multiply ``op`` onto the row (or column) legs of a rank-2n tensor."""
    k = len(targets)
    op_t = op.reshape((2,) * (2 * k))
    if col:
        op_t = op_t.conj()
        legs = [2 * n - 1 - q for q in reversed(targets)]
    else:
        legs = [n - 1 - q for q in reversed(targets)]
    # op_t axes: (out_{k-1}..out_0, in_{k-1}..in_0)
    out = np.tensordot(op_t, t, axes=(list(range(k, 2 * k)), legs))
    return np.moveaxis(out, list(range(k)), legs)


def apply_kraus_tensor(t: np.ndarray, ops: Sequence[np.ndarray], targets: Sequence[int], n: int) -> np.ndarray:
    """``sum_k E_k rho E_k^†`` on a density matrix stored as a ``(2,)*2n`` tensor."""
    acc = None
    for E in ops:
        part = _apply_op_tensor(_apply_op_tensor(t, E, targets, n, col=False), E, targets, n, col=True)
        acc = part if acc is None else acc + part
    return acc


def apply_channel(k: KrausSet, rho: DensityMatrix, targets: Sequence[int]) -> DensityMatrix:
    """Apply ``k`` to the listed qubits of ``rho`` (identity elsewhere)."""
    n = rho.n_qubits
    targets = [int(q) for q in targets]
    if len(set(targets)) != len(targets):
        raise ShapeError(f"target qubits must be distinct, got {targets}")
    for q in targets:
        if not 0 <= q < n:
            raise ShapeError(f"qubit {q} out of range for a {n}-qubit state")
    if k.dim != 2 ** len(targets):
        raise ShapeError(f"channel of dimension {k.dim} cannot act on {len(targets)} qubit(s)")
    t = np.asarray(rho.data).reshape((2,) * (2 * n))
    out = apply_kraus_tensor(t, k.operators, targets, n).reshape(2**n, 2**n)
    return DensityMatrix(out, check=False)
