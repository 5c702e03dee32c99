"""Device models and the calibration -> noise-parameter mapping.

A :class:`DeviceModel` bundles a directed coupling graph, the native gate set
with its placement rules and per-qubit / per-edge calibration numbers. Times
are in milliseconds throughout.

:func:`build_noise_model` turns a device into a :class:`NoiseModel`: every
native gate placement gets amplitude/phase damping for its duration on each
qubit it acts on, plus a per-qubit depolarizing part chosen so that the whole
noisy gate reproduces the calibrated average gate infidelity.
"""
from __future__ import annotations

import itertools
import math
import os
import re
import warnings
from dataclasses import dataclass, field, fields
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Mapping

import networkx as nx
import numpy as np
import yaml
from scipy.optimize import brentq

from . import channels as ch
from .errors import ConfigurationError, DeviceFileError, ParameterError

PRESET_DIR_ENV = "QECBENCH_PRESET_DIR"
EDGE_PLACEMENT = "edge"
STAR_PLACEMENT = "star"
# gates applied virtually: exact and instantaneous on every platform
NOISELESS_GATES = frozenset({"RZ"})


class CalibrationWarning(UserWarning):
    """Calibration numbers were clamped or look unphysical."""


@dataclass(frozen=True)
class QubitCalibration:
    t1: float
    t2: float
    p_spam: float
    single_gate_error: float
    single_gate_time: float

    def __post_init__(self):
        t1, t2 = self.t1, self.t2
        if isinstance(t1, (int, float)) and isinstance(t2, (int, float)) and t1 > 0 and t2 > 2 * t1:
            warnings.warn(f"t2={t2} exceeds the physical bound 2*t1={2 * t1}", CalibrationWarning, stacklevel=3)

    def problems(self, where: str) -> list[str]:
        out = []
        for name in ("t1", "t2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                out.append(f"{where}: {name} must be > 0, got {v!r}")
        for name in ("p_spam", "single_gate_error"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0 <= v <= 1):
                out.append(f"{where}: {name} must lie in [0, 1], got {v!r}")
        v = self.single_gate_time
        if not (isinstance(v, (int, float)) and v >= 0):
            out.append(f"{where}: single_gate_time must be >= 0, got {v!r}")
        return out


@dataclass(frozen=True)
class EdgeCalibration:
    control: int
    target: int
    two_gate_error: float
    two_gate_time: float

    def problems(self, where: str) -> list[str]:
        out = []
        if self.control == self.target:
            out.append(f"{where}: control and target coincide ({self.control})")
        if not (isinstance(self.two_gate_error, (int, float)) and 0 <= self.two_gate_error <= 1):
            out.append(f"{where}: error must lie in [0, 1], got {self.two_gate_error!r}")
        if not (isinstance(self.two_gate_time, (int, float)) and self.two_gate_time > 0):
            out.append(f"{where}: time must be > 0, got {self.two_gate_time!r}")
        return out


@dataclass(frozen=True)
class MultiQubitGate:
    """A native multi-qubit gate kind and where it may be placed.

    ``edge`` gates act on a coupled pair and use that edge's calibration.
    ``star`` gates act on a hub qubit plus neighbours of the hub and carry their
    own ``error`` and ``time``.
    """

    kind: str
    placement: str = EDGE_PLACEMENT
    arity: int = 2
    error: float | None = None
    time: float | None = None


@dataclass(frozen=True)
class DeviceModel:
    name: str
    n_qubits: int
    edges: tuple
    native_single: frozenset
    native_multi: tuple
    qubit_cal: tuple
    edge_cal: tuple
    hubs: tuple = ()

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DeviceFileError(problems)

    # -- validation ------------------------------------------------------
    def problems(self) -> list[str]:
        out = []
        n = self.n_qubits
        if not isinstance(n, int) or n < 1:
            return [f"n_qubits must be a positive integer, got {n!r}"]
        for c, t in self.edges:
            if not (0 <= c < n and 0 <= t < n):
                out.append(f"edge ({c}, {t}) references a qubit outside 0..{n - 1}")
            if c == t:
                out.append(f"edge ({c}, {t}) is a self loop")
        if len(self.qubit_cal) != n:
            out.append(f"expected calibration for {n} qubits, got {len(self.qubit_cal)}")
        for q, cal in enumerate(self.qubit_cal):
            out += cal.problems(f"qubit {q}")
        cal_pairs = {(e.control, e.target) for e in self.edge_cal}
        for e in self.edge_cal:
            out += e.problems(f"edge ({e.control}, {e.target})")
            if (e.control, e.target) not in set(self.edges):
                out.append(f"calibration for ({e.control}, {e.target}) which is not an edge")
        for h in self.hubs:
            if not 0 <= h < n:
                out.append(f"hub {h} out of range")
        for g in self.native_multi:
            if g.placement == EDGE_PLACEMENT:
                if g.arity != 2:
                    out.append(f"{g.kind}: edge-local gates must have arity 2")
                if not self.edges:
                    out.append(f"{g.kind}: edge-local gate on a device without edges")
                missing = [e for e in self.edges if e not in cal_pairs]
                if missing:
                    out.append(f"{g.kind}: no calibration for edges {missing}")
            elif g.placement == STAR_PLACEMENT:
                if g.error is None or g.time is None:
                    out.append(f"{g.kind}: star-local gates need 'error' and 'time'")
                elif not (0 <= g.error <= 1 and g.time > 0):
                    out.append(f"{g.kind}: bad error/time ({g.error}, {g.time})")
                if not any(self._degree(h) >= g.arity - 1 for h in self.hubs):
                    out.append(f"{g.kind}: no hub with {g.arity - 1} neighbours")
            else:
                out.append(f"{g.kind}: unknown placement {g.placement!r}")
        return out

    def _degree(self, q: int) -> int:
        return len({b for a, b in self.edges if a == q} | {a for a, b in self.edges if b == q})

    # -- queries ---------------------------------------------------------
    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_qubits))
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def edge_set(self) -> frozenset:
        return frozenset(self.edges)

    @cached_property
    def _edge_cal_map(self) -> dict:
        return {(e.control, e.target): e for e in self.edge_cal}

    @cached_property
    def multi_by_kind(self) -> dict:
        return {g.kind: g for g in self.native_multi}

    @property
    def native_kinds(self) -> frozenset:
        return frozenset(self.native_single) | frozenset(self.multi_by_kind)

    def coupled(self, a: int, b: int) -> bool:
        return (a, b) in self.edge_set or (b, a) in self.edge_set

    def star_hub(self, qubits) -> int | None:
        """Hub among ``qubits`` adjacent to all the others, if any."""
        for h in qubits:
            if h in self.hubs and all(self.coupled(h, q) for q in qubits if q != h):
                return h
        return None

    def placement_ok(self, kind: str, qubits) -> bool:
        if len(qubits) == 1:
            return kind in self.native_single
        spec = self.multi_by_kind.get(kind)
        if spec is None or spec.arity != len(qubits):
            return False
        if spec.placement == EDGE_PLACEMENT:
            return tuple(qubits) in self.edge_set
        return self.star_hub(qubits) is not None

    def edge_calibration(self, control: int, target: int) -> EdgeCalibration:
        try:
            return self._edge_cal_map[(control, target)]
        except KeyError:
            raise ConfigurationError(f"{self.name}: no calibration for edge ({control}, {target})") from None

    def placements(self, spec: MultiQubitGate):
        """All qubit tuples on which ``spec`` may act."""
        if spec.placement == EDGE_PLACEMENT:
            yield from sorted(self.edges)
            return
        for h in self.hubs:
            nbrs = sorted(self.graph.neighbors(h))
            for others in itertools.combinations(nbrs, spec.arity - 1):
                yield tuple(sorted((h, *others)))

    def with_updates(self, **changes) -> "DeviceModel":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return DeviceModel(**kw)


# ----------------------------------------------------------------------------
# Noise parameters


def damping_probs(t1: float, t2: float, dt: float) -> tuple[float, float]:
    """Damping probabilities for a gate of duration ``dt``.

    ``sqrt(1 - p_ad) = exp(-dt / 2 t1)`` and
    ``sqrt(1 - p_ad) sqrt(1 - p_pd) = exp(-dt / 2 t2)``. When ``t2 > t1`` the
    second relation would need a negative ``p_pd``; it is clamped to 0 with a
    :class:`CalibrationWarning`.
    """
    if not (t1 > 0 and t2 > 0):
        raise ParameterError(f"t1 and t2 must be positive, got t1={t1!r}, t2={t2!r}")
    if dt < 0:
        raise ParameterError(f"gate time must be non-negative, got {dt!r}")
    p_ad = -math.expm1(-dt / t1) + 0.0
    rate = dt * (1 / t1 - 1 / t2)
    p_pd = -math.expm1(rate) + 0.0 if rate <= 0 else -1.0
    if p_pd < 0:
        warnings.warn(
            f"t2={t2} exceeds t1={t1}: dephasing probability clamped to 0", CalibrationWarning, stacklevel=2
        )
        p_pd = 0.0
    return p_ad, min(p_pd, 1.0)


def depol_from_total_error(p_g: float, f_damp, n_qubits: int = 1) -> float:
    """Per-qubit depolarizing probability that tops damping up to the total error.

    ``p_g`` is the calibrated average gate infidelity of an ``n_qubits`` gate.
    ``f_damp`` is the average fidelity of its damping part, either one number
    for the whole gate (split evenly over the qubits) or a sequence of
    single-qubit average fidelities. Every acted-on qubit receives the same
    depolarizer, composed with its damping channel; the result makes the
    average fidelity of the full noisy gate exactly ``1 - p_g``. To first order
    the residual infidelity handed to the depolarizer is ``p_g - (1 - f_damp)``.

    Returns 0 with a :class:`CalibrationWarning` when damping alone already
    accounts for ``p_g``.
    """
    if not 0 <= p_g <= 1:
        raise ParameterError(f"p_g must lie in [0, 1], got {p_g!r}")
    if np.ndim(f_damp) == 0:
        if not 0 <= f_damp <= 1:
            raise ParameterError(f"f_damp must lie in [0, 1], got {f_damp!r}")
        fe = ch.entanglement_from_average(float(f_damp), 2**n_qubits)
        per_qubit = [max(fe, 0.0) ** (1 / n_qubits)] * n_qubits
    else:
        if len(f_damp) != n_qubits:
            raise ParameterError("need one damping fidelity per qubit")
        per_qubit = [ch.entanglement_from_average(float(f), 2) for f in f_damp]
    fe_target = ch.entanglement_from_average(1 - p_g, 2**n_qubits)

    def total(p):
        # F_e(damp ∘ depol_p) = (1 - p) F_e(damp) + p / 4 for one qubit
        return float(np.prod([(1 - p) * f + p / 4 for f in per_qubit]))

    if fe_target >= total(0.0) - 1e-15:
        if fe_target > total(0.0) + 1e-15:
            warnings.warn(
                f"damping infidelity exceeds calibrated error {p_g:.3g}; no depolarizing part",
                CalibrationWarning,
                stacklevel=2,
            )
        return 0.0
    if fe_target <= total(1.0):
        warnings.warn(f"calibrated error {p_g:.3g} needs full depolarization", CalibrationWarning, stacklevel=2)
        return 1.0
    if n_qubits == 1:
        f = per_qubit[0]
        return (f - fe_target) / (f - 0.25)
    return float(brentq(lambda p: total(p) - fe_target, 0.0, 1.0, xtol=1e-15, rtol=1e-15))


@dataclass(frozen=True)
class GateNoise:
    """Noise attached to one gate placement; tuples are indexed like ``qubits``."""

    qubits: tuple
    p_ad: tuple
    p_pd: tuple
    p_depol: tuple
    duration: float = 0.0

    def __post_init__(self):
        for name in ("p_ad", "p_pd", "p_depol"):
            vals = getattr(self, name)
            if len(vals) != len(self.qubits):
                raise ParameterError(f"{name} needs one entry per qubit")
            for v in vals:
                if not 0 <= v <= 1:
                    raise ParameterError(f"{name} entry {v!r} outside [0, 1]")

    @cached_property
    def qubit_channels(self) -> tuple:
        """Per-qubit channel ``damp ∘ depol`` as a minimal Kraus set."""
        out = []
        for a, p, d in zip(self.p_ad, self.p_pd, self.p_depol):
            k = ch.compose(ch.make_amplitude_phase_damping(a, p), ch.make_depolarizing(d))
            out.append(ch.simplify(k))
        return tuple(out)

    @property
    def is_trivial(self) -> bool:
        return not any(self.p_ad) and not any(self.p_pd) and not any(self.p_depol)

    def fidelity(self) -> float:
        """Average gate fidelity of the noisy gate relative to the ideal one."""
        fe = 1.0
        for k in self.qubit_channels:
            fe *= ch.entanglement_fidelity(k)
        return ch.average_from_entanglement(fe, 2 ** len(self.qubits))


@dataclass(frozen=True)
class NoiseModel:
    """Noise per (gate kind, placement) and SPAM probability per qubit.

    Lookups for gates not listed raise :class:`ConfigurationError`, except for
    gates in ``noiseless`` which are always exact.
    """

    gates: Mapping = field(default_factory=dict)
    spam: Mapping = field(default_factory=dict)
    noiseless: frozenset = NOISELESS_GATES
    strict: bool = True

    def __post_init__(self):
        for q, p in self.spam.items():
            if not 0 <= p <= 1:
                raise ParameterError(f"p_spam for qubit {q} outside [0, 1]: {p!r}")

    def gate_noise(self, kind: str, qubits) -> GateNoise | None:
        if kind in self.noiseless:
            return None
        qubits = tuple(qubits)
        hit = self.gates.get((kind, qubits)) or self.gates.get((kind, tuple(sorted(qubits))))
        if hit is None:
            if self.strict:
                raise ConfigurationError(f"no noise calibration for {kind} on qubits {qubits}")
            return None
        if hit.qubits != qubits:
            order = [hit.qubits.index(q) for q in qubits]
            hit = GateNoise(
                qubits,
                tuple(hit.p_ad[i] for i in order),
                tuple(hit.p_pd[i] for i in order),
                tuple(hit.p_depol[i] for i in order),
                hit.duration,
            )
        return hit

    def spam_prob(self, qubit: int) -> float:
        return float(self.spam.get(qubit, 0.0))

    def gate_fidelity(self, kind: str, qubits) -> float:
        noise = self.gate_noise(kind, qubits)
        return 1.0 if noise is None else noise.fidelity()


def _damp_fidelities(params) -> list[float]:
    return [ch.average_gate_fidelity(ch.make_amplitude_phase_damping(a, p)) for a, p in params]


def _calibrated_gate(device: DeviceModel, qubits: tuple, duration: float, error: float) -> GateNoise:
    damp = [damping_probs(device.qubit_cal[q].t1, device.qubit_cal[q].t2, duration) for q in qubits]
    p = depol_from_total_error(error, _damp_fidelities(damp), len(qubits))
    return GateNoise(
        qubits,
        tuple(a for a, _ in damp),
        tuple(b for _, b in damp),
        (p,) * len(qubits),
        duration,
    )


def build_noise_model(device: DeviceModel) -> NoiseModel:
    """Noise model for every native gate placement of a calibrated device."""
    gates = {}
    for q, cal in enumerate(device.qubit_cal):
        for kind in sorted(device.native_single):
            if kind in NOISELESS_GATES:
                continue
            gates[(kind, (q,))] = _calibrated_gate(device, (q,), cal.single_gate_time, cal.single_gate_error)
    for spec in device.native_multi:
        for placement in device.placements(spec):
            if spec.placement == EDGE_PLACEMENT:
                e = device.edge_calibration(*placement)
                err, dur = e.two_gate_error, e.two_gate_time
            else:
                err, dur = spec.error, spec.time
            gates[(spec.kind, placement)] = _calibrated_gate(device, placement, dur, err)
    spam = {q: cal.p_spam for q, cal in enumerate(device.qubit_cal)}
    return NoiseModel(gates, spam)


def uniform_noise_model(
    device: DeviceModel,
    *,
    t1: float | None = None,
    t2: float | None = None,
    gate_time: float = 0.0,
    p_depol: float = 0.0,
    p_spam: float = 0.0,
) -> NoiseModel:
    """Same parameters on every qubit and gate of ``device``.

    ``t1 = t2 = None`` means infinite coherence: no damping channels at all.
    ``p_depol`` is the depolarizing probability applied to each acted-on qubit.
    """
    if (t1 is None) != (t2 is None):
        raise ParameterError("give both t1 and t2, or neither")
    damp = damping_probs(t1, t2, gate_time) if t1 is not None else (0.0, 0.0)
    ch._check_probability("p_depol", p_depol)

    def noise(qs):
        k = len(qs)
        return GateNoise(qs, (damp[0],) * k, (damp[1],) * k, (p_depol,) * k, gate_time)

    gates = {}
    for q in range(device.n_qubits):
        for kind in sorted(device.native_single):
            if kind not in NOISELESS_GATES:
                gates[(kind, (q,))] = noise((q,))
    for spec in device.native_multi:
        for placement in device.placements(spec):
            gates[(spec.kind, placement)] = noise(placement)
    return NoiseModel(gates, {q: p_spam for q in range(device.n_qubits)})


# ----------------------------------------------------------------------------
# Device documents

_QUBIT_KEYS = {f.name for f in fields(QubitCalibration)}
_TOP_KEYS = {
    "name", "n_qubits", "edges", "native_single", "native_multi", "hubs",
    "qubit_defaults", "qubits", "edge_defaults",
}
_MULTI_KEYS = {"kind", "placement", "arity", "error", "time"}
_EDGE_KEYS = {"control", "target", "error", "time"}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a sign or dot (``1e12``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def parse_yaml(text: str):
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise DeviceFileError(f"{where}{getattr(exc, 'problem', exc)}") from exc


def device_from_dict(doc) -> DeviceModel:
    """Validate a parsed device document; every problem is reported at once."""
    if not isinstance(doc, dict) or not doc:
        raise DeviceFileError("device document is empty or not a mapping")
    problems = [f"unknown field '{k}'" for k in doc if k not in _TOP_KEYS]
    for key in ("name", "n_qubits", "native_single"):
        if key not in doc:
            problems.append(f"missing field '{key}'")
    if problems:
        raise DeviceFileError(problems)
    n = doc["n_qubits"]
    if not isinstance(n, int) or n < 1:
        raise DeviceFileError(f"n_qubits must be a positive integer, got {n!r}")

    defaults = doc.get("qubit_defaults") or {}
    problems += [f"qubit_defaults: unknown field '{k}'" for k in defaults if k not in _QUBIT_KEYS]
    overrides = doc.get("qubits") or {}
    if isinstance(overrides, list):
        overrides = dict(enumerate(overrides))
    qubit_cal = []
    for q in range(n):
        entry = dict(defaults)
        extra = overrides.get(q) or {}
        problems += [f"qubit {q}: unknown field '{k}'" for k in extra if k not in _QUBIT_KEYS]
        entry.update({k: v for k, v in extra.items() if k in _QUBIT_KEYS})
        missing = _QUBIT_KEYS - entry.keys()
        if missing:
            problems.append(f"qubit {q}: missing {sorted(missing)}")
            continue
        qubit_cal.append(QubitCalibration(**{k: entry[k] for k in sorted(_QUBIT_KEYS)}))
    for q in overrides:
        if not (isinstance(q, int) and 0 <= q < n):
            problems.append(f"calibration for unknown qubit {q!r}")

    edge_defaults = doc.get("edge_defaults") or {}
    problems += [f"edge_defaults: unknown field '{k}'" for k in edge_defaults if k not in ("error", "time")]
    edges, edge_cal = [], []
    for i, e in enumerate(doc.get("edges") or []):
        if isinstance(e, (list, tuple)) and len(e) == 2:
            e = {"control": e[0], "target": e[1]}
        if not isinstance(e, dict):
            problems.append(f"edges[{i}]: expected [control, target] or a mapping")
            continue
        problems += [f"edges[{i}]: unknown field '{k}'" for k in e if k not in _EDGE_KEYS]
        try:
            c, t = int(e["control"]), int(e["target"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"edges[{i}]: needs integer control and target")
            continue
        edges.append((c, t))
        err = e.get("error", edge_defaults.get("error"))
        dur = e.get("time", edge_defaults.get("time"))
        if err is not None and dur is not None:
            edge_cal.append(EdgeCalibration(c, t, err, dur))
    if len(set(edges)) != len(edges):
        problems.append("duplicate edges")

    multi = []
    for i, g in enumerate(doc.get("native_multi") or []):
        if isinstance(g, str):
            g = {"kind": g}
        if not isinstance(g, dict) or "kind" not in g:
            problems.append(f"native_multi[{i}]: needs a 'kind'")
            continue
        problems += [f"native_multi[{i}]: unknown field '{k}'" for k in g if k not in _MULTI_KEYS]
        kind = str(g["kind"]).upper()
        arity = g.get("arity", 3 if kind in ("CCZ", "CCX") else 2)
        multi.append(MultiQubitGate(kind, g.get("placement", EDGE_PLACEMENT), arity, g.get("error"), g.get("time")))

    if problems:
        raise DeviceFileError(problems)
    return DeviceModel(
        name=str(doc["name"]),
        n_qubits=n,
        edges=tuple(edges),
        native_single=frozenset(str(k).upper() for k in doc["native_single"]),
        native_multi=tuple(multi),
        qubit_cal=tuple(qubit_cal),
        edge_cal=tuple(edge_cal),
        hubs=tuple(doc.get("hubs") or ()),
    )


def device_to_dict(device: DeviceModel) -> dict:
    """Fully explicit document (no defaults) that :func:`device_from_dict` reads back."""
    cal = device._edge_cal_map
    edges = []
    for c, t in device.edges:
        e = {"control": c, "target": t}
        if (c, t) in cal:
            e.update(error=cal[(c, t)].two_gate_error, time=cal[(c, t)].two_gate_time)
        edges.append(e)
    multi = []
    for g in device.native_multi:
        d = {"kind": g.kind, "placement": g.placement, "arity": g.arity}
        if g.error is not None:
            d["error"] = g.error
        if g.time is not None:
            d["time"] = g.time
        multi.append(d)
    return {
        "name": device.name,
        "n_qubits": device.n_qubits,
        "native_single": sorted(device.native_single),
        "native_multi": multi,
        "hubs": list(device.hubs),
        "edges": edges,
        "qubits": {
            q: {k: getattr(c, k) for k in sorted(_QUBIT_KEYS)} for q, c in enumerate(device.qubit_cal)
        },
    }


def dump_device(device: DeviceModel) -> str:
    return yaml.safe_dump(device_to_dict(device), sort_keys=False, default_flow_style=None)


def preset_names() -> list[str]:
    names = {p.name[:-5] for p in resources.files("qecbench.presets").iterdir() if p.name.endswith(".yaml")}
    extra = os.environ.get(PRESET_DIR_ENV)
    if extra and Path(extra).is_dir():
        names |= {p.stem for p in Path(extra).glob("*.yaml")}
    return sorted(names)


def _preset_text(name: str) -> str | None:
    extra = os.environ.get(PRESET_DIR_ENV)
    if extra:
        p = Path(extra) / f"{name}.yaml"
        if p.is_file():
            return p.read_text()
    res = resources.files("qecbench.presets") / f"{name}.yaml"
    return res.read_text() if res.is_file() else None


def load_device(source) -> DeviceModel:
    """Load a device from a preset name, a file path, or document text."""
    if isinstance(source, DeviceModel):
        return source
    if isinstance(source, Path):
        text = source.read_text()
    else:
        source = str(source)
        text = _preset_text(source) if "\n" not in source and ":" not in source else None
        if text is None:
            if "\n" not in source and Path(source).is_file():
                text = Path(source).read_text()
            elif "\n" not in source and ":" not in source and source.strip():
                raise ConfigurationError(
                    f"unknown device {source!r}; presets: {', '.join(preset_names())}"
                )
            else:
                text = source
    if not text.strip():
        raise DeviceFileError("device document is empty")
    return device_from_dict(parse_yaml(text))
