"""Lowering virtual circuits onto a device.

The pipeline is: rewrite every gate into the device's native kinds, enumerate
initial layouts, route each layout with SWAP insertion, cancel redundant CNOT
pairs, re-synthesise single-qubit runs, and keep the layout with the lowest
predicted error ``p_av``.

Routing never leaves the physical qubits picked by the layout. With at most
seven qubits every arrangement of them fits in a table, so the router is exact:
a dynamic program over (next gate, qubit arrangement) gives the fewest SWAPs
from any state, computed once per subgraph shape and reused by every layout
on that shape. Among equally short plans one variant puts SWAPs as early and
one as late as possible; both are scored.
"""
from __future__ import annotations

import heapq
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from .calibration import EDGE_PLACEMENT, STAR_PLACEMENT, DeviceModel, NoiseModel
from .circuit import (
    Circuit,
    Instruction,
    cancel_adjacent_cnots,
    count_ops,
    equal_up_to_phase,
    gate_matrix,
    multi_qubit_count,
)
from .errors import (
    CapacityError,
    CircuitError,
    PlacementError,
    RoutingError,
    UnsupportedGateError,
)

ANGLE_TOL = 1e-12
MAX_LAYOUT_QUBITS = 7


def _ins(name, *qubits, params=()):
    return Instruction(name, tuple(qubits), tuple(float(p) for p in params))


def _fragment(n_qubits: int, ops) -> Circuit:
    return Circuit(n_qubits).extend(ops)


# ----------------------------------------------------------------------------
# Gate identities


def swap_ops(a: int, b: int) -> list:
    return [_ins("CNOT", a, b), _ins("CNOT", b, a), _ins("CNOT", a, b)]


def ccz_ops(a: int, b: int, c: int) -> list:
    """CCZ from six CNOTs and T-type phases (``T = RZ(pi/4)``), exact up to phase."""
    t, tdg = math.pi / 4, -math.pi / 4
    return [
        _ins("CNOT", b, c), _ins("RZ", c, params=(tdg,)),
        _ins("CNOT", a, c), _ins("RZ", c, params=(t,)),
        _ins("CNOT", b, c), _ins("RZ", c, params=(tdg,)),
        _ins("CNOT", a, c), _ins("RZ", b, params=(t,)), _ins("RZ", c, params=(t,)),
        _ins("CNOT", a, b), _ins("RZ", a, params=(t,)), _ins("RZ", b, params=(tdg,)),
        _ins("CNOT", a, b),
    ]


def ccz_line_ops(x: int, m: int, y: int) -> list:
    """CCZ with CNOTs only on the pairs ``(x, m)`` and ``(m, y)``.

    Eight CNOTs walk the target wire through every parity of the three inputs
    so each picks up its ``RZ(+-pi/4)`` phase; exact up to global phase.
    """
    t, tdg = math.pi / 4, -math.pi / 4
    return [
        _ins("RZ", x, params=(t,)), _ins("RZ", m, params=(t,)), _ins("RZ", y, params=(t,)),
        _ins("CNOT", m, y), _ins("RZ", y, params=(tdg,)),
        _ins("CNOT", x, m), _ins("RZ", m, params=(tdg,)),
        _ins("CNOT", m, y), _ins("RZ", y, params=(tdg,)),
        _ins("CNOT", x, m),
        _ins("CNOT", m, y), _ins("RZ", y, params=(t,)),
        _ins("CNOT", x, m), _ins("CNOT", m, y), _ins("CNOT", x, m),
    ]


def crot_cnot_ops(c: int, t: int) -> list:
    """CNOT as ``RZ(pi/2)`` on the control followed by ``CROT_X(pi)``."""
    return [_ins("RZ", c, params=(math.pi / 2,)), _ins("CROT_X", c, t, params=(math.pi,))]


def controlled_rotation_ops(axis: str, theta: float, c: int, t: int) -> list:
    """Controlled RX/RY/RZ from two CNOTs."""
    pre, post = {
        "X": ([_ins("H", t)], [_ins("H", t)]),
        "Y": ([_ins("RX", t, params=(math.pi / 2,))], [_ins("RX", t, params=(-math.pi / 2,))]),
        "Z": ([], []),
    }[axis]
    core = [
        _ins("RZ", t, params=(theta / 2,)), _ins("CNOT", c, t),
        _ins("RZ", t, params=(-theta / 2,)), _ins("CNOT", c, t),
    ]
    return pre + core + post


def decompose_swap(a: int = 0, b: int = 1) -> Circuit:
    """``CNOT(a,b) CNOT(b,a) CNOT(a,b)``."""
    return _fragment(max(a, b) + 1, swap_ops(a, b))


def decompose_ccz_to_cnot(a: int = 0, b: int = 1, c: int = 2) -> Circuit:
    return _fragment(max(a, b, c) + 1, ccz_ops(a, b, c))


def cnot_from_crot(control: int = 0, target: int = 1, device: DeviceModel | None = None) -> Circuit:
    """CNOT built from the native controlled rotation of a central-spin register.

    With a device, the pair must be an edge touching a hub.
    """
    if device is not None:
        if not device.coupled(control, target) or not ({control, target} & set(device.hubs)):
            raise PlacementError(f"({control}, {target}) is not an edge of the central spin")
    n = max(control, target) + 1 if device is None else device.n_qubits
    return _fragment(n, crot_cnot_ops(control, target))


# ----------------------------------------------------------------------------
# Single-qubit synthesis


def _wrap(theta: float) -> float:
    t = math.remainder(theta, 2 * math.pi)
    return math.pi if abs(t + math.pi) < ANGLE_TOL else t


def _zero(theta: float) -> bool:
    return abs(_wrap(theta)) < ANGLE_TOL


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """``(theta, phi, lam)`` with ``u ~ RZ(phi) RY(theta) RZ(lam)`` up to phase."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    a, b = u[0, 0], u[1, 0]
    theta = 2 * math.atan2(abs(b), abs(a))
    s = -2 * np.angle(a) if abs(a) > 1e-12 else 0.0  # phi + lam
    d = 2 * np.angle(b) if abs(b) > 1e-12 else 0.0  # phi - lam
    if abs(a) <= 1e-12:
        s = d
    if abs(b) <= 1e-12:
        d = s
    return theta, (s + d) / 2, (s - d) / 2


def _rz(q, theta):
    return [] if _zero(theta) else [_ins("RZ", q, params=(_wrap(theta),))]


def _candidates(u: np.ndarray, q: int, natives: frozenset):
    theta, phi, lam = zyz_angles(u)
    yield _rz(q, phi + lam)
    if "RY" in natives:
        yield _rz(q, lam) + [_ins("RY", q, params=(theta,))] + _rz(q, phi)
    if "SX" in natives:
        yield _rz(q, lam - math.pi / 2) + [_ins("SX", q)] + _rz(q, phi + math.pi / 2)
    if "X" in natives:
        yield _rz(q, math.pi + lam - phi) + [_ins("X", q)]
    if "SX" in natives:
        yield (
            _rz(q, lam) + [_ins("SX", q)] + _rz(q, theta + math.pi)
            + [_ins("SX", q)] + _rz(q, phi + math.pi)
        )


def synthesize_1q(u: np.ndarray, q: int, natives) -> list:
    """Shortest native sequence equal to ``u`` up to phase (RZ is free)."""
    natives = frozenset(natives)
    if "RZ" not in natives or not ({"RY", "SX"} & natives):
        raise UnsupportedGateError(f"cannot synthesise single-qubit gates from {sorted(natives)}")
    best = None
    for ops in _candidates(u, q, natives):
        if any(o.name not in natives for o in ops):
            continue
        m = np.eye(2, dtype=complex)
        for o in ops:
            m = o.matrix() @ m
        if equal_up_to_phase(m, u, atol=1e-9):
            cost = (sum(o.name != "RZ" for o in ops), len(ops))
            if best is None or cost < best[0]:
                best = (cost, ops)
    if best is None:  # pragma: no cover - the general candidates always match
        raise UnsupportedGateError("single-qubit synthesis failed")
    return best[1]


# ----------------------------------------------------------------------------
# Lowering to native kinds


@dataclass(frozen=True)
class _Topology:
    """Directed edges and hubs over some index space, plus the native gate set."""

    edges: frozenset
    hubs: frozenset
    native_single: frozenset
    multi: tuple  # MultiQubitGate specs
    # keep non-native CCZ whole so the router can place it on a line
    defer_ccz: bool = False

    @classmethod
    def of_device(cls, device: DeviceModel) -> "_Topology":
        return cls(device.edge_set, frozenset(device.hubs), frozenset(device.native_single), device.native_multi)

    @classmethod
    def induced(cls, device: DeviceModel, nodes) -> "_Topology":
        """Subgraph on ``nodes`` relabelled so that ``nodes[i]`` becomes ``i``."""
        idx = {p: i for i, p in enumerate(nodes)}
        edges = frozenset((idx[a], idx[b]) for a, b in device.edges if a in idx and b in idx)
        hubs = frozenset(idx[h] for h in device.hubs if h in idx)
        return cls(edges, hubs, frozenset(device.native_single), device.native_multi)

    @cached_property
    def by_kind(self) -> dict:
        return {g.kind: g for g in self.multi}

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_edges_from(self.edges)
        return g

    def coupled(self, a, b) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def hub_of(self, qubits):
        for h in qubits:
            if h in self.hubs and all(self.coupled(h, q) for q in qubits if q != h):
                return h
        return None

    def placement_ok(self, ins: Instruction) -> bool:
        qs = ins.qubits
        if len(qs) == 1:
            return ins.name in self.native_single
        spec = self.by_kind.get(ins.name)
        if spec is None or spec.arity != len(qs):
            return False
        if spec.placement == EDGE_PLACEMENT:
            return tuple(qs) in self.edges
        return self.hub_of(qs) is not None


def _lower_multi(ins: Instruction, topo: _Topology) -> list:
    """Rewrite one multi-qubit gate into native multi-qubit kinds plus 1q gates."""
    name, qs = ins.name, ins.qubits
    kinds = topo.by_kind
    if name in kinds and name != "CNOT":
        return [ins]
    if name == "CNOT":
        c, t = qs
        reverse = (t, c) in topo.edges and (c, t) not in topo.edges
        if reverse:
            core = _lower_multi(_ins("CNOT", t, c), _both_directions(topo))
            return [_ins("H", c), _ins("H", t)] + core + [_ins("H", c), _ins("H", t)]
        if "CNOT" in kinds:
            return [ins]
        if "CROT_X" in kinds:
            return crot_cnot_ops(c, t)
        if "CZ" in kinds:
            return [_ins("H", t), _ins("CZ", c, t), _ins("H", t)]
        raise UnsupportedGateError("device offers no two-qubit gate able to express CNOT")
    if name == "CZ":
        a, b = qs
        return _lower_all([_ins("H", b), _ins("CNOT", a, b), _ins("H", b)], topo)
    if name == "SWAP":
        return _lower_all(swap_ops(*qs), topo)
    if name == "CCZ":
        if topo.defer_ccz:
            return [ins]
        return _lower_all(ccz_ops(*qs), topo)
    if name == "CCX":
        a, b, t = qs
        return _lower_all([_ins("H", t), _ins("CCZ", a, b, t), _ins("H", t)], topo)
    if name == "MCX":
        if len(qs) == 2:
            return _lower_all([_ins("CNOT", *qs)], topo)
        if len(qs) == 3:
            return _lower_all([_ins("CCX", *qs)], topo)
        raise UnsupportedGateError(f"MCX with {len(qs) - 1} controls has no decomposition")
    if name in ("CROT_X", "CROT_Y"):
        return _lower_all(controlled_rotation_ops(name[-1], ins.params[0], *qs), topo)
    raise UnsupportedGateError(f"no decomposition for {name}")


def _lower_all(ops, topo: _Topology) -> list:
    out = []
    for o in ops:
        out += _lower_multi(o, topo) if o.is_multi_qubit else [o]
    return out


def _both_directions(topo: _Topology) -> _Topology:
    both = topo.edges | frozenset((b, a) for a, b in topo.edges)
    return _Topology(both, topo.hubs, topo.native_single, topo.multi, topo.defer_ccz)


def _check_lowerable(ins: Instruction):
    if ins.condition is not None:
        raise CircuitError(
            f"classically conditioned gate {ins} cannot run on hardware; "
            "convert feed-forward to post-processing or unitary correction first"
        )


_RUN_CACHE: dict = {}


def _synthesize_run(run: tuple, natives: frozenset) -> list:
    # run: ((name, params), ...) in time order, synthesised on qubit 0
    key = (run, natives)
    if key not in _RUN_CACHE:
        if len(_RUN_CACHE) > 100_000:
            _RUN_CACHE.clear()
        u = np.eye(2, dtype=complex)
        for name, params in run:
            u = gate_matrix(name, params, 1) @ u
        _RUN_CACHE[key] = synthesize_1q(u, 0, natives)
    return _RUN_CACHE[key]


def _merge_single_qubit(ops, n_qubits: int, natives) -> list:
    """Fuse runs of plain single-qubit gates and re-synthesise them natively."""
    natives = frozenset(natives)
    out: list = []
    pending: dict[int, list] = {}

    def flush(q):
        run = pending.pop(q, None)
        if run:
            out.extend(o.remap({0: q}) for o in _synthesize_run(tuple(run), natives))

    for ins in ops:
        plain = ins.is_gate and len(ins.qubits) == 1 and ins.tag is None and ins.condition is None
        if plain:
            pending.setdefault(ins.qubits[0], []).append((ins.name, ins.params))
            continue
        qs = range(n_qubits) if ins.name == "BARRIER" and not ins.qubits else ins.qubits
        for q in qs:
            flush(q)
        out.append(ins)
    for q in sorted(pending):
        flush(q)
    return out


def _lower_ops(ops, n_qubits: int, topo: _Topology) -> list:
    flat = []
    for ins in ops:
        _check_lowerable(ins)
        if ins.is_multi_qubit and ins.tag is None:
            flat += _lower_multi(ins, topo)
        else:
            flat.append(ins)
    return _merge_single_qubit(flat, n_qubits, topo.native_single)


def decompose_to_native(c: Circuit, device: DeviceModel) -> Circuit:
    """Rewrite every gate into ``device``'s native kinds.

    Multi-qubit gates with a native counterpart are kept; the rest go through
    the SWAP, CCZ and controlled-rotation identities. Consecutive single-qubit
    gates on a qubit are fused and re-synthesised. Gate placement is not
    checked here; that is the router's job.
    """
    return c.with_instructions(_lower_ops(c.instructions, c.n_qubits, _Topology.of_device(device)))


def native_problems(c: Circuit, device: DeviceModel) -> list[str]:
    """Reasons why ``c`` cannot run as-is on ``device``; empty when it can."""
    topo = _Topology.of_device(device)
    out = []
    if c.n_qubits > device.n_qubits:
        out.append(f"circuit has {c.n_qubits} qubits, device {device.n_qubits}")
    for i, ins in enumerate(c.instructions):
        if ins.condition is not None:
            out.append(f"#{i} {ins}: classically conditioned")
        if not ins.is_gate or ins.tag == "error":
            continue
        if not topo.placement_ok(ins):
            out.append(f"#{i} {ins}: not a native placement")
    return out


def is_native(c: Circuit, device: DeviceModel) -> bool:
    return not native_problems(c, device)


# ----------------------------------------------------------------------------
# Layouts


@dataclass(frozen=True, order=True)
class Layout:
    """Virtual qubit ``v`` sits on physical qubit ``physical[v]``."""

    physical: tuple

    def __post_init__(self):
        if len(set(self.physical)) != len(self.physical):
            raise PlacementError(f"layout {self.physical} is not injective")

    def __getitem__(self, v: int) -> int:
        return self.physical[v]

    def __len__(self) -> int:
        return len(self.physical)

    def __iter__(self):
        return iter(self.physical)

    def as_dict(self) -> dict:
        return dict(enumerate(self.physical))


def interaction_graph(c: Circuit) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(range(c.n_qubits))
    for ins in c.instructions:
        if ins.is_gate and len(ins.qubits) > 1:
            g.add_edges_from(itertools.combinations(ins.qubits, 2))
    return g


def connected_subsets(g: nx.Graph, k: int) -> list[tuple]:
    """All connected ``k``-node vertex sets of ``g``, as sorted tuples."""
    frontier = {frozenset([v]) for v in g.nodes}
    for _ in range(k - 1):
        nxt = set()
        for s in frontier:
            for v in s:
                for w in g.neighbors(v):
                    if w not in s:
                        nxt.add(s | {w})
        frontier = nxt
    return sorted(tuple(sorted(s)) for s in frontier)


def enumerate_layouts(c: Circuit, device: DeviceModel) -> list[Layout]:
    """Candidate initial layouts, in lexicographic order.

    A layout always occupies a connected set of physical qubits. When the
    circuit's interaction graph embeds into such a set, the candidates are
    exactly those embeddings, so no SWAP is ever needed. Otherwise every
    injective placement onto a connected set is a candidate.
    """
    k = c.n_qubits
    if k > device.n_qubits:
        raise CapacityError(f"circuit needs {k} qubits, device {device.name!r} has {device.n_qubits}")
    if k > MAX_LAYOUT_QUBITS:
        raise CapacityError(f"layout search supports at most {MAX_LAYOUT_QUBITS} virtual qubits")
    if k == 0:
        return [Layout(())]
    pairs = list(interaction_graph(c).edges)
    g = device.graph
    every, embeds = [], []
    for nodes in connected_subsets(g, k):
        for p in itertools.permutations(nodes):
            every.append(p)
            if all(g.has_edge(p[a], p[b]) for a, b in pairs):
                embeds.append(p)
    return [Layout(p) for p in sorted(embeds or every)]


# ----------------------------------------------------------------------------
# Routing


def _needs_placement(ins: Instruction) -> bool:
    return ins.is_gate and len(ins.qubits) > 1 and ins.tag is None


def _placeable(ins: Instruction, ps, topo: _Topology) -> bool:
    """Can ``ins`` run with its qubits on positions ``ps`` (orientation aside)?"""
    spec = topo.by_kind.get(ins.name)
    if ins.name == "CCZ" and spec is None:
        return nx.is_connected(topo.graph.subgraph(ps)) if all(p in topo.graph for p in ps) else False
    if spec is not None and spec.placement == STAR_PLACEMENT:
        return topo.hub_of(ps) is not None
    if ins.name == "CNOT" or len(ps) == 2 and spec is None:
        return topo.coupled(*ps)
    return tuple(ps) in topo.edges


class _SwapPlanner:
    """Exact minimum-SWAP routing by dynamic programming over qubit permutations.

    States are ``(g, perm)``: the next unplaced multi-qubit gate and where every
    virtual qubit sits. ``cost[g][perm]`` is the cheapest way to finish the
    circuit from that state, as ``(swaps, lateness)``: first the number of SWAPs,
    then the sum over SWAPs of how many slots and barriers precede them, so
    equally short plans move qubits as early as possible. The table is built
    backwards once per subgraph shape and shared by every initial layout on it.
    """

    def __init__(self, gates, stages, topo: _Topology, k: int):
        self.gates = gates
        self.stages = stages
        self.topo = topo
        self.moves = sorted({tuple(sorted(e)) for e in topo.edges})
        self.perms = list(itertools.permutations(range(k)))
        self.cost = self._solve()

    def swapped(self, perm, move):
        p, q = move
        return tuple(q if x == p else p if x == q else x for x in perm)

    def fits(self, g: int, perm) -> bool:
        return _placeable(self.gates[g], [perm[v] for v in self.gates[g].qubits], self.topo)

    def _solve(self):
        inf = (math.inf, math.inf)
        nxt = {perm: (0, 0) for perm in self.perms}
        table = [None] * len(self.gates) + [nxt]
        for g in range(len(self.gates) - 1, -1, -1):
            step = (1, self.stages[g])
            cur = {perm: nxt[perm] if self.fits(g, perm) else inf for perm in self.perms}
            heap = [(d, perm) for perm, d in cur.items() if d != inf]
            heapq.heapify(heap)
            while heap:
                d, perm = heapq.heappop(heap)
                if d > cur[perm]:
                    continue
                cand = (d[0] + step[0], d[1] + step[1])
                for mv in self.moves:
                    other = self.swapped(perm, mv)
                    if cand < cur[other]:
                        cur[other] = cand
                        heapq.heappush(heap, (cand, other))
            table[g] = cur
            nxt = cur
        return table

    def feasible(self, perm) -> bool:
        return not self.gates or self.cost[0][perm][0] != math.inf

    def plan(self, g: int, perm):
        """SWAPs to apply before gate ``g``, lowest move first among optimal choices."""
        out = []
        step = (1, self.stages[g])
        while True:
            here = self.cost[g][perm]
            if here[0] == math.inf:
                raise RoutingError(f"{self.gates[g]} cannot be placed on this subgraph")
            if self.fits(g, perm) and self.cost[g + 1][perm] == here:
                return out, perm
            for mv in self.moves:
                other = self.swapped(perm, mv)
                rest = self.cost[g][other]
                if (rest[0] + step[0], rest[1] + step[1]) == here:
                    break
            out.append(mv)
            perm = other


def _swap_fragment(p, q, emitted, topo: _Topology) -> list:
    # orient the SWAP so its first CNOT can cancel a CNOT just emitted on the same pair
    a, b = p, q
    for ins in reversed(emitted):
        if p in ins.qubits or q in ins.qubits:
            if ins.name == "CNOT" and set(ins.qubits) == {p, q} and ins.tag is None:
                a, b = ins.qubits
            break
    return _lower_all(swap_ops(a, b), topo)


def _emit(ins: Instruction, topo: _Topology) -> list:
    if ins.name == "CCZ" and "CCZ" not in topo.by_kind:
        a, b, c = ins.qubits
        if topo.coupled(a, b) and topo.coupled(b, c) and topo.coupled(a, c):
            return _lower_all(ccz_ops(a, b, c), topo)
        for mid, (x, y) in ((b, (a, c)), (a, (b, c)), (c, (a, b))):
            if topo.coupled(x, mid) and topo.coupled(mid, y):
                return _lower_all(ccz_line_ops(x, mid, y), topo)
    if ins.name == "CNOT" and ins.qubits not in topo.edges:
        return _lower_multi(ins, topo)
    return [ins]


def _route_with(planner: _SwapPlanner, ops, perm):
    """Replay ``ops`` from ``perm``; returns (ops on positions, swaps, final perm).

    SWAPs needed by a gate are emitted straight after the previous multi-qubit
    gate, and the placement-free operations in between follow the moved qubits.
    """
    topo = planner.topo
    out: list = []
    pending: list = []
    swaps = 0
    g = 0
    perm = tuple(perm)
    for ins in ops:
        if not _needs_placement(ins):
            pending.append(ins)
            continue
        moves, perm = planner.plan(g, perm)
        for p, q in moves:
            out += _swap_fragment(p, q, out, topo)
        swaps += len(moves)
        out += [o.remap(perm) if o.qubits else o for o in pending]
        pending = []
        out += _emit(ins.remap(perm), topo)
        g += 1
    out += [o.remap(perm) if o.qubits else o for o in pending]
    return out, swaps, perm


def _planner_for(ops, topo: _Topology, k: int, early: bool = True) -> _SwapPlanner:
    """Planner preferring SWAPs before (``early``) or after slots and barriers."""
    # a gate's SWAPs go right after the previous multi-qubit gate, so they are
    # charged the stage that gate was in
    gates, stages = [], []
    stage = placed = 0
    for ins in ops:
        if ins.name in ("SLOT", "BARRIER"):
            stage += 1
        elif _needs_placement(ins):
            gates.append(ins)
            stages.append(placed)
            placed = stage
    if not early:
        stages = [stage - x for x in stages]
    return _SwapPlanner(gates, stages, topo, k)


def route(c: Circuit, layout: Layout, device: DeviceModel) -> Circuit:
    """Insert SWAPs so every multi-qubit gate of ``c`` sits on a native placement.

    ``c`` must already use native gate kinds. SWAPs stay inside the physical
    qubits chosen by ``layout`` and their number is minimal for that layout.
    The result acts on physical qubits of ``device``; ``meta['final_layout']``
    records where each virtual qubit ends up.
    """
    if len(layout) != c.n_qubits:
        raise PlacementError(f"layout has {len(layout)} entries for {c.n_qubits} qubits")
    nodes = tuple(layout)
    topo = _Topology.induced(device, nodes)
    planner = _planner_for(c.instructions, topo, c.n_qubits)
    ops, swaps, final = _route_with(planner, c.instructions, range(c.n_qubits))
    out = Circuit(device.n_qubits, c.n_clbits)
    out.instructions = [o.remap(nodes) if o.qubits else o for o in ops]
    out.meta = dict(c.meta, layout=nodes, final_layout=tuple(nodes[p] for p in final), swaps=swaps)
    return out


# ----------------------------------------------------------------------------
# Scoring and the full pipeline


def _measure_fidelity(noise: NoiseModel, q: int) -> float:
    return 1.0 - noise.spam_prob(q)


def _noisy_key(ins: Instruction):
    if ins.name in ("MEASURE", "RESET"):
        return "MEASURE"
    if ins.is_gate and ins.tag != "error":
        return ins.name
    return None


def _fidelity(noise: NoiseModel, name: str, qubits: tuple, cache: dict) -> float:
    key = (name, qubits)
    if key not in cache:
        if name == "MEASURE":
            cache[key] = _measure_fidelity(noise, qubits[0])
        else:
            cache[key] = noise.gate_fidelity(name, qubits)
    return cache[key]


def _op_tally(instructions) -> Counter:
    return Counter((k, ins.qubits) for ins in instructions if (k := _noisy_key(ins)) is not None)


def op_fidelities(c: Circuit, noise: NoiseModel, cache: dict | None = None) -> list[float]:
    """Average fidelity of each noisy operation of a placed circuit, in order."""
    cache = {} if cache is None else cache
    out = []
    for ins in c.instructions:
        name = _noisy_key(ins)
        if name is not None:
            out.append(_fidelity(noise, name, ins.qubits, cache))
    return out


def score_layout(c: Circuit, noise: NoiseModel, cache: dict | None = None) -> float:
    """``1 - prod(F_i)`` over the noisy operations of a placed, native circuit.

    Gates use their average gate fidelity; a measurement or reset counts as
    ``1 - p_spam``. Exact gates (RZ) contribute 1.
    """
    fids = op_fidelities(c, noise, cache)
    return float(1.0 - math.prod(fids)) if fids else 0.0


def ops_after_first_measure(c: Circuit) -> int:
    seen = False
    n = 0
    for ins in c.instructions:
        if ins.name == "MEASURE":
            seen = True
        elif seen and ins.is_gate:
            n += 1
    return n


@dataclass(frozen=True)
class TranspileResult:
    circuit: Circuit
    layout: Layout
    swaps_inserted: int
    p_av: float
    gate_counts: dict
    final_layout: tuple = ()
    candidates: int = 0

    @property
    def cnot_count(self) -> int:
        """Number of native multi-qubit gates (CNOT-equivalents)."""
        return multi_qubit_count(self.circuit)

    @property
    def total_ops(self) -> int:
        return sum(self.gate_counts.values())

    def report(self) -> dict:
        return {
            "layout": list(self.layout),
            "final_layout": list(self.final_layout),
            "swaps_inserted": self.swaps_inserted,
            "cnot_count": self.cnot_count,
            "total_ops": self.total_ops,
            "p_av": self.p_av,
            "gate_counts": dict(self.gate_counts),
            "candidates": self.candidates,
        }


def _finish(ops, n: int, n_clbits: int, topo: _Topology) -> list:
    tmp = Circuit(n, n_clbits)
    tmp.instructions = list(ops)  # already validated while lowering
    ops = cancel_adjacent_cnots(tmp).instructions
    return _merge_single_qubit(ops, n, topo.native_single)


def _finished(plan, k: int, n_clbits: int, topo: _Topology) -> tuple:
    ops, swaps, final = plan
    done = Circuit(max(k, 1), n_clbits)
    done.instructions = _finish(ops, max(k, 1), n_clbits, topo)
    tally = _op_tally(done.instructions)
    return done.instructions, swaps, final, multi_qubit_count(done), ops_after_first_measure(done), tally, plan


def transpile(c: Circuit, device: DeviceModel, noise: NoiseModel) -> TranspileResult:
    """Lower ``c`` onto ``device`` and return the best-scoring placement.

    Candidates are ranked by ``p_av``, then by multi-qubit gate count, then by
    the number of gates after the first measurement, then by layout.
    """
    # orientation is unknown before placement, so lower against a device without edges
    unplaced = _Topology(frozenset(), frozenset(), frozenset(device.native_single), device.native_multi, True)
    native = c.with_instructions(_lower_ops(c.instructions, c.n_qubits, unplaced))
    layouts = enumerate_layouts(native, device)
    k = c.n_qubits
    planners: dict = {}
    routed: dict = {}
    fid_cache: dict = {}
    best = None
    for layout in layouts:
        nodes = tuple(sorted(layout))
        topo = _Topology.induced(device, nodes)
        shape = (topo.edges, topo.hubs)
        if shape not in planners:
            planners[shape] = [_planner_for(native.instructions, topo, k, early) for early in (True, False)]
        start = tuple(nodes.index(p) for p in layout)
        if not planners[shape][0].feasible(start):
            continue
        for variant, planner in enumerate(planners[shape]):
            key = (shape, start, variant)
            if key not in routed:
                plan = _route_with(planner, native.instructions, start)
                # the late-SWAP variant often coincides with the early one
                same = variant and plan == routed[(shape, start, 0)][-1]
                routed[key] = None if same else _finished(plan, k, c.n_clbits, topo)
            if routed[key] is None:
                continue
            ops, swaps, final, n_multi, n_after, tally, _ = routed[key]
            p_av = 1.0 - math.prod(
                _fidelity(noise, name, tuple(nodes[q] for q in qs), fid_cache) ** m
                for (name, qs), m in tally.items()
            )
            rank = (round(p_av, 12), n_multi, n_after, tuple(layout), variant)
            if best is None or rank < best[0]:
                best = (rank, ops, nodes, layout, swaps, p_av, tuple(nodes[p] for p in final))
    if best is None:
        raise RoutingError(f"no layout of the circuit can be routed on {device.name!r}")
    _, ops, nodes, layout, swaps, p_av, final = best
    phys = Circuit(device.n_qubits, c.n_clbits)
    phys.instructions = [o.remap(nodes) if o.qubits else o for o in ops]
    phys.meta = dict(c.meta, layout=tuple(layout), final_layout=final)
    return TranspileResult(phys, layout, swaps, p_av, count_ops(phys), final, len(layouts))
