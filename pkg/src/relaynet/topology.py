"""Layered relay-network topologies, the precision parameter and cut enumeration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import yaml

DEFAULT_CUT_CAP = 2**20


class TopologyError(ValueError):
    """Raised for malformed topology files or structurally invalid networks."""

    def __init__(self, problems: str | Sequence[str]):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    gain: complex


@dataclass(frozen=True)
class Cut:
    """A source/destination partition; ``omega`` always holds the source."""

    omega: frozenset[int]
    destination: int

    @property
    def bitmask(self) -> int:
        return sum(1 << i for i in self.omega)

    def complement(self, node_count: int) -> frozenset[int]:
        return frozenset(range(node_count)) - self.omega


@dataclass(frozen=True)
class Topology:
    """Layered network with complex gains. Node ``0`` is the source.

    ``layer_of[i]`` is the layer index of node ``i``; nodes are the
    consecutive integers ``0..node_count-1``.
    """

    layer_of: tuple[int, ...]
    edges: tuple[Edge, ...]
    destinations: tuple[int, ...]
    _parents: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        parents: dict[int, list[int]] = {i: [] for i in range(len(self.layer_of))}
        for e in self.edges:
            if e.dst in parents:
                parents[e.dst].append(e.src)
        object.__setattr__(self, "_parents", {k: tuple(sorted(v)) for k, v in parents.items()})

    @classmethod
    def build(cls, layer_of: Iterable[int], edges: Iterable[tuple[int, int, complex]],
              destinations: Iterable[int]) -> "Topology":
        return cls(tuple(int(l) for l in layer_of),
                   tuple(Edge(int(a), int(b), complex(g)) for a, b, g in edges),
                   tuple(sorted(int(d) for d in destinations)))

    @property
    def node_count(self) -> int:
        return len(self.layer_of)

    @property
    def depth(self) -> int:
        """Index of the last layer."""
        return max(self.layer_of) if self.layer_of else 0

    def layer(self, k: int) -> tuple[int, ...]:
        return tuple(i for i, l in enumerate(self.layer_of) if l == k)

    def parents(self, j: int) -> tuple[int, ...]:
        return self._parents.get(j, ())

    def gain(self, i: int, j: int) -> complex:
        for e in self.edges:
            if e.src == i and e.dst == j:
                return e.gain
        raise KeyError((i, j))

    def parent_gains(self, j: int) -> list[complex]:
        return [self.gain(i, j) for i in self.parents(j)]

    def ancestors(self, j: int) -> frozenset[int]:
        seen: set[int] = set()
        stack = list(self.parents(j))
        while stack:
            i = stack.pop()
            if i not in seen:
                seen.add(i)
                stack.extend(self.parents(i))
        return frozenset(seen)

    @cached_property
    def relays(self) -> tuple[int, ...]:
        """Non-source nodes whose transmissions can reach a destination.

        Includes destinations that forward to later destinations (multicast).
        """
        upstream: set[int] = set()
        for d in self.destinations:
            upstream |= self.ancestors(d)
        upstream.discard(0)
        return tuple(sorted(upstream))

    def scaled(self, factor: float) -> "Topology":
        return Topology(self.layer_of, tuple(Edge(e.src, e.dst, e.gain * factor) for e in self.edges),
                        self.destinations)


def validate(topology: Topology) -> list[str]:
    """Return every violated structural invariant; an empty list means valid."""
    problems = []
    layers = topology.layer_of
    m = len(layers)
    if m < 2:
        problems.append("network needs at least a source and one other node")
    if m and layers[0] != 0:
        problems.append("source (node 0) must be in layer 0")
    if sum(1 for l in layers if l == 0) > 1:
        problems.append("layer 0 must contain only the source")
    if any(l < 0 for l in layers):
        problems.append("negative layer index")
    seen = set()
    for e in topology.edges:
        where = f"edge {e.src}->{e.dst}"
        if not (0 <= e.src < m and 0 <= e.dst < m):
            problems.append(f"{where}: unknown node")
            continue
        if (e.src, e.dst) in seen:
            problems.append(f"{where}: duplicate edge")
        seen.add((e.src, e.dst))
        if layers[e.dst] != layers[e.src] + 1:
            problems.append(f"{where}: non-adjacent layers ({layers[e.src]} -> {layers[e.dst]})")
        if not (math.isfinite(e.gain.real) and math.isfinite(e.gain.imag)):
            problems.append(f"{where}: non-finite gain")
    if not topology.destinations:
        problems.append("no destinations")
    for d in topology.destinations:
        if d == 0:
            problems.append("source is destination")
        elif not 0 <= d < m:
            problems.append(f"destination {d}: unknown node")
    for d in topology.destinations:
        if 0 < d < m and not topology.parents(d):
            problems.append(f"destination {d} has no parents")
    return problems


def check(topology: Topology) -> Topology:
    problems = validate(topology)
    if problems:
        raise TopologyError(problems)
    return topology


def _floor_log2(x: float) -> int:
    # exact for powers of two, unlike floor(math.log2(x)) near the boundary
    m, e = math.frexp(abs(x))
    return e - 1


def compute_precision(topology: Topology) -> int:
    """Bits per real component: max over edges of floor(log2 |gain component|), at least 1.

    Zero components are skipped.
    """
    if not topology.edges:
        raise TopologyError("empty network")
    raw = None
    for e in topology.edges:
        for comp in (e.gain.real, e.gain.imag):
            if comp != 0.0:
                v = _floor_log2(comp)
                raw = v if raw is None else max(raw, v)
    return max(1, raw if raw is not None else 1)


def enumerate_cuts(topology: Topology, destination: int, cap: int = DEFAULT_CUT_CAP) -> list[Cut]:
    """All cuts with the source inside and ``destination`` outside.

    Ordered by the bitmask over the free nodes (ascending node ids).
    """
    if destination not in topology.destinations:
        raise TopologyError(f"{destination} is not a destination")
    free = [i for i in range(1, topology.node_count) if i != destination]
    if 2 ** len(free) > cap:
        raise TopologyError(f"cut explosion: 2^{len(free)} cuts exceeds cap {cap}")
    cuts = []
    for mask in range(2 ** len(free)):
        omega = {0} | {free[b] for b in range(len(free)) if mask >> b & 1}
        cuts.append(Cut(frozenset(omega), destination))
    return cuts


# --- file format -----------------------------------------------------------

_TOP_KEYS = {"nodes", "edges", "destinations"}
_NODE_KEYS = {"id", "layer"}
_EDGE_KEYS = {"from", "to", "re", "im"}


def parse_topology(doc) -> Topology:
    """Build a topology from a parsed document, collecting every schema problem."""
    problems = []
    if not isinstance(doc, dict):
        raise TopologyError("topology document must be a mapping")
    extra = set(doc) - _TOP_KEYS
    if extra:
        problems.append(f"unknown top-level fields: {sorted(extra)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        problems.append(f"missing fields: {sorted(missing)}")
    if problems:
        raise TopologyError(problems)

    layer_by_id: dict[int, int] = {}
    for k, node in enumerate(doc["nodes"] or []):
        if not isinstance(node, dict) or set(node) != _NODE_KEYS:
            problems.append(f"nodes[{k}]: expected exactly fields {sorted(_NODE_KEYS)}")
            continue
        try:
            nid, layer = _as_int(node["id"]), _as_int(node["layer"])
        except (TypeError, ValueError):
            problems.append(f"nodes[{k}]: id and layer must be integers")
            continue
        if nid in layer_by_id:
            problems.append(f"nodes[{k}]: duplicate id {nid}")
        layer_by_id[nid] = layer
    if layer_by_id and sorted(layer_by_id) != list(range(len(layer_by_id))):
        problems.append("node ids must be the consecutive integers 0..M")

    edges = []
    for k, edge in enumerate(doc["edges"] or []):
        if not isinstance(edge, dict) or set(edge) != _EDGE_KEYS:
            problems.append(f"edges[{k}]: expected exactly fields {sorted(_EDGE_KEYS)}")
            continue
        try:
            edges.append((_as_int(edge["from"]), _as_int(edge["to"]),
                          complex(_as_float(edge["re"]), _as_float(edge["im"]))))
        except (TypeError, ValueError):
            problems.append(f"edges[{k}]: from/to must be integers and re/im numbers")

    dests = doc["destinations"]
    if not isinstance(dests, list):
        problems.append("destinations must be a list")
        dests = []
    try:
        dests = [_as_int(d) for d in dests]
    except (TypeError, ValueError):
        problems.append("destination ids must be integers")
    if problems:
        raise TopologyError(problems)

    layers = [layer_by_id[i] for i in range(len(layer_by_id))]
    return Topology.build(layers, edges, dests)


def _as_int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError(v)
    return v


def _as_float(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(v)
    return float(v)


def load_topology(path: str | Path) -> Topology:
    """Read a YAML or JSON topology file (JSON is valid YAML)."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise TopologyError(f"{path}: not valid YAML/JSON: {exc}") from exc
    return parse_topology(doc)


def dump_topology(topology: Topology) -> dict:
    return {
        "nodes": [{"id": i, "layer": l} for i, l in enumerate(topology.layer_of)],
        "edges": [{"from": e.src, "to": e.dst, "re": e.gain.real, "im": e.gain.imag}
                  for e in topology.edges],
        "destinations": list(topology.destinations),
    }


def diamond(gain: complex | Sequence[complex] = 1.0) -> Topology:
    """Source 0, relays 1 and 2, destination 3."""
    gains = [gain] * 4 if isinstance(gain, (int, float, complex)) else list(gain)
    return Topology.build([0, 1, 1, 2],
                          [(0, 1, gains[0]), (0, 2, gains[1]), (1, 3, gains[2]), (2, 3, gains[3])],
                          [3])


def chain(gains: Sequence[complex]) -> Topology:
    """Line network 0 -> 1 -> ... with the last node as destination."""
    m = len(gains) + 1
    return Topology.build(range(m), [(i, i + 1, g) for i, g in enumerate(gains)], [m - 1])
