"""QCA cell layouts and their connectivity graphs.

Cells sit on a unit-pitch grid. Pairwise kink energies come from a
two-electron, four-dot point-charge model (dots at the cell corners,
quarter-pitch offsets, half-charge background neutralization), normalized
so the nearest axis-aligned pair gives exactly +1. That reproduces the
usual anti-ferromagnetic diagonal ratio of about -0.2 with no physical
constants. Interactions beyond 2.0 pitches are dropped.

A connectivity graph keeps only non-driver cells: driver cells fold into
node bias weights, cell-cell kinks become edge weights. Under *limited*
adjacency, diagonal edges are kept only where both cells carry an
inverter flag (`diag_ok`); under *full* adjacency all in-radius diagonal
interactions are kept.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

INTERACTION_RADIUS = 2.0  # cell pitches, exclusive
_DOT = 0.25               # dot offset from cell centre, pitch units

LIMITED, FULL = "limited", "full"
ADJACENCY_MODES = (LIMITED, FULL)


@dataclass(frozen=True)
class QcaCell:
    id: object
    x: float
    y: float
    kind: str = "normal"            # "normal" | "driver"
    polarization: float | None = None
    diag_ok: bool = False
    rotated: bool = False           # accepted, treated as normal

    def __post_init__(self):
        if self.kind not in ("normal", "driver"):
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if self.kind == "driver":
            if self.polarization is None:
                raise ValueError(f"driver cell {self.id} needs a polarization")
            if not -1.0 <= self.polarization <= 1.0:
                raise ValueError(
                    f"driver polarization {self.polarization} outside [-1, 1]")


def _pair_energy(dx, dy):
    """Unnormalized kink energy for a displacement in pitch units.

    Charges are +-1/2 on the four dots (electrons on one diagonal);
    flipping one cell negates its charges, so the kink energy
    E(opposite) - E(same) equals -2 * E(same). The displacement is
    canonicalized under the cell's square symmetry group so the
    invariance holds exactly in floating point.
    """
    dx, dy = abs(dx), abs(dy)
    if dy > dx:
        dx, dy = dy, dx
    occ = [(_DOT, _DOT, -0.5), (-_DOT, -_DOT, -0.5),
           (-_DOT, _DOT, +0.5), (_DOT, -_DOT, +0.5)]
    e_same = 0.0
    for (x1, y1, q1) in occ:
        for (x2, y2, q2) in occ:
            r = math.hypot(dx + x2 - x1, dy + y2 - y1)
            e_same += q1 * q2 / r
    return -2.0 * e_same


_E_FM_RAW = _pair_energy(1.0, 0.0)


def kink_energy(cell_i, cell_j):
    """Kink energy between two cells, in units of the nearest FM pair.

    Positive values are ferromagnetic (like polarizations favored),
    negative anti-ferromagnetic. Zero beyond the interaction radius.
    """
    dx = cell_j.x - cell_i.x
    dy = cell_j.y - cell_i.y
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        raise ValueError(
            f"cells {cell_i.id} and {cell_j.id} share position "
            f"({cell_i.x}, {cell_i.y})")
    if dist >= INTERACTION_RADIUS:
        return 0.0
    return _pair_energy(dx, dy) / _E_FM_RAW


def _is_diagonal(ci, cj):
    return ci.x != cj.x and ci.y != cj.y


class ConnectivityGraph:
    """Weighted interaction graph of non-driver cells.

    nodes: id -> bias (sum of driver kinks times polarizations, E0 units)
    edges: sorted (a, b) -> kink energy
    """

    def __init__(self, nodes, edges, adjacency=FULL, name=None, connected=True):
        self.nodes = dict(nodes)
        self.edges = {}
        for (a, b), w in edges.items():
            if a == b:
                raise ValueError(f"self-edge on node {a}")
            key = (a, b) if _node_key(a) <= _node_key(b) else (b, a)
            self.edges[key] = w
        self.adjacency = adjacency
        self.name = name
        self.connected = connected
        self._adj = None

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_edges(self):
        return len(self.edges)

    def neighbor_map(self):
        if self._adj is None:
            adj = {n: [] for n in self.nodes}
            for (a, b) in self.edges:
                adj[a].append(b)
                adj[b].append(a)
            self._adj = {n: sorted(v, key=_node_key) for n, v in adj.items()}
        return self._adj

    def neighbors(self, n):
        return self.neighbor_map()[n]

    def degree(self, n):
        return len(self.neighbor_map()[n])

    def sorted_nodes(self):
        return sorted(self.nodes, key=_node_key)

    def edge_weight(self, a, b):
        key = (a, b) if _node_key(a) <= _node_key(b) else (b, a)
        return self.edges[key]


def _node_key(n):
    return (0, n, "") if isinstance(n, (int, float)) else (1, 0, str(n))


node_key = _node_key


def edge_key(a, b):
    """Canonical (sorted) form of an undirected circuit edge."""
    return (a, b) if _node_key(a) <= _node_key(b) else (b, a)


def _graph_connected(nodes, edges):
    if not nodes:
        return True
    adj = {n: set() for n in nodes}
    for (a, b) in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = set()
    stack = [next(iter(nodes))]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(adj[n] - seen)
    return len(seen) == len(nodes)


def build_connectivity(cells, mode=FULL, name=None):
    """Connectivity graph of a cell layout under the given adjacency mode."""
    if mode not in ADJACENCY_MODES:
        raise ValueError(f"unknown adjacency mode {mode!r}")
    seen_pos = {}
    for c in cells:
        if (c.x, c.y) in seen_pos:
            raise ValueError(
                f"cells {seen_pos[(c.x, c.y)]} and {c.id} share position")
        seen_pos[(c.x, c.y)] = c.id
    normals = [c for c in cells if c.kind == "normal"]
    drivers = [c for c in cells if c.kind == "driver"]
    if not normals:
        raise ValueError("layout has no non-driver cells")

    def keep(ci, cj):
        if mode == FULL or not _is_diagonal(ci, cj):
            return True
        return ci.diag_ok and cj.diag_ok

    nodes = {}
    for c in normals:
        bias = 0.0
        for d in drivers:
            ek = kink_energy(c, d)
            if ek != 0.0 and keep(c, d):
                bias += ek * d.polarization
        nodes[c.id] = bias

    edges = {}
    for i, ci in enumerate(normals):
        for cj in normals[i + 1:]:
            ek = kink_energy(ci, cj)
            if ek != 0.0 and keep(ci, cj):
                edges[(ci.id, cj.id)] = ek

    connected = _graph_connected(set(nodes), edges)
    return ConnectivityGraph(nodes, edges, adjacency=mode, name=name,
                             connected=connected)


# ---------------------------------------------------------------- JSON I/O

def cells_from_json(obj):
    cells = []
    for c in obj["cells"]:
        cells.append(QcaCell(
            id=c["id"], x=c["x"], y=c["y"],
            kind=c.get("kind", "normal"),
            polarization=c.get("P"),
            diag_ok=c.get("diag_ok", False),
            rotated=c.get("rotated", False)))
    return cells


def graph_from_json(obj):
    nodes = {n["id"]: n.get("bias", 0.0) for n in obj["nodes"]}
    edges = {(e["a"], e["b"]): e["Ek"] for e in obj["edges"]}
    for (a, b) in edges:
        if a not in nodes or b not in nodes:
            raise ValueError(f"edge ({a}, {b}) references unknown node")
    return ConnectivityGraph(
        nodes, edges,
        adjacency=obj.get("adjacency", FULL),
        name=obj.get("name"),
        connected=_graph_connected(set(nodes), edges))


def graph_to_json(graph):
    return {
        "name": graph.name,
        "adjacency": graph.adjacency,
        "nodes": [{"id": n, "bias": graph.nodes[n]}
                  for n in graph.sorted_nodes()],
        "edges": [{"a": a, "b": b, "Ek": w}
                  for (a, b), w in sorted(
                      graph.edges.items(),
                      key=lambda kv: (_node_key(kv[0][0]), _node_key(kv[0][1])))],
    }


def load_circuit(path, mode=FULL):
    """Load a circuit file: either a cell layout or a pre-built graph.

    Cell layouts are converted under `mode`; pre-built graphs are returned
    as stored (their adjacency mode was decided at generation time).
    """
    with open(path) as fp:
        obj = json.load(fp)
    if "cells" in obj:
        graph = build_connectivity(cells_from_json(obj), mode=mode,
                                   name=obj.get("name"))
        return graph
    return graph_from_json(obj)


def save_graph_json(graph, path):
    with open(path, "w") as fp:
        json.dump(graph_to_json(graph), fp, indent=1)
