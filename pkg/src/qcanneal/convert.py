"""Chain-embedding conversion and embedding validation.

Dense placement assigns one qubit per cell and routes chains for edges.
For parameter assignment the circuit is reinterpreted as end-node cells
(degree != 2) joined by chains of internal-node (degree 2) cells; each
hardware chain then carries some virtual qubits beyond the one-per-cell
minimum. Allocation decides how many qubits at each chain end join the
end-node vertex models, minimizing the largest resulting model size
exactly (min-max integer program, solved by a parametric feasibility
search over the finite set of attainable objective values with a max-flow
check). Remaining qubits are divided contiguously and evenly among the
chain's internal cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from qcanneal.circuit import edge_key, node_key
from qcanneal.heuristic import VertexModelEmbedding


@dataclass(frozen=True)
class Chain:
    """One end-node-to-end-node chain of a decomposed embedding.

    qubits runs from the start end-node's assigned qubit to the end's
    (inclusive); for a pure cycle both are the same qubit.
    """

    start: object
    end: object
    internal: tuple       # internal-node cells, in walk order
    qubits: tuple         # assigned + virtual qubits along the chain
    pseudo: bool = False  # start==end designated in an all-degree-2 cycle

    @property
    def n_internal(self):
        return len(self.internal)

    @property
    def m_qubits(self):
        return len(self.qubits) - 2

    def __post_init__(self):
        if self.m_qubits < self.n_internal:
            raise ValueError(
                f"chain {self.start!r}-{self.end!r} has fewer qubits than "
                "internal cells")


@dataclass(frozen=True)
class ChainDecomposition:
    end_nodes: tuple
    chains: tuple


@dataclass(frozen=True)
class Allocation:
    grants: tuple          # per chain: (n_k, m_k) qubits to start/end models
    objective: Fraction    # the minimized max of mean internal/end sizes


def decompose(circuit, embedding):
    """Split a chain embedding into end-nodes and internal-node chains."""
    assigned = embedding.assigned
    routes = embedding.routes

    def oriented_route(a, b):
        chain = routes[edge_key(a, b)]
        if chain[0] == assigned[a]:
            return chain
        if chain[-1] == assigned[a]:
            return list(reversed(chain))
        raise ValueError(f"route for edge ({a!r}, {b!r}) does not terminate "
                         "on the assigned qubits")

    end_nodes = {n for n in circuit.nodes if circuit.degree(n) != 2}
    visited = set()
    chains = []

    def walk(start, first, pseudo=False):
        internal = []
        prev, cur = start, first
        visited.add(edge_key(prev, cur))
        qubits = list(oriented_route(prev, cur))
        while circuit.degree(cur) == 2 and cur not in end_nodes:
            nxt = next(x for x in circuit.neighbors(cur) if x != prev)
            internal.append(cur)
            visited.add(edge_key(cur, nxt))
            qubits.extend(oriented_route(cur, nxt)[1:])
            prev, cur = cur, nxt
        chains.append(Chain(start, cur, tuple(internal), tuple(qubits),
                            pseudo=pseudo))

    for ell in sorted(end_nodes, key=node_key):
        for nb in circuit.neighbors(ell):
            if edge_key(ell, nb) in visited:
                continue
            walk(ell, nb)

    # leftover edges are cycles of pure degree-2 cells: the smallest cell
    # becomes a pseudo-end-node
    leftover = set(circuit.edges) - visited
    while leftover:
        cell = min({c for e in leftover for c in e}, key=node_key)
        end_nodes.add(cell)
        nb = min((x for x in circuit.neighbors(cell)
                  if edge_key(cell, x) in leftover), key=node_key)
        walk(cell, nb, pseudo=True)
        leftover = set(circuit.edges) - visited

    return ChainDecomposition(tuple(sorted(end_nodes, key=node_key)),
                              tuple(chains))


def _feasible(chains, ends, t):
    """Grant vector achieving objective <= t, or None.

    Chains must push at least L_k = ceil(M_k - t*N_k) qubits into their
    end models (all M_k when N_k = 0); each end-node model may absorb at
    most floor(t - 1). Feasibility is a bipartite flow problem.
    """
    lows = []
    for c in chains:
        if c.n_internal == 0:
            low = c.m_qubits
        else:
            low = max(0, math.ceil(c.m_qubits - t * c.n_internal))
        if low > c.m_qubits - c.n_internal:
            return None
        lows.append(low)
    cap = math.floor(t - 1)
    if cap < 0:
        return None if any(lows) else [(0, 0)] * len(chains)
    e_idx = {e: i for i, e in enumerate(ends)}
    K, E = len(chains), len(ends)
    total = sum(lows)
    if total == 0:
        return [(0, 0)] * K
    src, sink = 0, 1 + K + E
    n = sink + 1
    rows, cols, caps = [], [], []
    for k, c in enumerate(chains):
        rows.append(src); cols.append(1 + k); caps.append(lows[k])
        rows.append(1 + k); cols.append(1 + K + e_idx[c.start]); caps.append(lows[k])
        rows.append(1 + k); cols.append(1 + K + e_idx[c.end]); caps.append(lows[k])
    for e in range(E):
        rows.append(1 + K + e); cols.append(sink); caps.append(cap)
    mat = csr_matrix((caps, (rows, cols)), shape=(n, n), dtype=np.int32)
    res = maximum_flow(mat, src, sink)
    if res.flow_value < total:
        return None
    flow = res.flow
    grants = []
    for k, c in enumerate(chains):
        a = 1 + K + e_idx[c.start]
        b = 1 + K + e_idx[c.end]
        if a == b:
            grants.append((int(flow[1 + k, a]), 0))
        else:
            grants.append((int(flow[1 + k, a]), int(flow[1 + k, b])))
    return grants


def allocate(dec):
    """Exact min-max allocation of chain qubits to end-node models."""
    chains = list(dec.chains)
    ends = list(dec.end_nodes)
    if not chains:
        return Allocation((), Fraction(1) if ends else Fraction(0))
    cands = {Fraction(1)}
    grantable = 0
    for c in chains:
        grantable += c.m_qubits - c.n_internal
        if c.n_internal > 0:
            for g in range(c.m_qubits - c.n_internal + 1):
                cands.add(Fraction(c.m_qubits - g, c.n_internal))
    for s in range(grantable + 1):
        cands.add(Fraction(1 + s))
    cands = sorted(c for c in cands if c >= 1)
    lo, hi = 0, len(cands) - 1
    assert _feasible(chains, ends, cands[hi]) is not None, \
        "maximal objective candidate must be feasible"
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        g = _feasible(chains, ends, cands[mid])
        if g is not None:
            best = (cands[mid], g)
            hi = mid - 1
        else:
            lo = mid + 1
    t, grants = best
    return Allocation(tuple(grants), t)


def allocation_objective(dec, grants):
    """Max of mean internal sizes and end-model sizes for given grants."""
    load = {e: 0 for e in dec.end_nodes}
    vals = []
    for c, (n, m) in zip(dec.chains, grants):
        load[c.start] += n
        load[c.end] += m
        if c.n_internal:
            vals.append(Fraction(c.m_qubits - n - m, c.n_internal))
    vals.extend(Fraction(1 + s) for s in load.values())
    return max(vals) if vals else Fraction(0)


def convert(circuit, embedding):
    """Chain embedding -> vertex models via min-max qubit allocation."""
    dec = decompose(circuit, embedding)
    alloc = allocate(dec)
    models = {ell: {embedding.assigned[ell]} for ell in dec.end_nodes}
    for c, (n, m) in zip(dec.chains, alloc.grants):
        interior = list(c.qubits[1:-1])
        M = len(interior)
        models[c.start].update(interior[:n])
        if m:
            models[c.end].update(interior[M - m:])
        middle = interior[n:M - m] if m else interior[n:]
        N = c.n_internal
        if N == 0:
            assert not middle, "no internal cells to absorb leftover qubits"
            continue
        base, rem = divmod(len(middle), N)
        pos = 0
        for i, cell in enumerate(c.internal):
            size = base + (1 if i < rem else 0)
            assert size > 0, "internal cell granted an empty segment"
            models[cell] = set(middle[pos:pos + size])
            pos += size
        assert pos == len(middle)
    assert set(models) == set(circuit.nodes)
    return VertexModelEmbedding({cell: frozenset(qs)
                                 for cell, qs in models.items()})


# ------------------------------------------------------------- validation

def _as_models(embedding):
    if isinstance(embedding, VertexModelEmbedding):
        return embedding.models
    return embedding


def validate(embedding, circuit, hw):
    """Violation list for a vertex-model embedding (empty means valid)."""
    models = _as_models(embedding)
    out = []
    for cell in circuit.nodes:
        if cell not in models or not models[cell]:
            out.append(f"missing model: cell {cell!r}")
    for cell, qs in models.items():
        for q in qs:
            if q not in hw.qubits:
                out.append(f"inactive qubit: {q} in model of {cell!r}")
    cells = sorted(models, key=node_key)
    seen = {}
    for cell in cells:
        for q in models[cell]:
            if q in seen:
                out.append(f"disjointness: qubit {q} in models of "
                           f"{seen[q]!r} and {cell!r}")
            else:
                seen[q] = cell
    for cell in cells:
        qs = set(models[cell]) & hw.qubits
        if not qs:
            continue
        stack = [next(iter(sorted(qs, key=hw.spec.to_linear)))]
        reached = set()
        while stack:
            q = stack.pop()
            if q in reached:
                continue
            reached.add(q)
            stack.extend(n for n in hw.adjacency[q] if n in qs)
        if reached != qs:
            out.append(f"connectivity: model of {cell!r} is disconnected")
    for (a, b) in circuit.edges:
        qa = models.get(a, ())
        qb = models.get(b, ())
        if not any(hw.has_coupler(q, p) for q in qa for p in qb
                   if q in hw.qubits and p in hw.qubits):
            out.append(f"edge unrealized: no coupler between models of "
                       f"{a!r} and {b!r}")
    return out


def validate_chain(embedding, circuit, hw):
    """Violation list for a dense-placement chain embedding."""
    out = []
    assigned = embedding.assigned
    for cell in circuit.nodes:
        if cell not in assigned:
            out.append(f"unplaced cell {cell!r}")
    rev = {}
    for cell, q in assigned.items():
        if q not in hw.qubits:
            out.append(f"inactive assigned qubit {q} for {cell!r}")
        if q in rev:
            out.append(f"assignment not injective: {rev[q]!r} and {cell!r} "
                       f"share {q}")
        rev[q] = cell
    interiors = {}
    for (a, b) in circuit.edges:
        key = edge_key(a, b)
        if key not in embedding.routes:
            out.append(f"edge unrouted: ({a!r}, {b!r})")
            continue
        chain = embedding.routes[key]
        if {chain[0], chain[-1]} != {assigned.get(a), assigned.get(b)}:
            out.append(f"route endpoints mismatch for ({a!r}, {b!r})")
        if len(set(chain)) != len(chain):
            out.append(f"route revisits a qubit for ({a!r}, {b!r})")
        for u, v in zip(chain, chain[1:]):
            if not hw.has_coupler(u, v):
                out.append(f"missing coupler {u}-{v} in route ({a!r}, {b!r})")
        for q in chain[1:-1]:
            if q in rev:
                out.append(f"route for ({a!r}, {b!r}) passes through "
                           f"assigned qubit {q}")
            if q in interiors:
                out.append(f"routes ({interiors[q]!r}) and ({a!r}, {b!r}) "
                           f"share qubit {q}")
            interiors[q] = key
    return out
