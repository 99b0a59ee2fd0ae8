"""Dense placement embedding: simultaneous place-and-route with seams.

One assigned qubit per circuit node, built outward from a seeded start:
each pass places the frontier cells (unplaced cells adjacent to the placed
set) in order of decreasing unplaced-connection count. A cell lands on a
*suitable* qubit (enough free neighbours for its not-yet-routable
connections) minimizing the summed lowest-cost search distance from all
placed neighbours; search costs prefer intra-tile couplers (external costs
1.9x internal) and tiles away from the processor edge. New connections
become qubit chains via negotiated congestion routing.

When no suitable qubit is reachable, a seam between two tile rows or
columns is opened: every assignment past the seam shifts one tile
outward, chains crossing the seam are spliced through the vacated
avenue, and whatever lands on dead hardware (yield) is re-placed or
re-routed, recursively if needed.
"""

from __future__ import annotations

import heapq
import json
import time
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from qcanneal.chimera import edge_distance, max_edge_distance
from qcanneal.circuit import edge_key, node_key
from qcanneal.router import (CongestionRouter, RouterConfig, RoutingFailure,
                             route_disjoint)


@dataclass
class DenseConfig:
    seed_adjacency_power: float = 3.0
    seed_gaussian_sigma: float = 1.0     # tiles
    internal_cost: float = 1.0
    external_cost: float = 1.9
    edge_proximity_cost: float = 0.5     # per tile toward the edge
    seam_qubit_cost: float = 3.0         # c_q
    seam_path_cost: float = 4.0          # c_p
    seam_distance_cost: float = 3.0      # c_d
    max_seam_recursion: int = 3
    max_seam_openings_per_cell: int = 4
    routing_max_iters: int = 50
    timeout_s: float = 30.0

    def __post_init__(self):
        if min(self.internal_cost, self.external_cost,
               self.edge_proximity_cost, self.seam_qubit_cost,
               self.seam_path_cost, self.seam_distance_cost) <= 0:
            raise ValueError("all dense placement costs must be positive")
        if self.seed_adjacency_power < 0 or self.seed_gaussian_sigma <= 0:
            raise ValueError("bad seed parameters")


class EmbeddingFailure(Exception):
    def __init__(self, reason, message=""):
        super().__init__(message or reason)
        self.reason = reason


@dataclass
class ChainEmbedding:
    """Dense placement output: cell -> assigned qubit plus routed chains."""

    assigned: dict   # cell -> qubit
    routes: dict     # edge_key(cell, cell) -> [qubit, ...]


def select_seed(circuit, hw, cfg, rng, cells=None):
    """Draw the first cell (P ~ degree^p) and a qubit for it.

    Tiles are drawn without replacement from a Gaussian about the array
    centre; within a tile, qubits are tried in random order until one has
    enough free neighbours for the cell's degree.
    """
    nodes = sorted(cells if cells is not None else circuit.nodes, key=node_key)
    degs = np.array([circuit.degree(n) for n in nodes], dtype=float)
    weights = degs ** cfg.seed_adjacency_power
    if weights.sum() == 0:
        weights = np.ones_like(weights)
    cell = nodes[rng.choice(len(nodes), p=weights / weights.sum())]
    need = circuit.degree(cell)

    spec = hw.spec
    tiles = [(r, c) for r in range(spec.rows) for c in range(spec.cols)]
    centre = ((spec.rows - 1) / 2.0, (spec.cols - 1) / 2.0)
    sig2 = 2.0 * cfg.seed_gaussian_sigma ** 2
    tw = np.array([np.exp(-((r - centre[0]) ** 2 + (c - centre[1]) ** 2) / sig2)
                   for (r, c) in tiles])
    remaining = list(range(len(tiles)))
    while remaining:
        w = tw[remaining]
        pick = remaining.pop(rng.choice(len(remaining), p=w / w.sum()))
        r, c = tiles[pick]
        tile_qs = [q for q in hw.sorted_qubits() if (q[0], q[1]) == (r, c)]
        for qi in rng.permutation(len(tile_qs)):
            q = tile_qs[qi]
            if len(hw.adjacency[q]) >= need:
                return cell, q
    raise EmbeddingFailure("seed", f"no qubit can host seed cell {cell!r} "
                                   f"(degree {need})")


class DenseState:
    """Mutable mid-embedding state for one trial."""

    def __init__(self, circuit, hw, cfg, rng):
        self.circuit = circuit
        self.hw = hw
        self.cfg = cfg
        self.rng = rng
        self.assigned = {}      # cell -> qubit
        self.owner = {}         # qubit -> cell
        self.routes = {}        # edge_key -> chain
        self.used = set()       # assigned qubits + chain interiors
        self.deadline = None

        spec = hw.spec
        self.spec = spec
        active, mat = hw.arrays()
        self.active = active
        self.indptr = mat.indptr
        self.indices = mat.indices
        n = spec.n_qubits
        L = spec.half_tile
        tile_of = np.arange(n) // (2 * L)
        dmax = max_edge_distance(spec)
        prox = np.empty(n)
        for t in range(spec.rows * spec.cols):
            r, c = divmod(t, spec.cols)
            prox[tile_of == t] = cfg.edge_proximity_cost * (
                dmax - edge_distance(spec, r, c))
        self.prox = prox
        self.adj_bool = csr_matrix(
            (np.ones(len(self.indices)), self.indices, self.indptr),
            shape=(n, n))
        self.free = active.copy()

    def base_data_of(self, u, v):
        """Search cost of stepping onto qubit v from u."""
        c = self.cfg.internal_cost if (u[0], u[1]) == (v[0], v[1]) \
            else self.cfg.external_cost
        return c + self.prox[self.spec.to_linear(v)]

    # -- bookkeeping -------------------------------------------------------

    def _check_time(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise EmbeddingFailure("timeout")

    def _occupy(self, qs):
        for q in qs:
            self.used.add(q)
            self.free[self.spec.to_linear(q)] = False

    def _rebuild_usage(self):
        self.used = set(self.assigned.values())
        for chain in self.routes.values():
            self.used.update(chain[1:-1])
        self.free = self.active.copy()
        for q in self.used:
            self.free[self.spec.to_linear(q)] = False

    def placed_neighbors(self, cell):
        return [n for n in self.circuit.neighbors(cell) if n in self.assigned]

    # -- placement ---------------------------------------------------------

    def _suitable_mask(self, cell, sources):
        """Free qubits with enough free neighbours for the cell's
        connections that will not be routable over a direct coupler."""
        free_nbrs = self.adj_bool.dot(self.free.astype(np.float64))
        need = np.full(self.spec.n_qubits, float(self.circuit.degree(cell)))
        for s in sources:
            for nb in self.hw.adjacency[s]:
                need[self.spec.to_linear(nb)] -= 1.0
        return self.free & (free_nbrs >= need)

    def place_candidate(self, cell):
        """Suitable qubit chosen by synchronized lowest-cost search.

        One search tree grows from each placed neighbour's qubit; trees
        expand in lockstep and the first suitable qubit finalized by every
        tree wins (ties within one lockstep cycle break by RNG). With a
        single source this is exactly the cheapest suitable qubit.
        """
        sources = [self.assigned[n] for n in self.placed_neighbors(cell)]
        if not sources:
            raise ValueError(f"cell {cell!r} has no placed neighbor")
        to_lin = self.spec.to_linear
        suitable = self._suitable_mask(cell, sources)
        k = len(sources)
        dist = [dict() for _ in range(k)]
        done = [set() for _ in range(k)]
        heaps = []
        for i, s in enumerate(sources):
            dist[i][s] = 0.0
            heaps.append([(0.0, to_lin(s), s)])
        done_count = {}
        while any(heaps):
            cycle_winners = []
            for i in range(k):
                node = None
                while heaps[i]:
                    d, _, u = heapq.heappop(heaps[i])
                    if u in done[i] or d > dist[i].get(u, np.inf):
                        continue
                    node = u
                    break
                if node is None:
                    continue
                done[i].add(node)
                cnt = done_count.get(node, 0) + 1
                done_count[node] = cnt
                if cnt == k and node not in sources \
                        and suitable[to_lin(node)]:
                    cycle_winners.append(node)
                base = dist[i][node]
                for v in self.hw.adjacency[node]:
                    vl = to_lin(v)
                    if not self.free[vl]:
                        continue
                    nd = base + self.base_data_of(node, v)
                    if nd < dist[i].get(v, np.inf):
                        dist[i][v] = nd
                        heapq.heappush(heaps[i], (nd, vl, v))
            if cycle_winners:
                if len(cycle_winners) == 1:
                    return cycle_winners[0]
                pick = int(self.rng.integers(len(cycle_winners)))
                return cycle_winners[pick]
        return None

    def assign_cell(self, cell, q):
        self.assigned[cell] = q
        self.owner[q] = cell
        self._occupy([q])

    def unassign_cell(self, cell):
        q = self.assigned.pop(cell)
        del self.owner[q]
        ripped = []
        for nbr in self.circuit.neighbors(cell):
            key = edge_key(cell, nbr)
            if key in self.routes:
                del self.routes[key]
                ripped.append(key)
        self._rebuild_usage()
        return ripped

    # -- routing -----------------------------------------------------------

    def route_new(self, cell):
        """Route the just-placed cell's connections to placed neighbours."""
        pairs = []
        keys = []
        for nbr in sorted(self.placed_neighbors(cell), key=node_key):
            key = edge_key(cell, nbr)
            if key in self.routes:
                continue
            pairs.append((self.assigned[cell], self.assigned[nbr]))
            keys.append(key)
        if not pairs:
            return
        blocked = self.used - set(q for p in pairs for q in p)
        chains = route_disjoint(pairs, self.hw, blocked)
        if chains is None:
            self.renegotiate(extra=list(zip(keys, pairs)))
            return
        for key, pair in zip(keys, pairs):
            self.routes[key] = chains[pair]
            self._occupy(chains[pair][1:-1])

    def renegotiate(self, extra=()):
        """Rip up every chain and renegotiate all of them at once."""
        pair_of = {}
        for key in self.routes:
            pair_of[key] = (self.assigned[key[0]], self.assigned[key[1]])
        for key, pair in extra:
            pair_of[key] = pair
        keys = sorted(pair_of, key=lambda k: (node_key(k[0]), node_key(k[1])))
        router = CongestionRouter(
            self.hw, reserved=set(self.assigned.values()),
            cfg=RouterConfig(max_iters=self.cfg.routing_max_iters))
        try:
            chains = router.route_all([pair_of[k] for k in keys])
        except RoutingFailure as exc:
            raise EmbeddingFailure("routing", str(exc)) from exc
        self.routes = {k: chains[pair_of[k]] for k in keys}
        self._rebuild_usage()

    # -- seam opening ------------------------------------------------------

    def _seam_candidates(self, cell):
        spec = self.spec
        seams = set()
        for nbr in self.placed_neighbors(cell):
            r, c, _, _ = self.assigned[nbr]
            for b in (r - 1, r):
                for d in (-1, +1):
                    seams.add((0, b, d))
            for b in (c - 1, c):
                for d in (-1, +1):
                    seams.add((1, b, d))
        out = []
        for (axis, b, d) in seams:
            size = spec.rows if axis == 0 else spec.cols
            if d > 0 and not (-1 <= b < size - 1):
                continue
            if d < 0 and not (0 <= b <= size - 1):
                continue
            border = size - 1 if d > 0 else 0
            if any(q[axis] == border for q in self.used):
                continue
            out.append((axis, b, d))
        return sorted(out)

    @staticmethod
    def _shift(q, axis, b, d):
        coord = q[axis]
        moved = coord >= b + 1 if d > 0 else coord <= b
        if not moved:
            return q, False
        lst = list(q)
        lst[axis] += d
        return tuple(lst), True

    def _shift_route(self, chain, axis, b, d):
        """Shifted chain with bridge qubits spliced at seam crossings.

        Returns (new_chain, ok); ok is False when the shifted chain hits
        inactive hardware.
        """
        mapped = []
        for q in chain:
            nq, moved = self._shift(q, axis, b, d)
            if nq not in self.hw.qubits:
                return None, False
            mapped.append((nq, moved))
        out = [mapped[0][0]]
        for (u, um), (v, vm) in zip(mapped, mapped[1:]):
            if um != vm:
                mid = list(u)
                mid[axis] = min(u[axis], v[axis]) + 1
                mid = tuple(mid)
                if mid not in self.hw.qubits:
                    return None, False
                if not (self.hw.has_coupler(u, mid)
                        and self.hw.has_coupler(mid, v)):
                    return None, False
                out.append(mid)
            elif not self.hw.has_coupler(u, v):
                return None, False
            out.append(v)
        return out, True

    def _evaluate_seam(self, seam):
        axis, b, d = seam
        bad_cells = set()
        for cell, q in self.assigned.items():
            nq, _ = self._shift(q, axis, b, d)
            if nq not in self.hw.qubits:
                bad_cells.add(cell)
        bad_routes = []
        for key, chain in sorted(self.routes.items(),
                                 key=lambda kv: (node_key(kv[0][0]),
                                                 node_key(kv[0][1]))):
            if key[0] in bad_cells or key[1] in bad_cells:
                continue
            _, ok = self._shift_route(chain, axis, b, d)
            if not ok:
                bad_routes.append(key)
        mean = float(np.mean([q[axis] for q in self.assigned.values()]))
        dist = abs(mean - (b + 0.5))
        cost = (self.cfg.seam_qubit_cost * len(bad_cells)
                + self.cfg.seam_path_cost * len(bad_routes)
                + self.cfg.seam_distance_cost * dist)
        away = 0 if (d > 0) == (mean <= b + 0.5) else 1
        return cost, away, bad_cells, bad_routes

    def open_seam(self, cell, depth=0):
        """Open the cheapest seam near the stuck cell's placed neighbours."""
        self._check_time()
        if depth > self.cfg.max_seam_recursion:
            raise EmbeddingFailure("seam", "seam recursion limit exceeded")
        candidates = self._seam_candidates(cell)
        if not candidates:
            raise EmbeddingFailure("seam", f"no free row or column to open "
                                           f"a seam for cell {cell!r}")
        scored = []
        for seam in candidates:
            cost, away, bad_cells, bad_routes = self._evaluate_seam(seam)
            scored.append((cost, away, seam, bad_cells, bad_routes))
        scored.sort(key=lambda t: (t[0], t[1], t[2]))
        cost, _, seam, bad_cells, bad_routes = scored[0]
        axis, b, d = seam

        new_assigned = {}
        for c2, q in self.assigned.items():
            if c2 in bad_cells:
                continue
            nq, _ = self._shift(q, axis, b, d)
            new_assigned[c2] = nq
        new_routes = {}
        lost_routes = list(bad_routes)
        for key, chain in self.routes.items():
            if key[0] in bad_cells or key[1] in bad_cells:
                continue
            if key in bad_routes:
                continue
            shifted, ok = self._shift_route(chain, axis, b, d)
            assert ok, "pre-scored seam shift failed"
            new_routes[key] = shifted
        self.assigned = new_assigned
        self.owner = {q: c2 for c2, q in new_assigned.items()}
        self.routes = new_routes
        self._rebuild_usage()

        # re-place cells whose shifted qubit was dead, most-connected first
        pending = sorted(bad_cells, key=node_key)
        while pending:
            pending.sort(key=lambda c2: (-len(self.placed_neighbors(c2)),
                                         node_key(c2)))
            c2 = pending.pop(0)
            if not self.placed_neighbors(c2):
                raise EmbeddingFailure(
                    "replacement", f"conflicted cell {c2!r} lost all placed "
                                   "neighbors")
            self.place_cell(c2, depth=depth + 1)

        # re-route chains the shift broke (endpoints still placed)
        still = [k for k in lost_routes
                 if k[0] in self.assigned and k[1] in self.assigned
                 and k not in self.routes]
        if still:
            pairs = [(self.assigned[k[0]], self.assigned[k[1]]) for k in still]
            blocked = self.used - set(q for p in pairs for q in p)
            chains = route_disjoint(pairs, self.hw, blocked)
            if chains is None:
                self.renegotiate(extra=list(zip(still, pairs)))
            else:
                for k, p in zip(still, pairs):
                    self.routes[k] = chains[p]
                    self._occupy(chains[p][1:-1])

    # -- main loop ---------------------------------------------------------

    def place_cell(self, cell, depth=0):
        """Place one cell (opening seams if stuck) and route its edges."""
        for attempt in range(self.cfg.max_seam_openings_per_cell + 1):
            self._check_time()
            q = self.place_candidate(cell)
            if q is not None:
                self.assign_cell(cell, q)
                self.route_new(cell)
                return
            if attempt == self.cfg.max_seam_openings_per_cell:
                break
            self.open_seam(cell, depth=depth)
        raise EmbeddingFailure(
            "placement", f"no suitable qubit for cell {cell!r}")

    def run(self):
        self.deadline = time.monotonic() + self.cfg.timeout_s
        todo = set(self.circuit.nodes)
        while todo:
            frontier = [c for c in todo if self.placed_neighbors(c)]
            if not frontier:
                cell, q = select_seed(self.circuit, self.hw, self.cfg,
                                      self.rng, cells=sorted(todo, key=node_key))
                if q in self.used:
                    raise EmbeddingFailure("seed", "seed qubit occupied")
                self.assign_cell(cell, q)
                todo.discard(cell)
                continue
            frontier.sort(key=lambda c: (
                -sum(1 for n in self.circuit.neighbors(c) if n in todo),
                node_key(c)))
            for cell in frontier:
                if cell not in todo:
                    continue
                self._check_time()
                self.place_cell(cell)
                todo.discard(cell)


def embed_dense(circuit, hw, cfg=None, seed=None, rng=None):
    """Embed a connectivity graph; raises EmbeddingFailure when stuck."""
    cfg = cfg or DenseConfig()
    if rng is None:
        rng = np.random.default_rng(seed)
    state = DenseState(circuit, hw, cfg, rng)
    state.run()
    return ChainEmbedding(dict(state.assigned),
                          {k: list(v) for k, v in state.routes.items()})


def place_next(state, cell):
    """Suitable qubit minimizing summed search cost from placed neighbours."""
    return state.place_candidate(cell)


def open_seam(state, cell):
    state.open_seam(cell)
    return state


# ---------------------------------------------------------------- JSON I/O

def embedding_to_json(models_or_embedding, spec, algorithm, seed=None,
                      wall_ms=0):
    """Embedding JSON shared by both algorithms.

    Accepts a ChainEmbedding (dense) or a {cell: qubit set} mapping
    (vertex models); chains serialize only for the former.
    """
    if isinstance(models_or_embedding, ChainEmbedding):
        emb = models_or_embedding
        cells = {str(c): [spec.to_linear(q)] for c, q in emb.assigned.items()}
        routes = [{"edge": [a, b],
                   "chain": [spec.to_linear(q) for q in chain]}
                  for (a, b), chain in sorted(
                      emb.routes.items(),
                      key=lambda kv: (node_key(kv[0][0]), node_key(kv[0][1])))]
    else:
        cells = {str(c): sorted(spec.to_linear(q) for q in qs)
                 for c, qs in models_or_embedding.items()}
        routes = []
    return {"cells": dict(sorted(cells.items())),
            "routes": routes,
            "algorithm": algorithm,
            "seed": seed,
            "wall_ms": wall_ms}


def _parse_cell_id(s):
    try:
        return int(s)
    except (TypeError, ValueError):
        return s


def embedding_from_json(obj, spec):
    """Returns (models dict, routes dict, meta dict); cells map to qubit
    tuples. Integer-like cell ids are parsed back to ints."""
    models = {_parse_cell_id(c): frozenset(spec.from_linear(i) for i in qs)
              for c, qs in obj["cells"].items()}
    routes = {}
    for r in obj.get("routes", []):
        a, b = (_parse_cell_id(x) for x in r["edge"])
        routes[edge_key(a, b)] = [spec.from_linear(i) for i in r["chain"]]
    meta = {k: obj.get(k) for k in ("algorithm", "seed", "wall_ms")}
    return models, routes, meta


def save_embedding(path, *args, **kwargs):
    with open(path, "w") as fp:
        json.dump(embedding_to_json(*args, **kwargs), fp, indent=1)
