"""Vertex-model heuristic embedding.

Each circuit node gets a connected qubit set (vertex model). The initial
pass places nodes one at a time: a node with no placed neighbour takes a
random qubit; otherwise the root qubit minimizing the summed path cost to
all neighbour models wins, where a qubit already inside k models costs
D^k, so sharing is allowed at a steep price. Qubits on the connecting
paths are split between the two models to keep the larger one small.

The improvement loop then repeatedly forgets one node's model and rebuilds
it from the current neighbour models. The working state always takes the
rebuild (that is what lets knots of mutually blocking models reflow), while
the accepted state -- the one a caller can ever see -- only moves when the
(overuse, total size, largest size) metric improves lexicographically, and
an embedding is returned only once no qubit belongs to two models.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from qcanneal.circuit import node_key
from qcanneal.dense import EmbeddingFailure


@dataclass
class HeurConfig:
    overuse_base: float = 10.0     # D: cost of a qubit used k times is D^k
    max_outer_rounds: int = 100
    no_improvement_limit: int = 10
    polish_rounds: int = 2         # extra rounds after overuse reaches zero
    evict_after: int = 3           # stale rounds before a knot eviction
    max_evictions: int = 8         # eviction waves per try
    max_tries: int = 8             # random restarts within the timeout
    anchor_fraction: float = 0.08  # nodes seeded at random qubits up front
    timeout_s: float = 30.0
    usage_exponent_cap: int = 8

    def __post_init__(self):
        if self.overuse_base <= 1:
            raise ValueError("overuse cost base must exceed 1")
        if self.max_tries < 1:
            raise ValueError("need at least one try")


@dataclass
class VertexModelEmbedding:
    models: dict  # cell -> frozenset of qubits


def embedding_metrics(models, hw=None):
    """(overuse, total size, max size) of a cell -> qubit-set mapping."""
    if not models:
        raise ValueError("no models")
    mult = {}
    total = 0
    largest = 0
    for qs in models.values():
        total += len(qs)
        largest = max(largest, len(qs))
        for q in qs:
            mult[q] = mult.get(q, 0) + 1
    overuse = sum(n - 1 for n in mult.values() if n > 1)
    return overuse, total, largest


class _HeurState:
    def __init__(self, circuit, hw, cfg, rng):
        self.circuit = circuit
        self.hw = hw
        self.cfg = cfg
        self.rng = rng
        self.spec = hw.spec
        self.n = hw.spec.n_qubits
        active, mat = hw.arrays()
        self.active = active
        self.active_idx = np.flatnonzero(active)
        self.indptr = mat.indptr
        self.indices = mat.indices
        self.usage = np.zeros(self.n, dtype=np.int64)
        self.models = {}          # cell -> set of linear qubit ids
        self.nodes = circuit.sorted_nodes()
        self.deadline = time.monotonic() + cfg.timeout_s

    def _check_time(self):
        if time.monotonic() > self.deadline:
            raise EmbeddingFailure("timeout")

    def _node_costs(self):
        expo = np.minimum(self.usage, self.cfg.usage_exponent_cap)
        return self.cfg.overuse_base ** expo.astype(float)

    def _add(self, cell, qubits):
        self.models[cell] = set(qubits)
        for q in self.models[cell]:
            self.usage[q] += 1

    def _remove(self, cell):
        qs = self.models.pop(cell)
        for q in qs:
            self.usage[q] -= 1
        return qs

    def place_node(self, cell):
        """(Re)build one node's model from the current neighbour models.

        Returns an undo log of (neighbour, qubit) additions made to other
        models while distributing path qubits, so a rejected candidate
        can be rolled back exactly.
        """
        nbr_models = [(n, self.models[n])
                      for n in sorted(self.circuit.neighbors(cell), key=node_key)
                      if n in self.models]
        if not nbr_models:
            q = int(self.rng.choice(self.active_idx))
            self._add(cell, [q])
            return []
        w = self._node_costs()
        mat = csr_matrix((w[self.indices], self.indices, self.indptr),
                         shape=(self.n, self.n))
        dists = []
        preds = []
        total = np.zeros(self.n)
        for _, m in nbr_models:
            d, p = dijkstra(mat, directed=True, indices=sorted(m),
                            return_predecessors=True)
            if d.ndim == 1:
                d, p = d[None, :], p[None, :]
            dists.append(d)
            preds.append(p)
            dmin = d.min(axis=0)
            # a root inside this model pays its own usage cost instead of 0
            member = np.zeros(self.n, dtype=bool)
            member[sorted(m)] = True
            total += np.where(member, w, dmin)
        # the root's weight is charged once overall, not once per path
        total -= (len(nbr_models) - 1) * w
        total = np.where(self.active, total, np.inf)
        best = total.min()
        if not np.isfinite(best):
            raise EmbeddingFailure(
                "unreachable", f"no qubit reaches all neighbour models of "
                               f"{cell!r}")
        choices = np.flatnonzero(total == best)
        root = int(choices[self.rng.integers(len(choices))]) \
            if len(choices) > 1 else int(choices[0])

        model = {root}
        self.models[cell] = model
        self.usage[root] += 1
        neighbor_adds = []
        for (nbr, m), d, p in zip(nbr_models, dists, preds):
            which = int(d[:, root].argmin())
            path = []
            q = root
            while q != -9999 and q not in m:
                path.append(q)
                q = int(p[which][q])
            # path runs root -> ... -> last qubit before entering the model
            interior = [q2 for q2 in path[1:] if q2 not in m]
            k = len(interior)
            if k == 0:
                continue
            sizes = (len(model), len(m))
            split = min(range(k + 1),
                        key=lambda t: max(sizes[0] + t, sizes[1] + (k - t)))
            for q2 in interior[:split]:
                if q2 not in model:
                    model.add(q2)
                    self.usage[q2] += 1
            for q2 in interior[split:]:
                if q2 not in m:
                    m.add(q2)
                    self.usage[q2] += 1
                    neighbor_adds.append((nbr, q2))
        return neighbor_adds

    def metric(self):
        over = int(np.maximum(self.usage - 1, 0).sum())
        total = sum(len(m) for m in self.models.values())
        largest = max(len(m) for m in self.models.values())
        return over, total, largest

    def _offenders(self):
        """Cells whose models contain a shared qubit."""
        shared = set(np.flatnonzero(self.usage > 1))
        return {c for c, m in self.models.items() if m & shared}

    def _evict_knot(self):
        """Forget the models around every shared qubit and re-place them.

        A stuck knot is a region where each single rebuild only ties; with
        the whole neighbourhood cleared at once there is room again.
        """
        victims = set()
        for c in self._offenders():
            victims.add(c)
            victims.update(self.circuit.neighbors(c))
        victims &= set(self.models)
        for c in victims:
            self._remove(c)
        pending = set(victims)
        while pending:
            cell = max(
                sorted(pending, key=node_key),
                key=lambda c: sum(1 for n in self.circuit.neighbors(c)
                                  if n in self.models))
            pending.discard(cell)
            self.place_node(cell)

    def _round_order(self):
        """Offending cells and their neighbours first, then the rest."""
        offenders = self._offenders()
        hot = set(offenders)
        for c in offenders:
            hot.update(self.circuit.neighbors(c))
        cold = [c for c in self.nodes if c not in hot]
        hot = [c for c in self.nodes if c in hot]
        out = [hot[i] for i in self.rng.permutation(len(hot))]
        out += [cold[i] for i in self.rng.permutation(len(cold))]
        return out

    def _init_order(self):
        """Initial placement order: a random fraction of anchor nodes come
        first (they mostly land on random qubits, spreading the start
        points out), then the rest grows from them frontier-first, always
        taking the node with the most placed neighbours so that cycles
        close while there is still room."""
        n = len(self.nodes)
        perm = [self.nodes[i] for i in self.rng.permutation(n)]
        n_anchor = max(1, int(round(self.cfg.anchor_fraction * n)))
        order = perm[:n_anchor]
        placed = set(order)
        placed_nbrs = {c: 0 for c in self.nodes}
        frontier = {}
        tick = 0
        for c in order:
            for nb in self.circuit.neighbors(c):
                if nb in placed:
                    continue
                placed_nbrs[nb] += 1
                if nb not in frontier:
                    tick += 1
                    frontier[nb] = (int(self.rng.integers(1 << 30)), tick)
        for root in perm[n_anchor:]:
            if root in placed:
                continue
            if root not in frontier:
                tick += 1
                frontier[root] = (int(self.rng.integers(1 << 30)), tick)
            while frontier:
                cell = min(frontier,
                           key=lambda c: (-placed_nbrs[c], frontier[c][0],
                                          frontier[c][1]))
                del frontier[cell]
                placed.add(cell)
                order.append(cell)
                for nb in self.circuit.neighbors(cell):
                    if nb in placed:
                        continue
                    placed_nbrs[nb] += 1
                    if nb not in frontier:
                        tick += 1
                        frontier[nb] = (int(self.rng.integers(1 << 30)), tick)
        return order

    def run(self, accepted_metrics=None):
        for cell in self._init_order():
            self._check_time()
            self.place_node(cell)

        best_metric = self.metric()
        best = {c: set(m) for c, m in self.models.items()}
        if accepted_metrics is not None:
            accepted_metrics.append(best_metric)
        stale = 0
        clean_rounds = 0
        evictions = 0
        for _ in range(self.cfg.max_outer_rounds):
            self._check_time()
            improved = False
            for cell in self._round_order():
                self._check_time()
                self._remove(cell)
                self.place_node(cell)
                after = self.metric()
                if after < best_metric:
                    best_metric = after
                    best = {c: set(m) for c, m in self.models.items()}
                    improved = True
                    if accepted_metrics is not None:
                        accepted_metrics.append(after)
            if best_metric[0] == 0:
                clean_rounds += 1
                if clean_rounds > self.cfg.polish_rounds:
                    break
            stale = 0 if improved else stale + 1
            if stale >= self.cfg.no_improvement_limit:
                break
            if stale and stale % self.cfg.evict_after == 0 \
                    and self.metric()[0] > 0:
                if evictions >= self.cfg.max_evictions:
                    break
                self._evict_knot()
                evictions += 1
        if best_metric[0] > 0:
            raise EmbeddingFailure(
                "overuse", "qubit sharing not eliminated within the round "
                           "limits")
        return {cell: frozenset(self.spec.from_linear(q) for q in m)
                for cell, m in best.items()}


def embed_heuristic(circuit, hw, cfg=None, seed=None, rng=None,
                    accepted_metrics=None):
    """Embed a connectivity graph as vertex models.

    Runs up to `cfg.max_tries` independent attempts (fresh random
    initialization each) within the trial timeout; raises
    EmbeddingFailure when sharing cannot be eliminated in time.

    `accepted_metrics`, if a list, collects the metric of every accepted
    state of the successful try, in order (lexicographically decreasing).
    """
    cfg = cfg or HeurConfig()
    if rng is None:
        rng = np.random.default_rng(seed)
    deadline = time.monotonic() + cfg.timeout_s
    last = None
    for _ in range(cfg.max_tries):
        state = _HeurState(circuit, hw, cfg, rng)
        state.deadline = deadline
        metrics = [] if accepted_metrics is not None else None
        try:
            models = state.run(accepted_metrics=metrics)
        except EmbeddingFailure as exc:
            last = exc
            if exc.reason == "timeout":
                raise
            continue
        if accepted_metrics is not None:
            accepted_metrics.extend(metrics)
        return VertexModelEmbedding(models)
    raise last
