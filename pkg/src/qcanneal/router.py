"""Negotiated-congestion routing of qubit chains.

PathFinder-style scheme: every requested pair gets a lowest-cost path,
interior qubits shared by several chains are priced up (a present-sharing
factor that grows each iteration plus an accumulating history cost), and
all pairs are ripped up and rerouted until no interior qubit is shared.
Chains of one cell may share that cell's assigned qubit as an endpoint;
everything else is exclusive.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass


class RoutingFailure(Exception):
    def __init__(self, message, congested=()):
        super().__init__(message)
        self.congested = sorted(congested)


@dataclass
class RouterConfig:
    base_cost: float = 1.0
    alpha: float = 0.5            # present-sharing growth per iteration
    history_increment: float = 1.0
    max_iters: int = 50


class CongestionRouter:
    """Holds per-qubit present-sharing and history costs for one trial."""

    def __init__(self, hw, reserved=(), cfg=None):
        self.hw = hw
        self.cfg = cfg or RouterConfig()
        self.reserved = set(reserved)
        self.present = {}   # qubit -> number of chains using it as interior
        self.history = {}   # qubit -> accumulated congestion cost
        self.routes = {}    # pair -> chain (list of qubits, endpoints included)
        self.iteration = 0

    # -- bookkeeping ------------------------------------------------------

    def _commit(self, pair, chain):
        self.routes[pair] = chain
        for q in chain[1:-1]:
            self.present[q] = self.present.get(q, 0) + 1

    def rip_up(self, pair):
        """Remove a routed pair, restoring present-sharing counts."""
        if pair not in self.routes:
            raise ValueError(f"pair {pair} is not routed")
        chain = self.routes.pop(pair)
        for q in chain[1:-1]:
            self.present[q] -= 1
            if self.present[q] == 0:
                del self.present[q]
        return chain

    def overused(self):
        return [q for q, n in self.present.items() if n > 1]

    # -- search -----------------------------------------------------------

    def _search(self, a, b, blocked, pres_fac):
        to_lin = self.hw.spec.to_linear
        adj = self.hw.adjacency
        hist = self.history
        present = self.present
        base = self.cfg.base_cost
        dist = {a: 0.0}
        parent = {}
        heap = [(0.0, to_lin(a), a)]
        while heap:
            d, _, u = heapq.heappop(heap)
            if u == b:
                path = [u]
                while path[-1] != a:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            if d > dist.get(u, float("inf")):
                continue
            for v in adj[u]:
                if v == a:
                    continue
                if v == b:
                    cost = base
                elif v in blocked:
                    continue
                else:
                    cost = (base + hist.get(v, 0.0)) \
                        * (1.0 + pres_fac * present.get(v, 0))
                nd = d + cost
                if nd < dist.get(v, float("inf")):
                    dist[v] = nd
                    parent[v] = u
                    heapq.heappush(heap, (nd, to_lin(v), v))
        return None

    def route_all(self, pairs):
        """Route every pair; negotiate until interiors are disjoint.

        Raises RoutingFailure (listing still-congested qubits) if the
        iteration limit is exceeded or some pair has no path at all.
        """
        pairs = list(pairs)
        endpoints = {}
        for (a, b) in pairs:
            if a == b:
                raise ValueError(f"pair endpoints coincide: {a}")
            for q in (a, b):
                if q not in self.hw.qubits:
                    raise ValueError(f"endpoint {q} is not active")
                endpoints.setdefault(q, set()).add((a, b))
        for it in range(self.cfg.max_iters):
            self.iteration = it
            pres_fac = self.cfg.alpha * (it + 1)
            for pair in pairs:
                a, b = pair
                if pair in self.routes:
                    self.rip_up(pair)
                blocked = self.reserved - {a, b}
                blocked |= {q for q in endpoints if pair not in endpoints[q]}
                chain = self._search(a, b, blocked, pres_fac)
                if chain is None:
                    raise RoutingFailure(
                        f"no path between {a} and {b}", congested=[])
                self._commit(pair, chain)
            over = self.overused()
            if not over:
                return {p: list(self.routes[p]) for p in pairs}
            for q in over:
                self.history[q] = self.history.get(q, 0.0) \
                    + self.cfg.history_increment
        raise RoutingFailure(
            f"congestion unresolved after {self.cfg.max_iters} iterations",
            congested=self.overused())


def route_all(pairs, hw, reserved=(), max_iters=50):
    """One-shot negotiated routing; see CongestionRouter.route_all."""
    cfg = RouterConfig(max_iters=max_iters)
    return CongestionRouter(hw, reserved=reserved, cfg=cfg).route_all(pairs)


def route_disjoint(pairs, hw, blocked):
    """Sequentially route pairs as vertex-disjoint shortest paths.

    `blocked` qubits are never entered (pair endpoints excepted). Earlier
    pairs' interiors block later ones; endpoints of all listed pairs are
    mutually exclusive. Returns None if any pair cannot be routed this
    way (callers then fall back to full renegotiation).
    """
    router = CongestionRouter(hw)
    taken = set(blocked)
    endpoint_qs = set()
    for (a, b) in pairs:
        endpoint_qs.update((a, b))
    out = {}
    for (a, b) in pairs:
        block = (taken | endpoint_qs) - {a, b}
        chain = router._search(a, b, block, pres_fac=0.0)
        if chain is None:
            return None
        out[(a, b)] = chain
        taken.update(chain[1:-1])
    return out
