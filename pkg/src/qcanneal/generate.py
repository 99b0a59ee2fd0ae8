"""Stochastic QCA circuit generator.

Circuits are built from majority gates, inverters, driver cells, and
wires, emitted directly as connectivity graphs (embedding consumes only
the graph, so no 2-D layout is produced). Inter-component wires are
random trees rooted at a component output whose leaves land on other
components' inputs; interior wire nodes have degree 2 except at branch
points. Inputs not fed by a wire get a driver (a +-1 bias on the input
cell). Edge weights use the canonical kink values: 1 for in-line
couplings, the diagonal anti-ferromagnetic value for the gate geometries
that have one under the requested adjacency mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from qcanneal.circuit import (FULL, LIMITED, ConnectivityGraph, QcaCell,
                              kink_energy)

E_DIAG = kink_energy(QcaCell("_a", 0, 0), QcaCell("_b", 1, 1))


@dataclass
class GenConfig:
    majority: tuple = (1, 3)      # count range, inclusive
    inverters: tuple = (0, 2)
    drivers: tuple = (1, 4)       # drivers beyond the forced minimum
    wire_range: tuple = (3, 12)   # interior cells per wire path
    max_fanout: int = 3           # leaves per wire tree
    adjacency: str = LIMITED
    name: str | None = None

    def __post_init__(self):
        for rng_field in ("majority", "inverters", "drivers", "wire_range"):
            lo, hi = getattr(self, rng_field)
            if lo < 0 or hi < lo:
                raise ValueError(f"bad range for {rng_field}: ({lo}, {hi})")
        if self.adjacency not in (FULL, LIMITED):
            raise ValueError(f"unknown adjacency mode {self.adjacency!r}")
        if self.max_fanout < 1:
            raise ValueError("max_fanout must be >= 1")


class _Builder:
    def __init__(self):
        self.next_id = 0
        self.nodes = {}
        self.edges = {}
        self.degree = {}

    def node(self, bias=0.0):
        n = self.next_id
        self.next_id += 1
        self.nodes[n] = bias
        self.degree[n] = 0
        return n

    def edge(self, a, b, w):
        key = (a, b) if a < b else (b, a)
        if key not in self.edges:
            self.degree[a] += 1
            self.degree[b] += 1
        self.edges[key] = w


def _majority(b, full):
    """Centre plus four arm cells: inputs on three arms, output on one."""
    centre = b.node()
    arms = [b.node() for _ in range(4)]
    for a in arms:
        b.edge(centre, a, 1.0)
    if full:
        # adjacent arms sit diagonally from each other
        for i in range(4):
            b.edge(arms[i], arms[(i + 1) % 4], E_DIAG)
    return {"inputs": arms[:3], "output": arms[3], "cells": 5}


def _inverter(b, full):
    """Fork-and-reconverge inverter; the output couples diagonally."""
    w = b.node()
    f1, f2 = b.node(), b.node()
    b1, b2 = b.node(), b.node()
    out = b.node()
    b.edge(w, f1, 1.0)
    b.edge(w, f2, 1.0)
    b.edge(f1, b1, 1.0)
    b.edge(f2, b2, 1.0)
    b.edge(b1, out, E_DIAG)
    b.edge(b2, out, E_DIAG)
    if full:
        b.edge(w, b1, E_DIAG)
        b.edge(w, b2, E_DIAG)
    return {"inputs": [w], "output": out, "cells": 6}


def generate(cfg, rng=None, seed=None):
    """Random connectivity graph for `cfg`; deterministic per seed."""
    if rng is None:
        rng = np.random.default_rng(seed)
    full = cfg.adjacency == FULL
    n_maj = int(rng.integers(cfg.majority[0], cfg.majority[1] + 1))
    n_inv = int(rng.integers(cfg.inverters[0], cfg.inverters[1] + 1))
    if n_maj + n_inv < 1:
        raise ValueError("config admits zero components")
    b = _Builder()
    comps = []
    kinds = ["majority"] * n_maj + ["inverter"] * n_inv
    for kind in kinds:
        comps.append(_majority(b, full) if kind == "majority"
                     else _inverter(b, full))
    inputs = [(ci, cell) for ci, c in enumerate(comps)
              for cell in c["inputs"]]
    outputs = [(ci, c["output"]) for ci, c in enumerate(comps)]

    n_drv = int(rng.integers(cfg.drivers[0], cfg.drivers[1] + 1))
    n_drv = min(n_drv, len(inputs))
    order = list(rng.permutation(len(inputs)))
    driven = [inputs[i] for i in order[:n_drv]]
    wired = [inputs[i] for i in order[n_drv:]]

    # hook each later component to an earlier one where possible so the
    # graph tends to come out connected
    feeds = {ci: [] for ci, _ in outputs}

    def donors_for(ci):
        open_any = [oj for oj, _ in outputs
                    if len(feeds[oj]) < cfg.max_fanout]
        cross = [oj for oj in open_any if oj != ci]
        if cross:
            return cross
        return open_any or [oj for oj, _ in outputs if oj != ci] \
            or [oj for oj, _ in outputs]

    remaining = list(wired)
    for ci in range(1, len(comps)):
        cands = [i for i, (cj, _) in enumerate(remaining) if cj == ci]
        if cands:
            pick = cands[int(rng.integers(len(cands)))]
            inp = remaining.pop(pick)
            donors = donors_for(ci)
            feeds[donors[int(rng.integers(len(donors)))]].append(inp)
    for inp in remaining:
        donors = donors_for(inp[0])
        feeds[donors[int(rng.integers(len(donors)))]].append(inp)

    # wire trees: interior cells hold degree 2, branch points degree 3
    # (a physical wire T-junction); paths attach only where that budget
    # allows, which also keeps every node placeable on 6-neighbour qubits
    for ci, _ in outputs:
        leaves = feeds[ci]
        if not leaves:
            continue
        root = comps[ci]["output"]
        budget = {root: 2}
        for (_, leaf_cell) in leaves:
            options = [n for n, room in budget.items() if room > 0]
            at = options[int(rng.integers(len(options)))] if options else root
            budget[at] = budget.get(at, 0) - 1
            length = int(rng.integers(cfg.wire_range[0],
                                      cfg.wire_range[1] + 1))
            prev = at
            for _ in range(length):
                nxt = b.node()
                b.edge(prev, nxt, 1.0)
                budget[nxt] = 1
                prev = nxt
            b.edge(prev, leaf_cell, 1.0)

    for (_, cell) in driven:
        b.nodes[cell] += float(rng.choice([-1.0, 1.0]))

    name = cfg.name if cfg.name is not None else (
        f"gen-{seed}" if seed is not None else "gen")
    from qcanneal.circuit import _graph_connected
    return ConnectivityGraph(
        b.nodes, b.edges, adjacency=cfg.adjacency, name=name,
        connected=_graph_connected(set(b.nodes), b.edges))


def sized_config(n_cells, adjacency=LIMITED, wire_range=None):
    """Config whose circuits land near `n_cells` cells on average.

    Majority gates dominate; wire lengths absorb the remainder. Actual
    sizes vary, which the sweeps want anyway (they bin by real size).
    """
    if n_cells < 5:
        raise ValueError("need at least one gate's worth of cells")
    n_maj = max(1, round(n_cells / 30))
    n_inv = max(0, round(n_maj / 3))
    gate_cells = 5 * n_maj + 6 * n_inv
    inputs = 3 * n_maj + n_inv
    drivers = max(1, round(inputs * 0.4))
    wired = max(1, inputs - drivers)
    mean_wire = max(1.0, (n_cells - gate_cells) / wired)
    if wire_range is None:
        lo = max(1, int(round(mean_wire * 0.5)))
        hi = max(lo, int(round(mean_wire * 1.5)))
        wire_range = (lo, hi)
    return GenConfig(majority=(n_maj, n_maj), inverters=(n_inv, n_inv),
                     drivers=(drivers, drivers), wire_range=wire_range,
                     adjacency=adjacency)
