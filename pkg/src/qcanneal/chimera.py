"""Chimera hardware graphs: grids of K_{L,L} tiles with yield masks.

A Chimera graph is an M x N grid of tiles, each holding L vertical and L
horizontal qubits fully coupled across orientations. Same-index qubits of
like orientation couple between row-adjacent (vertical) or column-adjacent
(horizontal) tiles, so a full-yield interior qubit has L+2 neighbours and
an edge-tile qubit L+1.

Qubits are addressed as ``(tile_row, tile_col, horiz, k)`` with ``horiz``
0 for vertical qubits, and map to linear indices row-major over tiles with
the vertical side first within a tile:

    linear = ((row * cols + col) * 2 + horiz) * L + k

Graphs are immutable after construction and safe to share across trials.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

Qubit = tuple  # (tile_row, tile_col, horiz, k)

VERTICAL, HORIZONTAL = 0, 1


@dataclass(frozen=True)
class ChimeraSpec:
    """Tile-array dimensions: rows x cols tiles of 2*half_tile qubits."""

    rows: int
    cols: int
    half_tile: int = 4

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.half_tile < 1:
            raise ValueError(
                f"invalid Chimera dimensions {self.rows}x{self.cols}x{self.half_tile}: "
                "all must be >= 1")

    @property
    def n_qubits(self):
        return 2 * self.half_tile * self.rows * self.cols

    def qubits(self):
        """All qubit tuples in linear-index order."""
        L = self.half_tile
        for r in range(self.rows):
            for c in range(self.cols):
                for h in (VERTICAL, HORIZONTAL):
                    for k in range(L):
                        yield (r, c, h, k)

    def to_linear(self, q):
        r, c, h, k = q
        return ((r * self.cols + c) * 2 + h) * self.half_tile + k

    def from_linear(self, idx):
        orig = idx
        idx, k = divmod(idx, self.half_tile)
        idx, h = divmod(idx, 2)
        r, c = divmod(idx, self.cols)
        if not (0 <= r < self.rows):
            raise ValueError(f"linear index {orig} out of range")
        return (r, c, h, k)

    def contains(self, q):
        r, c, h, k = q
        return (0 <= r < self.rows and 0 <= c < self.cols
                and h in (0, 1) and 0 <= k < self.half_tile)


def _full_adjacency(spec):
    """Adjacency dict of the full-yield graph."""
    L = spec.half_tile
    adj = {q: [] for q in spec.qubits()}
    for r in range(spec.rows):
        for c in range(spec.cols):
            # intra-tile: every vertical couples every horizontal
            for i in range(L):
                for j in range(L):
                    adj[(r, c, VERTICAL, i)].append((r, c, HORIZONTAL, j))
                    adj[(r, c, HORIZONTAL, j)].append((r, c, VERTICAL, i))
            # vertical qubits couple down one tile row
            if r + 1 < spec.rows:
                for k in range(L):
                    adj[(r, c, VERTICAL, k)].append((r + 1, c, VERTICAL, k))
                    adj[(r + 1, c, VERTICAL, k)].append((r, c, VERTICAL, k))
            # horizontal qubits couple across one tile column
            if c + 1 < spec.cols:
                for k in range(L):
                    adj[(r, c, HORIZONTAL, k)].append((r, c + 1, HORIZONTAL, k))
                    adj[(r, c + 1, HORIZONTAL, k)].append((r, c, HORIZONTAL, k))
    return adj


class ChimeraGraph:
    """Hardware graph with active qubit/coupler sets and geometry queries.

    Immutable by convention; `apply_yield` returns a new graph.
    """

    def __init__(self, spec, adjacency):
        self.spec = spec
        self.adjacency = {q: tuple(sorted(nbrs, key=spec.to_linear))
                          for q, nbrs in adjacency.items()}
        self.qubits = frozenset(self.adjacency)
        self.couplers = frozenset(
            (q, n) if spec.to_linear(q) < spec.to_linear(n) else (n, q)
            for q, nbrs in self.adjacency.items() for n in nbrs)
        self._arrays = None

    @property
    def n_qubits(self):
        return len(self.qubits)

    @property
    def n_couplers(self):
        return len(self.couplers)

    def is_active(self, q):
        return q in self.qubits

    def has_coupler(self, a, b):
        return b in self.adjacency.get(a, ())

    def degree(self, q):
        return len(self.adjacency[q])

    def sorted_qubits(self):
        return sorted(self.qubits, key=self.spec.to_linear)

    def arrays(self):
        """Cached numpy view: active mask and CSR adjacency over linear ids.

        Edge weights start at 1.0; callers re-weight the `data` vector
        (never the structure) for cost searches.
        """
        if self._arrays is None:
            n = self.spec.n_qubits
            active = np.zeros(n, dtype=bool)
            for q in self.qubits:
                active[self.spec.to_linear(q)] = True
            rows, cols = [], []
            for q, nbrs in self.adjacency.items():
                qi = self.spec.to_linear(q)
                for nb in nbrs:
                    rows.append(qi)
                    cols.append(self.spec.to_linear(nb))
            mat = sparse.csr_matrix(
                (np.ones(len(rows)), (rows, cols)), shape=(n, n))
            self._arrays = (active, mat)
        return self._arrays


def build_chimera(spec):
    """Full-yield Chimera graph for `spec`."""
    if not isinstance(spec, ChimeraSpec):
        spec = ChimeraSpec(*spec)
    return ChimeraGraph(spec, _full_adjacency(spec))


@dataclass(frozen=True)
class YieldMask:
    """Disabled qubits/couplers, either listed explicitly or drawn by seed."""

    disabled_qubits: frozenset = frozenset()
    disabled_couplers: frozenset = frozenset()
    fraction: float | None = None
    seed: int | None = None

    @classmethod
    def explicit(cls, qubits=(), couplers=()):
        return cls(disabled_qubits=frozenset(qubits),
                   disabled_couplers=frozenset(
                       tuple(sorted(c)) for c in couplers))

    @classmethod
    def random_qubits(cls, spec, fraction, seed):
        """Disable floor(fraction * n_qubits) qubits, uniform without
        replacement, reproducible per seed."""
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"disable fraction {fraction} outside [0, 1]")
        rng = np.random.default_rng(seed)
        n_dis = int(fraction * spec.n_qubits)
        order = list(spec.qubits())
        picks = rng.choice(len(order), size=n_dis, replace=False)
        return cls(disabled_qubits=frozenset(order[i] for i in picks),
                   fraction=fraction, seed=seed)


def apply_yield(graph, mask):
    """Remove disabled qubits (with incident couplers) and disabled couplers."""
    for q in mask.disabled_qubits:
        if not graph.spec.contains(q):
            raise ValueError(f"disabled qubit {q} not in spec")
    dead = set(mask.disabled_qubits)
    dead_c = {tuple(sorted(c, key=graph.spec.to_linear))
              for c in mask.disabled_couplers}
    adj = {}
    for q, nbrs in graph.adjacency.items():
        if q in dead:
            continue
        kept = [n for n in nbrs
                if n not in dead
                and tuple(sorted((q, n), key=graph.spec.to_linear)) not in dead_c]
        adj[q] = kept
    return ChimeraGraph(graph.spec, adj)


def neighbors(graph, q):
    """Active coupled qubits of `q`; rejects inactive qubits."""
    if q not in graph.qubits:
        raise ValueError(f"qubit {q} is not active")
    return list(graph.adjacency[q])


def edge_distance(spec, tile_row, tile_col):
    """Minimum tile count to any processor boundary (0 on the boundary)."""
    if not (0 <= tile_row < spec.rows and 0 <= tile_col < spec.cols):
        raise ValueError(f"tile ({tile_row}, {tile_col}) out of range")
    return min(tile_row, tile_col,
               spec.rows - 1 - tile_row, spec.cols - 1 - tile_col)


def max_edge_distance(spec):
    return min((spec.rows - 1) // 2, (spec.cols - 1) // 2)


# ---------------------------------------------------------------- JSON I/O

def to_descriptor(graph, full=None):
    """JSON-able descriptor. Disabled sets are relative to full yield."""
    spec = graph.spec
    if full is None:
        full = build_chimera(spec)
    disabled_q = sorted(spec.to_linear(q) for q in full.qubits - graph.qubits)
    live_pairs = graph.couplers
    disabled_c = sorted(
        [spec.to_linear(a), spec.to_linear(b)]
        for (a, b) in full.couplers - live_pairs
        if a in graph.qubits and b in graph.qubits)
    return {"spec": {"rows": spec.rows, "cols": spec.cols,
                     "half_tile": spec.half_tile},
            "disabled_qubits": disabled_q,
            "disabled_couplers": disabled_c}


def from_descriptor(desc):
    spec = ChimeraSpec(desc["spec"]["rows"], desc["spec"]["cols"],
                       desc["spec"].get("half_tile", 4))
    mask = YieldMask.explicit(
        qubits=[spec.from_linear(i) for i in desc.get("disabled_qubits", [])],
        couplers=[(spec.from_linear(i), spec.from_linear(j))
                  for i, j in desc.get("disabled_couplers", [])])
    return apply_yield(build_chimera(spec), mask)


def save_graph(graph, path):
    with open(path, "w") as fp:
        json.dump(to_descriptor(graph), fp, indent=1)


def load_graph(path):
    with open(path) as fp:
        return from_descriptor(json.load(fp))


def parse_spec(text):
    """Parse an 'MxNxL' string, e.g. '8x8x4'."""
    parts = text.lower().split("x")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad Chimera spec {text!r}; expected MxN or MxNxL")
    nums = [int(p) for p in parts]
    if len(nums) == 2:
        nums.append(4)
    return ChimeraSpec(*nums)
