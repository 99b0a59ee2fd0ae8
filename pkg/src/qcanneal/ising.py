"""Ising parameter assignment for embedded circuits.

Sign convention: spin +1 corresponds to cell polarization +1. With cell
bias b_i (sum of driver kink energies times polarizations) and edge kink
E_k, and everything expressed in units of the nearest-neighbour
ferromagnetic kink energy,

    h_i = -b_i,      J_ij = -E_k(i, j),

so that minimizing  E(s) = sum h_i s_i + sum J_ij s_i s_j  drives a cell
ferromagnetically coupled to a +1 driver to spin +1, and a ferromagnetic
edge gets J = -1. Within a vertex model the bias divides uniformly over
the model's qubits, internal couplers are clamped to J = -1, and each
circuit edge's J lands on the couplers between the two models (split
uniformly if there are several).

Values are exact fractions so the per-model bias sums reproduce the cell
biases with no rounding; exports write floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from qcanneal import convert as _convert
from qcanneal.circuit import node_key

E_FM = Fraction(1)


@dataclass
class IsingProblem:
    h: dict                      # qubit -> Fraction
    J: dict                      # sorted qubit pair -> Fraction
    scaled: bool = False         # True when circuit terms were rescaled
    scale: Fraction = Fraction(1)


def circuit_ising(circuit):
    """Cell-level (h, J) dicts for a connectivity graph."""
    h = {cell: -Fraction(b) / E_FM for cell, b in circuit.nodes.items()}
    J = {pair: -Fraction(w) / E_FM for pair, w in circuit.edges.items()}
    return h, J


def assign(embedding, circuit, hw):
    """Map a validator-clean vertex-model embedding to qubit h/J values."""
    models = _convert._as_models(embedding)
    violations = _convert.validate(models, circuit, hw)
    if violations:
        raise ValueError(f"embedding not valid: {violations[0]}"
                         + (f" (+{len(violations)-1} more)"
                            if len(violations) > 1 else ""))
    to_lin = hw.spec.to_linear
    h = {}
    J = {}
    owner = {}
    for cell in sorted(models, key=node_key):
        qs = sorted(models[cell], key=to_lin)
        share = -Fraction(circuit.nodes[cell]) / (E_FM * len(qs))
        for q in qs:
            h[q] = share
            owner[q] = cell
        for i, q in enumerate(qs):
            for p in qs[i + 1:]:
                if hw.has_coupler(q, p):
                    J[_qpair(q, p, to_lin)] = Fraction(-1)
    for (a, b), ek in circuit.edges.items():
        couplers = [
            _qpair(q, p, to_lin)
            for q in sorted(models[a], key=to_lin)
            for p in sorted(models[b], key=to_lin)
            if hw.has_coupler(q, p)]
        val = -Fraction(ek) / (E_FM * len(couplers))
        for pair in couplers:
            J[pair] = val
    intra = {p for p, v in J.items() if v == -1 and
             owner[p[0]] == owner[p[1]]}
    mags = [abs(v) for v in h.values()]
    mags += [abs(v) for p, v in J.items() if p not in intra]
    worst = max(mags, default=Fraction(0))
    if worst > 1:
        scale = Fraction(1) / worst
        h = {q: v * scale for q, v in h.items()}
        J = {p: (v if p in intra else v * scale) for p, v in J.items()}
        return IsingProblem(h, J, scaled=True, scale=scale)
    return IsingProblem(h, J)


def _qpair(q, p, to_lin):
    return (q, p) if to_lin(q) < to_lin(p) else (p, q)


def ground_states_brute(h, J=None, max_spins=24, tol=1e-9):
    """All global minimizers of sum h_i s_i + sum J_ij s_i s_j.

    Accepts an IsingProblem or a pair of dicts keyed by any sortable ids.
    Returns (ids, states, energy) with states a set of +-1 tuples ordered
    like ids. Exhaustive over 2^n configurations; n is capped.
    """
    if isinstance(h, IsingProblem):
        h, J = h.h, h.J
    ids = sorted(set(h) | {x for pair in J for x in pair}, key=node_key)
    n = len(ids)
    if n == 0:
        raise ValueError("empty problem")
    if n > max_spins:
        raise ValueError(f"{n} spins exceeds brute-force cap {max_spins}")
    pos = {x: i for i, x in enumerate(ids)}
    hvec = np.zeros(n)
    for x, v in h.items():
        hvec[pos[x]] = float(v)
    terms = [(pos[a], pos[b], float(v)) for (a, b), v in J.items()]

    def energies(states):
        spins = 1.0 - 2.0 * ((states[:, None] >> np.arange(n)[None, :]) & 1)
        e = spins @ hvec
        for i, j, v in terms:
            e += v * spins[:, i] * spins[:, j]
        return e, spins

    chunk = 1 << 18
    total = 1 << n
    emin = np.inf
    for lo in range(0, total, chunk):
        e, _ = energies(np.arange(lo, min(lo + chunk, total), dtype=np.int64))
        emin = min(emin, float(e.min()))
    states = set()
    for lo in range(0, total, chunk):
        e, spins = energies(np.arange(lo, min(lo + chunk, total),
                                      dtype=np.int64))
        for row in spins[e <= emin + tol]:
            states.add(tuple(int(s) for s in row))
    return ids, states, emin


def collapse_states(ids, states, models):
    """Collapse embedded ground states to cell-level states.

    Every vertex model must be internally aligned in every state;
    misalignment raises (callers treat that as an oracle failure).
    Returns (cells, set of collapsed +-1 tuples).
    """
    pos = {q: i for i, q in enumerate(ids)}
    cells = sorted(models, key=node_key)
    out = set()
    for st in sorted(states):
        collapsed = []
        for cell in cells:
            vals = {st[pos[q]] for q in models[cell]}
            if len(vals) != 1:
                raise ValueError(
                    f"model of cell {cell!r} not internally aligned in an "
                    "embedded ground state")
            collapsed.append(vals.pop())
        out.add(tuple(collapsed))
    return cells, out


# ---------------------------------------------------------------- exports

def to_text(problem, spec):
    """One line per term: 'h <qubit> <value>' / 'J <q1> <q2> <value>'."""
    to_lin = spec.to_linear
    lines = []
    for q in sorted(problem.h, key=to_lin):
        lines.append(f"h {to_lin(q)} {float(problem.h[q]):.17g}")
    for (a, b) in sorted(problem.J, key=lambda p: (to_lin(p[0]), to_lin(p[1]))):
        lines.append(f"J {to_lin(a)} {to_lin(b)} "
                     f"{float(problem.J[(a, b)]):.17g}")
    return "\n".join(lines) + "\n"


def to_json_obj(problem, spec):
    to_lin = spec.to_linear
    return {
        "h": {str(to_lin(q)): float(v)
              for q, v in sorted(problem.h.items(),
                                 key=lambda kv: to_lin(kv[0]))},
        "J": [[to_lin(a), to_lin(b), float(v)]
              for (a, b), v in sorted(problem.J.items(),
                                      key=lambda kv: (to_lin(kv[0][0]),
                                                      to_lin(kv[0][1])))],
        "scaled": problem.scaled,
        "scale": float(problem.scale),
    }


def from_text(text, spec):
    h, J = {}, {}
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "h":
            h[spec.from_linear(int(parts[1]))] = Fraction(parts[2])
        elif parts[0] == "J":
            a, b = spec.from_linear(int(parts[1])), spec.from_linear(int(parts[2]))
            J[(a, b)] = Fraction(parts[3])
        else:
            raise ValueError(f"bad Ising line: {line!r}")
    return IsingProblem(h, J)


def save_text(problem, spec, path):
    with open(path, "w") as fp:
        fp.write(to_text(problem, spec))


def save_json(problem, spec, path):
    with open(path, "w") as fp:
        json.dump(to_json_obj(problem, spec), fp, indent=1)
