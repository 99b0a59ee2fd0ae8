import json

import numpy as np
import pytest

from qcanneal import chimera as ch


def coupler_count_formula(rows, cols, L=4):
    return L * L * rows * cols + L * (rows - 1) * cols + L * rows * (cols - 1)


def couples(spec, a, b):
    """Geometric coupling rule, written independently of the builder."""
    (ra, ca, ha, ka), (rb, cb, hb, kb) = a, b
    if (ra, ca) == (rb, cb):
        return ha != hb
    if ha != hb or ka != kb:
        return False
    if ha == ch.VERTICAL:
        return ca == cb and abs(ra - rb) == 1
    return ra == rb and abs(ca - cb) == 1


def brute_couplers(spec):
    qs = list(spec.qubits())
    return {(a, b) for i, a in enumerate(qs) for b in qs[i + 1:]
            if couples(spec, a, b)}


@pytest.mark.parametrize("dims,nq,nc", [
    ((1, 1, 4), 8, 16),
    ((2, 1, 4), 16, 36),
    ((8, 8, 4), 512, 1472),
])
def test_counts(dims, nq, nc):
    g = ch.build_chimera(ch.ChimeraSpec(*dims))
    assert g.n_qubits == nq
    assert g.n_couplers == nc
    assert nc == coupler_count_formula(dims[0], dims[1], dims[2])


@pytest.mark.parametrize("rows,cols", [(1, 1), (1, 5), (3, 2), (4, 4), (8, 8), (16, 3)])
def test_coupler_set_matches_exhaustive_enumeration(rows, cols):
    spec = ch.ChimeraSpec(rows, cols, 4)
    g = ch.build_chimera(spec)
    want = {tuple(sorted(p, key=spec.to_linear)) for p in brute_couplers(spec)}
    assert g.couplers == frozenset(want)


def test_degree_law():
    # interior L+2, minus one per missing inter-tile side
    g = ch.build_chimera(ch.ChimeraSpec(8, 8, 4))
    assert g.degree((3, 4, ch.VERTICAL, 2)) == 6
    assert g.degree((3, 4, ch.HORIZONTAL, 1)) == 6
    assert g.degree((0, 0, ch.VERTICAL, 0)) == 5   # top row: no tile above
    assert g.degree((0, 3, ch.HORIZONTAL, 0)) == 6  # horizontal unaffected by row edge
    assert g.degree((0, 0, ch.HORIZONTAL, 0)) == 5
    single = ch.build_chimera(ch.ChimeraSpec(1, 1, 4))
    for q in single.qubits:
        assert single.degree(q) == 4


def test_linear_index_bijection():
    for dims in [(1, 1, 4), (3, 2, 4), (2, 3, 2)]:
        spec = ch.ChimeraSpec(*dims)
        seen = set()
        for q in spec.qubits():
            i = spec.to_linear(q)
            assert spec.from_linear(i) == q
            seen.add(i)
        assert seen == set(range(spec.n_qubits))


def test_invalid_dimensions_rejected():
    with pytest.raises(ValueError):
        ch.ChimeraSpec(0, 8, 4)
    with pytest.raises(ValueError):
        ch.ChimeraSpec(8, -1, 4)
    with pytest.raises(ValueError):
        ch.ChimeraSpec(8, 8, 0)


def test_neighbors_counts_and_rejection():
    g = ch.build_chimera(ch.ChimeraSpec(8, 8, 4))
    assert len(ch.neighbors(g, (3, 3, 0, 0))) == 6
    assert len(ch.neighbors(g, (0, 0, 1, 2))) == 5
    gy = ch.apply_yield(g, ch.YieldMask.explicit(qubits=[(3, 3, 0, 0)]))
    with pytest.raises(ValueError):
        ch.neighbors(gy, (3, 3, 0, 0))


def test_yield_zero_fraction_identity():
    g = ch.build_chimera(ch.ChimeraSpec(8, 8, 4))
    m = ch.YieldMask.random_qubits(g.spec, 0.0, seed=3)
    g2 = ch.apply_yield(g, m)
    assert g2.qubits == g.qubits and g2.couplers == g.couplers


def test_yield_fraction_count_and_determinism():
    spec = ch.ChimeraSpec(8, 8, 4)
    g = ch.build_chimera(spec)
    m1 = ch.YieldMask.random_qubits(spec, 0.05, seed=11)
    m2 = ch.YieldMask.random_qubits(spec, 0.05, seed=11)
    assert len(m1.disabled_qubits) == int(0.05 * 512) == 25
    assert m1.disabled_qubits == m2.disabled_qubits
    m3 = ch.YieldMask.random_qubits(spec, 0.05, seed=12)
    assert m3.disabled_qubits != m1.disabled_qubits
    assert ch.apply_yield(g, m1).qubits == ch.apply_yield(g, m2).qubits


def test_explicit_disable_removes_incident_couplers():
    g = ch.build_chimera(ch.ChimeraSpec(8, 8, 4))
    for q in [(3, 4, 0, 1), (0, 0, 1, 0)]:
        deg = g.degree(q)
        gy = ch.apply_yield(g, ch.YieldMask.explicit(qubits=[q]))
        assert gy.n_qubits == 511
        assert gy.n_couplers == 1472 - deg
        assert deg in (5, 6)


def test_yield_idempotent_and_monotone():
    g = ch.build_chimera(ch.ChimeraSpec(4, 4, 4))
    m = ch.YieldMask.random_qubits(g.spec, 0.1, seed=5)
    g1 = ch.apply_yield(g, m)
    g2 = ch.apply_yield(g1, m)
    assert g1.qubits == g2.qubits and g1.couplers == g2.couplers
    assert g1.qubits <= g.qubits and g1.couplers <= g.couplers


def test_coupler_only_disable():
    g = ch.build_chimera(ch.ChimeraSpec(2, 2, 4))
    pair = ((0, 0, 0, 0), (0, 0, 1, 0))
    gy = ch.apply_yield(g, ch.YieldMask.explicit(couplers=[pair]))
    assert gy.n_qubits == g.n_qubits
    assert gy.n_couplers == g.n_couplers - 1
    assert not gy.has_coupler(*pair)


def test_bad_fraction_rejected():
    with pytest.raises(ValueError):
        ch.YieldMask.random_qubits(ch.ChimeraSpec(2, 2), 1.5, seed=0)
    with pytest.raises(ValueError):
        ch.YieldMask.random_qubits(ch.ChimeraSpec(2, 2), -0.1, seed=0)


@pytest.mark.parametrize("tile,dist", [((0, 3), 0), ((3, 4), 3), ((4, 4), 3)])
def test_edge_distance(tile, dist):
    spec = ch.ChimeraSpec(8, 8, 4)
    assert ch.edge_distance(spec, *tile) == dist
    assert dist == min(tile[0], tile[1], 7 - tile[0], 7 - tile[1])


def test_edge_distance_range_check():
    with pytest.raises(ValueError):
        ch.edge_distance(ch.ChimeraSpec(8, 8, 4), 8, 0)


def test_json_roundtrip(tmp_path):
    g = ch.build_chimera(ch.ChimeraSpec(3, 3, 4))
    m = ch.YieldMask.random_qubits(g.spec, 0.08, seed=2)
    gy = ch.apply_yield(g, m)
    path = tmp_path / "hw.json"
    ch.save_graph(gy, path)
    desc = json.loads(path.read_text())
    assert set(desc) == {"spec", "disabled_qubits", "disabled_couplers"}
    g2 = ch.load_graph(path)
    assert g2.qubits == gy.qubits and g2.couplers == gy.couplers


def test_parse_spec():
    assert ch.parse_spec("8x8x4") == ch.ChimeraSpec(8, 8, 4)
    assert ch.parse_spec("4x4") == ch.ChimeraSpec(4, 4, 4)
    with pytest.raises(ValueError):
        ch.parse_spec("0x8x4")
