import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddmeasure.ddcore import (
    DecisionDiagram,
    Edge,
    ReducedPauliList,
    build,
    build_initial,
    merge_equivalent,
    metrics,
    normalize,
    preprocess,
    remove_identities,
    zeta_many,
)
from ddmeasure.pauli import Hamiltonian, PauliString
from oracles import path_distribution, str_compatible, str_join

P = PauliString.from_str


def reference_preprocess(terms):
    """The merge rule on plain strings with a full pairwise scan."""
    weights = {}
    for a, w in terms:
        if set(w) != {"I"} and a != 0:
            weights[w] = weights.get(w, 0.0) + abs(a)
    while True:
        keys = list(weights)
        counts = {k: sum(1 for q in keys if q != k and str_compatible(k, q)) for k in keys}
        best = max(counts.values(), default=0)
        if best == 0:
            return weights
        high = min(k for k in keys if counts[k] == best)
        share = weights.pop(high) / best
        merged = {}
        for q, x in weights.items():
            if str_compatible(high, q):
                q, x = str_join(high, q), x + share
            merged[q] = merged.get(q, 0.0) + x
        weights = merged


def hamiltonians(n_max=5, terms_max=8):
    return st.integers(1, n_max).flatmap(lambda n: st.lists(
        st.tuples(st.floats(-2, 2, allow_nan=False).filter(lambda a: abs(a) > 1e-3),
                  st.text(alphabet="IXYZ", min_size=n, max_size=n)),
        min_size=1, max_size=terms_max).filter(
            lambda ts: any(set(w) != {"I"} for _, w in ts)))


# -- preprocess ----------------------------------------------------------------

def test_preprocess_jw_matches_printed_list(h_jw):
    r = preprocess(h_jw)
    got = {p.letters: w for w, p in r.terms}
    assert set(got) == {"YYXX", "YYYY", "XXXX", "XXYY", "ZZZZ"}
    for w in ("YYXX", "YYYY", "XXXX", "XXYY"):
        assert got[w] == pytest.approx(0.045, abs=1e-12)
    assert got["ZZZZ"] == pytest.approx(1.714, abs=0.01)


def test_preprocess_single_term():
    r = preprocess(Hamiltonian.from_terms([(0.5, "XX")]))
    assert r.terms == ((0.5, P("XX")),)


def test_preprocess_two_disjoint_terms():
    r = preprocess(Hamiltonian.from_terms([(0.3, "ZI"), (0.4, "IZ")]))
    assert len(r) == 1
    w, p = r.terms[0]
    assert p == P("ZZ") and w == pytest.approx(0.7)
    assert reference_preprocess([(0.3, "ZI"), (0.4, "IZ")]) == pytest.approx({"ZZ": 0.7})


def test_preprocess_drops_identity_and_signs():
    r = preprocess(Hamiltonian.from_terms([(-3.0, "II"), (-0.5, "XY")]))
    assert r.terms == ((0.5, P("XY")),)


def test_preprocess_rejects_identity_only():
    with pytest.raises(ValueError):
        preprocess(Hamiltonian.from_terms([(1.0, "III")]))


@settings(max_examples=80, deadline=None)
@given(hamiltonians())
def test_preprocess_matches_reference(terms):
    h = Hamiltonian.from_terms(terms)
    if not h.non_identity_terms():
        return
    got = {p.letters: w for w, p in preprocess(h).terms}
    want = reference_preprocess([(a, p.letters) for a, p in h.terms])
    assert got.keys() == want.keys()
    for k in got:
        assert got[k] == pytest.approx(want[k], rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(hamiltonians())
def test_preprocess_invariants(terms):
    h = Hamiltonian.from_terms(terms)
    if not h.non_identity_terms():
        return
    r = preprocess(h)
    words = [p.letters for _, p in r.terms]
    # mass is conserved and no partner is left to merge with
    assert sum(w for w, _ in r.terms) == pytest.approx(sum(abs(a) for a, _ in h.non_identity_terms()))
    assert all(not str_compatible(a, b) for i, a in enumerate(words) for b in words[i + 1:])
    # every original term is still covered by some reduced pattern
    for _, p in h.non_identity_terms():
        assert any(all(c == "I" or c == d for c, d in zip(p.letters, w)) for w in words)


def test_reduced_list_validation():
    with pytest.raises(ValueError):
        ReducedPauliList(2, ())
    with pytest.raises(ValueError):
        ReducedPauliList(2, ((0.0, P("XX")),))
    with pytest.raises(ValueError):
        ReducedPauliList(2, ((1.0, P("II")),))
    with pytest.raises(ValueError):
        ReducedPauliList(2, ((1.0, P("XX")), (2.0, P("XX"))))


# -- trie and normalization ------------------------------------------------------

def test_initial_trie_jw(h_jw):
    dd = build_initial(preprocess(h_jw))
    # root, 4 + 4 + 3 inner prefixes, terminal
    assert dd.vertex_count == 13
    finals = sorted(e.weight for v, _, e in dd.edges() if e.target == dd.terminal)
    assert finals[:4] == pytest.approx([0.045] * 4)
    assert finals[4] == pytest.approx(1.714, abs=0.01)
    inner = [e.weight for v, _, e in dd.edges() if e.target != dd.terminal]
    assert inner == [1.0] * len(inner)
    assert path_distribution(dd).keys() == {"YYXX", "YYYY", "XXXX", "XXYY", "ZZZZ"}


def test_initial_trie_small():
    dd = build_initial(ReducedPauliList(2, ((0.5, P("XX")),)))
    assert metrics(dd).vertex_count == 3
    assert path_distribution(dd) == {"XX": 0.5}
    dd = build_initial(ReducedPauliList(2, ((1.0, P("XX")), (1.0, P("XY")))))
    assert list(dd.out[dd.root]) == ["X"]
    child = dd.out[dd.root]["X"].target
    assert sorted(dd.out[child]) == ["X", "Y"]


def test_normalize_jw_root_weights(h_jw):
    dd = normalize(build_initial(preprocess(h_jw)))
    w = dd.root_weights()
    # reference values are truncated to three decimals
    assert w["Y"] == pytest.approx(0.048, abs=1e-3)
    assert w["X"] == pytest.approx(0.048, abs=1e-3)
    assert w["Z"] == pytest.approx(0.904, abs=1e-3)
    dd.validate()


def test_normalize_single_path_all_ones():
    dd = normalize(build_initial(ReducedPauliList(3, ((0.2, P("XYZ")),))))
    assert [e.weight for _, _, e in dd.edges()] == [1.0, 1.0, 1.0]


def test_normalize_zero_sum_rejected():
    dd = build_initial(ReducedPauliList(1, ((1.0, P("X")),)))
    dd.out[dd.root]["X"].weight = 0.0
    with pytest.raises(ValueError):
        normalize(dd)


@settings(max_examples=60, deadline=None)
@given(hamiltonians(n_max=6))
def test_normalize_preserves_relative_mass(terms):
    h = Hamiltonian.from_terms(terms)
    if not h.non_identity_terms():
        return
    r = preprocess(h)
    dist = path_distribution(normalize(build_initial(r)))
    total = sum(w for w, _ in r.terms)
    assert dist.keys() == {p.letters for _, p in r.terms}
    for w, p in r.terms:
        assert dist[p.letters] == pytest.approx(w / total, rel=1e-12)


# -- merging -----------------------------------------------------------------------

def test_merge_equivalent_jw(h_jw):
    before = normalize(build_initial(preprocess(h_jw)))
    after = merge_equivalent(before)
    assert str(metrics(after)) == "10 12 5"
    assert before.vertex_count == 13


def test_merge_equivalent_no_change():
    dd = normalize(build_initial(ReducedPauliList(2, ((1.0, P("XY")), (2.0, P("ZX"))))))
    assert merge_equivalent(dd) == dd


def test_merge_equivalent_shares_identical_subtrees():
    r = ReducedPauliList(3, ((1.0, P("XYZ")), (1.0, P("XZX")), (1.0, P("YYZ")), (1.0, P("YZX"))))
    before = normalize(build_initial(r))
    after = merge_equivalent(before)
    assert after.vertex_count < before.vertex_count
    # X and Y subtrees are identical, so the root's two children become one
    assert len({e.target for e in after.out[after.root].values()}) == 1
    b, a = path_distribution(before), path_distribution(after)
    assert a.keys() == b.keys()
    for k in a:
        assert a[k] == pytest.approx(b[k], abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(hamiltonians(n_max=6))
def test_merge_equivalent_preserves_distribution(terms):
    h = Hamiltonian.from_terms(terms)
    if not h.non_identity_terms():
        return
    before = normalize(build_initial(preprocess(h)))
    after = merge_equivalent(before)
    b, a = path_distribution(before), path_distribution(after)
    assert a.keys() == b.keys()
    for k in a:
        assert abs(a[k] - b[k]) <= 1e-12


def test_merge_keeps_near_equal_weights_apart():
    dd = DecisionDiagram(2)
    u, v = dd.add_vertex(1), dd.add_vertex(1)
    dd.out[dd.root] = {"X": Edge(u, 0.5), "Y": Edge(v, 0.5)}
    dd.out[u] = {"X": Edge(dd.terminal, 0.5), "Y": Edge(dd.terminal, 0.5)}
    dd.out[v] = {"X": Edge(dd.terminal, 0.5 + 1e-15), "Y": Edge(dd.terminal, 0.5 - 1e-15)}
    assert merge_equivalent(dd).vertex_count == 4


# -- identity removal ----------------------------------------------------------------

def _dd(n, out, layer):
    return DecisionDiagram(n, 0, 1, layer, out)


def test_combine_parallel_identity():
    dd = _dd(1, {0: {"I": Edge(1, 0.5), "X": Edge(1, 0.5)}, 1: {}}, {0: 0, 1: 1})
    out = remove_identities(dd)
    assert list(out.out[0]) == ["X"]
    assert out.out[0]["X"].weight == 1.0
    assert not out.out[0]["X"].virtual


def test_combine_parallel_picks_lightest():
    dd = _dd(1, {0: {"I": Edge(1, 0.2), "X": Edge(1, 0.5), "Z": Edge(1, 0.3)}, 1: {}},
             {0: 0, 1: 1})
    out = remove_identities(dd)
    assert out.out[0]["X"].weight == pytest.approx(0.5)
    assert out.out[0]["Z"].weight == pytest.approx(0.5)


def test_split_lonely_identity():
    dd = _dd(1, {0: {"I": Edge(1, 1.0)}, 1: {}}, {0: 0, 1: 1})
    out = remove_identities(dd)
    assert sorted(out.out[0]) == ["X", "Y", "Z"]
    for e in out.out[0].values():
        assert e.weight == pytest.approx(1 / 3) and e.virtual
    out.validate()


def test_merge_two_vertices_with_shared_child():
    layer = {0: 0, 2: 1, 3: 1, 4: 2, 5: 2, 6: 2, 1: 3}
    out = {
        0: {"I": Edge(2, 0.5), "Y": Edge(3, 0.5)},
        2: {"X": Edge(4, 1.0)},
        3: {"X": Edge(5, 0.5), "Y": Edge(6, 0.5)},
        4: {"X": Edge(1, 1.0)},
        5: {"Z": Edge(1, 1.0)},
        6: {"Y": Edge(1, 1.0)},
        1: {},
    }
    got = remove_identities(_dd(3, out, layer))
    got.validate()
    assert got.root_weights() == {"Y": 1.0}
    mid = got.out[0]["Y"].target
    assert {k: e.weight for k, e in got.out[mid].items()} == pytest.approx({"X": 0.75, "Y": 0.25})
    low = got.out[mid]["X"].target
    assert {k: e.weight for k, e in got.out[low].items()} == pytest.approx({"X": 0.5, "Z": 0.5})
    assert path_distribution(got) == pytest.approx({"YXX": 0.375, "YXZ": 0.375, "YYY": 0.25})
    assert got.vertex_count == 5


def test_superfluous_virtual_edges_pruned():
    h = Hamiltonian.from_terms([(1.0, "XI")])
    dd = build(h)
    assert path_distribution(dd) == {"XZ": 1.0}
    e = dd.out[dd.out[dd.root]["X"].target]["Z"]
    assert e.virtual
    # without the terms nothing is pruned
    raw = remove_identities(normalize(build_initial(preprocess(h))))
    assert sorted(path_distribution(raw)) == ["XX", "XY", "XZ"]


def test_pruning_keeps_needed_virtual_edges():
    # IX and IZ need two different letters below the split
    dd = DecisionDiagram(2)
    v = dd.add_vertex(1)
    dd.out[dd.root] = {"I": Edge(v, 1.0)}
    dd.out[v] = {"X": Edge(dd.terminal, 0.5), "Z": Edge(dd.terminal, 0.5)}
    out = remove_identities(dd, [P("IX"), P("IZ")])
    assert list(out.out[out.root]) == ["Z"]
    assert sorted(out.out[v]) == ["X", "Z"]


# -- full pipeline ---------------------------------------------------------------------

def test_build_metrics_bk(h_bk):
    assert str(metrics(build(h_bk))) == "7 7 2"


def test_build_metrics_jw(h_jw):
    assert str(metrics(build(h_jw))) == "10 12 5"


def test_build_bk_root_weight_matches_reference(h_bk):
    ref = reference_preprocess([(a, p.letters) for a, p in h_bk.terms])
    x_mass = sum(w for k, w in ref.items() if k[0] == "X")
    w = build(h_bk).root_weights()
    assert w["X"] == pytest.approx(x_mass / sum(ref.values()), rel=1e-12)
    assert w["X"] + w["Z"] == pytest.approx(1.0)


def test_build_single_term():
    dd = build(Hamiltonian.from_terms([(0.7, "XYZ")]))
    assert path_distribution(dd) == {"XYZ": 1.0}


@settings(max_examples=80, deadline=None)
@given(hamiltonians(n_max=6))
def test_build_invariants(terms):
    h = Hamiltonian.from_terms(terms)
    if not h.non_identity_terms():
        return
    dd = build(h)
    dd.validate()
    dist = path_distribution(dd)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
    assert all(len(w) == h.n and "I" not in w for w in dist)
    assert np.all(zeta_many(dd, [p for _, p in h.non_identity_terms()]) > 0)
