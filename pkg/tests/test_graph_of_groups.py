import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import catalog, project
from randgraphs import finite_homs, path_image, random_graph, random_path

from bassserre.base_groups import FreeAbelian, cyclic, dihedral, parse_word, symmetric3
from bassserre.core_complex import build_core_complex, extract_enclosing
from bassserre.errors import Disconnected, NonInjectiveEdgeMap
from bassserre.graph_of_groups import (
    GraphOfGroups,
    collapse_edge,
    cyclically_reduce,
    edge,
    fingerprint,
    inclusion_edge,
    is_refinement,
    make_reduced,
    one_edge_splitting,
    presentation,
    reduce_word,
    trivial_group,
    validate,
)
from bassserre.jsj_engine import refine_to_minimal, trivial_decomposition

CORPUS = [random_graph(seed) for seed in range(40)]
TARGETS = [symmetric3(("p", "q")), dihedral(4, ("p", "q")), cyclic(4, "p")]


@pytest.mark.parametrize("seed", range(0, 40, 2))
def test_britton_soundness(seed):
    g = CORPUS[seed]
    rng = random.Random(seed)
    homs = [(T, h) for T in TARGETS for h in finite_homs(g, T, rng, limit=4)]
    assert homs
    for _ in range(25):
        p = random_path(rng, g)
        q = reduce_word(p, g)
        assert q[0] == p[0] and g.path_end(q) == g.path_end(p)
        assert g.edge_length(q) <= g.edge_length(p)
        assert reduce_word(q, g) == q
        for T, h in homs:
            assert path_image(g, T, h, p) == path_image(g, T, h, q)


def test_britton_pinches_hnn():
    # <a, t | t a t^-1 = a^2> with the pinch t^-1 a^2 t = a
    Z = FreeAbelian(1, names=["a"])
    C = FreeAbelian(1, names=["c"])
    g = GraphOfGroups([("v", Z)], [edge("t", "v", "v", C, Z, Z, {"c": parse_word("a^2")}, {"c": parse_word("a")})], "v", "BS12")
    p = ("v", (0,), ("t", -1), (2,), ("t", 1), (0,))
    assert reduce_word(p, g) == ("v", (1,))
    p = ("v", (0,), ("t", 1), (2,), ("t", -1), (0,))
    assert reduce_word(p, g) == ("v", (4,))
    p = ("v", (0,), ("t", -1), (1,), ("t", 1), (0,))
    assert g.edge_length(reduce_word(p, g)) == 2


def _closed(g, rng, letters):
    while True:
        p = random_path(rng, g, letters)
        if g.path_end(p) == g.base:
            return p


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 39), r=st.randoms(use_true_random=False))
def test_translation_length_conjugacy_invariant(seed, r):
    g = CORPUS[seed]
    w = _closed(g, r, 4)
    u = _closed(g, r, 4)
    conj = g.concat(g.concat(u, w), g.path_inverse(u))
    a, _ = cyclically_reduce(w, g)
    b, _ = cyclically_reduce(conj, g)
    assert g.edge_length(a) == g.edge_length(b)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 39), r=st.randoms(use_true_random=False))
def test_translation_length_homogeneous(seed, r):
    g = CORPUS[seed]
    w = _closed(g, r, 4)
    L = g.translation_length(w)
    p = w
    for n in range(2, 5):
        p = g.concat(p, w)
        if L > 0:
            assert g.translation_length(p) == n * L
        else:
            assert g.translation_length(p) == 0


def test_cyclic_reduce_conjugator():
    g = project("torus").splitting("Ta").gog
    P = g.pi1
    w = P.evaluate(parse_word("te*a*te^-1*a*te*a^-1*te^-1"))
    q, u = g.cyclic_reduce(w)
    assert g.nf(g.concat(g.concat(u, q), g.path_inverse(u))) == w


@pytest.mark.parametrize("seed", range(40))
def test_edits_preserve_fingerprint(seed):
    g = CORPUS[seed]
    fp = fingerprint(g)
    for e in sorted(g.edges):
        assert fingerprint(collapse_edge(g, e)) == fp
        assert fingerprint(one_edge_splitting(g, e)) == fp
    r, _ = make_reduced(g)
    assert fingerprint(r) == fp
    # idempotent
    r2, again = make_reduced(r)
    assert again == [] and r2.describe() == r.describe()


def test_collapse_amalgam_into_vertex():
    Z = FreeAbelian(1, names=["a"])
    Z2 = FreeAbelian(2, names=["b", "c"])
    g = GraphOfGroups([("u", Z), ("w", Z2)], [edge("e", "u", "w", Z, Z, Z2, {"a": parse_word("a")}, {"a": parse_word("b")})], "u", "g")
    # the edge fills u, so u folds into w
    h = collapse_edge(g, "e")
    assert list(h.vertices) == ["w"] and not h.edges
    assert fingerprint(h) == fingerprint(Z2)


def test_refinement_reflexive_transitive():
    c = catalog("guirardel")
    T1, T2, T3 = c.splittings
    raw = extract_enclosing(build_core_complex(T1, T2), T1, T2).decomposition
    fine = refine_to_minimal(raw, c.reordered(["T3"]))
    top = trivial_decomposition(c.ambient)
    chain = [fine, raw, top]
    for g in chain:
        assert is_refinement(g, g)
    assert is_refinement(fine, raw)
    assert is_refinement(raw, top)
    assert is_refinement(fine, top)
    # the amalgam over <a3> is not refined by T1's HNN
    assert not is_refinement(T1.gog, raw)


def test_presentation_of_hnn():
    g = project("klein").splitting("S1").gog
    P = presentation(g)
    assert P.abelianization() == (1, (2,))


def test_validation():
    Z = FreeAbelian(1, names=["a"])
    g = GraphOfGroups([("u", Z), ("w", Z)], [inclusion_edge("e", "u", "w", Z, Z, Z)], "u", "g")
    rep = validate(g)
    assert rep.valid and rep.maximal_tree == ["e"]
    with pytest.raises(Disconnected):
        validate(GraphOfGroups([("u", Z), ("w", Z)], [], "u", "bad"))
    # Z^2 *_Z Z^2 with the generator sent to the identity on one side
    A = FreeAbelian(2, names=["a1", "a2"])
    B = FreeAbelian(2, names=["b1", "b2"])
    bad = GraphOfGroups([("u", A), ("w", B)], [edge("e", "u", "w", Z, A, B, {"a": parse_word("a1")}, {"a": ()})], "u", "bad")
    with pytest.raises(NonInjectiveEdgeMap):
        validate(bad)


def test_trivial_edge_group_graph():
    T = trivial_group()
    A, B = cyclic(2, "x"), cyclic(3, "y")
    g = GraphOfGroups([("u", A), ("w", B)], [inclusion_edge("e", "u", "w", T, A, B)], "u", "g")
    fp = fingerprint(g)
    assert fp.rank == 0 and fp.torsion == (6,)
    # x -> involution or 1, y -> element of order dividing 3
    assert dict(fp.hom_counts)["S3"] == 4 * 3
