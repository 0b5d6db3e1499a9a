import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PROJECTS, catalog, project
from oracles import LETTERS, MODELS, pinch_length
from randgraphs import random_graph, random_path

from bassserre.base_groups import inverse_word, parse_word
from bassserre.errors import AxisNotInvariant
from bassserre.graph_of_groups import transport
from bassserre.jsj_engine import NO_SUB
from bassserre.tree_action import act, distance, element_type, fixes, invariant_line_core, pair_type, quotient_core, subgroup_type

CORPUS = [random_graph(seed) for seed in range(20)] + [project(p).splitting(n).gog for p, n in MODELS]


def _tr(a, b, x):
    return transport(a.gog, b.gog, x)


def _closed(g, rng, letters):
    while True:
        p = random_path(rng, g, letters)
        if g.path_end(p) == g.base:
            return g.nf(p)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(0, len(CORPUS) - 1), r=st.randoms(use_true_random=False))
def test_conjugation_invariance(k, r):
    g = CORPUS[k]
    P = g.pi1
    w = _closed(g, r, 4)
    u = _closed(g, r, 4)
    a = element_type(w, g)
    b = element_type(P.mul(P.mul(u, w), P.inv(u)), g)
    assert a.kind == b.kind
    assert a.length == b.length


@settings(max_examples=60, deadline=None)
@given(k=st.integers(0, len(CORPUS) - 1), r=st.randoms(use_true_random=False))
def test_element_type_geometry(k, r):
    g = CORPUS[k]
    w = _closed(g, r, 4)
    t = element_type(w, g)
    if t.kind == "Elliptic":
        assert fixes(g, w, t.fixed_vertex)
    else:
        P = t.axis_point
        assert distance(g, P, act(g, w, P)) == t.length


def _flat_words(rng, letters, n):
    out = []
    for _ in range(n):
        w = tuple((rng.choice(letters), rng.choice((1, -1))) for _ in range(rng.randint(1, 3)))
        out.append(w)
    return out


def _h_words(gens, max_len):
    letters = [(i, e) for i in range(len(gens)) for e in (1, -1)]
    for n in range(1, max_len + 1):
        for w in itertools.product(letters, repeat=n):
            if any(a[0] == b[0] and a[1] == -b[1] for a, b in zip(w, w[1:])):
                continue
            flat = ()
            for i, e in w:
                flat += gens[i] if e > 0 else inverse_word(gens[i])
            yield flat


MODEL_KEYS = sorted(MODELS)


@settings(max_examples=40, deadline=None)
@given(key=st.sampled_from(MODEL_KEYS), seed=st.integers(0, 10_000))
def test_subgroup_type_brute_force(key, seed):
    rng = random.Random(seed)
    s = project(key[0]).splitting(key[1])
    P = s.gog.pi1
    names = LETTERS[key]
    vertex_only = [n for n in names if not n.startswith("t")]
    # bias towards elliptic subgroups half of the time
    pool = vertex_only if rng.random() < 0.5 and key[1] != "N" else list(names)
    gens = _flat_words(rng, pool, rng.randint(1, 2))
    res = subgroup_type([P.evaluate(w) for w in gens], s)
    if res.kind == "Elliptic":
        for w in _h_words(gens, 5):
            assert pinch_length(MODELS[key], w) == 0, w
    else:
        assert element_type(res.witness, s).kind == "Hyperbolic"


def test_subgroup_type_examples():
    s = project("guirardel").splitting("T1")
    P = s.gog.pi1
    ev = lambda t: P.evaluate(parse_word(t))
    assert subgroup_type([ev("a2"), ev("x")], s).kind == "Elliptic"
    # elliptic generators with a hyperbolic product
    r = subgroup_type([ev("x"), ev("te*x*te^-1")], s)
    assert r.kind == "Hyperbolic" and r.witness_label == "s0*s1"
    assert subgroup_type([ev("te*a2*te^-1"), ev("a3")], s).kind == "Elliptic"


def _mirror(t):
    return t[::-1]


@pytest.mark.parametrize("name", PROJECTS)
def test_pair_symmetry(name):
    c = catalog(name)
    for a, b in itertools.combinations(c.splittings, 2):
        assert pair_type(a, b, _tr) == _mirror(pair_type(b, a, _tr))


@pytest.mark.parametrize("name", PROJECTS)
def test_no_sub_splitting_pairs(name):
    c = catalog(name)
    flagged = [s for s in c.splittings if s.has(NO_SUB)]
    for a, b in itertools.permutations(flagged, 2):
        assert pair_type(a, b, _tr) in ("EE", "HH")


def test_no_sub_flag_present():
    assert all(s.has(NO_SUB) for s in catalog("torus").splittings)
    assert all(s.has(NO_SUB) for s in catalog("klein").splittings)


CIRCLES = [
    ("torus", "Ta", ["te", "a"]),
    ("torus", "Ta", ["te^2", "a*te"]),
    ("torus", "Ta", ["te^2", "te^3"]),
    ("torus", "Tb", ["te^3*b"]),
    ("guirardel", "T1", ["te*a2", "a3"]),
    ("guirardel", "T2", ["te^2*a1"]),
    ("rem32", "Sa", ["te", "a"]),
    ("rem32", "N", ["b*h"]),
    ("rem32", "N", ["b*h*b*h", "b*h*b*h*b*h"]),
]


@pytest.mark.parametrize("proj,name,hs", CIRCLES)
def test_circle_length_brute_minimum(proj, name, hs):
    s = project(proj).splitting(name)
    P = s.gog.pi1
    gens = [parse_word(h) for h in hs]
    core = invariant_line_core([P.evaluate(w) for w in gens], s)
    assert core.variant == "Circle" and not core.dihedral
    lengths = [pinch_length(MODELS[(proj, name)], w) for w in _h_words(gens, 3)]
    assert core.k == min(n for n in lengths if n > 0)


def test_line_core_vertex_and_errors():
    s = project("guirardel").splitting("T1")
    P = s.gog.pi1
    assert invariant_line_core([P.gen("a2"), P.gen("x")], s).variant == "Vertex"
    with pytest.raises(AxisNotInvariant):
        invariant_line_core([P.gen("te"), P.gen("x")], s)


def test_dihedral_segment_and_circle(dinf):
    s = dinf.splitting("S")
    P = s.gog.pi1
    x, y = P.gen("x"), P.gen("y")
    seg = invariant_line_core([x, y], s)
    assert seg.variant == "Segment" and seg.dihedral and seg.k == 1
    assert [[P.word_of(g) for g in st] for st in seg.edge_stabilizers] == [[]]
    circ = invariant_line_core([P.mul(x, y)], s)
    assert circ.variant == "Circle" and circ.k == 2


def test_quotient_core():
    s = project("torus").splitting("Ta")
    P = s.gog.pi1
    q = quotient_core([P.gen("te"), P.gen("a")], s)
    assert q.summary() == {"vertices": 1, "edges": 1}
    s = project("rem32").splitting("N")
    P = s.gog.pi1
    q = quotient_core([P.gen("b"), P.gen("h")], s)
    assert q.summary() == {"vertices": 2, "edges": 1}
