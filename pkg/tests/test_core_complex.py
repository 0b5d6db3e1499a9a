import itertools
from functools import lru_cache

import pydot
import pytest

from conftest import catalog

from bassserre.core_complex import (
    build_core_complex,
    complex_fundamental_presentation,
    complex_to_dot,
    cut_along,
    essential_curves,
    extract_enclosing,
    link_shapes,
    literally_equal,
    priority_core,
    prune_squares,
    subdivide,
    tracks,
)
from bassserre.errors import NotAForest, NotHyperbolicPair
from bassserre.graph_of_groups import fingerprint, from_ambient, is_refinement
from bassserre.jsj_engine import enclose_pair
from bassserre.tree_action import subgroup_type

HH_PAIRS = [
    (p, a.name, b.name)
    for p in ("torus", "guirardel", "klein", "rem32")
    for a, b in itertools.permutations(catalog(p).splittings, 2)
    if {a.name, b.name} != {"Sa", "N"} and {a.name, b.name} != {"Sb", "N"}
]


def _pair(p, a, b):
    c = catalog(p)
    return c, c.reordered([a]).splittings[0], c.reordered([b]).splittings[0]


@lru_cache(maxsize=None)
def _complex(p, a, b, priority="first"):
    _, s1, s2 = _pair(p, a, b)
    return build_core_complex(s1, s2, priority=priority)


def _equivalent(g, h):
    return is_refinement(g, h) and is_refinement(h, g)


@pytest.mark.parametrize("p,a,b", HH_PAIRS)
def test_checks_hold(p, a, b):
    z = _complex(p, a, b)
    for y in (z, subdivide(z)):
        res = y.check()
        assert res["cocycle"] and res["bands"]
        # closed surfaces: every 0-cell link is a single circle
        assert all(shape == ["circle"] for shape in res["links"].values())


@pytest.mark.parametrize("p,a,b", HH_PAIRS)
def test_fundamental_group_preserved(p, a, b):
    c = catalog(p)
    z = _complex(p, a, b)
    want = fingerprint(c.ambient)
    assert fingerprint(complex_fundamental_presentation(z)) == want
    assert fingerprint(complex_fundamental_presentation(subdivide(z))) == want


@pytest.mark.parametrize("p,a,b", HH_PAIRS)
@pytest.mark.parametrize("priority", ["first", "second"])
def test_priority_law(p, a, b, priority):
    _, s1, s2 = _pair(p, a, b)
    z = _complex(p, a, b, priority)
    want, other = (s1, s2) if priority == "first" else (s2, s1)
    cut = cut_along(z, priority_core(z))
    assert literally_equal(cut, want.gog)
    # the comparison is not vacuous
    assert not literally_equal(cut, other.gog)


def test_subdivision_counts(torus):
    z = _complex("torus", "Ta", "Tb")
    s = subdivide(z)
    assert s.counts() == {"vertices": 4, "edges": 8, "horizontal": 4, "vertical": 4, "squares": 4}


def test_collar_tracks_in_subdivision(torus):
    c = catalog("torus")
    s = subdivide(_complex("torus", "Ta", "Tb"))
    ts = tracks(s, "horizontal") + tracks(s, "vertical")
    assert len(ts) == 4
    for t in ts:
        assert t.two_sided and len(t.squares) == 2
        assert fingerprint(cut_along(s, t)) == fingerprint(c.ambient)


def test_single_vertex_presentation(torus):
    P = complex_fundamental_presentation(_complex("torus", "Ta", "Tb"))
    assert len(P.gens) == 12
    fp = fingerprint(P)
    assert (fp.rank, fp.torsion) == (2, ())


def test_not_hyperbolic_pair(rem32):
    with pytest.raises(NotHyperbolicPair):
        build_core_complex(rem32.splitting("N"), rem32.splitting("Sa"))


def test_prune_annulus(guirardel):
    c, T1, T2 = _pair("guirardel", "T1", "T2")
    T3 = c.reordered(["T3"]).splittings[0]
    raw = extract_enclosing(_complex("guirardel", "T1", "T2"), T1, T2)
    z3 = build_core_complex(raw.decomposition, T3, check=False)
    assert all(shape == ["segment"] for shape in link_shapes(z3).values())
    g = prune_squares(z3, T3)
    assert len(g.edges) == 1 and fingerprint(g) == fingerprint(c.ambient)
    with pytest.raises(NotAForest):
        prune_squares(_complex("guirardel", "T1", "T2"), T2)


def test_essential_curves(guirardel):
    c, T1, T2 = _pair("guirardel", "T1", "T2")
    e = extract_enclosing(_complex("guirardel", "T1", "T2"), T1, T2)
    curves = essential_curves(e)
    kinds = sorted(d["crosses"] for d, _ in curves)
    assert kinds == ["horizontal", "vertical"]
    for d, s in curves:
        assert d["curve"] == "circle"
        assert fingerprint(s.gog) == fingerprint(c.ambient)
    horizontal = next(s for d, s in curves if d["crosses"] == "horizontal")
    assert _equivalent(horizontal.gog, T1.gog)


def test_rigid_enclosing(guirardel):
    c, T1, T2 = _pair("guirardel", "T1", "T2")
    e = enclose_pair(T1, T2, c)
    assert "rigid=True" in e.notes
    g = e.decomposition
    S = [from_ambient(g, x) for x in e.S]
    assert subgroup_type(S, g).kind == "Elliptic"


def test_klein_orbifold(klein):
    c = catalog("klein")
    e = enclose_pair(*c.splittings, c)
    o = e.orbifold
    assert not o.orientable and o.name() == "Klein bottle"
    assert o.boundary <= 4 and o.euler == 0


@pytest.mark.parametrize("p,a,b", HH_PAIRS[:4])
def test_dot_parses(p, a, b):
    z = _complex(p, a, b)
    graphs = pydot.graph_from_dot_data(complex_to_dot(z))
    assert graphs and len(graphs) == 1
    names = {n.get_name().strip('"') for n in graphs[0].get_nodes()}
    assert {c.id for c in z.of_kind("vertex")} <= names
