import ast
import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bassserre.base_groups import (
    Free,
    FreeAbelian,
    Subgroup,
    coset_transversal,
    cyclic,
    dihedral,
    element_order,
    format_word,
    free_reduce,
    from_permutations,
    inverse_word,
    is_identity,
    klein_four,
    parse_word,
    smith_normal_form,
    subgroup_membership,
    symmetric3,
)
from bassserre.errors import InvalidGroup, UnknownGenerator


def _backends():
    return {
        "Z/6": from_permutations([("a", (1, 0, 2, 3, 4)), ("b", (0, 1, 3, 4, 2))], name="Z/6"),
        "S3": symmetric3(("a", "b")),
        "D4": dihedral(4, ("a", "b")),
        "Z2": FreeAbelian(2, names=["a", "b"]),
        "Z+Z/4": FreeAbelian(1, (4,), names=["a", "b"]),
        "F2": Free(2, names=["a", "b"]),
    }


BACKENDS = _backends()
letter = st.tuples(st.sampled_from(["a", "b"]), st.sampled_from([1, -1]))
word = st.lists(letter, max_size=6).map(tuple)


@pytest.mark.parametrize("name", sorted(BACKENDS))
@settings(max_examples=60, deadline=None)
@given(u=word, v=word)
def test_identity_and_canonical_forms(name, u, v):
    G = BACKENDS[name]
    assert is_identity(u + inverse_word(u), G)
    same = G.evaluate(u) == G.evaluate(v)
    assert is_identity(u + inverse_word(v), G) == same


def test_canonical_forms():
    assert cyclic(5).evaluate(parse_word("a^7")) == 2
    Z = FreeAbelian(1, (4,), names=["a", "b"])
    assert Z.evaluate(parse_word("b^-1*a^2")) == (2, 3)
    F = Free(2, names=["a", "b"])
    assert F.evaluate(parse_word("a*b*b^-1*a")) == (("a", 1), ("a", 1))


def test_word_syntax_round_trip():
    w = parse_word("a*b^-2*c^3")
    assert w == (("a", 1), ("b", -1), ("b", -1), ("c", 1), ("c", 1), ("c", 1))
    assert parse_word(format_word(w)) == w
    assert parse_word("1") == ()
    assert free_reduce(parse_word("a*b*b^-1*a^-1")) == ()


def test_unknown_generator():
    with pytest.raises(UnknownGenerator):
        cyclic(3, "a").evaluate(parse_word("z"))


def test_bad_tables_rejected():
    with pytest.raises(InvalidGroup):
        FreeAbelian(0, (4, 6))
    with pytest.raises(InvalidGroup):
        from bassserre.base_groups import Finite

        Finite([[0, 1], [0, 1]], [("a", 1)])


@pytest.mark.parametrize("name", sorted(BACKENDS))
@settings(max_examples=50, deadline=None)
@given(gens=st.lists(word, min_size=1, max_size=2), q=word)
def test_membership_witness_sound(name, gens, q):
    G = BACKENDS[name]
    H = Subgroup(G, tuple(G.evaluate(w) for w in gens))
    wit = subgroup_membership(q, H)
    if wit is None:
        return
    image = ()
    for h, e in wit:
        gw = gens[int(h[1:])]
        image += gw if e > 0 else inverse_word(gw)
    assert is_identity(image + inverse_word(q), G)


def test_membership_negative_cases():
    F = Free(2, names=["a", "b"])
    H = Subgroup(F, (F.evaluate(parse_word("a^2")), F.evaluate(parse_word("b"))))
    assert subgroup_membership(parse_word("a"), H) is None
    assert subgroup_membership(parse_word("b*a^4*b^-1"), H) is not None
    Z = FreeAbelian(2, names=["a", "b"])
    K = Subgroup(Z, ((2, 0), (0, 3)))
    assert subgroup_membership(parse_word("a^2*b^-3"), K) is not None
    assert subgroup_membership(parse_word("a*b^3"), K) is None


def _matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def _det(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    return sum((-1) ** j * m[0][j] * _det([r[:j] + r[j + 1 :] for r in m[1:]]) for j in range(n))


def test_snf_postcondition_random():
    rng = random.Random(7)
    for _ in range(200):
        r, c = rng.randint(1, 4), rng.randint(1, 4)
        m = [[rng.randint(-9, 9) for _ in range(c)] for _ in range(r)]
        U, D, V = smith_normal_form(m)
        assert _matmul(_matmul(U, m), V) == D
        assert abs(_det(U)) == 1 and abs(_det(V)) == 1
        diag = [D[i][i] for i in range(min(r, c))]
        assert all(D[i][j] == 0 for i in range(r) for j in range(c) if i != j)
        assert all(d >= 0 for d in diag)
        for a, b in zip(diag, diag[1:]):
            assert (b == 0) if a == 0 else (b % a == 0)


def _index_brute(vs):
    """Index of the lattice spanned by vs in Z^2, by counting classes in a box."""
    if len(vs) < 2:
        return None
    best = None
    for v, w in itertools.combinations(vs, 2):
        d = v[0] * w[1] - v[1] * w[0]
        if d:
            best = abs(d) if best is None else math.gcd(best, abs(d))
    if best is None:
        return None

    def member(p):
        # p in span over Z: try each basis pair with Cramer's rule
        v, w = vs
        d = v[0] * w[1] - v[1] * w[0]
        s = Fraction(p[0] * w[1] - p[1] * w[0], d)
        t = Fraction(v[0] * p[1] - v[1] * p[0], d)
        return s.denominator == 1 and t.denominator == 1

    classes = []
    for p in itertools.product(range(best), repeat=2):
        if not any(member((p[0] - q[0], p[1] - q[1])) for q in classes):
            classes.append(p)
    return len(classes)


def test_coset_transversal_against_enumeration():
    Z = FreeAbelian(2, names=["a", "b"])
    vecs = [v for v in itertools.product(range(-3, 4), repeat=2)]
    checked = 0
    for n in (0, 1, 2):
        for vs in itertools.combinations(vecs, n):
            want = _index_brute(list(vs))
            if want is not None and want > 20:
                continue
            H = Subgroup(Z, tuple(vs))
            T = coset_transversal(H, bound=20)
            assert T.index == want
            assert T.complete == (want is not None)
            if want is not None:
                assert len(T.reps) == want
                keys = {H.left_rep(Z.evaluate(r))[0] for r in T.reps}
                assert len(keys) == want
            checked += 1
    assert checked > 1000


def _perm_order(p):
    seen, out = set(), 1
    for i in range(len(p)):
        n, j = 0, i
        while j not in seen:
            seen.add(j)
            j = p[j]
            n += 1
        if n:
            out = out * n // math.gcd(out, n)
    return out


S4 = from_permutations([("a", (1, 0, 2, 3)), ("b", (1, 2, 3, 0))], name="S4")
FINITE = [cyclic(n, "a") for n in range(1, 25)] + [symmetric3(), klein_four(), dihedral(4), dihedral(6), dihedral(12), S4]


@pytest.mark.parametrize("G", FINITE, ids=lambda G: f"{G.name}:{G.n}")
def test_element_order_brute(G):
    assert G.n <= 24
    for x in G.elements():
        lab = G.labels[x]
        if lab.startswith("("):
            want = _perm_order(ast.literal_eval(lab))
        else:
            k = int(lab.split("^")[1])
            want = G.n // math.gcd(G.n, k)
        # independent power iteration on words
        w = G.word_of(x)
        n = 1
        while not is_identity(w * n, G):
            n += 1
        assert want == n
        assert element_order(w, G) == want


def test_element_order_infinite():
    Z = FreeAbelian(1, (2,), names=["a", "b"])
    assert element_order(parse_word("a"), Z) is None
    assert element_order(parse_word("b"), Z) == 2
    assert element_order(parse_word("a*b^-1*a^-1"), Free(2, names=["a", "b"])) is None
