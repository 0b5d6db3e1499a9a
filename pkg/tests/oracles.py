"""Brute-force reference classifiers, written without the package's normal forms.

Words are tuples of (name, +-1) over a splitting's flat alphabet.  Each
vertex group is modelled as (free abelian on some names) * (cyclic of
order n on one name), which covers every bundled splitting.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Tuple


@dataclass(frozen=True)
class VertexModel:
    abelian: Tuple[str, ...]
    torsion: Tuple[Tuple[str, int], ...] = ()
    # names whose abelian span is the edge group; torsion never lies in it
    edge: Tuple[str, ...] = ()


def fp_normal(word, m: VertexModel):
    """Free product normal form: tuple of syllables."""
    tors = dict(m.torsion)
    out = []
    for name, s in word:
        if name in tors:
            syl = ("T", name, s % tors[name])
        else:
            syl = ("A", tuple(s if n == name else 0 for n in m.abelian))
        out.append(syl)
        # merge and cancel until stable
        while len(out) >= 2 and out[-1][0] == out[-2][0] and (out[-1][0] == "A" or out[-1][1] == out[-2][1]):
            b, a = out.pop(), out.pop()
            if a[0] == "A":
                merged = ("A", tuple(x + y for x, y in zip(a[1], b[1])))
                if any(merged[1]):
                    out.append(merged)
            else:
                k = (a[2] + b[2]) % tors[a[1]]
                if k:
                    out.append(("T", a[1], k))
        if out and ((out[-1][0] == "A" and not any(out[-1][1])) or (out[-1][0] == "T" and out[-1][2] == 0)):
            out.pop()
    return tuple(out)


def in_edge_group(word, m: VertexModel) -> bool:
    nf = fp_normal(word, m)
    if not nf:
        return True
    if len(nf) > 1 or nf[0][0] != "A":
        return False
    return all(x == 0 for n, x in zip(m.abelian, nf[0][1]) if n not in m.edge)


def edge_part(word, m: VertexModel) -> Dict[str, int]:
    nf = fp_normal(word, m)
    if not nf:
        return {}
    return {n: x for n, x in zip(m.abelian, nf[0][1]) if x}


@dataclass(frozen=True)
class HNNModel:
    vertex: VertexModel
    stable: str
    # maps are the identity on the edge group names


@dataclass(frozen=True)
class AmalgamModel:
    left: VertexModel
    right: VertexModel
    # left edge name -> right edge name
    identify: Tuple[Tuple[str, str], ...]


def _hnn_min_length(model: HNNModel, word) -> int:
    # cyclic list of (sign, syllable following the letter)
    t = model.stable
    if not any(n == t for n, _ in word):
        return 0
    # rotate so the word starts with a stable letter
    i = next(k for k, (n, _) in enumerate(word) if n == t)
    w = tuple(word[i:]) + tuple(word[:i])
    items = []
    for n, s in w:
        if n == t:
            items.append([s, ()])
        else:
            items[-1][1] = items[-1][1] + ((n, s),)
    start = tuple((s, g) for s, g in items)

    @lru_cache(maxsize=None)
    def best(state):
        n = len(state)
        if n == 0:
            return 0
        found = n
        for i in range(n):
            j = (i + 1) % n
            s1, g = state[i]
            s2, g2 = state[j]
            if s1 != -s2 or not in_edge_group(g, model.vertex):
                continue
            if n == 1:
                continue
            if n == 2:
                found = min(found, 0)
                continue
            # letters i and j vanish; g and g2 join the syllable before i
            h = (i - 1) % n
            rest = list(state)
            rest[h] = (rest[h][0], rest[h][1] + g + g2)
            keep = tuple(rest[k] for k in range(n) if k not in (i, j))
            found = min(found, best(keep))
        return found

    return best(start)


def _amalgam_min_length(model: AmalgamModel, word) -> int:
    left_names = set(model.left.abelian) | {n for n, _ in model.left.torsion}
    side = lambda n: "L" if n in left_names else "R"
    runs = []
    for n, s in word:
        if runs and runs[-1][0] == side(n):
            runs[-1][1] += ((n, s),)
        else:
            runs.append([side(n), ((n, s),)])
    if len(runs) > 1 and runs[0][0] == runs[-1][0]:
        runs[0][1] = runs[-1][1] + runs[0][1]
        runs.pop()
    l2r = dict(model.identify)
    r2l = {b: a for a, b in model.identify}
    start = tuple((s, g) for s, g in runs)

    def carry(sd, g):
        m = model.left if sd == "L" else model.right
        part = edge_part(g, m)
        table = l2r if sd == "L" else r2l
        return tuple((table[n], 1 if x > 0 else -1) for n, x in part.items() for _ in range(abs(x)))

    @lru_cache(maxsize=None)
    def best(state):
        n = len(state)
        if n <= 1:
            return 0
        found = n
        for i in range(n):
            sd, g = state[i]
            m = model.left if sd == "L" else model.right
            if not in_edge_group(g, m):
                continue
            moved = carry(sd, g)
            h, j = (i - 1) % n, (i + 1) % n
            if h == j:
                found = min(found, 0)
                continue
            merged = (state[h][0], state[h][1] + moved + state[j][1])
            out = tuple(merged if k == h else state[k] for k in range(n) if k not in (i, j))
            found = min(found, best(out))
        return found

    return best(start)


def pinch_length(model, word) -> int:
    """Cyclically reduced edge length by exhaustive pinch search."""
    if isinstance(model, HNNModel):
        return _hnn_min_length(model, tuple(word))
    return _amalgam_min_length(model, tuple(word))


def pinch_classify(model, word) -> Tuple[str, int]:
    n = pinch_length(model, word)
    return ("Elliptic", 0) if n == 0 else ("Hyperbolic", n)


MODELS = {
    ("torus", "Ta"): HNNModel(VertexModel(("a",), edge=("a",)), "te"),
    ("torus", "Tb"): HNNModel(VertexModel(("b",), edge=("b",)), "te"),
    ("guirardel", "T1"): HNNModel(VertexModel(("a2", "a3"), (("x", 2),), ("a2", "a3")), "te"),
    ("guirardel", "T2"): HNNModel(VertexModel(("a1", "a3"), (("x", 2),), ("a1", "a3")), "te"),
    ("guirardel", "T3"): HNNModel(VertexModel(("a1", "a2"), (("x", 2),), ("a1", "a2")), "te"),
    ("rem32", "Sa"): HNNModel(VertexModel(("a",), (("h", 3),), ("a",)), "te"),
    ("rem32", "Sb"): HNNModel(VertexModel(("b",), (("h", 3),), ("b",)), "te"),
    ("rem32", "N"): AmalgamModel(
        VertexModel(("Z.a", "b"), (), ("Z.a",)),
        VertexModel(("K.a",), (("h", 3),), ("K.a",)),
        (("Z.a", "K.a"),),
    ),
}

# three letters per splitting, stable letter and torsion first
LETTERS = {
    ("torus", "Ta"): ("te", "a"),
    ("torus", "Tb"): ("te", "b"),
    ("guirardel", "T1"): ("te", "x", "a2"),
    ("guirardel", "T2"): ("te", "x", "a1"),
    ("guirardel", "T3"): ("te", "x", "a1"),
    ("rem32", "Sa"): ("te", "h", "a"),
    ("rem32", "Sb"): ("te", "h", "b"),
    ("rem32", "N"): ("h", "Z.a", "b"),
}


def brute_order(G, x, bound=64):
    """Order by power iteration, None past the bound."""
    y = x
    for n in range(1, bound + 1):
        if G.is_identity_element(y):
            return n
        y = G.mul(y, x)
    return None
