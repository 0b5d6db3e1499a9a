"""Graphs of groups and the fundamental group as an element algebra.

Elements of pi1 are path words ``(v0, g0, L1, g1, ..., Ln, gn)``: a start
vertex, vertex-group syllables and directed edge letters ``(edge, +-1)``.
An edge ``e`` runs from ``src`` to ``dst`` and carries maps
``src_map: C -> G_src`` and ``dst_map: C -> G_dst`` with the relation

    e * dst_map(c) * e^-1 = src_map(c)

Normal forms are computed in two passes: pinch removal (Britton) and a
left-to-right slide that replaces each syllable by the canonical left coset
representative of the outgoing edge image.  The result is unique, so
equality of elements is equality of tuples.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .base_groups import (
    EMPTY,
    Free,
    Group,
    Homomorphism,
    Subgroup,
    Word,
    format_word,
    free_reduce,
    injectivity_check,
    inverse_word,
    parse_word,
    snf_invariants,
    witness_word,
    cyclic,
    dihedral,
    symmetric3,
)
from .errors import (
    AttachmentUnwitnessed,
    BudgetExceeded,
    Disconnected,
    InvalidGroup,
    InvalidHomomorphism,
    NonInjectiveEdgeMap,
    OracleTruncation,
    UnsupportedBackend,
)

Letter = Tuple[str, int]

# oracle budgets; pinch tests that go deeper raise OracleTruncation
NF_CACHE_SIZE = 200_000

BUDGET = {"depth": 3, "letters": 64}


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    group: Group
    src_map: Homomorphism
    dst_map: Homomorphism

    @property
    def is_loop(self) -> bool:
        return self.src == self.dst


class Marking:
    """Tree-independent map of a graph of groups into an ambient group.

    ``vertex[v]`` sends G_v into the ambient group and ``edge[e]`` is the
    ambient image of the edge letter.  ``inverse`` optionally maps the
    ambient group back into pi1 of the graph.
    """

    def __init__(self, ambient: Group, vertex: Dict[str, Homomorphism], edge: Dict[str, object], inverse: Optional[Homomorphism] = None):
        self.ambient = ambient
        self.vertex = dict(vertex)
        self.edge = dict(edge)
        self.inverse = inverse

    def letter(self, L: Letter):
        e, s = L
        x = self.edge[e]
        return x if s > 0 else self.ambient.inv(x)

    def path_image(self, p: tuple):
        A = self.ambient
        out = self.vertex[p[0]](p[1])
        v = p[0]
        for k in range(2, len(p), 2):
            L, g = p[k], p[k + 1]
            out = A.mul(out, self.letter(L))
            v = self._next_vertex(v, L)
            out = A.mul(out, self.vertex[v](g))
        return out

    def _next_vertex(self, v, L):
        return self._ends[L[0]][1] if L[1] > 0 else self._ends[L[0]][0]

    def bind(self, gog: "GraphOfGroups") -> "Marking":
        self._ends = {e.id: (e.src, e.dst) for e in gog.edges.values()}
        return self


class GraphOfGroups:
    def __init__(self, vertices: Sequence[Tuple[str, Group]], edges: Sequence[Edge], base: Optional[str] = None, name: str = "", marking: Optional[Marking] = None):
        self.vertices: Dict[str, Group] = dict(vertices)
        if len(self.vertices) != len(vertices):
            raise InvalidGroup("duplicate vertex ids")
        self.edges: Dict[str, Edge] = {e.id: e for e in edges}
        if len(self.edges) != len(edges):
            raise InvalidGroup("duplicate edge ids")
        if not self.vertices:
            raise InvalidGroup("a graph of groups needs at least one vertex")
        self.base = base if base is not None else next(iter(self.vertices))
        if self.base not in self.vertices:
            raise InvalidGroup(f"base vertex {self.base!r} is not a vertex")
        for e in self.edges.values():
            for v in (e.src, e.dst):
                if v not in self.vertices:
                    raise InvalidGroup(f"edge {e.id} refers to unknown vertex {v!r}")
        self.name = name
        self.marking = marking.bind(self) if marking is not None else None
        self._tree = None
        self._sides = {}
        self._nf_cache = {}
        self._pi1 = None

    # structure ----------------------------------------------------------
    def incident(self, v: str) -> List[Tuple[Edge, int]]:
        """(edge, sign) with the letter (edge, sign) leaving v, in edge order."""
        out = []
        for e in self.edges.values():
            if e.src == v:
                out.append((e, 1))
            if e.dst == v:
                out.append((e, -1))
        return out

    def valence(self, v: str) -> int:
        return len(self.incident(v))

    def letter_start(self, L: Letter) -> str:
        e = self.edges[L[0]]
        return e.src if L[1] > 0 else e.dst

    def letter_end(self, L: Letter) -> str:
        e = self.edges[L[0]]
        return e.dst if L[1] > 0 else e.src

    @property
    def tree(self) -> Dict[str, Tuple[Letter, ...]]:
        """Shortlex BFS maximal tree: vertex -> letters of the tree path from base."""
        if self._tree is None:
            paths = {self.base: ()}
            q = deque([self.base])
            while q:
                v = q.popleft()
                for e, s in self.incident(v):
                    w = e.dst if s > 0 else e.src
                    if w not in paths:
                        paths[w] = paths[v] + ((e.id, s),)
                        q.append(w)
            if len(paths) != len(self.vertices):
                missing = [v for v in self.vertices if v not in paths]
                raise Disconnected(f"vertices {missing} are not reachable from {self.base}")
            self._tree = paths
        return self._tree

    @property
    def tree_edges(self) -> List[str]:
        out = set()
        for letters in self.tree.values():
            for e, _ in letters:
                out.add(e)
        return [e for e in self.edges if e in out]

    @property
    def pi1(self) -> "GoGPi1":
        if self._pi1 is None:
            self._pi1 = GoGPi1(self)
        return self._pi1

    def depth(self) -> int:
        d = 0
        for G in self.vertices.values():
            if isinstance(G, GoGPi1):
                d = max(d, 1 + G.gog.depth())
        return d

    def style(self) -> str:
        if len(self.edges) != 1:
            return "graph"
        e = next(iter(self.edges.values()))
        return "HNN" if e.is_loop else "amalgam"

    def describe(self) -> str:
        vs = ", ".join(f"{v}:{G.describe()}" for v, G in self.vertices.items())
        es = ", ".join(f"{e.id}:{e.src}->{e.dst} over {e.group.describe()}" for e in self.edges.values())
        return f"[{vs}; {es}]"

    # paths --------------------------------------------------------------
    def trivial_path(self, v: str, g=None) -> tuple:
        G = self.vertices[v]
        return (v, G.identity() if g is None else g)

    def path_end(self, p: tuple) -> str:
        return p[0] if len(p) == 2 else self.letter_end(p[-2])

    def edge_length(self, p: tuple) -> int:
        return (len(p) - 2) // 2

    def letter_path(self, L: Letter) -> tuple:
        a, b = self.letter_start(L), self.letter_end(L)
        return (a, self.vertices[a].identity(), L, self.vertices[b].identity())

    def concat(self, p: tuple, q: tuple) -> tuple:
        v = self.path_end(p)
        if q[0] != v:
            raise ValueError(f"path ending at {v} cannot be followed by a path from {q[0]}")
        G = self.vertices[v]
        return p[:-1] + (G.mul(p[-1], q[1]),) + q[2:]

    def path_inverse(self, p: tuple) -> tuple:
        syl = p[1::2]
        let = p[2::2]
        end = self.path_end(p)
        verts = self.path_vertices(p)
        out = [end, self.vertices[verts[-1]].inv(syl[-1])]
        for k in range(len(let) - 1, -1, -1):
            e, s = let[k]
            out.append((e, -s))
            out.append(self.vertices[verts[k]].inv(syl[k]))
        return tuple(out)

    def path_vertices(self, p: tuple) -> List[str]:
        vs = [p[0]]
        for k in range(2, len(p), 2):
            vs.append(self.letter_end(p[k]))
        return vs

    def tree_path(self, v: str) -> tuple:
        out = (self.base, self.vertices[self.base].identity())
        for L in self.tree[v]:
            out = out + (L, self.vertices[self.letter_end(L)].identity())
        return out

    def check_path(self, p: tuple) -> None:
        v = p[0]
        for k in range(2, len(p), 2):
            L = p[k]
            if L[0] not in self.edges:
                raise InvalidGroup(f"unknown edge {L[0]!r} in path")
            if self.letter_start(L) != v:
                raise InvalidGroup(f"edge letter {L} does not start at {v}")
            v = self.letter_end(L)

    # normal forms -------------------------------------------------------
    def _side(self, L: Letter):
        """Outgoing image of letter L at its start vertex, and the cross map."""
        got = self._sides.get(L)
        if got is None:
            e = self.edges[L[0]]
            near, far = (e.src_map, e.dst_map) if L[1] > 0 else (e.dst_map, e.src_map)
            sub = Subgroup(near.target, tuple(near.images[g] for g in e.group.gens))
            got = (sub, far, e.group.gens)
            self._sides[L] = got
        return got

    def _member(self, L, g):
        sub, far, names = self._side(L)
        G = sub.ambient
        if isinstance(G, GoGPi1) and G.gog.depth() + 1 > BUDGET["depth"]:
            raise OracleTruncation(f"pinch test nests deeper than {BUDGET['depth']} levels", budget="depth")
        wit = sub.member(g)
        if wit is None:
            return None
        return far.apply_word(witness_word(wit, names))

    def reduce(self, p: tuple) -> tuple:
        """Remove pinches; the result has minimal edge length."""
        if self.edge_length(p) > BUDGET["letters"]:
            raise OracleTruncation(f"word has more than {BUDGET['letters']} edge letters", budget="letters")
        V = self.vertices
        out = [p[0], p[1]]
        for k in range(2, len(p), 2):
            L, g = p[k], p[k + 1]
            if len(out) >= 4:
                prev = out[-2]
                if prev[0] == L[0] and prev[1] == -L[1]:
                    mid = out[-1]
                    # pinch prev * mid * L with mid in the image on the far side of prev
                    mapped = self._member((L[0], L[1]), mid)
                    if mapped is not None:
                        del out[-2:]
                        v = self.path_end(tuple(out))
                        out[-1] = V[v].mul(V[v].mul(out[-1], mapped), g)
                        continue
            out.append(L)
            out.append(g)
        return tuple(out)

    def slide(self, p: tuple) -> tuple:
        """Canonical syllables: move edge-image factors rightwards."""
        out = list(p)
        V = self.vertices
        v = p[0]
        for k in range(2, len(p), 2):
            L = out[k]
            sub, far, names = self._side(L)
            r, wit = sub.left_rep(out[k - 1])
            out[k - 1] = r
            w = self.letter_end(L)
            if wit:
                c = far.apply_word(witness_word(wit, names))
                out[k + 1] = V[w].mul(c, out[k + 1])
            v = w
        return tuple(out)

    def nf(self, p: tuple) -> tuple:
        try:
            return self._nf_cache[p]
        except KeyError:
            pass
        except TypeError:  # unhashable syllables
            return self.slide(self.reduce(p))
        out = self.slide(self.reduce(p))
        if len(self._nf_cache) > NF_CACHE_SIZE:
            self._nf_cache.clear()
        self._nf_cache[p] = out
        return out

    def cyclic_reduce(self, p: tuple):
        """(closed path q, conjugator path u) with p = u q u^-1, q cyclically reduced."""
        p = self.nf(p)
        u = self.trivial_path(p[0])
        while self.edge_length(p) >= 2:
            L1, Ln = p[2], p[-2]
            if not (Ln[0] == L1[0] and Ln[1] == -L1[1]):
                break
            v = p[0]
            junction = self.vertices[v].mul(p[-1], p[1])
            if self._member(L1, junction) is None:
                break
            # conjugate by g0 * L1
            q = (v, p[1], L1, self.vertices[self.letter_end(L1)].identity())
            u = self.nf(self.concat(u, q))
            p = self.nf(self.concat(self.concat(self.path_inverse(q), p), q))
        return p, u

    def translation_length(self, p: tuple) -> int:
        return self.edge_length(self.cyclic_reduce(p)[0])

    # flat words ---------------------------------------------------------
    def alphabet(self) -> List[Tuple[str, str, Optional[str]]]:
        """(flat name, vertex or edge id, vertex-group generator or None)."""
        return self.pi1.alphabet

    def path_from_flat(self, w: Sequence[Letter]) -> tuple:
        return self.pi1.path_of_word(w)

    # misc ---------------------------------------------------------------
    def replace(self, **kw) -> "GraphOfGroups":
        args = dict(vertices=list(self.vertices.items()), edges=list(self.edges.values()), base=self.base, name=self.name, marking=self.marking)
        args.update(kw)
        return GraphOfGroups(**args)

    def to_dot(self, name: Optional[str] = None) -> str:
        name = name or self.name or "G"
        lines = [f'digraph "{_dot_escape(name)}" {{']
        for v, G in self.vertices.items():
            shape = ', shape=doublecircle' if v == self.base else ''
            lines.append(f'  "{_dot_escape(v)}" [label="{_dot_escape(v)}: {_dot_escape(G.describe())}"{shape}];')
        for e in self.edges.values():
            lines.append(f'  "{_dot_escape(e.src)}" -> "{_dot_escape(e.dst)}" [label="{_dot_escape(e.id)}: {_dot_escape(e.group.describe())}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_escape(s: str) -> str:
    return str(s).replace("\\", "\\\\").replace('"', '\\"')


# ---------------------------------------------------------------------------
# the fundamental group as a Group


class GoGPi1(Group):
    kind = "GoGPi1"
    supports_designated_membership = True

    def __init__(self, gog: GraphOfGroups):
        self.gog = gog
        gog.tree  # connectivity check
        names: Dict[str, int] = {}
        for v, G in gog.vertices.items():
            for g in G.gens:
                names[g] = names.get(g, 0) + 1
        tree = set(gog.tree_edges)
        stable = [e for e in gog.edges if e not in tree]
        for e in stable:
            names["t" + e] = names.get("t" + e, 0) + 1
        alphabet = []
        for v, G in gog.vertices.items():
            for g in G.gens:
                flat = g if names[g] == 1 else f"{v}.{g}"
                alphabet.append((flat, v, g))
        for e in stable:
            alphabet.append(("t" + e, e, None))
        self.alphabet = alphabet
        self.gens = tuple(a[0] for a in alphabet)
        if len(set(self.gens)) != len(self.gens):
            raise InvalidGroup("flat alphabet of the graph of groups is ambiguous")
        self._lookup = {a[0]: a for a in alphabet}
        self._flat_of = {(a[1], a[2]): a[0] for a in alphabet}
        self._gen_cache = {}
        self._tree_paths = {v: gog.tree_path(v) for v in gog.vertices}
        self._tree_inv = {v: gog.path_inverse(p) for v, p in self._tree_paths.items()}

    def describe(self):
        return f"pi1{self.gog.describe()}" if not self.gog.name else f"pi1({self.gog.name})"

    def identity(self):
        b = self.gog.base
        return (b, self.gog.vertices[b].identity())

    def mul(self, x, y):
        return self.gog.nf(self.gog.concat(x, y))

    def inv(self, x):
        return self.gog.nf(self.gog.path_inverse(x))

    def conj_path(self, v: str, g) -> tuple:
        """The element p_v g p_v^-1 for g in G_v."""
        gog = self.gog
        return gog.nf(gog.concat(gog.concat(self._tree_paths[v], gog.trivial_path(v, g)), self._tree_inv[v]))

    def edge_element(self, e: str) -> tuple:
        gog = self.gog
        E = gog.edges[e]
        p = gog.concat(gog.concat(self._tree_paths[E.src], gog.letter_path((e, 1))), self._tree_inv[E.dst])
        return gog.nf(p)

    def gen(self, name):
        got = self._gen_cache.get(name)
        if got is not None:
            return got
        if name not in self._lookup:
            from .errors import UnknownGenerator

            raise UnknownGenerator(f"generator {name!r} not in {self.describe()}", generator=name)
        _, owner, g = self._lookup[name]
        if g is None:
            got = self.edge_element(owner)
        else:
            G = self.gog.vertices[owner]
            got = self.conj_path(owner, G.gen(g))
        self._gen_cache[name] = got
        return got

    def vertex_element(self, v: str, g) -> tuple:
        return self.conj_path(v, g)

    def path_of_word(self, w: Sequence[Letter]) -> tuple:
        self.check_word(w)
        gog = self.gog
        p = self.identity()
        for name, s in w:
            _, owner, g = self._lookup[name]
            if g is None:
                E = gog.edges[owner]
                piece = gog.concat(gog.concat(self._tree_paths[E.src], gog.letter_path((owner, 1))), self._tree_inv[E.dst])
                if s < 0:
                    piece = gog.path_inverse(piece)
            else:
                G = gog.vertices[owner]
                x = G.gen(g)
                piece = gog.concat(gog.concat(self._tree_paths[owner], gog.trivial_path(owner, x if s > 0 else G.inv(x))), self._tree_inv[owner])
            p = gog.concat(p, piece)
        return p

    def evaluate(self, w):
        return self.gog.nf(self.path_of_word(w))

    def word_of(self, x) -> Word:
        """Canonical flat word: tree letters vanish, syllables use vertex words."""
        gog = self.gog
        out: List[Letter] = []
        verts = gog.path_vertices(x)
        tree = set(gog.tree_edges)
        for k, g in enumerate(x[1::2]):
            if k > 0:
                e, s = x[2 * k]
                if e not in tree:
                    out.append(("t" + e, s))
            v = verts[k]
            for name, sgn in gog.vertices[v].word_of(g):
                out.append((self._flat_of[(v, name)], sgn))
        return free_reduce(out)

    def relators(self):
        return presentation(self.gog).relators

    def order(self):
        if not self.gog.edges and len(self.gog.vertices) == 1:
            return next(iter(self.gog.vertices.values())).order()
        return None

    def has_infinite_order(self, x):
        q, _ = self.gog.cyclic_reduce(x)
        if self.gog.edge_length(q) > 0:
            return True
        G = self.gog.vertices[q[0]]
        return G.has_infinite_order(q[1])

    def elements(self):
        if self.order() is not None:
            v = self.gog.base
            return [self.gog.trivial_path(v, g) for g in self.gog.vertices[v].elements()]
        return super().elements()

    def injectivity_into(self, f: Homomorphism) -> bool:
        """Decide injectivity of f when all images lie in one conjugate of a vertex group."""
        try:
            data = self._elliptic_prepare(tuple(f.images[g] for g in f.source.gens))
        except UnsupportedBackend:
            raise UnsupportedBackend("images do not lie in a single conjugate of a vertex group")
        q, v, K = data
        local = Homomorphism(f.source, self.gog.vertices[v], dict(zip(f.source.gens, K.gens)))
        return injectivity_check(local)

    # designated subgroups: conjugates q K q^-1 with K inside a vertex group
    def _locate(self, gens):
        gog = self.gog
        e = self.identity()
        nontriv = [x for x in gens if x != e]
        if not nontriv:
            return (gog.trivial_path(gog.base), gog.base)
        cands = []
        for x in nontriv:
            n = gog.edge_length(x)
            if n % 2:
                continue
            half = n // 2
            letters = x[2::2]
            if any(letters[n - 1 - j] != (letters[j][0], -letters[j][1]) for j in range(half)):
                continue
            head = x[: 2 * half + 1]
            v = gog.path_end(head + (None,)) if half else gog.base
            q = head + (gog.vertices[v].identity(),)
            if q not in cands:
                cands.append(q)
        for q in cands:
            v = gog.path_end(q)
            qi = gog.path_inverse(q)
            if all(gog.edge_length(gog.nf(gog.concat(gog.concat(qi, x), q))) == 0 for x in nontriv):
                return (q, v)
        from .tree_action import common_fixed_vertex

        found = common_fixed_vertex(self, list(nontriv))
        if found is not None:
            return (found, gog.path_end(found))
        return None

    def _sub_prepare(self, gens):
        try:
            return self._elliptic_prepare(gens)
        except UnsupportedBackend:
            whole = _whole_group_data(self, gens)
            if whole is None:
                raise
            return whole

    def _elliptic_prepare(self, gens):
        got = self._locate(gens)
        if got is None:
            raise UnsupportedBackend("subgroup is not contained in a conjugate of a vertex group")
        q, v = got
        gog = self.gog
        qi = gog.path_inverse(q)
        local = []
        for x in gens:
            y = gog.nf(gog.concat(gog.concat(qi, x), q))
            local.append(y[1])
        return (q, v, Subgroup(gog.vertices[v], tuple(local)))

    def _sub_member(self, data, x):
        if isinstance(data, _Whole):
            return data.rewrite(self.word_of(x))
        q, v, K = data
        gog = self.gog
        y = gog.nf(gog.concat(gog.concat(gog.path_inverse(q), x), q))
        if gog.edge_length(y) != 0:
            return None
        return K.member(y[1])

    def _sub_left_rep(self, data, x):
        if isinstance(data, _Whole):
            return self.identity(), data.rewrite(self.word_of(x))
        q, v, K = data
        gog = self.gog
        y = gog.nf(gog.concat(x, q))
        r, wit = K.left_rep(y[-1])
        rep = gog.nf(gog.concat(y[:-1] + (r,), gog.path_inverse(q)))
        return rep, wit

    def _sub_index(self, data):
        if isinstance(data, _Whole):
            return 1
        if not self.gog.edges:
            return data[2].index()
        return None


@dataclass
class _Whole:
    """A generating set that visibly contains every generator of the group."""

    table: Dict[str, Word]

    def rewrite(self, w: Word) -> Word:
        out = ()
        for g, e in w:
            out += self.table[g] if e > 0 else inverse_word(self.table[g])
        return free_reduce(out)


def _whole_group_data(G: "GoGPi1", gens) -> Optional[_Whole]:
    table = {}
    for g in G.gens:
        x = G.gen(g)
        xi = G.inv(x)
        for i, h in enumerate(gens):
            if h == x:
                table[g] = (("h%d" % i, 1),)
                break
            if h == xi:
                table[g] = (("h%d" % i, -1),)
                break
        else:
            return None
    return _Whole(table)


# ---------------------------------------------------------------------------
# presentations and fingerprints


@dataclass
class Presentation:
    gens: List[str]
    relators: List[Word]

    def abelianization(self) -> Tuple[int, Tuple[int, ...]]:
        idx = {g: i for i, g in enumerate(self.gens)}
        rows = []
        for r in self.relators:
            v = [0] * len(self.gens)
            for g, e in r:
                v[idx[g]] += e
            rows.append(v)
        return snf_invariants(rows, len(self.gens))

    def format(self) -> str:
        return "<" + ", ".join(self.gens) + " | " + ", ".join(format_word(r) for r in self.relators) + ">"


def _rename(w: Word, mapping) -> Word:
    return tuple((mapping[g], e) for g, e in w)


def presentation(g: GraphOfGroups) -> Presentation:
    """Vertex relators, edge relations, stable letter per non-tree edge."""
    P = g.pi1
    flat = P._flat_of
    rels: List[Word] = []
    for v, G in g.vertices.items():
        names = {x: flat[(v, x)] for x in G.gens}
        for r in G.relators():
            rels.append(_rename(r, names))
    tree = set(g.tree_edges)
    for e in g.edges.values():
        sn = {x: flat[(e.src, x)] for x in g.vertices[e.src].gens}
        dn = {x: flat[(e.dst, x)] for x in g.vertices[e.dst].gens}
        Gs, Gd = g.vertices[e.src], g.vertices[e.dst]
        for c in e.group.gens:
            a = _rename(Gs.word_of(e.src_map.images[c]), sn)
            b = _rename(Gd.word_of(e.dst_map.images[c]), dn)
            if e.id in tree:
                r = free_reduce(a + inverse_word(b))
            else:
                t = "t" + e.id
                r = free_reduce(((t, 1),) + b + ((t, -1),) + inverse_word(a))
            if r:
                rels.append(r)
    return Presentation(list(P.gens), rels)


def _cyclic_reduce_word(w: Word) -> Word:
    w = free_reduce(w)
    while len(w) >= 2 and w[0][0] == w[-1][0] and w[0][1] == -w[-1][1]:
        w = w[1:-1]
    return w


def simplify_presentation(P: Presentation, max_total: int = 20000) -> Presentation:
    """Tietze moves: drop trivial relators and eliminate generators that
    occur exactly once in some relator.  The group is unchanged."""
    gens = list(P.gens)
    rels = []
    for r in P.relators:
        r = _cyclic_reduce_word(r)
        if r and r not in rels and inverse_word(r) not in rels:
            rels.append(r)
    while True:
        best = None
        for i, r in enumerate(rels):
            counts: Dict[str, int] = {}
            for g, _ in r:
                counts[g] = counts.get(g, 0) + 1
            for j, (g, ex) in enumerate(r):
                if counts[g] == 1:
                    key = (len(r), i, gens.index(g))
                    if best is None or key < best[0]:
                        best = (key, i, j)
        if best is None:
            break
        _, i, j = best
        r = rels[i]
        g, ex = r[j]
        # r = u g^ex v  =>  g^ex = u^-1 v^-1
        rest = inverse_word(r[:j]) + inverse_word(r[j + 1:])
        value = rest if ex == 1 else inverse_word(rest)
        new_rels = []
        total = 0
        for k, q in enumerate(rels):
            if k == i:
                continue
            out = []
            for h, e in q:
                if h == g:
                    out.extend(value if e == 1 else inverse_word(value))
                else:
                    out.append((h, e))
            q2 = _cyclic_reduce_word(tuple(out))
            total += len(q2)
            if q2 and q2 not in new_rels and inverse_word(q2) not in new_rels:
                new_rels.append(q2)
        if total > max_total:
            break
        rels = new_rels
        gens.remove(g)
    return Presentation(gens, rels)


def group_presentation(G: Group) -> Presentation:
    if isinstance(G, GoGPi1):
        return presentation(G.gog)
    return Presentation(list(G.gens), list(G.relators()))


def default_targets() -> List[Tuple[str, Group]]:
    return [("Z/2", cyclic(2)), ("Z/3", cyclic(3)), ("S3", symmetric3()), ("D4", dihedral(4))]


_TARGETS = None


def targets() -> List[Tuple[str, Group]]:
    global _TARGETS
    if _TARGETS is None:
        _TARGETS = default_targets()
    return _TARGETS


def hom_count(P: Presentation, T, max_states: int = 2_000_000) -> int:
    """Number of homomorphisms from <P> to the finite group T (table based)."""
    gens = P.gens
    pos = {g: i for i, g in enumerate(gens)}
    rels = [r for r in P.relators if r]
    last = [max(pos[g] for g, _ in r) for r in rels]
    needed_after = []
    for i in range(len(gens)):
        keep = set()
        for r, l in zip(rels, last):
            if l > i:
                keep.update(pos[g] for g, _ in r if pos[g] <= i)
        needed_after.append(sorted(keep))
    elems = T.elements()
    inv = {x: T.inv(x) for x in elems}
    states = {(): 1}
    active: List[int] = []
    for i in range(len(gens)):
        check = [r for r, l in zip(rels, last) if l == i]
        keep = needed_after[i]
        new: Dict[tuple, int] = {}
        slots = active + [i]
        where = {s: k for k, s in enumerate(slots)}
        for st, cnt in states.items():
            for x in elems:
                full = st + (x,)
                ok = True
                for r in check:
                    y = T.identity()
                    for g, e in r:
                        z = full[where[pos[g]]]
                        y = T.mul(y, z if e > 0 else inv[z])
                    if y != T.identity():
                        ok = False
                        break
                if not ok:
                    continue
                key = tuple(full[where[s]] for s in keep)
                new[key] = new.get(key, 0) + cnt
        if len(new) > max_states:
            raise BudgetExceeded(f"homomorphism count needs more than {max_states} states")
        states = new
        active = keep
    return sum(states.values())


@dataclass(frozen=True)
class Fingerprint:
    rank: int
    torsion: Tuple[int, ...]
    hom_counts: Tuple[Tuple[str, int], ...]

    def to_dict(self):
        return {"abelianization": {"rank": self.rank, "torsion": list(self.torsion)}, "hom_counts": dict(self.hom_counts)}


def fingerprint(obj, target_list=None, max_gens: int = 48, max_relators: int = 4000) -> Fingerprint:
    if isinstance(obj, Presentation):
        P = obj
    elif isinstance(obj, GraphOfGroups):
        P = presentation(obj)
    else:
        P = group_presentation(obj)
    P = simplify_presentation(P)
    if len(P.gens) > max_gens or len(P.relators) > max_relators:
        raise BudgetExceeded(f"presentation with {len(P.gens)} generators and {len(P.relators)} relators exceeds the budget")
    rank, tors = P.abelianization()
    counts = tuple((name, hom_count(P, T)) for name, T in (target_list or targets()))
    return Fingerprint(rank, tors, counts)


# ---------------------------------------------------------------------------
# operations on words


def reduce_word(w: tuple, g: GraphOfGroups) -> tuple:
    g.check_path(w)
    return g.nf(w)


def cyclically_reduce(w: tuple, g: GraphOfGroups):
    g.check_path(w)
    return g.cyclic_reduce(w)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    valid: bool
    maximal_tree: List[str]
    unverified: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def to_dict(self):
        return {"valid": self.valid, "maximal_tree": self.maximal_tree, "unverified": self.unverified, "notes": self.notes}


def validate(g: GraphOfGroups) -> ValidationReport:
    tree = g.tree_edges
    unverified = []
    for e in g.edges.values():
        for side, f in (("src", e.src_map), ("dst", e.dst_map)):
            try:
                f.check()
            except UnsupportedBackend:
                pass
            try:
                ok = injectivity_check(f)
            except UnsupportedBackend:
                unverified.append(f"{e.id}.{side}")
                continue
            if not ok:
                raise NonInjectiveEdgeMap(f"edge {e.id}: {side} map is not injective", edge=e.id, side=side)
    notes = []
    if g.marking is not None:
        check_marking(g)
        notes.append("marking verified on generators")
    return ValidationReport(True, tree, unverified, notes)


def check_marking(g: GraphOfGroups) -> None:
    m = g.marking
    A = m.ambient
    for v, G in g.vertices.items():
        h = m.vertex[v]
        for r in G.relators():
            if not A.is_identity_element(h.apply_word(r)):
                raise InvalidHomomorphism(f"marking of vertex {v} kills no relator {format_word(r)}")
    for e in g.edges.values():
        t = m.edge[e.id]
        for c in e.group.gens:
            lhs = A.conj(t, m.vertex[e.dst](e.dst_map.images[c]))
            rhs = m.vertex[e.src](e.src_map.images[c])
            if lhs != rhs:
                raise InvalidHomomorphism(f"marking violates the edge relation of {e.id} on {c}")


# ---------------------------------------------------------------------------
# markings


def marking_hom(g: GraphOfGroups) -> Homomorphism:
    """pi1(g) -> ambient, from the marking."""
    m = g.marking
    P = g.pi1
    images = {}
    for name, owner, gen in P.alphabet:
        images[name] = m.path_image(P.gen(name))
    return Homomorphism(P, m.ambient, images)


def to_ambient(g: GraphOfGroups, x):
    return g.marking.path_image(x)


def from_ambient(g: GraphOfGroups, y):
    if g.marking is None:
        raise UnsupportedBackend(f"graph {g.name} has no marking")
    return inverse_of(g)(y)


def inverse_of(g: GraphOfGroups) -> Homomorphism:
    m = g.marking
    if m.inverse is None:
        m.inverse = _transport_inverse(g) or invert_marking(g)
    return m.inverse


def invert_marking(g: GraphOfGroups, max_len: int = 3) -> Homomorphism:
    """Find ambient gen -> pi1(g) images by bounded search over flat words."""
    m = g.marking
    A = m.ambient
    P = g.pi1
    hom = marking_hom(g)
    found = {}
    gens = list(P.gens)
    for a in A.gens:
        target = A.gen(a)
        hit = None
        for n in range(0, max_len + 1):
            for w in itertools.product([(x, s) for x in gens for s in (1, -1)], repeat=n):
                if free_reduce(w) != tuple(w):
                    continue
                if hom.apply_word(w) == target:
                    hit = w
                    break
            if hit is not None:
                break
        if hit is None:
            raise UnsupportedBackend(f"no preimage of ambient generator {a} found up to length {max_len}")
        found[a] = P.evaluate(hit)
    inv = Homomorphism(A, P, found)
    return inv


def attach_inverse(g: GraphOfGroups, inverse: Optional[Homomorphism] = None) -> GraphOfGroups:
    if g.marking is None:
        return g
    m = g.marking
    new = GraphOfGroups(list(g.vertices.items()), list(g.edges.values()), g.base, g.name, Marking(m.ambient, m.vertex, m.edge))
    inv = inverse
    if inv is None:
        inv = invert_marking(new)
    else:
        inv = Homomorphism(inv.source, new.pi1, {a: new.pi1.evaluate(inv.target.word_of(x)) for a, x in inv.images.items()})
    new.marking.inverse = inv
    return new


def identity_marking(g: GraphOfGroups) -> GraphOfGroups:
    """Mark g by its own fundamental group."""
    P = g.pi1
    vertex = {v: Homomorphism(G, P, {x: P.vertex_element(v, G.gen(x)) for x in G.gens}) for v, G in g.vertices.items()}
    edge = {}
    for e in g.edges.values():
        edge[e.id] = P.gog.nf(P.gog.concat(P.gog.concat(P._tree_paths[e.src], g.letter_path((e.id, 1))), P._tree_inv[e.dst]))
    inv = Homomorphism(P, P, {a: P.gen(a) for a in P.gens})
    new = GraphOfGroups(list(g.vertices.items()), list(g.edges.values()), g.base, g.name, Marking(P, vertex, edge, inv))
    new._pi1 = P
    return new


# ---------------------------------------------------------------------------
# edits


def _inverse_iso(f: Homomorphism):
    """For f: C -> G surjective and injective, the map G -> C as a function."""
    sub = f.image_subgroup()
    C = f.source

    def back(y):
        wit = sub.member(y)
        if wit is None:
            raise InvalidHomomorphism("element outside the image of an edge map")
        return C.evaluate(witness_word(wit, C.gens))

    return back


def _compose_fn(f: Homomorphism, fn, target: Group) -> Homomorphism:
    return Homomorphism(f.source, target, {c: fn(f.images[c]) for c in f.source.gens})


def _is_surjective(f: Homomorphism) -> bool:
    try:
        return f.image_subgroup().is_whole()
    except UnsupportedBackend:
        return False


def collapse_edge(g: GraphOfGroups, e: str, simplify: bool = True) -> GraphOfGroups:
    """Collapse one edge; the merged vertex keeps the id of the edge source."""
    E = g.edges[e]
    u, w = E.src, E.dst
    m = g.marking
    rest = [f for f in g.edges.values() if f.id != e]
    if E.is_loop:
        sub = GraphOfGroups([(u, g.vertices[u])], [E], u, name=f"{g.name}/{u}+{e}" if g.name else "")
        M = sub.pi1
        incl = lambda x: M.vertex_element(u, x)
        new_edges = []
        for f in rest:
            sm = _compose_fn(f.src_map, incl, M) if f.src == u else f.src_map
            dm = _compose_fn(f.dst_map, incl, M) if f.dst == u else f.dst_map
            new_edges.append(Edge(f.id, f.src, f.dst, f.group, sm, dm))
        verts = [(v, M if v == u else G) for v, G in g.vertices.items()]
        marking = None
        if m is not None:
            sub_m = Marking(m.ambient, {u: m.vertex[u]}, {e: m.edge[e]})
            sub.marking = sub_m.bind(sub)
            vh = marking_hom(sub)
            marking = Marking(m.ambient, {**m.vertex, u: vh}, {k: x for k, x in m.edge.items() if k != e}, m.inverse)
        out = GraphOfGroups(verts, new_edges, g.base, g.name, marking)
        return _refresh_inverse(out, g)
    Gu, Gw = g.vertices[u], g.vertices[w]
    A = m.ambient if m is not None else None
    if simplify and _is_surjective(E.dst_map):
        # G_w is the edge group: w folds into u
        back = _inverse_iso(E.dst_map)
        M = Gu
        inc_u = lambda x: x
        inc_w = lambda y: E.src_map(back(y))
        keep, gone = u, w
    elif simplify and _is_surjective(E.src_map):
        back = _inverse_iso(E.src_map)
        M = Gw
        inc_w = lambda y: y
        inc_u = lambda x: E.dst_map(back(x))
        keep, gone = w, u
    else:
        sub = GraphOfGroups([(u, Gu), (w, Gw)], [E], u, name=f"{g.name}/{u}+{w}" if g.name else "")
        M = sub.pi1
        inc_u = lambda x: M.vertex_element(u, x)
        inc_w = lambda y: M.vertex_element(w, y)
        keep, gone = u, w
        if m is not None:
            sub.marking = Marking(m.ambient, {u: m.vertex[u], w: m.vertex[w]}, {e: m.edge[e]}).bind(sub)
    incl = {u: inc_u, w: inc_w}
    new_edges = []
    new_edge_marks = {}
    for f in rest:
        src = keep if f.src in (u, w) else f.src
        dst = keep if f.dst in (u, w) else f.dst
        sm = _compose_fn(f.src_map, incl[f.src], M) if f.src in (u, w) else f.src_map
        dm = _compose_fn(f.dst_map, incl[f.dst], M) if f.dst in (u, w) else f.dst_map
        new_edges.append(Edge(f.id, src, dst, f.group, sm, dm))
        if m is not None:
            x = m.edge[f.id]
            # anchor: elements at the folded-away vertex are seen through e
            if keep == u:
                if f.src == w:
                    x = A.mul(m.edge[e], x)
                if f.dst == w:
                    x = A.mul(x, A.inv(m.edge[e]))
            else:
                if f.src == u:
                    x = A.mul(A.inv(m.edge[e]), x)
                if f.dst == u:
                    x = A.mul(x, m.edge[e])
            new_edge_marks[f.id] = x
    verts = []
    for v, G in g.vertices.items():
        if v == gone:
            continue
        verts.append((v, M if v == keep else G))
    base = keep if g.base in (u, w) else g.base
    marking = None
    if m is not None:
        if isinstance(M, GoGPi1) and M is not Gu and M is not Gw:
            vh = marking_hom(M.gog)
        else:
            vh = m.vertex[keep]
        vertex = {v: h for v, h in m.vertex.items() if v not in (u, w)}
        vertex[keep] = vh
        marking = Marking(m.ambient, vertex, new_edge_marks, m.inverse)
    out = GraphOfGroups(verts, new_edges, base, g.name, marking)
    return _refresh_inverse(out, g)


def _refresh_inverse(new: GraphOfGroups, old: GraphOfGroups) -> GraphOfGroups:
    """The inverse marking is recomputed on demand after an edit."""
    if new.marking is not None:
        new.marking.inverse = None
    return new


def _transport_inverse(new: GraphOfGroups) -> Optional[Homomorphism]:
    """Ambient generators that are images of single flat generators."""
    m = new.marking
    hom = marking_hom(new)
    P = new.pi1
    images = {}
    for a in m.ambient.gens:
        target = m.ambient.gen(a)
        hit = None
        for name in P.gens:
            x = P.gen(name)
            if hom(x) == target:
                hit = x
                break
            if hom(x) == m.ambient.inv(target):
                hit = P.inv(x)
                break
        if hit is None:
            return None
        images[a] = hit
    return Homomorphism(m.ambient, P, images)


def one_edge_splitting(g: GraphOfGroups, e: str) -> GraphOfGroups:
    """Collapse all edges but e (lowest id first)."""
    cur = g
    for f in list(g.edges):
        if f != e:
            cur = collapse_edge(cur, f)
    return cur


def substitute(g: GraphOfGroups, v: str, d: GraphOfGroups, attach: Dict[str, Tuple[str, tuple]], iso_to: Homomorphism, iso_from: Homomorphism) -> GraphOfGroups:
    """Replace vertex v by d.

    ``iso_to``: pi1(d) -> G_v and ``iso_from``: G_v -> pi1(d) are mutually
    inverse.  ``attach[f] = (x, w)`` places edge f at vertex x of d, with w a
    path of d from its base to x such that the edge image conjugated by w
    lies in G_x.  Loops at v use ``attach[f + ".src"]`` and ``attach[f + ".dst"]``.
    """
    Gv = g.vertices[v]
    D = d.pi1
    clash = set(d.vertices) & (set(g.vertices) - {v})
    if clash:
        raise InvalidGroup(f"vertex ids {sorted(clash)} clash during substitution")
    eclash = set(d.edges) & set(g.edges)
    if eclash:
        raise InvalidGroup(f"edge ids {sorted(eclash)} clash during substitution")

    def local(f_id, side, hom):
        key = f_id if f_id in attach else f"{f_id}.{side}"
        if key not in attach:
            raise AttachmentUnwitnessed(f"no attachment for edge {f_id}", edge=f_id)
        x, w = attach[key]
        d.check_path(w)
        if d.path_end(w) != x or w[0] != d.base:
            raise AttachmentUnwitnessed(f"attachment path for {f_id} does not run from the base to {x}", edge=f_id)
        wi = d.path_inverse(w)
        imgs = {}
        for c in hom.source.gens:
            y = iso_from(hom.images[c])
            z = d.nf(d.concat(d.concat(wi, y), w))
            if d.edge_length(z) != 0:
                raise AttachmentUnwitnessed(f"edge {f_id}: image of {c} is not in the conjugate of vertex {x}", edge=f_id)
            imgs[c] = z[1]
        return x, w, Homomorphism(hom.source, d.vertices[x], imgs)

    m = g.marking
    new_edges = []
    marks = {}
    A = m.ambient if m is not None else None

    for f in g.edges.values():
        if f.src != v and f.dst != v:
            new_edges.append(f)
            if m is not None:
                marks[f.id] = m.edge[f.id]
            continue
        src, dst, sm, dm = f.src, f.dst, f.src_map, f.dst_map
        x_mark = m.edge[f.id] if m is not None else None
        if f.src == v:
            src, w, sm = local(f.id, "src", f.src_map)
            if m is not None:
                x_mark = A.mul(A.inv(_ambient_of_d_path(d, w, m.vertex[v], iso_to)), x_mark)
        if f.dst == v:
            dst, w2, dm = local(f.id, "dst", f.dst_map)
            if m is not None:
                x_mark = A.mul(x_mark, _ambient_of_d_path(d, w2, m.vertex[v], iso_to))
        new_edges.append(Edge(f.id, src, dst, f.group, sm, dm))
        if m is not None:
            marks[f.id] = x_mark
    for e in d.edges.values():
        new_edges.append(e)
    verts = []
    for u, G in g.vertices.items():
        if u == v:
            verts.extend(d.vertices.items())
        else:
            verts.append((u, G))
    base = d.base if g.base == v else g.base
    marking = None
    if m is not None:
        vertex = {u: h for u, h in m.vertex.items() if u != v}
        for x, Gx in d.vertices.items():
            vertex[x] = Homomorphism(Gx, A, {c: _ambient_of_d_vertex(d, x, Gx.gen(c), m.vertex[v], iso_to) for c in Gx.gens})
        for e in d.edges.values():
            marks[e.id] = _ambient_of_d_edge(d, e.id, m.vertex[v], iso_to)
        marking = Marking(A, vertex, marks, m.inverse)
    out = GraphOfGroups(verts, new_edges, base, g.name, marking)
    return _refresh_inverse(out, g)


def _ambient_of_d_vertex(d, x, gx, mv, iso_to):
    # g in G_x read as p_x g p_x^-1; tree letters of d then map to the identity
    P = d.pi1
    return mv(iso_to(P.vertex_element(x, gx)))


def _ambient_of_d_edge(d, e, mv, iso_to):
    return mv(iso_to(d.pi1.edge_element(e)))


def _ambient_of_d_path(d, w, mv, iso_to):
    """Ambient image of a path of d from its base, with tree letters trivial."""
    P = d.pi1
    A = mv.target
    out = A.identity()
    verts = d.path_vertices(w)
    tree = set(d.tree_edges)
    for k, g in enumerate(w[1::2]):
        if k > 0:
            e, s = w[2 * k]
            if e not in tree:
                x = _ambient_of_d_edge(d, e, mv, iso_to)
                out = A.mul(out, x if s > 0 else A.inv(x))
        out = A.mul(out, _ambient_of_d_vertex(d, verts[k], g, mv, iso_to))
    return out


def make_reduced(g: GraphOfGroups) -> Tuple[GraphOfGroups, List[str]]:
    """Collapse non-loop edges whose image fills a valence-2 endpoint."""
    cur = g
    collapsed = []
    while True:
        hit = None
        for e in cur.edges.values():
            if e.is_loop:
                continue
            for v, f in ((e.src, e.src_map), (e.dst, e.dst_map)):
                if cur.valence(v) == 2 and _is_surjective(f):
                    hit = e.id
                    break
            if hit:
                break
        if hit is None:
            return cur, collapsed
        cur = collapse_edge(cur, hit)
        collapsed.append(hit)


def is_refinement(fine: GraphOfGroups, coarse: GraphOfGroups, check_fingerprint: bool = True) -> bool:
    """Every vertex group of fine is elliptic on the tree of coarse (via the ambient)."""
    from .tree_action import subgroup_type

    if check_fingerprint and fingerprint(fine) != fingerprint(coarse):
        return False
    for e in coarse.edges:
        s = one_edge_splitting(coarse, e) if len(coarse.edges) > 1 else coarse
        for v, G in fine.vertices.items():
            gens = [transport(fine, s, fine.pi1.vertex_element(v, G.gen(x))) for x in G.gens]
            if subgroup_type(gens, s).kind != "Elliptic":
                return False
    return True


def transport(src: GraphOfGroups, dst: GraphOfGroups, x):
    """Move an element of pi1(src) to pi1(dst) through the shared ambient group."""
    if src is dst:
        return x
    return from_ambient(dst, to_ambient(src, x))


# ---------------------------------------------------------------------------
# construction helpers


def edge(eid: str, src: str, dst: str, C: Group, Gs: Group, Gd: Group, src_images: Dict[str, Word], dst_images: Dict[str, Word]) -> Edge:
    return Edge(eid, src, dst, C, Homomorphism.from_words(C, Gs, src_images), Homomorphism.from_words(C, Gd, dst_images))


def inclusion_edge(eid: str, src: str, dst: str, C: Group, Gs: Group, Gd: Group) -> Edge:
    """Edge whose maps send each generator of C to the same-named generator."""
    ident = {c: ((c, 1),) for c in C.gens}
    return edge(eid, src, dst, C, Gs, Gd, ident, ident)


def trivial_group() -> Group:
    return Free(0)


@dataclass
class Splitting:
    gog: GraphOfGroups
    name: str = ""
    provenance: str = ""
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.gog.edges) != 1:
            raise InvalidGroup(f"splitting {self.name} must have exactly one edge")
        e = self.edge
        if e.is_loop != (len(self.gog.vertices) == 1):
            raise InvalidGroup(f"splitting {self.name}: HNN needs one vertex, amalgam two")

    @property
    def edge(self) -> Edge:
        return next(iter(self.gog.edges.values()))

    @property
    def style(self) -> str:
        return "HNN" if self.edge.is_loop else "amalgam"

    def has(self, flag: str) -> bool:
        return flag in self.flags

    def edge_group_gens(self) -> List[tuple]:
        """Generators of the edge group as elements of pi1 (src side)."""
        e = self.edge
        P = self.gog.pi1
        return [P.vertex_element(e.src, e.src_map.images[c]) for c in e.group.gens]
