"""Geometry of group actions on Bass-Serre trees.

A vertex of the tree of a graph of groups is a left coset ``g G_v``; we name
it by the normal form of any path ending at ``v`` with the last syllable
replaced by the identity.  Edges are pairs of adjacent vertex keys, the one
nearer the base first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple

from .base_groups import (
    Finite,
    Free,
    FreeAbelian,
    Group,
    Homomorphism,
    Lattice,
    StallingsGraph,
    Subgroup,
    format_word,
    smith_normal_form,
    witness_word,
)
from .errors import (
    AxisNotInvariant,
    BudgetExhausted,
    FixedVertexSearchExhausted,
    UnsupportedBackend,
)
from .graph_of_groups import (
    Edge,
    GoGPi1,
    GraphOfGroups,
    Marking,
    Splitting,
    from_ambient,
    to_ambient,
)

FIXED_RADIUS = 16
BALL_RADIUS = 3


def _gog(s) -> GraphOfGroups:
    return s.gog if isinstance(s, Splitting) else s


# ---------------------------------------------------------------------------
# vertices and edges of the tree


def vertex_key(g: GraphOfGroups, path: tuple) -> tuple:
    p = g.nf(path)
    return p[:-1] + (g.vertices[g.path_end(p)].identity(),)


def base_vertex(g: GraphOfGroups) -> tuple:
    return g.trivial_path(g.base)


def act(g: GraphOfGroups, x, key: tuple) -> tuple:
    return vertex_key(g, g.concat(x, key))


def act_edge(g: GraphOfGroups, x, edge: Tuple[tuple, tuple]) -> Tuple[tuple, tuple]:
    return edge_key(g, act(g, x, edge[0]), act(g, x, edge[1]))


def depth(g: GraphOfGroups, key: tuple) -> int:
    return g.edge_length(key)


def edge_key(g: GraphOfGroups, a: tuple, b: tuple) -> Tuple[tuple, tuple]:
    return (a, b) if g.edge_length(a) < g.edge_length(b) else (b, a)


def geodesic(g: GraphOfGroups, P: tuple, Q: tuple) -> List[tuple]:
    """Vertex keys along the tree geodesic from P to Q."""
    R = g.nf(g.concat(g.path_inverse(P), Q))
    out = [P]
    n = g.edge_length(R)
    for j in range(1, n + 1):
        prefix = R[: 2 * j + 1] + (g.vertices[g.letter_end(R[2 * j])].identity(),)
        out.append(vertex_key(g, g.concat(P, prefix)))
    return out


def distance(g: GraphOfGroups, P: tuple, Q: tuple) -> int:
    return g.edge_length(g.nf(g.concat(g.path_inverse(P), Q)))


def fixes(g: GraphOfGroups, x, key: tuple) -> bool:
    return act(g, x, key) == key


# ---------------------------------------------------------------------------
# element types


@dataclass
class ElementType:
    kind: str  # Elliptic | Hyperbolic
    fixed_vertex: Optional[tuple] = None
    length: int = 0
    axis_point: Optional[tuple] = None
    period: Optional[tuple] = None

    def to_dict(self, g: Optional[GraphOfGroups] = None):
        if self.kind == "Elliptic":
            return {"kind": "Elliptic", "fixed_vertex": _path_str(g, self.fixed_vertex)}
        return {"kind": "Hyperbolic", "length": self.length, "axis_point": _path_str(g, self.axis_point), "period": _path_str(g, self.period)}


def _path_str(g, p) -> str:
    if p is None:
        return ""
    if g is None:
        return repr(p)
    return path_to_str(g, p)


def path_to_str(g: GraphOfGroups, p: tuple) -> str:
    parts = [f"@{p[0]}"]
    verts = g.path_vertices(p)
    for k, s in enumerate(p[1::2]):
        if k > 0:
            e, sg = p[2 * k]
            parts.append(f"t{e}" if sg > 0 else f"t{e}^-1")
        w = g.vertices[verts[k]].word_of(s)
        if w:
            parts.append(f"[{format_word(w)}]")
    return " ".join(parts)


def element_type(x, s) -> ElementType:
    g = _gog(s)
    q, u = g.cyclic_reduce(x)
    n = g.edge_length(q)
    if n == 0:
        key = vertex_key(g, g.concat(u, g.trivial_path(q[0])))
        return ElementType("Elliptic", fixed_vertex=key)
    return ElementType("Hyperbolic", length=n, axis_point=vertex_key(g, u), period=g.nf(x))


def is_elliptic(x, s) -> bool:
    g = _gog(s)
    return g.translation_length(x) == 0


# ---------------------------------------------------------------------------
# subgroups


@dataclass
class SubgroupType:
    kind: str
    fixed_vertex: Optional[tuple] = None
    witness: Optional[tuple] = None
    witness_label: str = ""


def _pairs(gens):
    for i, j in itertools.combinations(range(len(gens)), 2):
        yield (i, j)


def subgroup_type(gens: Sequence, s) -> SubgroupType:
    """Elliptic with a common fixed vertex, or Hyperbolic with a witness."""
    g = _gog(s)
    P = g.pi1
    e = P.identity()
    gens = [x for x in gens if x != e]
    if not gens:
        return SubgroupType("Elliptic", fixed_vertex=base_vertex(g))
    fixed = []
    for i, x in enumerate(gens):
        t = element_type(x, g)
        if t.kind == "Hyperbolic":
            return SubgroupType("Hyperbolic", witness=x, witness_label=f"s{i}")
        fixed.append(t.fixed_vertex)
    for i, j in _pairs(gens):
        y = P.mul(gens[i], gens[j])
        if not is_elliptic(y, g):
            return SubgroupType("Hyperbolic", witness=y, witness_label=f"s{i}*s{j}")
    v = _common_fixed(g, gens, fixed)
    if v is None:
        raise FixedVertexSearchExhausted("generators are pairwise elliptic but no common fixed vertex was found within the radius budget")
    return SubgroupType("Elliptic", fixed_vertex=v)


def _common_fixed(g: GraphOfGroups, gens, fixed) -> Optional[tuple]:
    """Search the convex hull of the generators' fixed vertices."""
    seen = []
    seen_set = set()
    for P in fixed:
        for v in geodesic(g, fixed[0], P):
            if v not in seen_set:
                seen_set.add(v)
                seen.append(v)
        if len(seen) > 4 * FIXED_RADIUS * max(1, len(fixed)):
            break
    for v in sorted(seen, key=lambda k: (g.edge_length(k), seen.index(k))):
        if distance(g, fixed[0], v) > FIXED_RADIUS:
            continue
        if all(fixes(g, x, v) for x in gens):
            return v
    return None


def common_fixed_vertex(P: GoGPi1, elems: Sequence) -> Optional[tuple]:
    """Used by designated-subgroup detection: a fixed vertex path, or None."""
    g = P.gog
    fixed = []
    for x in elems:
        q, u = g.cyclic_reduce(x)
        if g.edge_length(q) != 0:
            return None
        fixed.append(vertex_key(g, g.concat(u, g.trivial_path(q[0]))))
    for i, j in _pairs(elems):
        if not is_elliptic(P.mul(elems[i], elems[j]), g):
            return None
    return _common_fixed(g, elems, fixed)


def pair_type(s1, s2, transport=None) -> str:
    """Two letters: edge group of s1 on the tree of s2, then the converse."""
    a = "E" if edge_group_type(s1, s2, transport).kind == "Elliptic" else "H"
    b = "E" if edge_group_type(s2, s1, transport).kind == "Elliptic" else "H"
    return a + b


def edge_group_type(s1, s2, transport=None) -> SubgroupType:
    gens = s1.edge_group_gens() if isinstance(s1, Splitting) else s1
    if transport is not None:
        gens = [transport(s1, s2, x) for x in gens]
    return subgroup_type(gens, s2)


# ---------------------------------------------------------------------------
# invariant lines


@dataclass
class CoreGraph:
    variant: str  # Vertex | Circle | Segment
    k: int
    vertex_stabilizers: List[List] = field(default_factory=list)
    edge_stabilizers: List[List] = field(default_factory=list)
    dihedral: bool = False
    axis: Optional["Axis"] = None
    positions: List[int] = field(default_factory=list)

    def to_dict(self, describe=None):
        d = describe or (lambda xs: len(xs))
        return {
            "variant": self.variant,
            "k": self.k,
            "dihedral": self.dihedral,
            "vertex_stabilizers": [d(s) for s in self.vertex_stabilizers],
            "edge_stabilizers": [d(s) for s in self.edge_stabilizers],
        }


class Axis:
    """Axis of a hyperbolic element c = u q u^-1, parametrised by integers."""

    def __init__(self, g: GraphOfGroups, c):
        self.g = g
        self.c = c
        q, u = g.cyclic_reduce(c)
        self.q, self.u = q, u
        self.n = g.edge_length(q)
        if self.n == 0:
            raise ValueError("axis of an elliptic element")
        self._cache: Dict[int, tuple] = {}
        self._qpow = {0: g.trivial_path(q[0])}

    def _power(self, k: int) -> tuple:
        got = self._qpow.get(k)
        if got is None:
            g = self.g
            step = self.q if k > 0 else g.nf(g.path_inverse(self.q))
            prev = self._power(k - 1 if k > 0 else k + 1)
            got = g.nf(g.concat(prev, step))
            self._qpow[k] = got
        return got

    def vertex(self, m: int) -> tuple:
        got = self._cache.get(m)
        if got is None:
            g = self.g
            k, j = divmod(m, self.n)
            if j == 0:
                pre = g.trivial_path(self.q[0])
            else:
                pre = self.q[: 2 * j + 1] + (g.vertices[g.letter_end(self.q[2 * j])].identity(),)
            path = g.concat(g.concat(self.u, self._power(k)), pre)
            got = vertex_key(self.g, path)
            self._cache[m] = got
        return got

    def position(self, key: tuple) -> Optional[int]:
        d = distance(self.g, self.vertex(0), key)
        for m in (d, -d):
            if self.vertex(m) == key:
                return m
        return None


def _orientation(axis: Axis, x) -> Tuple[int, int]:
    """(direction, image of position 0) for x preserving the axis."""
    g = axis.g
    p0 = axis.position(act(g, x, axis.vertex(0)))
    p1 = axis.position(act(g, x, axis.vertex(1)))
    if p0 is None or p1 is None or abs(p1 - p0) != 1:
        raise AxisNotInvariant("a generator does not preserve the invariant line")
    return (p1 - p0, p0)


def _lattice_kernel(translations: Sequence[int]) -> List[List[int]]:
    lat = Lattice(1, [[t] for t in translations])
    return lat.left_kernel()


def _word_in(P: Group, gens: Sequence, exps: Sequence[int]):
    out = P.identity()
    for x, n in zip(gens, exps):
        out = P.mul(out, P.power(x, n))
    return out


def invariant_line_core(h: Sequence, s, horizon: int = 2) -> CoreGraph:
    g = _gog(s)
    P = g.pi1
    e = P.identity()
    gens = [x for x in h if x != e]
    st = subgroup_type(gens, g)
    if st.kind == "Elliptic":
        return CoreGraph("Vertex", 0, [list(gens)], [], False)
    # hyperbolic element of least translation among short words
    cands = []
    letters = []
    for x in gens:
        letters.extend([x, P.inv(x)])
    for n in range(1, horizon + 1):
        for w in itertools.product(range(len(letters)), repeat=n):
            y = e
            for i in w:
                y = P.mul(y, letters[i])
            L = g.translation_length(y)
            if L > 0:
                cands.append((L, n, w, y))
    cands.sort(key=lambda t: (t[0], t[1], t[2]))
    c = cands[0][3]
    axis = Axis(g, c)
    orient = [_orientation(axis, x) for x in gens]
    refl = [i for i, (d, _) in enumerate(orient) if d < 0]
    if not refl:
        trans = [p for _, p in orient]
        k = 0
        for t in trans:
            k = gcd(k, abs(t))
        ker = [_word_in(P, gens, row) for row in _lattice_kernel(trans)]
        ker += [P.mul(P.mul(gens[i], gens[j]), P.inv(P.mul(gens[j], gens[i]))) for i, j in _pairs(gens)]
        ker = _dedupe(P, ker)
        return CoreGraph("Circle", k, [list(ker) for _ in range(k)], [list(ker) for _ in range(k)], False, axis, list(range(k)))
    # dihedral: reflections x -> 2r - x with r = p0 / 2
    centers = []
    for i in refl:
        p0 = orient[i][1]
        if p0 % 2:
            raise AxisNotInvariant("a reflection inverts an edge of the invariant line")
        centers.append(p0 // 2)
    trans = []
    for i, (d, p0) in enumerate(orient):
        if d > 0:
            trans.append(p0)
    for a, b in itertools.combinations(centers, 2):
        trans.append(2 * (a - b))
    T = 0
    for t in trans:
        T = gcd(T, abs(t))
    r0 = centers[0]
    if T == 0:
        # a single reflection class: the core is one vertex
        return CoreGraph("Segment", 0, [list(gens)], [], True, axis, [r0])
    if T % 2:
        raise AxisNotInvariant("dihedral action with odd period inverts an edge")
    k = T // 2
    r1 = r0 + k
    cells = [r0 + j for j in range(k + 1)]
    # stabilizers from short words: elements fixing the relevant positions
    ball = _ball(P, gens, BALL_RADIUS)
    vstab = []
    for m in cells:
        key = axis.vertex(m)
        stab = _dedupe(P, [y for y in ball if y != e and act(g, y, key) == key])
        if m in (cells[0], cells[-1]):
            # report the orbit representative nearest the base vertex
            b = min(ball, key=lambda y: (g.edge_length(act(g, y, key)), len(path_to_str(g, act(g, y, key))), ball.index(y)))
            stab = [P.conj(b, y) for y in stab]
        vstab.append(stab)
    estab = []
    for m in cells[:-1]:
        ek = edge_key(g, axis.vertex(m), axis.vertex(m + 1))
        estab.append(_dedupe(P, [y for y in ball if y != e and act_edge(g, y, ek) == ek]))
    return CoreGraph("Segment", k, vstab, estab, True, axis, cells)


def _dedupe(P: Group, xs) -> List:
    """Drop the identity, repeats and (when membership is available) redundant generators."""
    out = []
    seen = set()
    e = P.identity()
    for x in xs:
        if x == e or x in seen or P.inv(x) in seen:
            continue
        seen.add(x)
        if out:
            try:
                if Subgroup(P, tuple(out)).contains(x):
                    continue
            except UnsupportedBackend:
                pass
        out.append(x)
    return out


def _ball(P: Group, gens: Sequence, radius: int) -> List:
    """Elements of word length <= radius, in shortlex order of their words."""
    letters = []
    for x in gens:
        letters.extend([x, P.inv(x)])
    out = [P.identity()]
    seen = {P.identity()}
    layer = [(P.identity(), None)]
    for _ in range(radius):
        nxt = []
        for y, last in layer:
            for i, l in enumerate(letters):
                if last is not None and (i ^ 1) == last:
                    continue
                z = P.mul(y, l)
                if z not in seen:
                    seen.add(z)
                    out.append(z)
                    nxt.append((z, i))
        layer = nxt
    return out


# ---------------------------------------------------------------------------
# quotient cores


@dataclass
class QuotientCore:
    """Cells of an invariant subtree modulo the acting subgroup."""

    tree: GraphOfGroups
    gens: List
    vertices: List[tuple]  # representative keys
    vertex_stabs: List[List]
    edges: List[Tuple[tuple, tuple]]  # representative edges
    edge_stabs: List[List]
    ends: List[Tuple[int, int]]  # vertex classes of the two ends (near, far)
    carriers: List[Tuple[object, object]]  # b with b * end = representative
    elliptic: bool = False
    ball: List = field(default_factory=list, repr=False)

    def summary(self):
        return {"vertices": len(self.vertices), "edges": len(self.edges)}

    def _orbits(self):
        cache = self.__dict__.setdefault("_vorb", {})
        return cache

    def classify_vertex(self, y: tuple) -> Tuple[int, object]:
        """(class index, b) with b * y equal to the class representative."""
        g = self.tree
        P = g.pi1
        cache = self._orbits()
        for i, rep in enumerate(self.vertices):
            om = cache.get(rep)
            if om is None:
                om = {}
                for b in self.ball or [P.identity()]:
                    om.setdefault(act(g, b, rep), b)
                cache[rep] = om
            if y in om:
                return i, P.inv(om[y])
        raise BudgetExhausted("vertex is not in the orbit of any core vertex within the ball", partial={"vertex": repr(y)})

    def classify_edge(self, ek: Tuple[tuple, tuple]) -> Tuple[int, object]:
        g = self.tree
        P = g.pi1
        cache = self.__dict__.setdefault("_eorb", {})
        for j, rep in enumerate(self.edges):
            om = cache.get(rep)
            if om is None:
                om = {}
                for b in self.ball or [P.identity()]:
                    om.setdefault(act_edge(g, b, rep), b)
                cache[rep] = om
            if ek in om:
                return j, P.inv(om[ek])
        raise BudgetExhausted("edge is not in the orbit of any core edge within the ball", partial={"edge": repr(ek)})


def quotient_core(h: Sequence, s, radius: int = BALL_RADIUS, max_cells: int = 64, seeds: Sequence[tuple] = ()) -> QuotientCore:
    """Quotient of the subtree spanned by the orbit of a base point.

    The base point is the first seed if given, else a fixed vertex (elliptic
    case) or the base vertex of the tree.  Seeds are kept as representatives
    and never trimmed.
    """
    g = _gog(s)
    P = g.pi1
    e = P.identity()
    gens = [x for x in h if x != e]
    st = subgroup_type(gens, g)
    seeds = list(seeds)
    if st.kind == "Elliptic" and not seeds:
        return QuotientCore(g, gens, [st.fixed_vertex], [_dedupe(P, gens)], [], [], [], [], elliptic=True, ball=[e])
    if st.kind == "Elliptic":
        p = st.fixed_vertex
    else:
        p = seeds[0] if seeds else base_vertex(g)
    vset: List[tuple] = []
    eset: List[Tuple[tuple, tuple]] = []

    def add_path(path):
        for v in path:
            if v not in vset:
                vset.append(v)
        for a, b in zip(path, path[1:]):
            ek = edge_key(g, a, b)
            if ek not in eset:
                eset.append(ek)
        if len(vset) > max_cells:
            raise BudgetExhausted("quotient core exploration exceeded the cell budget", partial={"vertices": len(vset)})

    for y in seeds:
        add_path(geodesic(g, p, y))
    for x in gens:
        for y in (x, P.inv(x)):
            add_path(geodesic(g, p, act(g, y, p)))
    order = [v for v in seeds] + [v for v in vset if v not in seeds]
    ball = _ball(P, gens, radius)
    reps: List[tuple] = []
    cls: Dict[tuple, Tuple[int, object]] = {}
    images_cache: Dict[tuple, Dict[tuple, object]] = {}

    def orbit_map(key):
        got = images_cache.get(key)
        if got is None:
            got = {}
            for b in ball:
                got.setdefault(act(g, b, key), b)
            images_cache[key] = got
        return got

    for v in order:
        if v in cls:
            continue
        idx = len(reps)
        reps.append(v)
        cls[v] = (idx, e)
        om = orbit_map(v)
        for w in order:
            if w not in cls and w in om:
                # om[w] * v = w, so b = om[w]^-1 carries w to the representative
                cls[w] = (idx, P.inv(om[w]))
    vstabs = []
    for v in reps:
        vstabs.append(_dedupe(P, [b for b in ball if b != e and act(g, b, v) == v]))
    ereps: List[Tuple[tuple, tuple]] = []
    ecls: Dict[Tuple[tuple, tuple], int] = {}
    for ek in eset:
        if ek in ecls:
            continue
        idx = len(ereps)
        ereps.append(ek)
        ecls[ek] = idx
        for b in ball:
            im = act_edge(g, b, ek)
            if im in eset and im not in ecls:
                ecls[im] = idx
    estabs = []
    ends = []
    carriers = []
    for ek in ereps:
        estabs.append(_dedupe(P, [b for b in ball if b != e and act_edge(g, b, ek) == ek]))
        (i0, b0), (i1, b1) = cls[ek[0]], cls[ek[1]]
        ends.append((i0, i1))
        carriers.append((b0, b1))
    core = QuotientCore(g, gens, reps, vstabs, ereps, estabs, ends, carriers, ball=ball)
    keep = {cls[v][0] for v in seeds}
    return _trim(core, keep)


def _trim(core: QuotientCore, keep=frozenset()) -> QuotientCore:
    """Drop terminal vertices whose stabilizer equals the incident edge stabilizer."""
    g = core.tree
    keep_keys = [core.vertices[i] for i in sorted(keep)]
    while True:
        val = [0] * len(core.vertices)
        for a, b in core.ends:
            val[a] += 1
            val[b] += 1
        drop = None
        for j, (a, b) in enumerate(core.ends):
            for end, side in ((a, 0), (b, 1)):
                if val[end] != 1 or a == b or core.vertices[end] in keep_keys:
                    continue
                # vertex group equals edge group when every vertex stabilizer generator
                # fixes the edge (after carrying the edge to the vertex representative)
                carrier = core.carriers[j][side]
                ek = act_edge(g, carrier, core.edges[j])
                if all(act_edge(g, x, ek) == ek for x in core.vertex_stabs[end]):
                    drop = (j, end)
                    break
            if drop:
                break
        if drop is None or len(core.vertices) == 1:
            return core
        j, v = drop
        keep_v = [i for i in range(len(core.vertices)) if i != v]
        remap = {old: new for new, old in enumerate(keep_v)}
        keep_e = [i for i in range(len(core.edges)) if i != j]
        core = QuotientCore(
            g,
            core.gens,
            [core.vertices[i] for i in keep_v],
            [core.vertex_stabs[i] for i in keep_v],
            [core.edges[i] for i in keep_e],
            [core.edge_stabs[i] for i in keep_e],
            [(remap[core.ends[i][0]], remap[core.ends[i][1]]) for i in keep_e],
            [core.carriers[i] for i in keep_e],
            ball=core.ball,
        )


def quotient_core_graph(h: Sequence, s, ambient_of=None, radius: int = BALL_RADIUS) -> GraphOfGroups:
    """The quotient graph of groups, vertex and edge groups made abstract.

    ``ambient_of`` maps elements of pi1 of the tree's graph into the group in
    which abstract types are computed (defaults to the identity).
    """
    g = _gog(s)
    core = quotient_core(h, g, radius=radius)
    amb = ambient_of or (lambda x: x)
    G = _ambient_group(g, ambient_of)
    return core_to_graph(core, G, amb)


def _ambient_group(g: GraphOfGroups, ambient_of):
    if ambient_of is None:
        return g.pi1
    return g.marking.ambient


def core_to_graph(core: QuotientCore, G: Group, amb, name: str = "") -> GraphOfGroups:
    P = core.tree.pi1
    vabs = []
    for i, stab in enumerate(core.vertex_stabs):
        vabs.append(abstract_subgroup(G, [amb(x) for x in stab]))
    verts = [(f"q{i}", A.group) for i, A in enumerate(vabs)]
    edges = []
    emarks = {}
    for j, stab in enumerate(core.edge_stabs):
        A = abstract_subgroup(G, [amb(x) for x in stab])
        a, b = core.ends[j]
        b0, b1 = (amb(c) for c in core.carriers[j])
        sm = Homomorphism(A.group, vabs[a].group, {c: vabs[a].preimage(G.conj(b0, A.hom.images[c])) for c in A.group.gens})
        dm = Homomorphism(A.group, vabs[b].group, {c: vabs[b].preimage(G.conj(b1, A.hom.images[c])) for c in A.group.gens})
        eid = f"f{j}"
        edges.append(Edge(eid, f"q{a}", f"q{b}", A.group, sm, dm))
        emarks[eid] = G.mul(b0, G.inv(b1))
    marking = Marking(G, {f"q{i}": A.hom for i, A in enumerate(vabs)}, emarks)
    return GraphOfGroups(verts, edges, "q0", name, marking)


# ---------------------------------------------------------------------------
# abstract types of subgroups


class AbstractSubgroup:
    """A group X with an injective map into G whose image is the subgroup."""

    def __init__(self, group: Group, hom: Homomorphism, exact: bool):
        self.group = group
        self.hom = hom
        self.exact = exact
        self._ball = None
        self._img = None

    def preimage(self, y):
        G = self.hom.target
        X = self.group
        if self._img is None:
            self._img = Subgroup(G, tuple(self.hom.images[c] for c in X.gens))
        if self.exact:
            try:
                wit = self._img.member(y)
            except UnsupportedBackend:
                wit = None
                self.exact = False
            else:
                if wit is None:
                    raise BudgetExhausted("element is not in the subgroup")
                return X.evaluate(witness_word(wit, X.gens))
        if self._ball is None:
            self._ball = {}
            for w in _ball_words(X, BALL_RADIUS + 1):
                self._ball.setdefault(self.hom.apply_word(w), X.evaluate(w))
        got = self._ball.get(y)
        if got is None:
            raise BudgetExhausted("no preimage found within the word-length budget")
        return got


def _ball_words(X: Group, radius: int):
    letters = [(g, s) for g in X.gens for s in (1, -1)]
    yield ()
    layer = [()]
    for _ in range(radius):
        nxt = []
        for w in layer:
            for l in letters:
                if w and w[-1] == (l[0], -l[1]):
                    continue
                nxt.append(w + (l,))
        for w in nxt:
            yield w
        layer = nxt


def _names_for(G: Group, images: Sequence, prefix: str = "g") -> List[str]:
    names = []
    used = set()
    for i, x in enumerate(images):
        w = G.word_of(x)
        cand = w[0][0] if len(w) == 1 and w[0][1] == 1 else f"{prefix}{i + 1}"
        while cand in used:
            cand = cand + "'"
        used.add(cand)
        names.append(cand)
    return names


def abstract_subgroup(G: Group, gens: Sequence) -> AbstractSubgroup:
    e = G.identity()
    gens = [x for x in gens if x != e]
    if isinstance(G, FreeAbelian):
        return _abstract_abelian(G, gens)
    if isinstance(G, Finite):
        return _abstract_finite(G, gens)
    if isinstance(G, Free):
        return _abstract_free(G, gens)
    if isinstance(G, GoGPi1):
        return _abstract_gog(G, gens)
    raise UnsupportedBackend(f"cannot compute abstract subgroups of {G.kind}")


def _abstract_abelian(G: FreeAbelian, gens) -> AbstractSubgroup:
    k = len(gens)
    if k == 0:
        X = Free(0)
        return AbstractSubgroup(X, Homomorphism(X, G, {}), True)
    rel_t = G._relation_rows()
    stacked = Lattice(G.n, [list(x) for x in gens] + rel_t)
    rels = [row[:k] for row in stacked.left_kernel()]
    rels = [r for r in rels if any(r)]
    if not rels:
        X = FreeAbelian(k, names=_names_for(G, gens))
        return AbstractSubgroup(X, Homomorphism(X, G, dict(zip(X.gens, gens))), True)
    U, D, V = smith_normal_form(rels)
    from sympy import Matrix

    Vinv = Matrix(V).inv()
    diag = [D[i][i] if i < len(D) else 0 for i in range(k)]
    free_elems, tors = [], []
    for j in range(k):
        d = diag[j]
        if d == 1:
            continue
        exps = [int(Vinv[j, i]) for i in range(k)]
        x = e_ = G.identity()
        for gx, n in zip(gens, exps):
            x = G.mul(x, G.power(gx, n))
        if d == 0:
            free_elems.append(x)
        else:
            tors.append((d, x))
    tors.sort(key=lambda t: t[0])
    imgs = free_elems + [x for _, x in tors]
    X = FreeAbelian(len(free_elems), [d for d, _ in tors], names=_names_for(G, imgs))
    return AbstractSubgroup(X, Homomorphism(X, G, dict(zip(X.gens, imgs))), True)


def _abstract_finite(G: Finite, gens) -> AbstractSubgroup:
    sub = Subgroup(G, tuple(gens))
    elems = sorted(sub.data["wit"], key=lambda x: G._rank[x])
    idx = {x: i for i, x in enumerate(elems)}
    table = [[idx[G.mul(x, y)] for y in elems] for x in elems]
    names = _names_for(G, gens, "h") if gens else []
    X = Finite(table, [(n, idx[x]) for n, x in zip(names, gens)], labels=[G.labels[x] for x in elems], check=False,
               name=f"<{', '.join(names)}>" if gens else "1")
    return AbstractSubgroup(X, Homomorphism(X, G, {n: x for n, x in zip(names, gens)}), True)


def _abstract_free(G: Free, gens) -> AbstractSubgroup:
    sg = StallingsGraph(gens)
    # basis: one loop per edge outside a BFS spanning tree of the folded graph
    from collections import deque

    paths = {sg.base: ()}
    q = deque([sg.base])
    tree_edges = set()
    letters = [(g, s) for g in G.gens for s in (1, -1)]
    while q:
        v = q.popleft()
        for l in letters:
            step = sg.out[v].get(l)
            if step and step[0] not in paths:
                paths[step[0]] = paths[v] + (l,)
                q.append(step[0])
    basis = []
    for eid, (u, gname, w, tag) in sorted(sg.edges.items()):
        pu, pw = paths[u], paths[w]
        if pu + ((gname, 1),) == pw or pw + ((gname, -1),) == pu:
            continue
        from .base_groups import free_reduce, inverse_word

        basis.append(free_reduce(pu + ((gname, 1),) + inverse_word(pw)))
    X = Free(len(basis), names=_names_for(G, basis))
    return AbstractSubgroup(X, Homomorphism(X, G, dict(zip(X.gens, basis))), True)


def _abstract_gog(G: GoGPi1, gens) -> AbstractSubgroup:
    g = G.gog
    if not gens:
        X = Free(0)
        return AbstractSubgroup(X, Homomorphism(X, G, {}), True)
    try:
        data = G._elliptic_prepare(tuple(gens))
    except UnsupportedBackend:
        data = None
    if data is not None:
        q, v, K = data
        inner = abstract_subgroup(g.vertices[v], list(K.gens))
        X = inner.group
        qi = g.path_inverse(q)
        imgs = {c: g.nf(g.concat(g.concat(q, g.trivial_path(v, inner.hom.images[c])), qi)) for c in X.gens}
        return AbstractSubgroup(X, Homomorphism(X, G, imgs), True)
    core = quotient_core(gens, g)
    Q = simplify_graph(core_to_graph(core, G, lambda x: x, name=""))
    if len(Q.vertices) == 1 and not Q.edges:
        v = next(iter(Q.vertices))
        X = Q.vertices[v]
        return AbstractSubgroup(X, Q.marking.vertex[v], True)
    from .graph_of_groups import marking_hom

    v = next(iter(Q.vertices))
    if len(Q.vertices) == 1 and Q.vertices[v].is_trivial() and all(e.group.is_trivial() for e in Q.edges.values()):
        # a rose with trivial groups: free on the loops
        loops = [Q.marking.edge[e] for e in Q.edges]
        X = Free(len(loops), names=_names_for(G, loops))
        return AbstractSubgroup(X, Homomorphism(X, G, dict(zip(X.gens, loops))), False)
    X = Q.pi1
    return AbstractSubgroup(X, marking_hom(Q), False)


def simplify_graph(Q: GraphOfGroups) -> GraphOfGroups:
    """Collapse non-loop edges whose group fills an endpoint group."""
    from .graph_of_groups import _is_surjective, collapse_edge

    while True:
        hit = None
        for e in Q.edges.values():
            if e.is_loop:
                continue
            if _is_surjective(e.dst_map) or _is_surjective(e.src_map):
                hit = e.id
                break
        if hit is None:
            return Q
        Q = collapse_edge(Q, hit)
