"""Square complexes of groups from the diagonal action on two trees.

G acts on T1 x T2 where T1 is the tree of a marked graph of groups (the
priority side) and T2 the tree of a splitting.  Over each vertex v of T1 we
take an invariant subtree of T2 for the stabilizer of v, over each edge of
T1 the invariant line (or a fixed point) of the edge group.  The quotient
is a finite square complex Z whose cells carry stabilizers.

Orientation: edges projecting to edges of T1 are *horizontal*, edges
inside a fibre over a vertex of T1 are *vertical*.  A square is
``edge of T1 x edge of T2``; its corners are ``c<a><b>`` with ``a`` the T1
end and ``b`` the T2 end, its sides ``bottom``/``top`` (horizontal, at
``b = 0, 1``) and ``left``/``right`` (vertical, at ``a = 0, 1``).

Every cell has a chosen lift in T1 x T2.  A face record ``(cell, k)`` says
that ``k`` carries the corresponding face of the lift onto the lift of
``cell``; incidence maps are conjugation by ``k`` and twists are
``k_a k_b k_ab^-1``.  All group elements live in pi1 of the second graph,
which acts on T2 directly; abstract cell groups are computed there too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .base_groups import Group, Homomorphism, Subgroup, format_word
from .errors import (
    BudgetExhausted,
    ClassificationInconclusive,
    CocycleViolation,
    FiberMismatch,
    NonSeparating,
    NotAForest,
    NotHyperbolicPair,
    UnsupportedBackend,
)
from .graph_of_groups import (
    Edge,
    GraphOfGroups,
    Marking,
    Presentation,
    Splitting,
    _is_surjective,
    collapse_edge,
    fingerprint,
    from_ambient,
    group_presentation,
    marking_hom,
    transport,
)
from .tree_action import (
    BALL_RADIUS,
    AbstractSubgroup,
    Axis,
    QuotientCore,
    _ball,
    _dedupe,
    _gog,
    abstract_subgroup,
    act,
    act_edge,
    edge_key,
    invariant_line_core,
    pair_type,
    quotient_core,
    subgroup_type,
    vertex_key,
)

SIDES = ("bottom", "top", "left", "right")
CORNERS = ("c00", "c10", "c01", "c11")
# the two corners of each side, in the side's own direction
SIDE_CORNERS = {"bottom": ("c00", "c10"), "top": ("c01", "c11"), "left": ("c00", "c01"), "right": ("c10", "c11")}
# direction of each side along the counterclockwise boundary
SIDE_SENSE = {"bottom": 1, "right": 1, "top": -1, "left": -1}
ORDER_BOUND = 64


@dataclass(frozen=True)
class Face:
    role: str
    cell: str
    k: object
    rev: bool = False


@dataclass
class Cell:
    id: str
    dim: int
    kind: str  # vertex | horizontal | vertical | square
    gens: List
    faces: List[Face] = field(default_factory=list)
    over: str = ""  # vertex or edge of the priority graph below the cell

    def face(self, role: str) -> Face:
        for f in self.faces:
            if f.role == role:
                return f
        raise KeyError(role)


class SquareComplexOfGroups:
    def __init__(self, cells: Sequence[Cell], P: Group, to_ambient: Homomorphism, g1: GraphOfGroups = None, g2: GraphOfGroups = None, names=("", ""), bands=None):
        self.cells: Dict[str, Cell] = {c.id: c for c in cells}
        self.P = P
        self.to_ambient = to_ambient
        self.G = to_ambient.target
        self.g1, self.g2 = g1, g2
        self.names = names
        self.bands: Dict[str, List[str]] = bands if bands is not None else {}
        self._abs: Dict[str, AbstractSubgroup] = {}

    # basic queries ------------------------------------------------------
    def of_kind(self, kind: str) -> List[Cell]:
        return [c for c in self.cells.values() if c.kind == kind]

    def counts(self) -> Dict[str, int]:
        return {
            "vertices": len(self.of_kind("vertex")),
            "edges": len(self.of_kind("horizontal")) + len(self.of_kind("vertical")),
            "horizontal": len(self.of_kind("horizontal")),
            "vertical": len(self.of_kind("vertical")),
            "squares": len(self.of_kind("square")),
        }

    def abstract(self, cid: str) -> AbstractSubgroup:
        got = self._abs.get(cid)
        if got is None:
            got = abstract_subgroup(self.P, self.cells[cid].gens)
            self._abs[cid] = got
        return got

    def group_words(self, cid: str) -> List[str]:
        return [format_word(self.G.word_of(self.to_ambient(x))) for x in self.cells[cid].gens]

    def restrict(self, keep: Sequence[str]) -> "SquareComplexOfGroups":
        keep = set(keep)
        cells = [c for c in self.cells.values() if c.id in keep]
        bands = {e: [q for q in qs if q in keep] for e, qs in self.bands.items()}
        out = SquareComplexOfGroups(cells, self.P, self.to_ambient, self.g1, self.g2, self.names, bands)
        out._abs = {k: v for k, v in self._abs.items() if k in keep}
        return out

    def side_incidences(self) -> Dict[str, List[Tuple[str, str, bool]]]:
        """1-cell -> [(square, side role, rev)] over all squares."""
        out: Dict[str, List[Tuple[str, str, bool]]] = {}
        for q in self.of_kind("square"):
            for s in SIDES:
                f = q.face(s)
                out.setdefault(f.cell, []).append((q.id, s, f.rev))
        return out

    # arrows of the associated scwol ---------------------------------------
    def arrows(self) -> List[Tuple[str, Cell, Face]]:
        out = []
        for c in self.cells.values():
            for f in c.faces:
                out.append((f"{c.id}>{f.role}", c, f))
        return out

    def composable(self):
        """(a, b, ab): b = square -> side, a = side -> end, ab = square -> corner."""
        out = []
        for q in self.of_kind("square"):
            for s in SIDES:
                fb = q.face(s)
                side = self.cells[fb.cell]
                for j in (0, 1):
                    fa = side.face(f"end{j ^ int(fb.rev)}")
                    fab = q.face(SIDE_CORNERS[s][j])
                    out.append(((f"{side.id}>{fa.role}", side, fa), (f"{q.id}>{s}", q, fb), (f"{q.id}>{fab.role}", q, fab)))
        return out

    def twist(self, a, b, ab):
        P = self.P
        return P.mul(P.mul(a[2].k, b[2].k), P.inv(ab[2].k))

    def check(self) -> Dict[str, object]:
        """Cocycle condition on generators, band membership and vertex links."""
        P = self.P
        for a, b, ab in self.composable():
            rho = a[2].cell
            Xr = self.abstract(rho)
            try:
                g = Xr.preimage(self.twist(a, b, ab))
            except BudgetExhausted:
                raise CocycleViolation(f"twist of ({a[0]}, {b[0]}) does not fix the lift of {rho}")
            Xs = self.abstract(b[1].id)
            Xt = self.abstract(b[2].cell)
            for x in Xs.group.gens:
                y = Xs.hom.images[x]
                mid = Xt.preimage(P.conj(b[2].k, y))
                left = Xr.preimage(P.conj(a[2].k, Xt.hom(mid)))
                right = Xr.group.conj(g, Xr.preimage(P.conj(ab[2].k, y)))
                if left != right:
                    raise CocycleViolation(f"cocycle condition fails for ({a[0]}, {b[0]}) on {x}")
        inc = self.side_incidences()
        in_band = {}
        for e, qs in self.bands.items():
            for q in qs:
                in_band[q] = in_band.get(q, 0) + 1
        bands_ok = all(in_band.get(q.id, 0) == 1 for q in self.of_kind("square"))
        return {"cocycle": True, "bands": bands_ok, "links": link_shapes(self, inc)}

    def to_dict(self) -> dict:
        cells = []
        for c in self.cells.values():
            d = {"id": c.id, "kind": c.kind, "over": c.over, "group": self.group_words(c.id)}
            if c.faces:
                d["faces"] = {f.role: f.cell for f in c.faces}
            cells.append(d)
        return {"counts": self.counts(), "cells": cells, "bands": {e: list(q) for e, q in self.bands.items()}}


def link_shapes(z: SquareComplexOfGroups, inc=None) -> Dict[str, List[str]]:
    """Link of each 0-cell: a list of components, each circle, segment or point."""
    inc = inc if inc is not None else z.side_incidences()
    out = {}
    for v in z.of_kind("vertex"):
        pieces = []
        for P in _link_components(z, inc, only=v.id):
            pieces.append(P.shape)
        for c in z.cells.values():
            if c.dim == 1 and c.id not in inc:
                for f in c.faces:
                    if f.cell == v.id:
                        pieces.append("point")
        out[v.id] = pieces
    return out


# ---------------------------------------------------------------------------
# construction


def _tr(a, b, x):
    return transport(_gog(a), _gog(b), x)


def build_core_complex(s1, s2, priority: str = "first", check: bool = True) -> SquareComplexOfGroups:
    """Core of the diagonal action; ``s1`` may be any marked graph of groups."""
    if priority == "second":
        s1, s2 = s2, s1
    elif priority != "first":
        raise ValueError("priority must be 'first' or 'second'")
    g1, g2 = _gog(s1), _gog(s2)
    if check:
        if not (isinstance(s1, Splitting) and isinstance(s2, Splitting)):
            raise NotHyperbolicPair("the pair check needs two splittings")
        pt = pair_type(s1, s2, _tr)
        if pt != "HH":
            raise NotHyperbolicPair(f"pair type is {pt}, not HH", pair=pt)
    P1, P2 = g1.pi1, g2.pi1
    to2 = lambda x: transport(g1, g2, x)
    e2 = P2.identity()
    # lines over edges
    lines = {}
    for E in g1.edges.values():
        C = [to2(P1.vertex_element(E.src, E.src_map.images[c])) for c in E.group.gens]
        C = [x for x in C if x != e2]
        t = to2(P1.edge_element(E.id))
        lines[E.id] = _line(g2, C, t)
    # fibres over vertices
    seeds: Dict[str, List[tuple]] = {v: [] for v in g1.vertices}
    for E in g1.edges.values():
        L = lines[E.id]
        for x in L.points:
            if x not in seeds[E.src]:
                seeds[E.src].append(x)
        for x in L.points:
            y = act(g2, L.tinv, x)
            if y not in seeds[E.dst]:
                seeds[E.dst].append(y)
    cores: Dict[str, QuotientCore] = {}
    for v, Gv in g1.vertices.items():
        A = [to2(P1.vertex_element(v, Gv.gen(x))) for x in Gv.gens]
        cores[v] = quotient_core(A, g2, seeds=seeds[v])
    cells: List[Cell] = []
    vid: Dict[Tuple[str, int], str] = {}
    for v, Q in cores.items():
        for i, stab in enumerate(Q.vertex_stabs):
            cid = f"p{len(vid)}"
            vid[(v, i)] = cid
            cells.append(Cell(cid, 0, "vertex", list(stab), over=v))
    hcells: List[Cell] = []
    hid: Dict[Tuple[str, int], str] = {}
    for E in g1.edges.values():
        L = lines[E.id]
        for m, x in enumerate(L.points):
            f0 = _vertex_face(g2, cores[E.src], vid, E.src, x, P2.identity(), "end0")
            f1 = _vertex_face(g2, cores[E.dst], vid, E.dst, x, L.tinv, "end1")
            cid = f"h{len(hid)}"
            hid[(E.id, m)] = cid
            hcells.append(Cell(cid, 1, "horizontal", L.point_stabs[m], [f0, f1], over=E.id))
    vcells: List[Cell] = []
    uid: Dict[Tuple[str, int], str] = {}
    for v, Q in cores.items():
        for j, ek in enumerate(Q.edges):
            a, b = Q.ends[j]
            b0, b1 = Q.carriers[j]
            cid = f"v{len(uid)}"
            uid[(v, j)] = cid
            vcells.append(Cell(cid, 1, "vertical", list(Q.edge_stabs[j]), [Face("end0", vid[(v, a)], b0), Face("end1", vid[(v, b)], b1)], over=v))
    squares: List[Cell] = []
    bands: Dict[str, List[str]] = {}
    for E in g1.edges.values():
        L = lines[E.id]
        bands[E.id] = []
        for m, (x, y) in enumerate(L.segments):
            faces = []
            for role, pt in (("bottom", x), ("top", y)):
                idx, c = L.classify(pt)
                faces.append(Face(role, hid[(E.id, idx)], c))
            for role, core, v, tau in (("left", cores[E.src], E.src, P2.identity()), ("right", cores[E.dst], E.dst, L.tinv)):
                xx, yy = act(g2, tau, x), act(g2, tau, y)
                j, b = core.classify_edge(edge_key(g2, xx, yy))
                k = P2.mul(b, tau)
                rev = act(g2, k, x) != core.edges[j][0]
                faces.append(Face(role, uid[(v, j)], k, rev))
            for a, side_v, core, tau in ((0, E.src, cores[E.src], P2.identity()), (1, E.dst, cores[E.dst], L.tinv)):
                for bb, pt in ((0, x), (1, y)):
                    faces.append(_vertex_face(g2, core, vid, side_v, pt, tau, f"c{a}{bb}"))
            cid = f"q{len(squares)}"
            squares.append(Cell(cid, 2, "square", L.segment_stabs[m], faces, over=E.id))
            bands[E.id].append(cid)
    z = SquareComplexOfGroups(cells + hcells + vcells + squares, P2, marking_hom(g2), g1, g2, (getattr(s1, "name", g1.name), getattr(s2, "name", g2.name)), bands)
    z.lines = lines
    z.cores = cores
    return z


def _vertex_face(g2, core: QuotientCore, vid, v, x, tau, role) -> Face:
    P2 = g2.pi1
    i, b = core.classify_vertex(act(g2, tau, x))
    return Face(role, vid[(v, i)], P2.mul(b, tau))


class _Line:
    """Invariant line (or fixed point) of an edge group on T2, modulo the group."""

    def __init__(self, g2, C, t):
        P = g2.pi1
        self.g2 = g2
        self.C = C
        self.tinv = P.inv(t)
        self.ball = _ball(P, C, BALL_RADIUS) if C else [P.identity()]
        e = P.identity()
        core = invariant_line_core(C, g2) if C else None
        self.variant = core.variant if core else "Vertex"
        if self.variant == "Vertex":
            st = subgroup_type(C, g2)
            self.points = [st.fixed_vertex]
            self.segments = []
        else:
            ax = core.axis
            pos = list(core.positions)
            self.points = [ax.vertex(m) for m in pos]
            if self.variant == "Circle":
                self.segments = [(ax.vertex(m), ax.vertex(m + 1)) for m in pos]
            else:
                self.segments = [(ax.vertex(m), ax.vertex(m + 1)) for m in pos[:-1]]
        self.point_stabs = [_dedupe(P, [c for c in self.ball if c != e and act(g2, c, x) == x]) for x in self.points]
        self.segment_stabs = []
        for x, y in self.segments:
            ek = edge_key(g2, x, y)
            self.segment_stabs.append(_dedupe(P, [c for c in self.ball if c != e and act_edge(g2, c, ek) == ek]))
        self._orb = None

    def classify(self, x) -> Tuple[int, object]:
        P = self.g2.pi1
        if self._orb is None:
            self._orb = []
            for rep in self.points:
                om = {}
                for c in self.ball:
                    om.setdefault(act(self.g2, c, rep), c)
                self._orb.append(om)
        for i, om in enumerate(self._orb):
            if x in om:
                return i, P.inv(om[x])
        raise BudgetExhausted("line vertex outside the orbits of the representatives")


def _line(g2, C, t) -> _Line:
    return _Line(g2, C, t)


# ---------------------------------------------------------------------------
# presentation


def complex_fundamental_presentation(z: SquareComplexOfGroups, verify: bool = True) -> Presentation:
    if verify:
        z.check()
    P = z.P
    gens: List[str] = []
    rels = []
    name = {}
    for c in z.cells.values():
        X = z.abstract(c.id)
        for x in X.group.gens:
            nm = f"{c.id}:{x}"
            name[(c.id, x)] = nm
            gens.append(nm)
        for r in group_presentation(X.group).relators:
            rels.append(tuple((name[(c.id, g)], e) for g, e in r))
    arrows = z.arrows()
    for aid, _, _ in arrows:
        gens.append(aid)

    def word_in(cid, y):
        X = z.abstract(cid)
        w = X.group.word_of(X.preimage(y))
        return tuple((name[(cid, g)], e) for g, e in w)

    def inv(w):
        return tuple((g, -e) for g, e in reversed(w))

    for aid, c, f in arrows:
        X = z.abstract(c.id)
        for x in X.group.gens:
            img = word_in(f.cell, P.conj(f.k, X.hom.images[x]))
            rels.append(((aid, 1), (name[(c.id, x)], 1), (aid, -1)) + inv(img))
    for a, b, ab in z.composable():
        g = word_in(a[2].cell, z.twist(a, b, ab))
        rels.append(((a[0], 1), (b[0], 1), (ab[0], -1)) + inv(g))
    for aid in _max_tree(z):
        rels.append(((aid, 1),))
    return Presentation(gens, [r for r in rels if r])


def _max_tree(z: SquareComplexOfGroups) -> List[str]:
    """Arrows of a breadth-first maximal tree of the incidence graph."""
    cells = list(z.cells)
    if not cells:
        return []
    adj: Dict[str, List[Tuple[str, str]]] = {c: [] for c in cells}
    for aid, c, f in z.arrows():
        adj[c.id].append((aid, f.cell))
        adj[f.cell].append((aid, c.id))
    start = next((c.id for c in z.cells.values() if c.dim == 0), cells[0])
    seen = {start}
    queue = [start]
    tree = []
    while queue:
        u = queue.pop(0)
        for aid, w in sorted(adj[u]):
            if w not in seen:
                seen.add(w)
                tree.append(aid)
                queue.append(w)
    return tree


# ---------------------------------------------------------------------------
# subdivision


def subdivide(z: SquareComplexOfGroups) -> SquareComplexOfGroups:
    """Cubical subdivision: each edge in two, each square in four."""
    P = z.P
    one = P.identity()
    new: List[Cell] = []
    for c in z.of_kind("vertex"):
        new.append(Cell(c.id, 0, "vertex", list(c.gens), over=c.over))
    for c in z.cells.values():
        if c.dim == 1:
            new.append(Cell(f"{c.id}.m", 0, "vertex", list(c.gens), over=c.over))
        elif c.dim == 2:
            new.append(Cell(f"{c.id}.c", 0, "vertex", list(c.gens), over=c.over))
    for c in z.cells.values():
        if c.dim != 1:
            continue
        f0, f1 = c.face("end0"), c.face("end1")
        new.append(Cell(f"{c.id}.0", 1, c.kind, list(c.gens), [Face("end0", f0.cell, f0.k), Face("end1", f"{c.id}.m", one)], over=c.over))
        new.append(Cell(f"{c.id}.1", 1, c.kind, list(c.gens), [Face("end0", f"{c.id}.m", one), Face("end1", f1.cell, f1.k)], over=c.over))
    bands: Dict[str, List[str]] = {e: [] for e in z.bands}
    band_of = {q: e for e, qs in z.bands.items() for q in qs}
    for q in z.of_kind("square"):
        # inner edges: h<a> along y = 1/2, v<b> along x = 1/2
        for a in (0, 1):
            ends = [_point(q, (a, 1)), _point(q, (a + 1, 1))]
            new.append(Cell(f"{q.id}.h{a}", 1, "horizontal", list(q.gens), [Face("end0", *ends[0]), Face("end1", *ends[1])], over=q.over))
        for b in (0, 1):
            ends = [_point(q, (1, b)), _point(q, (1, b + 1))]
            new.append(Cell(f"{q.id}.v{b}", 1, "vertical", list(q.gens), [Face("end0", *ends[0]), Face("end1", *ends[1])], over=q.over))
        for a in (0, 1):
            for b in (0, 1):
                faces = []
                for role, seg in (("bottom", ((a, b), (a + 1, b))), ("top", ((a, b + 1), (a + 1, b + 1))), ("left", ((a, b), (a, b + 1))), ("right", ((a + 1, b), (a + 1, b + 1)))):
                    cid, k, rev = _segment(q, seg)
                    faces.append(Face(role, cid, k, rev))
                for role, (i, j) in (("c00", (0, 0)), ("c10", (1, 0)), ("c01", (0, 1)), ("c11", (1, 1))):
                    faces.append(Face(role, *_point(q, (a + i, b + j))))
                cid = f"{q.id}.{a}{b}"
                new.append(Cell(cid, 2, "square", list(q.gens), faces, over=q.over))
                if q.id in band_of:
                    bands[band_of[q.id]].append(cid)
    for c in new:
        c.faces = [Face(f.role, f.cell, one if f.k is None else f.k, f.rev) for f in c.faces]
    return SquareComplexOfGroups(new, P, z.to_ambient, z.g1, z.g2, z.names, bands)


def _point(q: Cell, p: Tuple[int, int]):
    """Cell and k for a point of the square in half-units (0, 1, 2)."""
    x, y = p
    if x in (0, 2) and y in (0, 2):
        f = q.face(f"c{x // 2}{y // 2}")
        return (f.cell, f.k)
    if x == 1 and y == 1:
        return (f"{q.id}.c", None)
    if y in (0, 2):
        f = q.face("bottom" if y == 0 else "top")
    else:
        f = q.face("left" if x == 0 else "right")
    return (f"{f.cell}.m", f.k)


def _segment(q: Cell, seg):
    """Sub-edge of the subdivided square between two half-unit points."""
    (x0, y0), (x1, y1) = seg
    if y0 == y1 and y0 in (0, 2):
        f = q.face("bottom" if y0 == 0 else "top")
        h = min(x0, x1)
        return (f"{f.cell}.{h ^ int(f.rev)}", f.k, f.rev)
    if x0 == x1 and x0 in (0, 2):
        f = q.face("left" if x0 == 0 else "right")
        h = min(y0, y1)
        return (f"{f.cell}.{h ^ int(f.rev)}", f.k, f.rev)
    if y0 == y1:
        return (f"{q.id}.h{min(x0, x1)}", None, False)
    return (f"{q.id}.v{min(y0, y1)}", None, False)


# ---------------------------------------------------------------------------
# developing subcomplexes into G


def develop(P: Group, nodes: Sequence, groups: Dict, links: Sequence[Tuple[object, object, object]]):
    """Lifts and image of pi1 for a connected sub-diagram.

    ``links`` are ``(big, small, k)`` with ``k`` carrying the face of the
    lift of ``big`` onto the lift of ``small``.  Returns ``(d, gens)``: the
    element ``d[n]`` moves the chosen lift of ``n`` into position, and
    ``gens`` generate the image of the fundamental group based at
    ``nodes[0]``.
    """
    e = P.identity()
    d = {nodes[0]: e}
    adj: Dict[object, List[Tuple[int, object, object, bool]]] = {n: [] for n in nodes}
    for i, (big, small, k) in enumerate(links):
        adj[big].append((i, small, k, True))
        adj[small].append((i, big, k, False))
    used = set()
    queue = [nodes[0]]
    while queue:
        u = queue.pop(0)
        for i, w, k, down in adj[u]:
            if w in d:
                continue
            used.add(i)
            d[w] = P.mul(d[u], P.inv(k)) if down else P.mul(d[u], k)
            queue.append(w)
    gens = []
    for n in nodes:
        if n not in d:
            continue
        for x in groups.get(n, ()):
            gens.append(P.conj(d[n], x))
    for i, (big, small, k) in enumerate(links):
        if i in used or big not in d or small not in d:
            continue
        gens.append(P.mul(P.mul(d[big], P.inv(k)), P.inv(d[small])))
    return d, [x for x in gens if x != e]


class _UF:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def groups(self, order):
        out: Dict[object, List] = {}
        for x in order:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


# ---------------------------------------------------------------------------
# tracks and cutting


@dataclass
class Track:
    """Dual curve crossing 1-cells of one kind; squares are passed straight through."""

    crosses: str  # horizontal | vertical
    edges: List[str]
    squares: List[str]
    flips: Dict[str, int]
    two_sided: bool
    gens: List = field(default_factory=list)

    @property
    def separating(self) -> bool:
        return self.two_sided

    def to_dict(self):
        return {"crosses": self.crosses, "edges": list(self.edges), "squares": list(self.squares), "two_sided": self.two_sided}


def _crossing_sides(crosses: str) -> Tuple[str, str]:
    return ("bottom", "top") if crosses == "horizontal" else ("left", "right")


def tracks(z: SquareComplexOfGroups, crosses: str) -> List[Track]:
    """All tracks crossing 1-cells of the given kind."""
    s0, s1 = _crossing_sides(crosses)
    nodes = [c.id for c in z.cells.values() if c.kind == crosses]
    uf = _UF(nodes)
    for q in z.of_kind("square"):
        uf.union(q.face(s0).cell, q.face(s1).cell)
    out = []
    for comp in uf.groups(nodes):
        out.append(_make_track(z, crosses, comp))
    return out


def _make_track(z: SquareComplexOfGroups, crosses: str, edges: Sequence[str]) -> Track:
    s0, s1 = _crossing_sides(crosses)
    eset = set(edges)
    sq = [q for q in z.of_kind("square") if q.face(s0).cell in eset]
    flips = {edges[0]: 0}
    two_sided = True
    pending = True
    while pending:
        pending = False
        for q in sq:
            fa, fb = q.face(s0), q.face(s1)
            for x, y in ((fa, fb), (fb, fa)):
                if x.cell in flips:
                    want = flips[x.cell] ^ int(x.rev) ^ int(y.rev)
                    if y.cell not in flips:
                        flips[y.cell] = want
                        pending = True
                    elif flips[y.cell] != want:
                        two_sided = False
    nodes = list(edges) + [q.id for q in sq]
    groups = {n: z.cells[n].gens for n in nodes}
    links = []
    for q in sq:
        for s in (s0, s1):
            f = q.face(s)
            links.append((q.id, f.cell, f.k))
    _, gens = develop(z.P, nodes, groups, links)
    return Track(crosses, list(edges), [q.id for q in sq], flips, two_sided, _dedupe(z.P, gens))


def priority_core(z: SquareComplexOfGroups, edge: Optional[str] = None) -> Track:
    """Track crossing the horizontal cells over one edge of the priority graph."""
    e = edge if edge is not None else next(iter(z.g1.edges))
    hs = [c.id for c in z.of_kind("horizontal") if c.over == e]
    for t in tracks(z, "horizontal"):
        if t.edges[0] in hs:
            return t
    raise KeyError(e)


def _pieces(z: SquareComplexOfGroups, crossed: Dict[str, Track]):
    """Pieces of z cut along tracks and the face links among them."""
    cross_h = set()
    cross_v = set()
    for cid, t in crossed.items():
        (cross_h if t.crosses == "horizontal" else cross_v).add(cid)
    pieces = []
    links = []
    for c in z.cells.values():
        if c.dim == 0:
            pieces.append((c.id,))
        elif c.dim == 1:
            if c.id in crossed:
                pieces.extend([(c.id, 0), (c.id, 1)])
                links.append(((c.id, 0), (c.face("end0").cell,), c.face("end0").k))
                links.append(((c.id, 1), (c.face("end1").cell,), c.face("end1").k))
            else:
                pieces.append((c.id,))
                for f in c.faces:
                    links.append(((c.id,), (f.cell,), f.k))
        else:
            hx = c.face("bottom").cell in cross_h
            vy = c.face("left").cell in cross_v
            xs = (0, 1) if hx else (None,)
            ys = (0, 1) if vy else (None,)
            for xa in xs:
                for yb in ys:
                    pc = (c.id, xa, yb)
                    pieces.append(pc)
                    for role, pos, along in (("bottom", yb in (None, 0), xa), ("top", yb in (None, 1), xa), ("left", xa in (None, 0), yb), ("right", xa in (None, 1), yb)):
                        if not pos:
                            continue
                        f = c.face(role)
                        if along is None:
                            target = (f.cell,)
                        else:
                            target = (f.cell, along ^ int(f.rev))
                        links.append((pc, target, f.k))
    return pieces, links


def _group_of(z, piece):
    return z.cells[piece[0]].gens


def cut_along(z: SquareComplexOfGroups, t) -> GraphOfGroups:
    """Van Kampen: one vertex per complementary component, one edge per track."""
    ts = [t] if isinstance(t, Track) else list(t)
    crossed: Dict[str, Track] = {}
    for tr in ts:
        if not tr.two_sided:
            raise NonSeparating("track does not locally separate its carrier", edges=",".join(tr.edges))
        for cid in tr.edges:
            crossed[cid] = tr
    P = z.P
    G = z.G
    toG = z.to_ambient
    pieces, links = _pieces(z, crossed)
    uf = _UF(pieces)
    for a, b, _ in links:
        uf.union(a, b)
    comps = uf.groups(pieces)
    comp_of = {}
    for i, comp in enumerate(comps):
        for pc in comp:
            comp_of[pc] = i
    devs = []
    for comp in comps:
        cset = set(comp)
        sub = [l for l in links if l[0] in cset]
        d, gens = develop(P, comp, {pc: _group_of(z, pc) for pc in comp}, sub)
        devs.append((d, _dedupe(P, gens)))
    vabs = [abstract_subgroup(G, [toG(x) for x in gens]) for _, gens in devs]
    verts = [(f"c{i}", A.group) for i, A in enumerate(vabs)]
    edges = []
    marks = {}
    for j, tr in enumerate(ts):
        base = tr.edges[0]
        side0 = (base, tr.flips[base])
        side1 = (base, 1 - tr.flips[base])
        i0, i1 = comp_of[side0], comp_of[side1]
        d0, d1 = devs[i0][0][side0], devs[i1][0][side1]
        A = abstract_subgroup(G, [toG(x) for x in tr.gens])
        sm = Homomorphism(A.group, vabs[i0].group, {c: vabs[i0].preimage(toG(P.conj(d0, _pull(P, toG, A, c, tr)))) for c in A.group.gens})
        dm = Homomorphism(A.group, vabs[i1].group, {c: vabs[i1].preimage(toG(P.conj(d1, _pull(P, toG, A, c, tr)))) for c in A.group.gens})
        eid = base
        edges.append(Edge(eid, f"c{i0}", f"c{i1}", A.group, sm, dm))
        marks[eid] = toG(P.mul(d0, P.inv(d1)))
    marking = Marking(G, {f"c{i}": A.hom for i, A in enumerate(vabs)}, marks)
    return GraphOfGroups(verts, edges, "c0", "", marking)


def _pull(P, toG, A: AbstractSubgroup, c, tr: Track):
    """The element of P behind generator c of the abstract track group."""
    target = A.hom.images[c]
    for x in tr.gens:
        if toG(x) == target:
            return x
    raise BudgetExhausted("track generator lost in translation")


# ---------------------------------------------------------------------------
# literal comparison of one-edge decompositions


def literally_equal(a: GraphOfGroups, b: GraphOfGroups) -> bool:
    """Same lifted edge in the same tree: equal edge group and equal end groups.

    Both graphs have one edge and markings into the same ambient group.
    Subgroups are compared by mutual membership inside pi1 of ``b``.
    """
    if len(a.edges) != 1 or len(b.edges) != 1:
        raise ValueError("literal comparison is for one-edge decompositions")
    Pb = b.pi1

    def lifted(g):
        E = next(iter(g.edges.values()))
        m = g.marking
        A = m.ambient
        src = [m.vertex[E.src](g.vertices[E.src].gen(n)) for n in g.vertices[E.src].gens]
        dst = [A.conj(m.edge[E.id], m.vertex[E.dst](g.vertices[E.dst].gen(n))) for n in g.vertices[E.dst].gens]
        C = [m.vertex[E.src](E.src_map.images[c]) for c in E.group.gens]
        return [[from_ambient(b, y) for y in xs] for xs in (src, dst, C)]

    for xs, ys in zip(lifted(a), lifted(b)):
        if not (_same_group(Pb, xs, ys) and _same_group(Pb, ys, xs)):
            return False
    return True


# ---------------------------------------------------------------------------
# pruning


def prune_squares(z: SquareComplexOfGroups, against, collapse: bool = True) -> GraphOfGroups:
    """Remove squares through free faces, then read off a graph of groups.

    Vertical edges (the direction of ``against``) left over are collapsed
    when ``collapse`` is set and the vertex groups are re-typed.
    """
    g1 = z.g1
    R = _gog(against)
    if isinstance(against, Splitting):
        gens = [transport(R, g1, x) for x in against.edge_group_gens()]
        if subgroup_type(gens, g1).kind != "Elliptic":
            raise NotAForest("the edge group of the target is not elliptic on the priority tree")
    P = z.P
    alive = list(z.cells)
    while True:
        sq = [c for c in alive if z.cells[c].kind == "square"]
        if not sq:
            break
        count: Dict[str, int] = {}
        for q in sq:
            for s in SIDES:
                f = z.cells[q].face(s)
                count[f.cell] = count.get(f.cell, 0) + 1
        hit = None
        for q in sq:
            for s in SIDES:
                f = z.cells[q].face(s)
                if count[f.cell] == 1 and _same_group(P, [P.conj(f.k, x) for x in z.cells[q].gens], z.cells[f.cell].gens):
                    hit = (q, f.cell)
                    break
            if hit:
                break
        if hit is None:
            raise NotAForest("squares remain without a collapsible free face", squares=len(sq))
        alive = [c for c in alive if c not in hit]
    sub = z.restrict(alive)
    ones = [c for c in sub.cells.values() if c.dim == 1]
    g = cut_all(sub)
    if collapse:
        for c in ones:
            if c.kind == "vertical" and c.id in g.edges:
                g = collapse_edge(g, c.id)
        g = retype_vertices(g)
    return g


def cut_all(z: SquareComplexOfGroups) -> GraphOfGroups:
    """Graph of groups of a square-free complex: 0-cells become vertices, 1-cells edges."""
    if z.of_kind("square"):
        raise NotAForest("the complex still has squares")
    return cut_along(z, [_make_track(z, c.kind, [c.id]) for c in z.cells.values() if c.dim == 1])


def _same_group(P, xs, ys) -> bool:
    """True when <xs> contains every element of ys."""
    e = P.identity()
    xs = [x for x in xs if x != e]
    ys = [y for y in ys if y != e]
    if not ys:
        return True
    if not xs:
        return False
    try:
        H = Subgroup(P, tuple(xs))
        return all(H.contains(y) for y in ys)
    except UnsupportedBackend:
        return False


def retype_vertices(g: GraphOfGroups) -> GraphOfGroups:
    """Replace vertex groups by abstract types of their images in the ambient group."""
    m = g.marking
    G = m.ambient
    new_abs = {}
    verts = []
    for v, Gv in g.vertices.items():
        imgs = [m.vertex[v](Gv.gen(x)) for x in Gv.gens]
        A = abstract_subgroup(G, imgs)
        new_abs[v] = A
        verts.append((v, A.group))
    edges = []
    for E in g.edges.values():
        sm = Homomorphism(E.group, new_abs[E.src].group, {c: new_abs[E.src].preimage(m.vertex[E.src](E.src_map.images[c])) for c in E.group.gens})
        dm = Homomorphism(E.group, new_abs[E.dst].group, {c: new_abs[E.dst].preimage(m.vertex[E.dst](E.dst_map.images[c])) for c in E.group.gens})
        edges.append(Edge(E.id, E.src, E.dst, E.group, sm, dm))
    marking = Marking(G, {v: A.hom for v, A in new_abs.items()}, dict(m.edge))
    return GraphOfGroups(verts, edges, g.base, g.name, marking)


# ---------------------------------------------------------------------------
# enclosing data


@dataclass
class Orbifold:
    orientable: bool
    genus: int
    boundary: int
    cone_points: List[int]
    reflectors: List[Dict[str, object]]
    euler: int
    atlas: List[Dict[str, object]]

    @property
    def orbifold_euler(self) -> float:
        return self.euler - sum(1 - 1 / n for n in self.cone_points)

    def name(self) -> str:
        if self.orientable:
            base = {0: "sphere", 1: "torus"}.get(self.genus, f"genus {self.genus} surface")
        else:
            base = {1: "projective plane", 2: "Klein bottle"}.get(self.genus, f"{self.genus} cross-caps")
        if self.boundary:
            base += f" with {self.boundary} boundary circle" + ("s" if self.boundary > 1 else "")
        if self.cone_points:
            base += " and cone points " + ",".join(map(str, self.cone_points))
        return base

    def to_dict(self):
        return {
            "surface": self.name(),
            "orientable": self.orientable,
            "genus": self.genus,
            "boundary": self.boundary,
            "cone_points": list(self.cone_points),
            "reflectors": list(self.reflectors),
            "euler_characteristic": self.euler,
            "atlas": list(self.atlas),
        }


@dataclass
class EnclosingData:
    decomposition: GraphOfGroups
    enclosing: str
    orbifold: Orbifold
    fiber: List
    peripheral: Dict[str, List]
    curves: List[Dict[str, object]]
    S: List
    complex: Optional[SquareComplexOfGroups] = None
    notes: List[str] = field(default_factory=list)
    extra_atlases: List[Dict[str, object]] = field(default_factory=list)

    def to_dict(self, describe=None):
        G = self.decomposition.marking.ambient
        w = describe or (lambda xs: [format_word(G.word_of(x)) for x in xs])
        return {
            "enclosing_vertex": self.enclosing,
            "enclosing_group": w(self.S),
            "fiber": w(self.fiber),
            "orbifold": self.orbifold.to_dict(),
            "peripheral": {e: w(xs) for e, xs in self.peripheral.items()},
            "curves": list(self.curves),
            "extra_atlases": list(self.extra_atlases),
            "notes": list(self.notes),
        }


@dataclass
class _LinkPiece:
    nodes: List
    vertex: str
    shape: str
    links: List


def _link_components(z: SquareComplexOfGroups, inc, only: Optional[str] = None) -> List[_LinkPiece]:
    nodes = []
    links = []
    for q in z.of_kind("square"):
        for c in CORNERS:
            if only is not None and q.face(c).cell != only:
                continue
            nodes.append(("c", q.id, c))
    for tau in inc:
        cell = z.cells[tau]
        for j in (0, 1):
            if only is not None and cell.face(f"end{j}").cell != only:
                continue
            nodes.append(("e", tau, j))
    nset = set(nodes)
    for q in z.of_kind("square"):
        for s in SIDES:
            f = q.face(s)
            for j in (0, 1):
                cn = ("c", q.id, SIDE_CORNERS[s][j])
                en = ("e", f.cell, j ^ int(f.rev))
                if cn in nset and en in nset:
                    links.append((cn, en, f.k))
    uf = _UF(nodes)
    for a, b, _ in links:
        uf.union(a, b)
    out = []
    for comp in uf.groups(nodes):
        cset = set(comp)
        deg = {n: 0 for n in comp}
        mine = [l for l in links if l[0] in cset]
        for a, b, _ in mine:
            deg[a] += 1
            deg[b] += 1
        ds = sorted(deg.values())
        if all(d == 2 for d in ds):
            shape = "circle"
        elif ds.count(1) == 2 and all(d in (1, 2) for d in ds):
            shape = "segment"
        elif len(comp) == 1:
            shape = "point"
        else:
            shape = "branched"
        first = comp[0]
        vertex = z.cells[first[1]].face(first[2]).cell if first[0] == "c" else z.cells[first[1]].face(f"end{first[2]}").cell
        out.append(_LinkPiece(comp, vertex, shape, mine))
    return out


def _order_mod(P: Group, x, N: Sequence, bound: int = ORDER_BOUND):
    """Least n >= 1 with x^n in <N>; None if x has provably infinite order
    and no such n exists below the bound."""
    e = P.identity()
    N = [y for y in N if y != e]
    H = Subgroup(P, tuple(N)) if N else None
    y = e
    for n in range(1, bound + 1):
        y = P.mul(y, x)
        if y == e:
            return n
        if H is not None:
            try:
                if H.contains(y):
                    return n
            except UnsupportedBackend:
                raise ClassificationInconclusive("membership in the fibre is not decidable here")
    if P.has_infinite_order(x):
        return None
    raise ClassificationInconclusive(f"boundary loop order not determined within {bound}", bound=bound)


def extract_enclosing(z: SquareComplexOfGroups, s1, s2) -> EnclosingData:
    P = z.P
    G = z.G
    toG = z.to_ambient
    squares = z.of_kind("square")
    if not squares:
        raise NotHyperbolicPair("the core complex has no squares")
    inc = z.side_incidences()
    sides = [c for c in z.cells if c in inc]
    # the neighbourhood of the union of cores retracts onto the midline graph
    nodes = [q.id for q in squares] + sides
    links = [(q.id, q.face(s).cell, q.face(s).k) for q in squares for s in SIDES]
    dS, Sg = develop(P, nodes, {n: z.cells[n].gens for n in nodes}, links)
    Sg = _dedupe(P, Sg)
    # complementary components: 0-cells and 1-cells in no square
    cnodes = [c.id for c in z.cells.values() if c.dim == 0 or (c.dim == 1 and c.id not in inc)]
    clinks = [(c, f.cell, f.k) for c in cnodes if z.cells[c].dim == 1 for f in z.cells[c].faces]
    uf = _UF(cnodes)
    for a, b, _ in clinks:
        uf.union(a, b)
    comps = uf.groups(cnodes)
    comp_of = {}
    kdev = []
    for i, comp in enumerate(comps):
        for n in comp:
            comp_of[n] = i
        cset = set(comp)
        d, gens = develop(P, comp, {n: z.cells[n].gens for n in comp}, [l for l in clinks if l[0] in cset])
        kdev.append((d, _dedupe(P, gens)))
    # fibre
    q0 = squares[0]
    F = [P.conj(dS[q0.id], x) for x in q0.gens]
    for q in squares[1:]:
        Fq = [P.conj(dS[q.id], x) for x in q.gens]
        if not (_same_group(P, F, Fq) and _same_group(P, Fq, F)):
            raise FiberMismatch(f"square {q.id} has a stabilizer different from {q0.id}")
    # boundary pieces
    pieces = _link_components(z, inc)
    atlas = []
    cones = []
    reflectors = []
    boundary = 0
    capped = 0
    pdev = []
    for j, piece in enumerate(pieces):
        groups = {}
        for n in piece.nodes:
            groups[n] = z.cells[n[1]].gens
        d, gens = develop(P, piece.nodes, groups, piece.links)
        loops = _loops(P, piece, d)
        N = [P.conj(d[n], x) for n in piece.nodes for x in groups[n]]
        entry = {"piece": f"P{j}", "vertex": piece.vertex, "shape": piece.shape}
        if piece.shape == "circle":
            lam = loops[0] if loops else P.identity()
            n = _order_mod(P, lam, N)
            if n is None:
                entry.update(case="(1)", group="Z")
                boundary += 1
            elif n == 1:
                entry.update(case="(1'')", group="trivial")
                capped += 1
            else:
                entry.update(case="(1')", group=f"Z/{n}")
                cones.append(n)
                capped += 1
        elif piece.shape == "segment":
            refl = _reflections(z, P, piece, d, N)
            if len(refl) == 2:
                n = _order_mod(P, P.mul(refl[0], refl[1]), N)
                if n is None:
                    entry.update(case="(2)", group="Z2*Z2")
                    reflectors.append({"piece": f"P{j}", "corners": []})
                    boundary += 1
                else:
                    entry.update(case="(2'')", group=f"D{2 * n}")
                    reflectors.append({"piece": f"P{j}", "corners": [n]})
                    capped += 1
            else:
                entry.update(case="(2')", group="Z2" if refl else "trivial")
                reflectors.append({"piece": f"P{j}", "corners": []})
                capped += 1
        else:
            raise ClassificationInconclusive(f"link piece {j} is not a circle or a segment", shape=piece.shape)
        atlas.append(entry)
        pdev.append((d, _dedupe(P, gens)))
    chi = len(squares) + len(sides) - 4 * len(squares) + capped
    orientable = _orientable(z, inc)
    if orientable:
        genus = (2 - boundary - chi) // 2
    else:
        genus = 2 - boundary - chi
    orb = Orbifold(orientable, genus, boundary, sorted(cones), reflectors, chi, atlas)
    # the graph decomposition
    S_abs = abstract_subgroup(G, [toG(x) for x in Sg])
    verts = [("S", S_abs.group)]
    kabs = []
    for i, (_, gens) in enumerate(kdev):
        A = abstract_subgroup(G, [toG(x) for x in gens])
        kabs.append(A)
        verts.append((f"K{i}", A.group))
    edges = []
    marks = {}
    peripheral = {}
    for j, piece in enumerate(pieces):
        d, gens = pdev[j]
        first = piece.nodes[0]
        if first[0] == "c":
            sq_id = first[1]
            kf = z.cells[sq_id].face(first[2])
            aS = dS[sq_id]
            rho = kf.cell
            aK = P.mul(kdev[comp_of[rho]][0][rho], kf.k)
        else:
            tau = first[1]
            aS = dS[tau]
            fe = z.cells[tau].face(f"end{first[2]}")
            rho = fe.cell
            aK = P.mul(kdev[comp_of[rho]][0][rho], fe.k)
        i = comp_of[rho]
        A = abstract_subgroup(G, [toG(x) for x in gens])
        sm = Homomorphism(A.group, S_abs.group, {c: S_abs.preimage(toG(P.conj(aS, _pull_elem(P, toG, A, c, gens)))) for c in A.group.gens})
        dm = Homomorphism(A.group, kabs[i].group, {c: kabs[i].preimage(toG(P.conj(aK, _pull_elem(P, toG, A, c, gens)))) for c in A.group.gens})
        eid = f"P{j}"
        edges.append(Edge(eid, "S", f"K{i}", A.group, sm, dm))
        marks[eid] = toG(P.mul(aS, P.inv(aK)))
        peripheral[eid] = [toG(P.conj(aS, x)) for x in gens]
    marking = Marking(G, {"S": S_abs.hom, **{f"K{i}": A.hom for i, A in enumerate(kabs)}}, marks)
    dec = GraphOfGroups(verts, edges, "S", "", marking)
    dec = _trim_attachments(dec)
    peripheral = {e: xs for e, xs in peripheral.items() if e in dec.edges}
    curves = _core_curves(z, s1, s2)
    return EnclosingData(dec, "S", orb, [toG(x) for x in F], peripheral, curves, [toG(x) for x in Sg], z)


def _pull_elem(P, toG, A: AbstractSubgroup, c, gens):
    target = A.hom.images[c]
    for x in gens:
        if toG(x) == target:
            return x
    raise BudgetExhausted("generator lost in translation")


def _loops(P, piece: _LinkPiece, d) -> List:
    e = P.identity()
    used = set()
    seen = {piece.nodes[0]}
    out = []
    # recompute tree membership the way develop does
    adj: Dict[object, List] = {n: [] for n in piece.nodes}
    for i, (big, small, k) in enumerate(piece.links):
        adj[big].append((i, small))
        adj[small].append((i, big))
    queue = [piece.nodes[0]]
    while queue:
        u = queue.pop(0)
        for i, w in adj[u]:
            if w in seen:
                continue
            seen.add(w)
            used.add(i)
            queue.append(w)
    for i, (big, small, k) in enumerate(piece.links):
        if i not in used:
            out.append(P.mul(P.mul(d[big], P.inv(k)), P.inv(d[small])))
    return out


def _reflections(z, P, piece: _LinkPiece, d, N) -> List:
    deg: Dict[object, int] = {n: 0 for n in piece.nodes}
    for a, b, _ in piece.links:
        deg[a] += 1
        deg[b] += 1
    out = []
    sq_gens = [P.conj(d[n], x) for n in piece.nodes if n[0] == "c" for x in z.cells[n[1]].gens]
    for n in piece.nodes:
        if deg[n] != 1 or n[0] != "e":
            continue
        for x in z.cells[n[1]].gens:
            y = P.conj(d[n], x)
            if not _same_group(P, sq_gens, [y]):
                out.append(y)
                break
    return out


def _orientable(z: SquareComplexOfGroups, inc) -> bool:
    o: Dict[str, int] = {}
    squares = [q.id for q in z.of_kind("square")]
    ok = True
    for start in squares:
        if start in o:
            continue
        o[start] = 1
        queue = [start]
        while queue:
            q = queue.pop(0)
            for tau, lst in inc.items():
                if len(lst) != 2:
                    continue
                (qa, sa, ra), (qb, sb, rb) = lst
                da = SIDE_SENSE[sa] * (-1 if ra else 1)
                db = SIDE_SENSE[sb] * (-1 if rb else 1)
                for x, dx, y, dy in ((qa, da, qb, db), (qb, db, qa, da)):
                    if x != q:
                        continue
                    want = -o[x] * dx * dy
                    if y not in o:
                        o[y] = want
                        queue.append(y)
                    elif o[y] != want:
                        ok = False
    return ok


def _trim_attachments(g: GraphOfGroups) -> GraphOfGroups:
    """Fold away terminal vertices whose group is the incident edge group."""
    while True:
        hit = None
        for E in g.edges.values():
            if E.is_loop or E.src != "S":
                continue
            if g.valence(E.dst) == 1 and _is_surjective(E.dst_map):
                hit = E.id
                break
        if hit is None:
            return g
        g = collapse_edge(g, hit)


def _core_curves(z: SquareComplexOfGroups, s1, s2) -> List[Dict[str, object]]:
    out = []
    toG = z.to_ambient
    G = z.G
    words = lambda xs: [format_word(G.word_of(toG(x))) for x in xs]
    for crosses, s in (("horizontal", s1), ("vertical", s2)):
        for t in tracks(z, crosses):
            if not t.squares:
                continue
            shape = "circle" if _is_closed(z, t) else "segment"
            out.append({"splitting": getattr(s, "name", ""), "curve": shape, "crosses": crosses, "cells": list(t.edges), "group": words(t.gens)})
            break
    return out


def _is_closed(z, t: Track) -> bool:
    s0, s1 = _crossing_sides(t.crosses)
    deg = {e: 0 for e in t.edges}
    for q in t.squares:
        for s in (s0, s1):
            deg[z.cells[q].face(s).cell] += 1
    return all(d == 2 for d in deg.values())


def essential_curves(e: EnclosingData, length_budget: int = 8) -> List[Tuple[Dict[str, object], Splitting]]:
    """Tracks through the squares of the core, each with its induced splitting."""
    z = e.complex
    if z is None:
        return []
    out = []
    for crosses in ("horizontal", "vertical"):
        for t in tracks(z, crosses):
            if not t.squares or not t.two_sided:
                continue
            if len(out) >= length_budget:
                return out
            g = cut_along(z, t)
            desc = {"curve": "circle" if _is_closed(z, t) else "segment", "crosses": crosses, "cells": list(t.edges), "truncated": False}
            out.append((desc, Splitting(g, name=f"curve{len(out)}", provenance="essential curve")))
    return out


# ---------------------------------------------------------------------------
# DOT


def complex_to_dot(z: SquareComplexOfGroups, name: str = "Z") -> str:
    colors = ["red", "blue", "darkgreen", "orange", "purple", "brown"]
    band_color = {}
    for i, e in enumerate(z.bands):
        for q in z.bands[e]:
            band_color[q] = colors[i % len(colors)]
    lines = [f'graph "{_esc(name)}" {{']
    for c in z.of_kind("vertex"):
        lab = ",".join(z.group_words(c.id)) or "1"
        lines.append(f'  "{c.id}" [label="{c.id}\\n<{_esc(lab)}>"];')
    for c in z.cells.values():
        if c.dim != 1:
            continue
        a, b = c.face("end0").cell, c.face("end1").cell
        style = "solid" if c.kind == "horizontal" else "dashed"
        lab = ",".join(z.group_words(c.id)) or "1"
        lines.append(f'  "{a}" -- "{b}" [label="{c.id} <{_esc(lab)}>", style={style}];')
    for q in z.of_kind("square"):
        col = band_color.get(q.id, "gray")
        lines.append(f'  "{q.id}" [shape=box, color={col}];')
        for s in SIDES:
            lines.append(f'  "{q.id}" -- "{q.face(s).cell}.{s}" [style=dotted, color={col}];')
            lines.append(f'  "{q.face(s).cell}.{s}" [shape=point];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _esc(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')
