"""The decomposition pipeline over a finite catalog of splittings.

Pair matrix and HH components, catalog-relative minimality, refinement to
minimal edges by pruning product complexes, enclosing decompositions for
HH components, and the final merge/refine loop with its verification.

Minimality and slenderness are relative to the catalog: a splitting is
called minimal when no catalog member is HE against it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .base_groups import Finite, FreeAbelian, Group, Homomorphism, Subgroup, format_word
from .core_complex import (
    EnclosingData,
    build_core_complex,
    cut_all,
    extract_enclosing,
    prune_squares,
    retype_vertices,
    _same_group,
)
from .errors import (
    BudgetExhausted,
    CapExceeded,
    ClassificationInconclusive,
    FixedVertexSearchExhausted,
    NotHyperbolicPair,
    OracleTruncation,
    ToolkitError,
    UnsupportedBackend,
)
from .graph_of_groups import (
    GraphOfGroups,
    Marking,
    Splitting,
    _is_surjective,
    collapse_edge,
    fingerprint,
    is_refinement,
    one_edge_splitting,
    transport,
)
from .tree_action import _gog, subgroup_type

log = logging.getLogger(__name__)

SLENDER = "slender"
MINIMAL = "minimal"
NO_SUB = "no-infinite-index-sub-splitting"


@dataclass
class Catalog:
    ambient: Group
    splittings: List[Splitting]

    def __post_init__(self):
        names = [s.name for s in self.splittings]
        if len(set(names)) != len(names):
            raise ValueError("catalog names must be unique")

    def __len__(self):
        return len(self.splittings)

    def index(self, name: str) -> int:
        for i, s in enumerate(self.splittings):
            if s.name == name:
                return i
        raise KeyError(name)

    def get(self, name: str) -> Splitting:
        return self.splittings[self.index(name)]

    def reordered(self, names: Sequence[str]) -> "Catalog":
        return Catalog(self.ambient, [self.get(n) for n in names])


@dataclass
class EngineConfig:
    gamma_cap: int = 32
    unfold_cap: int = 64
    fingerprint_targets: Optional[list] = None

    def __post_init__(self):
        if self.gamma_cap < 1 or self.unfold_cap < 1:
            raise ValueError("caps must be at least 1")


def _tr(a, b, x):
    return transport(_gog(a), _gog(b), x)


def _pair(s1, s2) -> str:
    from .tree_action import pair_type

    return pair_type(s1, s2, _tr)


def _as_splitting(g: GraphOfGroups, name: str = "") -> Splitting:
    return Splitting(g, name=name or g.name)


# ---------------------------------------------------------------------------
# classification


@dataclass
class PairMatrix:
    names: List[str]
    cells: List[List[str]]
    minimal: List[bool]
    witnesses: Dict[str, Optional[str]]
    components: List[List[str]]

    def get(self, a: str, b: str) -> str:
        return self.cells[self.names.index(a)][self.names.index(b)]

    @property
    def conclusive(self) -> bool:
        return all(c != "inconclusive" for row in self.cells for c in row)

    def to_dict(self):
        return {
            "names": list(self.names),
            "matrix": [list(r) for r in self.cells],
            "minimal": {n: m for n, m in zip(self.names, self.minimal)},
            "witnesses": dict(self.witnesses),
            "components": [list(c) for c in self.components],
        }


def classify_catalog(c: Catalog) -> PairMatrix:
    S = c.splittings
    n = len(S)
    names = [s.name for s in S]
    cells = [["EE" if i == j else "" for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            try:
                cells[i][j] = _pair(S[i], S[j])
            except (OracleTruncation, FixedVertexSearchExhausted):
                cells[i][j] = "inconclusive"
    minimal = []
    witnesses = {}
    for i in range(n):
        w = next((names[j] for j in range(n) if cells[i][j] == "HE"), None)
        witnesses[names[i]] = w
        minimal.append(w is None and all(cells[i][j] != "inconclusive" for j in range(n)))
    # HH components among minimal splittings
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(n):
            if i < j and minimal[i] and minimal[j] and cells[i][j] == "HH":
                parent[find(j)] = find(i)
    comps: Dict[int, List[str]] = {}
    for i in range(n):
        if minimal[i]:
            comps.setdefault(find(i), []).append(names[i])
    return PairMatrix(names, cells, minimal, witnesses, list(comps.values()))


def minimality_check(s: Splitting, c: Catalog) -> Optional[Splitting]:
    """None if s is minimal relative to c, else the first HE witness."""
    for t in c.splittings:
        if t is s:
            continue
        if _pair(s, t) == "HE":
            return t
    return None


# ---------------------------------------------------------------------------
# audit


@dataclass
class AuditEvent:
    step: str
    detail: str
    fingerprint: str
    ok: bool

    def to_dict(self):
        return {"step": self.step, "detail": self.detail, "fingerprint": self.fingerprint, "ok": self.ok}

    def line(self) -> str:
        return f"{self.step}\t{'ok' if self.ok else 'MISMATCH'}\t{self.fingerprint}\t{self.detail}"


class Audit:
    def __init__(self, reference):
        self.reference = reference
        self.events: List[AuditEvent] = []

    def record(self, step: str, g, detail: str = "") -> bool:
        fp = fingerprint(g)
        ok = fp == self.reference
        self.events.append(AuditEvent(step, detail, _fp_str(fp), ok))
        log.info("audit %s %s", step, detail)
        return ok

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.events)


def _fp_str(fp) -> str:
    tors = ",".join(map(str, fp.torsion))
    homs = ",".join(f"{k}:{v}" for k, v in fp.hom_counts)
    return f"rank={fp.rank};torsion=[{tors}];homs=[{homs}]"


# ---------------------------------------------------------------------------
# refinement


def _tidy(g: GraphOfGroups, keep: Sequence[str] = ()) -> GraphOfGroups:
    """Collapse non-loop edges that fill a valence <= 2 endpoint outside ``keep``."""
    keep = set(keep)
    while True:
        hit = None
        for e in g.edges.values():
            if e.is_loop:
                continue
            for v, f in ((e.dst, e.dst_map), (e.src, e.src_map)):
                if v not in keep and g.valence(v) <= 2 and _is_surjective(f):
                    hit = e.id
                    break
            if hit:
                break
        if hit is None:
            return g
        g = collapse_edge(g, hit)


def _relabel(g: GraphOfGroups, prefix: str) -> GraphOfGroups:
    """Fresh vertex and edge ids, in the current order."""
    vmap = {v: f"{prefix}{i}" for i, v in enumerate(g.vertices)}
    emap = {e: f"e{i}" for i, e in enumerate(g.edges)}
    from .graph_of_groups import Edge

    m = g.marking
    verts = [(vmap[v], G) for v, G in g.vertices.items()]
    edges = [Edge(emap[E.id], vmap[E.src], vmap[E.dst], E.group, E.src_map, E.dst_map) for E in g.edges.values()]
    marking = Marking(m.ambient, {vmap[v]: h for v, h in m.vertex.items()}, {emap[e]: x for e, x in m.edge.items()})
    return GraphOfGroups(verts, edges, vmap[g.base], g.name, marking)


def refine_by(g: GraphOfGroups, s, audit: Optional[Audit] = None) -> GraphOfGroups:
    """Blow up vertices of g by their action on the tree of s.

    The edge groups of g must be elliptic on that tree, so the product
    complex has no squares and cutting it along every 1-cell gives the
    refinement.
    """
    z = build_core_complex(g, s, check=False)
    if z.of_kind("square"):
        raise NotHyperbolicPair("refinement needs edge groups elliptic on the new tree")
    out = retype_vertices(cut_all(z))
    if audit is not None:
        audit.record("refine", out, f"by {getattr(s, 'name', '')}")
    return out


def refine_to_minimal(g: GraphOfGroups, c: Catalog, cfg: Optional[EngineConfig] = None, audit: Optional[Audit] = None, keep=()) -> GraphOfGroups:
    cfg = cfg or EngineConfig()
    audit = audit if audit is not None else Audit(fingerprint(g))
    keep_gens = [_vertex_images(g, v) for v in keep]
    for it in range(cfg.unfold_cap + 1):
        hit = None
        for e in list(g.edges):
            s = _as_splitting(one_edge_splitting(g, e) if len(g.edges) > 1 else g, f"{e}")
            w = minimality_check(s, c)
            if w is not None:
                hit = (e, w)
                break
        if hit is None:
            return g
        if it == cfg.unfold_cap:
            break
        e, w = hit
        z = build_core_complex(g, w, check=False)
        g = prune_squares(z, w, collapse=True)
        g = _tidy(g, [_locate_vertex(g, gs) for gs in keep_gens])
        audit.record("prune", g, f"edge {e} against {w.name}; squares={len(z.of_kind('square'))}")
        if len(g.vertices) > cfg.gamma_cap:
            raise CapExceeded("vertex count exceeds gamma_cap", audit=[x.to_dict() for x in audit.events])
    raise CapExceeded("unfold_cap reached while refining to minimal", audit=[x.to_dict() for x in audit.events])


def _vertex_images(g: GraphOfGroups, v: str) -> List:
    G = g.vertices[v]
    return [g.marking.vertex[v](G.gen(x)) for x in G.gens]


def _locate_vertex(g: GraphOfGroups, gens: Sequence) -> Optional[str]:
    """The vertex of g whose group is conjugate to <gens> (ambient elements)."""
    P = g.pi1
    xs = [transport_from_ambient(g, y) for y in gens]
    st = subgroup_type(xs, g)
    if st.kind != "Elliptic":
        return None
    v = g.path_end(st.fixed_vertex)
    target = fingerprint(g.vertices[v])
    H = _abstract_fp(g.marking.ambient, gens)
    return v if H == target else None


def transport_from_ambient(g: GraphOfGroups, y):
    from .graph_of_groups import from_ambient

    return from_ambient(g, y)


def _abstract_fp(G, gens):
    from .tree_action import abstract_subgroup

    return fingerprint(abstract_subgroup(G, list(gens)).group)


def _elliptic_on(gens_amb: Sequence, s) -> bool:
    g = _gog(s)
    xs = [transport_from_ambient(g, y) for y in gens_amb]
    return subgroup_type(xs, g).kind == "Elliptic"


# ---------------------------------------------------------------------------
# enclosing


def enclose_pair(s1: Splitting, s2: Splitting, c: Catalog, cfg: Optional[EngineConfig] = None, audit: Optional[Audit] = None) -> EnclosingData:
    cfg = cfg or EngineConfig()
    pt = _pair(s1, s2)
    if pt != "HH":
        raise NotHyperbolicPair(f"pair type of ({s1.name}, {s2.name}) is {pt}", pair=pt)
    z = build_core_complex(s1, s2)
    e = extract_enclosing(z, s1, s2)
    audit = audit if audit is not None else Audit(fingerprint(s1.gog))
    D = e.decomposition
    audit.record("enclose", D, f"core of ({s1.name}, {s2.name}): squares={len(z.of_kind('square'))}")
    D = refine_to_minimal(D, c, cfg, audit, keep=[e.enclosing])
    S = _locate_vertex(D, e.S)
    if S is None:
        raise ClassificationInconclusive("enclosing vertex lost during refinement")
    D = _collapse_far(D, S)
    D = _tidy(D, [S])
    S = _locate_vertex(D, e.S)
    audit.record("collapse", D, "edges not adjacent to the enclosing vertex")
    e.decomposition = D
    e.enclosing = S
    e.peripheral = _edge_groups(D, S)
    e.notes.append(f"rigid={_rigid(e, s1, s2, c)}")
    return e


def _collapse_far(g: GraphOfGroups, S: str) -> GraphOfGroups:
    gens = _vertex_images(g, S)
    while True:
        far = [E.id for E in g.edges.values() if S not in (E.src, E.dst)]
        if not far:
            return g
        g = collapse_edge(g, far[0])
        S = _locate_vertex(g, gens)


def _edge_groups(g: GraphOfGroups, S: str) -> Dict[str, List]:
    """Edge groups at S, as ambient elements conjugated into G_S."""
    m = g.marking
    out = {}
    for E in g.edges.values():
        if E.src == S:
            out[E.id] = [m.vertex[S](E.src_map.images[x]) for x in E.group.gens]
        elif E.dst == S:
            out[E.id] = [m.vertex[S](E.dst_map.images[x]) for x in E.group.gens]
    return out


def _rigid(e: EnclosingData, s1, s2, c: Catalog) -> bool:
    """S is elliptic on every catalog splitting that is EE against both inputs."""
    for t in c.splittings:
        if t is s1 or t is s2:
            continue
        if _pair(t, s1) == "EE" and _pair(t, s2) == "EE":
            if not _elliptic_on(e.S, t):
                return False
    return True


def _hh_order(component: Sequence[Splitting]) -> List[Splitting]:
    """Breadth-first order so that every prefix is HH-connected."""
    comp = list(component)
    order = [comp[0]]
    rest = comp[1:]
    while rest:
        for t in rest:
            if any(_pair(s, t) == "HH" for s in order):
                order.append(t)
                rest.remove(t)
                break
        else:
            raise ClassificationInconclusive("component is not HH-connected")
    return order


def enclose_set(component: Sequence[Splitting], c: Catalog, cfg: Optional[EngineConfig] = None, audit: Optional[Audit] = None) -> EnclosingData:
    cfg = cfg or EngineConfig()
    if len(component) < 2:
        raise NotHyperbolicPair("enclosing needs at least two hyperbolic-hyperbolic splittings")
    order = _hh_order(component)
    e = enclose_pair(order[0], order[1], c, cfg, audit)
    for i, s in enumerate(order[2:], start=2):
        gens = [_to_ambient(s, x) for x in s.edge_group_gens()]
        D = e.decomposition
        xs = [transport_from_ambient(D, y) for y in gens]
        st = subgroup_type(xs, D)
        if st.kind == "Elliptic" and D.path_end(st.fixed_vertex) == e.enclosing:
            # no change to the decomposition; keep the atlas of the new pair
            partner = next(t for t in order[:i] if _pair(t, s) == "HH")
            z = build_core_complex(partner, s)
            x = extract_enclosing(z, partner, s)
            e.extra_atlases.append({"pair": [partner.name, s.name], "fiber": _words(c.ambient, x.fiber), "orbifold": x.orbifold.to_dict()})
            if len(e.decomposition.vertices) > cfg.gamma_cap:
                raise CapExceeded("vertex count exceeds gamma_cap")
            continue
        raise ClassificationInconclusive(f"edge group of {s.name} is not elliptic into the enclosing vertex; general folding is not supported")
    return e


def _to_ambient(s, x):
    from .graph_of_groups import to_ambient

    return to_ambient(_gog(s), x)


def _words(G: Group, xs) -> List[str]:
    return [format_word(G.word_of(x)) for x in xs]


# ---------------------------------------------------------------------------
# the main loop


@dataclass
class JsjResult:
    decomposition: GraphOfGroups
    enclosings: List[EnclosingData]
    enclosing_vertices: List[str]
    verdicts: Dict[str, str]
    curves: Dict[str, str]
    audit: List[AuditEvent]
    matrix: PairMatrix

    def to_dict(self) -> dict:
        g = self.decomposition
        G = g.marking.ambient
        verts = []
        for v, Gv in g.vertices.items():
            verts.append({
                "id": v,
                "group": Gv.describe(),
                "image": _words(G, _vertex_images(g, v)),
                "fingerprint": fingerprint(Gv).to_dict(),
                "enclosing": v in self.enclosing_vertices,
            })
        edges = []
        for E in g.edges.values():
            edges.append({"id": E.id, "src": E.src, "dst": E.dst, "group": E.group.describe(), "image": _words(G, [g.marking.vertex[E.src](E.src_map.images[x]) for x in E.group.gens])})
        return {
            "decomposition": {"vertices": verts, "edges": edges},
            "enclosing": [e.to_dict() for e in self.enclosings],
            "verdicts": dict(self.verdicts),
            "curves": dict(self.curves),
            "matrix": self.matrix.to_dict(),
            "audit": [a.to_dict() for a in self.audit],
        }


def trivial_decomposition(G: Group) -> GraphOfGroups:
    ident = Homomorphism(G, G, {x: G.gen(x) for x in G.gens})
    return GraphOfGroups([("G", G)], [], "G", "trivial", Marking(G, {"G": ident}, {}))


def jsj(c: Catalog, cfg: Optional[EngineConfig] = None) -> JsjResult:
    cfg = cfg or EngineConfig()
    if not c.splittings:
        raise ValueError("catalog is empty")
    M = classify_catalog(c)
    if not M.conclusive:
        raise ClassificationInconclusive("pair matrix has inconclusive cells")
    ref = fingerprint(c.splittings[0].gog)
    audit = Audit(ref)
    # enclosing components, ordered by their lowest catalog index
    comps = sorted([comp for comp in M.components if len(comp) > 1], key=lambda comp: min(c.index(n) for n in comp))
    enclosings: List[EnclosingData] = []
    S_gens: List[List] = []
    g: Optional[GraphOfGroups] = None
    for comp in comps:
        e = enclose_set([c.get(n) for n in comp], c, cfg, audit)
        enclosings.append(e)
        S_gens.append(e.S)
        if g is None:
            g = e.decomposition
        else:
            for E in list(e.decomposition.edges):
                s = _as_splitting(one_edge_splitting(e.decomposition, E) if len(e.decomposition.edges) > 1 else e.decomposition, E)
                g = _merge_step(g, s, S_gens, audit)
    if g is None:
        g = trivial_decomposition(c.ambient)
        audit.record("start", g, "one-vertex decomposition")
    # refine by the EE minimal members until every vertex group is elliptic
    ee = [s for s, m in zip(c.splittings, M.minimal) if m and not any(s.name in comp for comp in comps)]
    for it in range(cfg.unfold_cap + 1):
        todo = None
        for s in ee:
            for v in g.vertices:
                if not _elliptic_on(_vertex_images(g, v), s):
                    todo = s
                    break
            if todo:
                break
        if todo is None:
            break
        if it == cfg.unfold_cap:
            raise CapExceeded("unfold_cap reached in the refinement loop", audit=[x.to_dict() for x in audit.events])
        g = _merge_step(g, todo, S_gens, audit)
        keep = [v for v in (_locate_vertex(g, gs) for gs in S_gens) if v]
        g = refine_to_minimal(g, c, cfg, audit, keep=keep)
        if len(g.vertices) > cfg.gamma_cap:
            raise CapExceeded("vertex count exceeds gamma_cap", audit=[x.to_dict() for x in audit.events])
    g = _relabel(g, "V")
    encl = []
    for gs in S_gens:
        v = _locate_vertex(g, gs)
        if v is None:
            raise ClassificationInconclusive("enclosing vertex lost in the final decomposition")
        encl.append(v)
    for e, v in zip(enclosings, encl):
        e.enclosing = v
    verdicts, curves = _verdicts(g, c, M, comps, encl, enclosings)
    audit.record("final", g, f"vertices={len(g.vertices)} edges={len(g.edges)}")
    return JsjResult(g, enclosings, encl, verdicts, curves, audit.events, M)


def _merge_step(g: GraphOfGroups, s, S_gens, audit: Audit) -> GraphOfGroups:
    keep_before = [_locate_vertex(g, gs) for gs in S_gens]
    g = refine_by(g, s, audit)
    keep = [v for v in (_locate_vertex(g, gs) for gs in S_gens) if v]
    if len(keep) != len([k for k in keep_before if k]):
        raise ClassificationInconclusive("an enclosing vertex did not survive the refinement")
    g = _tidy(g, keep)
    audit.record("reduce", g, "collapse redundant edges")
    return g


def _verdicts(g, c: Catalog, M: PairMatrix, comps, encl, enclosings):
    verdicts = {}
    curves = {}
    in_comp = {n: k for k, comp in enumerate(comps) for n in comp}
    for s, minimal in zip(c.splittings, M.minimal):
        if s.name in in_comp:
            k = in_comp[s.name]
            verdicts[s.name] = "enclosed"
            curves[s.name] = f"curve on the base orbifold of {encl[k]} ({enclosings[k].orbifold.name()})"
            continue
        ell = all(_elliptic_on(_vertex_images(g, v), s) for v in g.vertices)
        if minimal:
            verdicts[s.name] = "elliptic" if ell else "unresolved"
        else:
            verdicts[s.name] = "refined" if ell else "unresolved"
    return verdicts, curves


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    properties: Dict[str, bool]
    reasons: Dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.properties.values())

    def to_dict(self):
        return {"ok": self.ok, "properties": dict(self.properties), "reasons": dict(self.reasons)}


def _slender_type(G: Group) -> bool:
    return isinstance(G, (FreeAbelian, Finite)) or not G.gens


def verify_jsj(r: JsjResult, c: Catalog, others: Sequence[JsjResult] = ()) -> VerificationReport:
    g = r.decomposition
    props: Dict[str, bool] = {}
    why: Dict[str, str] = {}
    M = r.matrix
    minimal = [s for s, m in zip(c.splittings, M.minimal) if m]
    # (1)
    bad = [E.id for E in g.edges.values() if not _slender_type(E.group)]
    props["1"] = not bad
    if bad:
        why["1"] = f"edge groups not slender: {bad}"
    # (2)
    bad = []
    for e in g.edges:
        s = _as_splitting(one_edge_splitting(g, e) if len(g.edges) > 1 else g, e)
        if minimality_check(s, c) is not None:
            bad.append(f"{e}: not minimal")
            continue
        for t in minimal:
            if _pair(s, t) != "EE":
                bad.append(f"{e}: not EE against {t.name}")
    props["2"] = not bad
    if bad:
        why["2"] = "; ".join(bad)
    # (3)
    bad = []
    if len(r.enclosing_vertices) != len([comp for comp in M.components if len(comp) > 1]):
        bad.append("missing enclosing vertex")
    for v, e in zip(r.enclosing_vertices, r.enclosings):
        if v not in g.vertices:
            bad.append(f"{v} absent")
            continue
        P = g.marking.ambient
        periph = [list(xs) for xs in e.peripheral.values()] + [list(e.fiber)]
        for eid, xs in _edge_groups(g, v).items():
            xs = [x for x in xs if x != P.identity()]
            if xs and not any(_same_group(P, ys, xs) for ys in periph if ys):
                bad.append(f"edge {eid} is not peripheral")
    props["3"] = not bad
    if bad:
        why["3"] = "; ".join(bad)
    # (4a) and (4b)
    in_comp = {n for comp in M.components if len(comp) > 1 for n in comp}
    bad_a, bad_b = [], []
    for s in minimal:
        hyp = [v for v in g.vertices if not _elliptic_on(_vertex_images(g, v), s)]
        if s.name in in_comp:
            if len(hyp) != 1 or hyp[0] not in r.enclosing_vertices or s.name not in r.curves:
                bad_b.append(f"{s.name}: hyperbolic vertices {hyp}")
        elif hyp:
            bad_a.append(f"{s.name}: hyperbolic vertices {hyp}")
    props["4a"] = not bad_a
    props["4b"] = not bad_b
    if bad_a:
        why["4a"] = "; ".join(bad_a)
    if bad_b:
        why["4b"] = "; ".join(bad_b)
    props["audit"] = all(a.ok for a in r.audit)
    if others:
        ok = all(uniqueness_check(r, o) for o in others)
        props["uniqueness"] = ok
        if not ok:
            why["uniqueness"] = "vertex groups are not mutually elliptic"
    return VerificationReport(props, why)


def uniqueness_check(a: JsjResult, b: JsjResult) -> bool:
    """Each decomposition refines the other: vertex groups mutually elliptic."""
    ga, gb = a.decomposition, b.decomposition
    if not gb.edges or not ga.edges:
        return len(ga.edges) == len(gb.edges)
    return is_refinement(ga, gb) and is_refinement(gb, ga)
