"""Project files: groups, graphs of groups, an ambient group and a catalog.

A small line-and-brace format::

    # Z^2 with its two HNN splittings
    group Z2 = abelian 2 [a, b]
    group Za = abelian 1 [a]
    graph A base v {
      vertex v : Za
      edge e : v -> v over Za
    }
    ambient Z2
    splitting Ta = A [slender] {
      vertex v { a = a }
      edge e = b
    }
    config { gamma_cap = 32 }

Edge maps default to "same generator name"; marking maps default to the
same-named ambient generator and edge marks to the identity.  See
``docs/FORMAT.md`` for the full grammar.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .base_groups import Free, FreeAbelian, Group, Homomorphism, cyclic, format_word, from_permutations, parse_word
from .errors import EmptyProject, InvalidGroup, InvalidHomomorphism, ProjectSyntaxError, ResolveError, ToolkitError
from .graph_of_groups import Edge, GraphOfGroups, Marking, Splitting, check_marking

KEYWORDS = ("group", "graph", "ambient", "splitting", "config")
CONFIG_KEYS = ("gamma_cap", "unfold_cap")

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<punct>[{}\[\]():;=,])
  | (?P<word>[A-Za-z0-9_.](?:[A-Za-z0-9_.^*]|-(?=[\dA-Za-z]))*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    out = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ProjectSyntaxError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    return out


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class GroupSpec:
    name: str
    kind: str  # abelian | cyclic | free | perm | trivial | pi1
    n: int = 0
    names: Tuple[str, ...] = ()
    perms: Tuple[Tuple[str, Tuple[int, ...]], ...] = ()
    graph: str = ""
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EdgeSpec:
    id: str
    src: str
    dst: str
    over: str
    src_map: Tuple[Tuple[str, str], ...] = ()
    dst_map: Tuple[Tuple[str, str], ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class GraphSpec:
    name: str
    base: str
    vertices: Tuple[Tuple[str, str], ...]
    edges: Tuple[EdgeSpec, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SplittingSpec:
    name: str
    graph: str
    flags: Tuple[str, ...]
    vertex_maps: Tuple[Tuple[str, Tuple[Tuple[str, str], ...]], ...]
    edge_marks: Tuple[Tuple[str, str], ...]
    line: int = field(default=0, compare=False)


@dataclass
class ProjectFile:
    groups: Dict[str, GroupSpec] = field(default_factory=dict)
    graphs: Dict[str, GraphSpec] = field(default_factory=dict)
    splittings: Dict[str, SplittingSpec] = field(default_factory=dict)
    ambient: str = ""
    config: Dict[str, int] = field(default_factory=dict)
    path: str = ""
    ambient_line: int = 0

    def __eq__(self, other):
        if not isinstance(other, ProjectFile):
            return NotImplemented
        return all(getattr(self, f.name) == getattr(other, f.name) for f in fields(self) if f.name not in ("path", "ambient_line"))


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self) -> Optional[Token]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek() or (self.toks[-1] if self.toks else None)
        if tok is None:
            raise ProjectSyntaxError(msg)
        raise ProjectSyntaxError(msg, tok.line, tok.col)

    def next(self, what: str = "token") -> Token:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1]
            raise ProjectSyntaxError(f"expected {what} but the file ended", last.line, last.col + len(last.text))
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next(repr(text))
        if tok.text != text:
            self.error(f"expected {text!r}, found {tok.text!r}", tok)
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return True
        return False

    def name(self, what: str = "name") -> Token:
        tok = self.next(what)
        if tok.kind != "word" or not re.match(r"^[A-Za-z][A-Za-z0-9_.]*$", tok.text):
            self.error(f"expected {what}, found {tok.text!r}", tok)
        return tok

    def integer(self) -> int:
        tok = self.next("integer")
        if not re.match(r"^-?\d+$", tok.text):
            self.error(f"expected an integer, found {tok.text!r}", tok)
        return int(tok.text)

    def word(self) -> str:
        tok = self.next("word")
        if tok.kind != "word":
            self.error(f"expected a word, found {tok.text!r}", tok)
        try:
            return format_word(parse_word(tok.text))
        except ValueError as exc:
            self.error(str(exc), tok)

    def names_list(self, what: str = "generator name", pattern: str = r"^[A-Za-z][A-Za-z0-9_.]*$") -> Tuple[str, ...]:
        out = []
        self.expect("[")
        while not self.accept("]"):
            tok = self.next(what)
            if tok.kind != "word" or not re.match(pattern, tok.text):
                self.error(f"expected {what}, found {tok.text!r}", tok)
            out.append(tok.text)
            self.accept(",")
        return tuple(out)

    def word_map(self) -> Tuple[Tuple[str, str], ...]:
        out = []
        self.expect("{")
        while not self.accept("}"):
            k = self.name("generator name").text
            self.expect("=")
            out.append((k, self.word()))
            if not self.accept(","):
                self.accept(";")
        return tuple(out)

    def end_item(self):
        self.accept(";")

    # statements --------------------------------------------------------
    def project(self) -> ProjectFile:
        p = ProjectFile()
        seen: Dict[str, int] = {}
        while self.peek() is not None:
            tok = self.next()
            if tok.text not in KEYWORDS:
                self.error(f"expected one of {', '.join(KEYWORDS)}, found {tok.text!r}", tok)
            if tok.text == "ambient":
                if p.ambient:
                    self.error("ambient declared twice", tok)
                p.ambient = self.name("group name").text
                p.ambient_line = tok.line
                self.end_item()
                continue
            if tok.text == "config":
                self.config(p)
                continue
            nm = self.name()
            key = (tok.text if tok.text == "splitting" else "object", nm.text)
            if key in seen:
                self.error(f"name {nm.text!r} already defined on line {seen[key]}", nm)
            seen[key] = nm.line
            if tok.text == "group":
                p.groups[nm.text] = self.group(nm)
            elif tok.text == "graph":
                p.graphs[nm.text] = self.graph(nm)
            else:
                p.splittings[nm.text] = self.splitting(nm)
        return p

    def config(self, p: ProjectFile):
        self.expect("{")
        while not self.accept("}"):
            k = self.name("config key")
            if k.text not in CONFIG_KEYS:
                self.error(f"unknown config key {k.text!r}", k)
            self.expect("=")
            p.config[k.text] = self.integer()
            self.end_item()

    def group(self, nm: Token) -> GroupSpec:
        self.expect("=")
        kind = self.name("group kind")
        k = kind.text
        if k in ("abelian", "free"):
            n = self.integer()
            names = self.names_list() if self.peek() is not None and self.peek().text == "[" else ()
            if names and len(names) != n:
                self.error(f"{n} generators declared but {len(names)} named", kind)
            out = GroupSpec(nm.text, k, n, names, line=nm.line)
        elif k == "cyclic":
            n = self.integer()
            if n < 1:
                self.error("cyclic order must be positive", kind)
            names = self.names_list() if self.peek() is not None and self.peek().text == "[" else ()
            if len(names) > 1:
                self.error("a cyclic group has one generator", kind)
            out = GroupSpec(nm.text, k, n, names, line=nm.line)
        elif k == "perm":
            perms = []
            self.expect("[")
            while not self.accept("]"):
                g = self.name("generator name").text
                self.expect("=")
                self.expect("(")
                img = []
                while not self.accept(")"):
                    img.append(self.integer())
                    self.accept(",")
                perms.append((g, tuple(img)))
                self.accept(",")
            out = GroupSpec(nm.text, k, 0, (), tuple(perms), line=nm.line)
        elif k == "trivial":
            out = GroupSpec(nm.text, k, line=nm.line)
        elif k == "pi1":
            out = GroupSpec(nm.text, k, graph=self.name("graph name").text, line=nm.line)
        else:
            self.error(f"unknown group kind {k!r}", kind)
        self.end_item()
        return out

    def graph(self, nm: Token) -> GraphSpec:
        base = ""
        if self.accept("base"):
            base = self.name("vertex id").text
        self.expect("{")
        verts, edges = [], []
        while not self.accept("}"):
            tok = self.next("vertex or edge")
            if tok.text == "vertex":
                v = self.name("vertex id").text
                self.expect(":")
                verts.append((v, self.name("group name").text))
            elif tok.text == "edge":
                e = self.name("edge id")
                self.expect(":")
                u = self.name("vertex id").text
                self.expect("->")
                w = self.name("vertex id").text
                self.expect("over")
                C = self.name("group name").text
                sm = dm = ()
                if self.accept("src"):
                    sm = self.word_map()
                if self.accept("dst"):
                    dm = self.word_map()
                edges.append(EdgeSpec(e.text, u, w, C, sm, dm, line=e.line))
            else:
                self.error(f"expected 'vertex' or 'edge', found {tok.text!r}", tok)
            self.end_item()
        if not verts:
            self.error(f"graph {nm.text} has no vertices", nm)
        return GraphSpec(nm.text, base or verts[0][0], tuple(verts), tuple(edges), line=nm.line)

    def splitting(self, nm: Token) -> SplittingSpec:
        self.expect("=")
        g = self.name("graph name").text
        flags = self.names_list("flag", r"^[A-Za-z][A-Za-z0-9_-]*$") if self.peek() is not None and self.peek().text == "[" else ()
        self.expect("{")
        vm, em = [], []
        while not self.accept("}"):
            tok = self.next("vertex or edge")
            if tok.text == "vertex":
                v = self.name("vertex id").text
                vm.append((v, self.word_map()))
            elif tok.text == "edge":
                e = self.name("edge id").text
                self.expect("=")
                em.append((e, self.word()))
            else:
                self.error(f"expected 'vertex' or 'edge', found {tok.text!r}", tok)
            self.end_item()
        return SplittingSpec(nm.text, g, tuple(flags), tuple(vm), tuple(em), line=nm.line)


def parse_text(text: str, path: str = "") -> ProjectFile:
    toks = tokenize(text)
    if not toks:
        raise EmptyProject("project file is empty", path=path)
    p = _Parser(toks).project()
    p.path = path
    return p


def parse(path) -> ProjectFile:
    path = Path(path)
    return parse_text(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# serializer


def _map_text(pairs) -> str:
    return "{" + ", ".join(f"{k} = {w}" for k, w in pairs) + "}"


def serialize(p: ProjectFile) -> str:
    out = []
    for g in p.groups.values():
        if g.kind in ("abelian", "free"):
            rhs = f"{g.kind} {g.n}" + (f" [{', '.join(g.names)}]" if g.names else "")
        elif g.kind == "cyclic":
            rhs = f"cyclic {g.n}" + (f" [{g.names[0]}]" if g.names else "")
        elif g.kind == "perm":
            rhs = "perm [" + ", ".join(f"{n} = ({' '.join(map(str, im))})" for n, im in g.perms) + "]"
        elif g.kind == "pi1":
            rhs = f"pi1 {g.graph}"
        else:
            rhs = "trivial"
        out.append(f"group {g.name} = {rhs}")
    for g in p.graphs.values():
        out.append(f"graph {g.name} base {g.base} {{")
        for v, G in g.vertices:
            out.append(f"  vertex {v} : {G}")
        for e in g.edges:
            line = f"  edge {e.id} : {e.src} -> {e.dst} over {e.over}"
            if e.src_map:
                line += f" src {_map_text(e.src_map)}"
            if e.dst_map:
                line += f" dst {_map_text(e.dst_map)}"
            out.append(line)
        out.append("}")
    if p.ambient:
        out.append(f"ambient {p.ambient}")
    for s in p.splittings.values():
        flags = f" [{', '.join(s.flags)}]" if s.flags else ""
        out.append(f"splitting {s.name} = {s.graph}{flags} {{")
        for v, m in s.vertex_maps:
            out.append(f"  vertex {v} {_map_text(m)}")
        for e, w in s.edge_marks:
            out.append(f"  edge {e} = {w}")
        out.append("}")
    if p.config:
        out.append("config { " + "; ".join(f"{k} = {v}" for k, v in p.config.items()) + " }")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# resolution


@dataclass
class Resolved:
    project: ProjectFile
    groups: Dict[str, Group]
    graphs: Dict[str, GraphOfGroups]
    ambient: Group
    splittings: List[Splitting]
    config: Dict[str, int]

    def splitting(self, name: str) -> Splitting:
        for s in self.splittings:
            if s.name == name:
                return s
        raise ResolveError(f"unknown splitting {name!r}", name=name)


class _Resolver:
    def __init__(self, p: ProjectFile):
        self.p = p
        self.groups: Dict[str, Group] = {}
        self.graphs: Dict[str, GraphOfGroups] = {}
        self.active: List[str] = []

    def group(self, name: str, line: int = 0) -> Group:
        got = self.groups.get(name)
        if got is not None:
            return got
        spec = self.p.groups.get(name)
        if spec is None:
            raise ResolveError(f"unknown group {name!r}", line or None, name=name)
        if name in self.active:
            raise ResolveError(f"group {name!r} is defined in terms of itself", spec.line)
        self.active.append(name)
        try:
            G = self._build(spec)
        except ToolkitError as exc:
            if isinstance(exc, ResolveError):
                raise
            raise ResolveError(f"group {name}: {exc}", spec.line) from exc
        self.active.pop()
        self.groups[name] = G
        return G

    def _build(self, s: GroupSpec) -> Group:
        if s.kind == "abelian":
            return FreeAbelian(s.n, names=list(s.names) or None)
        if s.kind == "free":
            return Free(s.n, names=list(s.names) or None)
        if s.kind == "cyclic":
            return cyclic(s.n, s.names[0] if s.names else "a")
        if s.kind == "trivial":
            return Free(0)
        if s.kind == "perm":
            if not s.perms:
                return Free(0)
            degs = {len(im) for _, im in s.perms}
            for g, im in s.perms:
                if sorted(im) != list(range(len(im))):
                    raise ResolveError(f"generator {g} of {s.name} is not a permutation", s.line)
            if len(degs) != 1:
                raise ResolveError(f"permutations of {s.name} have different degrees", s.line)
            return from_permutations(list(s.perms), name=s.name)
        return self.graph(s.graph, s.line).pi1

    def graph(self, name: str, line: int = 0) -> GraphOfGroups:
        got = self.graphs.get(name)
        if got is not None:
            return got
        spec = self.p.graphs.get(name)
        if spec is None:
            raise ResolveError(f"unknown graph {name!r}", line or None, name=name)
        verts = [(v, self.group(G, spec.line)) for v, G in spec.vertices]
        vg = dict(verts)
        if len(vg) != len(verts):
            raise ResolveError(f"graph {name} repeats a vertex id", spec.line)
        if spec.base not in vg:
            raise ResolveError(f"graph {name}: base {spec.base!r} is not a vertex", spec.line)
        edges = []
        for e in spec.edges:
            for v in (e.src, e.dst):
                if v not in vg:
                    raise ResolveError(f"edge {e.id}: unknown vertex {v!r}", e.line, name=v)
            C = self.group(e.over, e.line)
            sm = self._edge_map(e, C, vg[e.src], e.src_map, "src")
            dm = self._edge_map(e, C, vg[e.dst], e.dst_map, "dst")
            edges.append(Edge(e.id, e.src, e.dst, C, sm, dm))
        try:
            g = GraphOfGroups(verts, edges, spec.base, name)
        except ToolkitError as exc:
            raise ResolveError(f"graph {name}: {exc}", spec.line) from exc
        self.graphs[name] = g
        return g

    def _edge_map(self, e: EdgeSpec, C: Group, V: Group, pairs, side) -> Homomorphism:
        given = dict(pairs)
        for k in given:
            if k not in C.gens:
                raise ResolveError(f"edge {e.id} {side}: {k!r} is not a generator of {e.over}", e.line, name=k)
        images = {}
        for c in C.gens:
            w = given.get(c)
            if w is None:
                if c not in V.gens:
                    raise ResolveError(f"edge {e.id} {side}: no image for {c!r} and no generator of that name", e.line, name=c)
                w = c
            images[c] = self._eval(V, w, e.line)
        return Homomorphism(C, V, images)

    def _eval(self, G: Group, w: str, line: int):
        try:
            return G.evaluate(parse_word(w))
        except ToolkitError as exc:
            raise ResolveError(f"cannot read {w!r}: {exc}", line) from exc

    def splitting(self, s: SplittingSpec, A: Group) -> Splitting:
        base = self.graph(s.graph, s.line)
        vm = dict(s.vertex_maps)
        em = dict(s.edge_marks)
        for v in vm:
            if v not in base.vertices:
                raise ResolveError(f"splitting {s.name}: unknown vertex {v!r}", s.line, name=v)
        for e in em:
            if e not in base.edges:
                raise ResolveError(f"splitting {s.name}: unknown edge {e!r}", s.line, name=e)
        vertex = {}
        for v, G in base.vertices.items():
            given = dict(vm.get(v, ()))
            images = {}
            for x in G.gens:
                w = given.get(x)
                if w is None:
                    if x not in A.gens:
                        raise ResolveError(f"splitting {s.name}: no image for generator {x!r} of vertex {v}", s.line, name=x)
                    w = x
                images[x] = self._eval(A, w, s.line)
            vertex[v] = Homomorphism(G, A, images)
        edge = {e: self._eval(A, em.get(e, "1"), s.line) for e in base.edges}
        g = GraphOfGroups(list(base.vertices.items()), list(base.edges.values()), base.base, s.name, Marking(A, vertex, edge))
        try:
            check_marking(g)
            return Splitting(g, name=s.name, provenance=self.p.path, flags=tuple(s.flags))
        except (InvalidHomomorphism, InvalidGroup) as exc:
            raise ResolveError(f"splitting {s.name}: {exc}", s.line) from exc


def resolve(p: ProjectFile) -> Resolved:
    r = _Resolver(p)
    for name in p.groups:
        r.group(name)
    for name in p.graphs:
        r.graph(name)
    if not p.ambient:
        if p.splittings:
            raise ResolveError("splittings need an 'ambient' declaration")
        A = None
    else:
        A = r.group(p.ambient, p.ambient_line)
    spl = [r.splitting(s, A) for s in p.splittings.values()]
    return Resolved(p, r.groups, r.graphs, A, spl, dict(p.config))


def load(path) -> Resolved:
    return resolve(parse(path))


def bundled(name: str) -> Path:
    """Path of a bundled project (``torus``, ``guirardel``, ``rem32``, ``klein``, ``dinf``)."""
    here = Path(__file__).parent / "projects"
    p = here / (name if name.endswith(".proj") else f"{name}.proj")
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def bundled_names() -> List[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "projects").glob("*.proj"))
