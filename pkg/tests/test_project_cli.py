import json

import pydot
import pytest
from click.testing import CliRunner
from hypothesis import given, settings
from hypothesis import strategies as st

from bassserre.base_groups import format_word, free_reduce
from bassserre.cli import main
from bassserre.errors import EmptyProject, ProjectSyntaxError, ResolveError
from bassserre.project import (
    EdgeSpec,
    GraphSpec,
    GroupSpec,
    ProjectFile,
    SplittingSpec,
    bundled,
    bundled_names,
    load,
    parse,
    parse_text,
    serialize,
)

# --- round trip -------------------------------------------------------------

gen_name = st.sampled_from(["a", "b", "c", "x1", "y_2", "Z.a"])
# words in the reduced form the parser writes back
word = st.lists(st.tuples(gen_name, st.sampled_from([1, -1])), max_size=4).map(lambda w: format_word(free_reduce(w)))


@st.composite
def projects(draw):
    p = ProjectFile()
    n_groups = draw(st.integers(1, 4))
    for i in range(n_groups):
        kind = draw(st.sampled_from(["abelian", "free", "cyclic", "trivial", "perm"]))
        name = f"G{i}"
        if kind in ("abelian", "free"):
            n = draw(st.integers(0, 3))
            names = tuple(draw(st.lists(gen_name, min_size=n, max_size=n, unique=True))) if draw(st.booleans()) else ()
            p.groups[name] = GroupSpec(name, kind, n, names)
        elif kind == "cyclic":
            names = (draw(gen_name),) if draw(st.booleans()) else ()
            p.groups[name] = GroupSpec(name, kind, draw(st.integers(1, 9)), names)
        elif kind == "perm":
            perm = tuple(draw(st.permutations(range(draw(st.integers(1, 4))))))
            p.groups[name] = GroupSpec(name, kind, perms=(("p", perm),))
        else:
            p.groups[name] = GroupSpec(name, kind)
    group_ref = st.sampled_from(sorted(p.groups))
    for j in range(draw(st.integers(0, 2))):
        verts = tuple((f"v{k}", draw(group_ref)) for k in range(draw(st.integers(1, 3))))
        vnames = [v for v, _ in verts]
        edges = []
        for k in range(draw(st.integers(0, 2))):
            m = st.lists(st.tuples(gen_name, word), max_size=2, unique_by=lambda t: t[0]).map(tuple)
            edges.append(EdgeSpec(f"e{k}", draw(st.sampled_from(vnames)), draw(st.sampled_from(vnames)), draw(group_ref), draw(m), draw(m)))
        p.graphs[f"Y{j}"] = GraphSpec(f"Y{j}", vnames[0], verts, tuple(edges))
        if draw(st.booleans()):
            p.groups[f"P{j}"] = GroupSpec(f"P{j}", "pi1", graph=f"Y{j}")
    if draw(st.booleans()):
        p.ambient = draw(group_ref)
    for j, g in enumerate(p.graphs.values()):
        flags = tuple(draw(st.lists(st.sampled_from(["slender", "minimal", "no-infinite-index-sub-splitting"]), unique=True, max_size=3)))
        vmaps = tuple((v, tuple(draw(st.lists(st.tuples(gen_name, word), max_size=2, unique_by=lambda t: t[0])))) for v, _ in g.vertices[:1])
        marks = tuple((e.id, draw(word)) for e in g.edges)
        p.splittings[f"S{j}"] = SplittingSpec(f"S{j}", g.name, flags, vmaps, marks)
    if draw(st.booleans()):
        p.config = {"gamma_cap": draw(st.integers(1, 64))}
    return p


@settings(max_examples=150, deadline=None)
@given(p=projects())
def test_serialize_round_trip(p):
    text = serialize(p)
    q = parse_text(text)
    assert q == p
    assert serialize(q) == text


@pytest.mark.parametrize("name", bundled_names())
def test_bundled_round_trip(name):
    p = parse(bundled(name))
    assert parse_text(serialize(p)) == p
    R = load(bundled(name))
    assert R.splittings and R.ambient is not None


# --- errors -----------------------------------------------------------------

SYNTAX = [
    ("group Z = abelian 2 [a, b", 1, None),
    ("group Z = abelian two", 1, 19),
    ("group Z = abelian 1\ngraph A base v {\n  vertex v Z\n}", 3, 12),
    ("group Z = abelian 1 [a]\nsplitting S = A {\n  edge e = a^\n}", 3, 12),
    ("group Z = abelian 1 [a]\n  $", 2, 3),
    ("splitting S = A [slender,, minimal] {}", 1, 26),
]


@pytest.mark.parametrize("text,line,col", SYNTAX)
def test_syntax_errors_have_positions(text, line, col):
    with pytest.raises(ProjectSyntaxError) as info:
        parse_text(text)
    err = info.value
    assert err.line == line
    if col is not None:
        assert err.column == col
    assert str(err).startswith(f"{err.line}:{err.column}:")


def test_empty_project():
    with pytest.raises(EmptyProject):
        parse_text("# nothing here\n")


RESOLVE = [
    "group Z = abelian 1 [a]\ngraph A base v {\n  vertex v : Q\n}\n",
    "group Z = abelian 1 [a]\nambient W\n",
    "group Z = abelian 1 [a]\ngraph A base v {\n  vertex v : Z\n}\nambient Z\nsplitting S = B {\n}\n",
]


@pytest.mark.parametrize("text", RESOLVE)
def test_resolve_errors(tmp_path, text):
    f = tmp_path / "bad.proj"
    f.write_text(text)
    with pytest.raises(ResolveError) as info:
        load(f)
    assert info.value.line is not None and info.value.line > 1


# --- command line -----------------------------------------------------------


def _run(args):
    return CliRunner().invoke(main, args)


def _json(tmp_path, *args):
    out = tmp_path / "out.json"
    r = _run(["--json", str(out), *args])
    return r, json.loads(out.read_text())


def test_cli_classify(tmp_path):
    r, rep = _json(tmp_path, "classify", "rem32")
    assert r.exit_code == 0, r.output
    assert rep["schema_version"] == "1.0" and rep["status"] == "ok" and rep["command"] == "classify"
    res = rep["result"]
    assert res["names"] == ["Sa", "Sb", "N"]
    assert res["matrix"][2][1] == "HE" and res["components"] == [["Sa", "Sb"]]


def test_cli_core(tmp_path):
    r, rep = _json(tmp_path, "core", "torus", "Ta", "Tb", "--priority", "second")
    assert r.exit_code == 0, r.output
    res = rep["result"]
    assert res["priority"] == "Tb" and res["priority_cut_literal"] is True
    assert res["cocycle"] is True and res["bands_ok"] is True
    assert res["presentation_fingerprint"] == res["ambient_fingerprint"]
    assert res["complex"]["counts"]["squares"] == 1


def test_cli_jsj_fields(tmp_path):
    r, rep = _json(tmp_path, "jsj", "guirardel")
    assert r.exit_code == 0, r.output
    res = rep["result"]
    assert {"decomposition", "enclosing", "verdicts", "curves", "matrix", "audit", "verification"} <= set(res)
    assert res["verification"]["ok"]
    assert res["enclosing"][0]["orbifold"]["surface"] == "torus"
    assert len(res["decomposition"]["vertices"]) == 2


def test_cli_enclose_and_invariants(tmp_path):
    r, rep = _json(tmp_path, "enclose", "klein", "S1", "S2")
    assert r.exit_code == 0, r.output
    assert rep["result"]["orbifold"]["surface"] == "Klein bottle"
    r, rep = _json(tmp_path, "invariants", "rem32", "G")
    assert r.exit_code == 0 and rep["result"]["kind"] == "group"
    assert rep["result"]["fingerprint"]["abelianization"] == {"rank": 2, "torsion": [3]}
    r = _run(["validate", "torus"])
    assert r.exit_code == 0, r.output


def test_cli_exit_codes(tmp_path):
    # not a hyperbolic pair: validation failure
    r, rep = _json(tmp_path, "core", "rem32", "N", "Sb")
    assert r.exit_code == 3
    assert rep["status"] == "error" and rep["error"]["error"] == "NotHyperbolicPair"
    # cap hit
    r, rep = _json(tmp_path, "jsj", "guirardel", "--gamma-cap", "1")
    assert r.exit_code == 2 and rep["error"]["error"] == "CapExceeded"
    # usage errors
    assert _run(["jsj", "no-such-project"]).exit_code == 4
    assert _run(["core", "torus"]).exit_code == 4
    assert _run(["frobnicate"]).exit_code == 4
    assert _run(["enclose", "torus", "Ta"]).exit_code == 4
    # a syntax error in a project file is a validation failure
    bad = tmp_path / "bad.proj"
    bad.write_text("group Z = abelian\n")
    r, rep = _json(tmp_path, "validate", str(bad))
    assert r.exit_code == 3 and rep["error"]["error"] == "SyntaxError"
    # the file ends right after "abelian"
    assert rep["error"]["line"] == 1 and rep["error"]["column"] == 18


def test_cli_dot_files(tmp_path):
    d = tmp_path / "dots"
    r = _run(["--dot", str(d), "core", "guirardel", "T1", "T2"])
    assert r.exit_code == 0, r.output
    r = _run(["--dot", str(d), "jsj", "rem32"])
    assert r.exit_code == 0, r.output
    files = sorted(p.name for p in d.iterdir())
    assert files == ["core_T1_T2.dot", "jsj.dot"]
    for f in d.iterdir():
        graphs = pydot.graph_from_dot_data(f.read_text())
        assert graphs and graphs[0].get_nodes()
