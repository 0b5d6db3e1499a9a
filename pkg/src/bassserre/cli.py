"""Command line entry point: ``bassserre <command> PROJECT [args]``.

Exit codes: 0 success, 2 inconclusive or a cap was hit, 3 validation
failure (including project errors), 4 usage error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import List, Optional

import click

from . import __version__
from .base_groups import format_word
from .core_complex import build_core_complex, complex_fundamental_presentation, complex_to_dot, cut_along, extract_enclosing, literally_equal, priority_core
from .errors import ToolkitError
from .graph_of_groups import GraphOfGroups, Splitting, fingerprint, validate
from .jsj_engine import Catalog, EngineConfig, classify_catalog, enclose_set, jsj as run_jsj, verify_jsj
from .project import Resolved, bundled, load

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_USAGE = 0, 2, 3, 4


def _words(G, xs) -> List[str]:
    return [format_word(G.word_of(x)) for x in xs]


def graph_dict(g: GraphOfGroups) -> dict:
    m = g.marking
    verts = []
    for v, G in g.vertices.items():
        d = {"id": v, "group": G.describe(), "fingerprint": fingerprint(G).to_dict()}
        if m is not None:
            d["image"] = _words(m.ambient, [m.vertex[v](G.gen(x)) for x in G.gens])
        verts.append(d)
    edges = []
    for E in g.edges.values():
        d = {"id": E.id, "src": E.src, "dst": E.dst, "group": E.group.describe()}
        if m is not None:
            d["image"] = _words(m.ambient, [m.vertex[E.src](E.src_map.images[c]) for c in E.group.gens])
            d["mark"] = format_word(m.ambient.word_of(m.edge[E.id]))
        edges.append(d)
    return {"vertices": verts, "edges": edges, "base": g.base}


# ---------------------------------------------------------------------------
# commands (pure: project in, report dict and dot files out)


def cmd_validate(R: Resolved, **_) -> dict:
    out = {"groups": {}, "graphs": {}, "splittings": {}}
    for name, G in R.groups.items():
        out["groups"][name] = G.describe()
    for name, g in R.graphs.items():
        out["graphs"][name] = validate(g).to_dict()
    ref = fingerprint(R.ambient) if R.ambient is not None else None
    for s in R.splittings:
        rep = validate(s.gog).to_dict()
        fp = fingerprint(s.gog)
        rep["fingerprint"] = fp.to_dict()
        rep["matches_ambient"] = fp == ref
        out["splittings"][s.name] = rep
        if fp != ref:
            raise ToolkitError(f"splitting {s.name} does not have the ambient fingerprint", splitting=s.name)
    return out


def _catalog(R: Resolved) -> Catalog:
    return Catalog(R.ambient, list(R.splittings))


def _config(R: Resolved, gamma_cap=None, unfold_cap=None) -> EngineConfig:
    c = dict(R.config)
    if gamma_cap is not None:
        c["gamma_cap"] = gamma_cap
    if unfold_cap is not None:
        c["unfold_cap"] = unfold_cap
    return EngineConfig(**c)


def cmd_classify(R: Resolved, **_) -> dict:
    return classify_catalog(_catalog(R)).to_dict()


def cmd_core(R: Resolved, s1: str, s2: str, priority: str = "first", dots=None, **_) -> dict:
    a, b = R.splitting(s1), R.splitting(s2)
    z = build_core_complex(a, b, priority=priority)
    first = a if priority == "first" else b
    chk = z.check()
    pres = complex_fundamental_presentation(z, verify=False)
    cut = cut_along(z, priority_core(z))
    out = {
        "priority": first.name,
        "complex": z.to_dict(),
        "cocycle": chk["cocycle"],
        "bands_ok": chk["bands"],
        "links": chk["links"],
        "presentation_fingerprint": fingerprint(pres).to_dict(),
        "ambient_fingerprint": fingerprint(R.ambient).to_dict(),
        "priority_cut": graph_dict(cut),
        "priority_cut_literal": literally_equal(cut, first.gog),
    }
    if dots is not None:
        dots[f"core_{a.name}_{b.name}"] = complex_to_dot(z, f"core_{a.name}_{b.name}")
    return out


def cmd_enclose(R: Resolved, names: List[str], dots=None, gamma_cap=None, unfold_cap=None, **_) -> dict:
    if len(names) < 2:
        raise click.UsageError("enclose needs at least two splittings")
    c = _catalog(R)
    e = enclose_set([R.splitting(n) for n in names], c, _config(R, gamma_cap, unfold_cap))
    out = e.to_dict()
    out["decomposition"] = graph_dict(e.decomposition)
    out["enclosing_fingerprint"] = fingerprint(e.decomposition.vertices[e.enclosing]).to_dict()
    if dots is not None:
        dots["enclose_" + "_".join(names)] = e.decomposition.to_dot("enclose_" + "_".join(names))
    return out


def cmd_jsj(R: Resolved, dots=None, gamma_cap=None, unfold_cap=None, **_) -> dict:
    c = _catalog(R)
    r = run_jsj(c, _config(R, gamma_cap, unfold_cap))
    out = r.to_dict()
    out["decomposition"] = graph_dict(r.decomposition)
    out["decomposition"]["enclosing"] = list(r.enclosing_vertices)
    out["verification"] = verify_jsj(r, c).to_dict()
    if dots is not None:
        dots["jsj"] = r.decomposition.to_dot("jsj")
    return out


def cmd_invariants(R: Resolved, name: str, dots=None, **_) -> dict:
    if name in R.graphs:
        g = R.graphs[name]
    elif any(s.name == name for s in R.splittings):
        g = R.splitting(name).gog
    elif name in R.groups:
        G = R.groups[name]
        return {"name": name, "kind": "group", "group": G.describe(), "fingerprint": fingerprint(G).to_dict()}
    else:
        raise click.UsageError(f"no graph, splitting or group named {name!r}")
    out = {"name": name, "kind": "graph", "graph": graph_dict(g), "validation": validate(g).to_dict(), "fingerprint": fingerprint(g).to_dict(), "style": g.style()}
    if dots is not None:
        dots[f"graph_{name}"] = g.to_dot(name)
    return out


# ---------------------------------------------------------------------------
# click plumbing


def _project_path(project: str) -> Path:
    p = Path(project)
    if p.exists():
        return p
    try:
        return bundled(project)
    except FileNotFoundError:
        raise click.UsageError(f"no project file {project!r} (and no bundled project of that name)")


def report(command: str, project: str, result: Optional[dict] = None, error: Optional[ToolkitError] = None) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command, "project": Path(project).name}
    if error is None:
        out["status"] = "ok"
        out["result"] = result
    else:
        out["status"] = "error"
        out["error"] = error.to_dict()
    return out


def _emit(ctx, command: str, project: str, fn, **kw):
    opts = ctx.obj
    dots = {} if opts.get("dot") else None
    try:
        R = load(_project_path(project))
        result = fn(R, dots=dots, **kw)
        rep = report(command, project, result)
        code = EXIT_OK
    except ToolkitError as exc:
        rep = report(command, project, error=exc)
        code = exc.exit_code
        click.echo(f"error: {exc.code}: {exc}", err=True)
    text = json.dumps(rep, indent=2, sort_keys=False) + "\n"
    if opts.get("json") == "-":
        click.echo(text, nl=False)
    elif opts.get("json"):
        Path(opts["json"]).write_text(text)
    if code == EXIT_OK and opts.get("json") != "-":
        click.echo(summary(command, rep["result"]))
    if dots:
        d = Path(opts["dot"])
        d.mkdir(parents=True, exist_ok=True)
        for name, body in dots.items():
            (d / f"{name}.dot").write_text(body)
    ctx.exit(code)


def summary(command: str, r: dict) -> str:
    if command == "classify":
        lines = ["     " + " ".join(f"{n:>6}" for n in r["names"])]
        for n, row in zip(r["names"], r["matrix"]):
            lines.append(f"{n:>5}" + " ".join(f"{c:>6}" for c in row))
        lines.append("components: " + "; ".join(",".join(c) for c in r["components"]))
        return "\n".join(lines)
    if command == "core":
        c = r["complex"]["counts"]
        return f"core: {c['vertices']} vertices, {c['edges']} edges ({c['horizontal']} horizontal), {c['squares']} squares; cocycle ok; priority cut literal: {r['priority_cut_literal']}"
    if command == "enclose":
        o = r["orbifold"]
        return f"enclosing vertex {r['enclosing_vertex']} = <{', '.join(r['enclosing_group'])}>; fiber <{', '.join(r['fiber'])}>; base {o['surface']}"
    if command == "jsj":
        d = r["decomposition"]
        vs = ", ".join(f"{v['id']}:{v['group']}" for v in d["vertices"])
        es = ", ".join(f"{e['id']}:{e['src']}->{e['dst']} over {e['group']}" for e in d["edges"])
        ok = "pass" if r["verification"]["ok"] else "FAIL"
        return f"jsj: [{vs}; {es}] enclosing={d['enclosing']} verdicts={r['verdicts']} verify={ok}"
    if command == "invariants":
        fp = r["fingerprint"]
        ab = fp["abelianization"]
        homs = ", ".join(f"{k}:{v}" for k, v in fp["hom_counts"].items())
        return f"{r['name']}: abelianization rank {ab['rank']} torsion {ab['torsion']}; homs {homs}"
    return "ok"


class _Group(click.Group):
    def main(self, *args, **kwargs):
        kwargs.setdefault("standalone_mode", False)
        try:
            rv = super().main(*args, **kwargs)
        except click.exceptions.Exit as e:
            sys.exit(e.exit_code)
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            sys.exit(EXIT_USAGE)
        sys.exit(rv if isinstance(rv, int) else 0)


@click.group(cls=_Group)
@click.version_option(__version__)
@click.option("--json", "json_path", metavar="PATH", help="Write the JSON report to PATH ('-' for stdout).")
@click.option("--dot", "dot_dir", metavar="DIR", help="Write DOT files into DIR.")
@click.pass_context
def main(ctx, json_path, dot_dir):
    """Splittings, core complexes and JSJ decompositions of finite catalogs."""
    ctx.obj = {"json": json_path, "dot": dot_dir}


caps = [
    click.option("--gamma-cap", type=click.IntRange(min=1), default=None, help="Maximum vertex count."),
    click.option("--unfold-cap", type=click.IntRange(min=1), default=None, help="Maximum unfolding iterations."),
]


def _with_caps(f):
    for opt in reversed(caps):
        f = opt(f)
    return f


@main.command("validate")
@click.argument("project")
@click.pass_context
def validate_cmd(ctx, project):
    """Parse, resolve and check every graph and splitting."""
    _emit(ctx, "validate", project, cmd_validate)


@main.command()
@click.argument("project")
@click.pass_context
def classify(ctx, project):
    """Pair-type matrix and HH components of the catalog."""
    _emit(ctx, "classify", project, cmd_classify)


@main.command()
@click.argument("project")
@click.argument("s1")
@click.argument("s2")
@click.option("--priority", type=click.Choice(["first", "second"]), default="first", show_default=True)
@click.pass_context
def core(ctx, project, s1, s2, priority):
    """Core square complex of two splittings."""
    _emit(ctx, "core", project, cmd_core, s1=s1, s2=s2, priority=priority)


@main.command()
@click.argument("project")
@click.argument("names", nargs=-1, required=True)
@_with_caps
@click.pass_context
def enclose(ctx, project, names, gamma_cap, unfold_cap):
    """Enclosing decomposition of an HH-connected set of splittings."""
    _emit(ctx, "enclose", project, cmd_enclose, names=list(names), gamma_cap=gamma_cap, unfold_cap=unfold_cap)


@main.command()
@click.argument("project")
@_with_caps
@click.pass_context
def jsj(ctx, project, gamma_cap, unfold_cap):
    """JSJ decomposition relative to the catalog, with verification."""
    _emit(ctx, "jsj", project, cmd_jsj, gamma_cap=gamma_cap, unfold_cap=unfold_cap)


@main.command()
@click.argument("project")
@click.argument("name")
@click.pass_context
def invariants(ctx, project, name):
    """Fingerprint and validation of a graph, splitting or group."""
    _emit(ctx, "invariants", project, cmd_invariants, name=name)


if __name__ == "__main__":  # pragma: no cover
    main()
