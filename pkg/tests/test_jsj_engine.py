import dataclasses
import json
from functools import lru_cache

import pytest

from conftest import PROJECTS, catalog

from bassserre.errors import CapExceeded, NotHyperbolicPair
from bassserre.graph_of_groups import fingerprint, is_refinement
from bassserre.jsj_engine import (
    EngineConfig,
    classify_catalog,
    enclose_set,
    jsj,
    minimality_check,
    trivial_decomposition,
    uniqueness_check,
    verify_jsj,
)


@lru_cache(maxsize=None)
def _result(p):
    return jsj(catalog(p))


VERDICTS = {
    "torus": {"Ta": "enclosed", "Tb": "enclosed"},
    "guirardel": {"T1": "enclosed", "T2": "enclosed", "T3": "enclosed"},
    "rem32": {"Sa": "enclosed", "Sb": "enclosed", "N": "refined"},
    "klein": {"S1": "enclosed", "S2": "enclosed"},
    "dinf": {"S": "elliptic"},
}


@pytest.mark.parametrize("p", PROJECTS)
def test_verified_and_audited(p):
    c = catalog(p)
    r = _result(p)
    rep = verify_jsj(r, c)
    assert rep.ok, rep.reasons
    assert r.audit and r.audit[-1].step == "final"
    want = fingerprint(c.ambient)
    assert fingerprint(r.decomposition) == want
    assert len({a.fingerprint for a in r.audit}) == 1 and all(a.ok for a in r.audit)
    assert r.verdicts == VERDICTS[p]


@pytest.mark.parametrize("p", PROJECTS)
def test_refines_trivial(p):
    r = _result(p)
    top = trivial_decomposition(catalog(p).ambient)
    assert is_refinement(r.decomposition, top)
    assert uniqueness_check(r, r)


@pytest.mark.parametrize("p", PROJECTS)
def test_deterministic(p):
    a = json.dumps(_result(p).to_dict(), sort_keys=False)
    b = json.dumps(jsj(catalog(p)).to_dict(), sort_keys=False)
    assert a == b


@pytest.mark.parametrize("p", ["guirardel", "dinf"])
def test_gamma_cap(p):
    with pytest.raises(CapExceeded) as info:
        jsj(catalog(p), EngineConfig(gamma_cap=1))
    assert isinstance(info.value.audit, list)


def test_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(gamma_cap=0)
    with pytest.raises(ValueError):
        EngineConfig(unfold_cap=0)


def test_corrupted_enclosing_vertex_fails():
    c = catalog("guirardel")
    r = dataclasses.replace(_result("guirardel"), enclosing_vertices=["nowhere"])
    rep = verify_jsj(r, c)
    assert not rep.properties["3"] and not rep.ok
    assert "absent" in rep.reasons["3"]


def test_corrupted_audit_fails():
    c = catalog("torus")
    r = _result("torus")
    bad = [dataclasses.replace(a, ok=False) for a in r.audit]
    rep = verify_jsj(dataclasses.replace(r, audit=bad), c)
    assert not rep.properties["audit"]


def test_matrix_rem32():
    M = classify_catalog(catalog("rem32"))
    assert M.get("N", "Sb") == "HE" and M.get("Sb", "N") == "EH"
    assert M.minimal == [True, True, False]
    assert M.witnesses["N"] in ("Sa", "Sb")
    # components only collect minimal splittings
    assert M.components == [["Sa", "Sb"]]


def test_minimality_relative_to_catalog():
    c = catalog("rem32")
    assert minimality_check(c.get("Sa"), c) is None
    assert minimality_check(c.get("N"), c) is not None
    # dropping the witnesses makes N minimal relative to what is left
    assert minimality_check(c.get("N"), c.reordered(["N"])) is None


def test_enclose_set():
    c = catalog("guirardel")
    e = enclose_set(c.splittings, c)
    fps = sorted(repr(fingerprint(G)) for G in e.decomposition.vertices.values())
    assert len(fps) == 2 and len(e.decomposition.edges) == 1
    assert len(e.extra_atlases) == 1
    with pytest.raises(NotHyperbolicPair):
        enclose_set(c.splittings[:1], c)
