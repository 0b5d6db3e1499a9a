"""Graphs of groups, actions on Bass-Serre trees, core square complexes and
JSJ decompositions over finite catalogs of splittings."""

__version__ = "0.1.0"

from .base_groups import Finite, Free, FreeAbelian, Group, Homomorphism, Subgroup, cyclic, format_word, parse_word
from .core_complex import (
    SquareComplexOfGroups,
    build_core_complex,
    complex_fundamental_presentation,
    cut_along,
    essential_curves,
    extract_enclosing,
    priority_core,
    prune_squares,
    subdivide,
    tracks,
)
from .errors import ToolkitError
from .graph_of_groups import GraphOfGroups, Splitting, collapse_edge, fingerprint, make_reduced, one_edge_splitting, substitute
from .jsj_engine import Catalog, EngineConfig, classify_catalog, enclose_pair, enclose_set, jsj, minimality_check, refine_to_minimal, verify_jsj
from .project import bundled, load, parse, resolve, serialize
from .tree_action import element_type, invariant_line_core, pair_type, quotient_core, subgroup_type
