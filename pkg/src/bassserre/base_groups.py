"""Decidable group backends.

Three concrete backends live here: finite groups given by a multiplication
table, finitely generated abelian groups (free rank plus a torsion chain)
and free groups.  A fourth kind, the fundamental group of a graph of
groups, is implemented in :mod:`bassserre.graph_of_groups` on top of the
same interface.

Every backend exposes an *element algebra*: elements are canonical,
hashable values, so equality of group elements is equality of Python
values.  Words are tuples of ``(generator, exponent)`` letters with
exponent ``+1`` or ``-1``.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sympy import Matrix
from sympy.matrices.normalforms import smith_normal_decomp

from .errors import (
    InfiniteIndexUnbounded,
    InvalidGroup,
    InvalidHomomorphism,
    UnknownGenerator,
    UnsupportedBackend,
)

Letter = Tuple[str, int]
Word = Tuple[Letter, ...]
Witness = Tuple[Tuple[int, int], ...]

EMPTY: Word = ()


# ---------------------------------------------------------------------------
# words

_FACTOR = re.compile(r"^([A-Za-z][A-Za-z0-9_.]*)(?:\^(-?\d+))?$")


def parse_word(text: str) -> Word:
    """Parse ``a^2*t1^-1*b`` into letters.  ``1`` or ``""`` is the identity."""
    text = text.strip()
    if text in ("", "1"):
        return EMPTY
    out: List[Letter] = []
    for raw in text.split("*"):
        factor = raw.strip()
        m = _FACTOR.match(factor)
        if not m:
            raise ValueError(f"bad word factor {factor!r}")
        name, exp = m.group(1), int(m.group(2) or 1)
        sign = 1 if exp > 0 else -1
        out.extend([(name, sign)] * abs(exp))
    return free_reduce(tuple(out))


def format_word(w: Sequence[Letter]) -> str:
    if not w:
        return "1"
    parts = []
    for name, grp in itertools.groupby(w):
        n = sum(1 for _ in grp)
        gen, sign = name
        exp = n * sign
        parts.append(gen if exp == 1 else f"{gen}^{exp}")
    return "*".join(parts)


def inverse_word(w: Sequence[Letter]) -> Word:
    return tuple((g, -e) for g, e in reversed(w))


def free_reduce(w: Iterable[Letter]) -> Word:
    stack: List[Letter] = []
    for g, e in w:
        if stack and stack[-1][0] == g and stack[-1][1] == -e:
            stack.pop()
        else:
            stack.append((g, e))
    return tuple(stack)


def power_word(w: Word, n: int) -> Word:
    if n < 0:
        return inverse_word(w) * (-n)
    return tuple(w) * n


def letters_of(gens: Sequence[str]) -> List[Letter]:
    """Letters in shortlex order: a, a^-1, b, b^-1, ..."""
    out = []
    for g in gens:
        out.append((g, 1))
        out.append((g, -1))
    return out


def default_names(n: int, start: str = "a") -> List[str]:
    base = ord(start)
    if n <= 26 - (base - ord("a")):
        return [chr(base + i) for i in range(n)]
    return [f"{start}{i + 1}" for i in range(n)]


def witness_word(witness: Witness, names: Sequence[str]) -> Word:
    return tuple((names[i], e) for i, e in witness)


def _reduce_witness(w: Iterable[Tuple[int, int]]) -> Witness:
    stack: List[Tuple[int, int]] = []
    for i, e in w:
        if stack and stack[-1][0] == i and stack[-1][1] == -e:
            stack.pop()
        else:
            stack.append((i, e))
    return tuple(stack)


def _inverse_witness(w: Witness) -> Witness:
    return tuple((i, -e) for i, e in reversed(w))


# ---------------------------------------------------------------------------
# integer lattices


def hermite_rows(rows: Sequence[Sequence[int]], ncols: int) -> Tuple[List[List[int]], List[List[int]]]:
    """Row-style Hermite normal form with transform.

    Returns ``(H, U)`` with ``U @ rows == H``, ``U`` unimodular, ``H`` in
    echelon form with positive pivots and entries above each pivot reduced
    into ``[0, pivot)``.  Zero rows are kept at the bottom so the rows of
    ``U`` matching them span the left kernel.
    """
    H = [list(map(int, r)) + [0] * (ncols - len(r)) for r in rows]
    m = len(H)
    U = [[1 if i == j else 0 for j in range(m)] for i in range(m)]
    r = 0
    pivots = []
    for c in range(ncols):
        if r >= m:
            break
        # euclid down the column
        while True:
            nz = [i for i in range(r, m) if H[i][c] != 0]
            if not nz:
                break
            p = min(nz, key=lambda i: abs(H[i][c]))
            if p != r:
                H[r], H[p] = H[p], H[r]
                U[r], U[p] = U[p], U[r]
            done = True
            for i in range(r + 1, m):
                if H[i][c]:
                    q = H[i][c] // H[r][c]
                    H[i] = [a - q * b for a, b in zip(H[i], H[r])]
                    U[i] = [a - q * b for a, b in zip(U[i], U[r])]
                    if H[i][c]:
                        done = False
            if done:
                break
        if all(H[i][c] == 0 for i in range(r, m)):
            continue
        if H[r][c] < 0:
            H[r] = [-a for a in H[r]]
            U[r] = [-a for a in U[r]]
        for i in range(r):
            q = H[i][c] // H[r][c]
            if q:
                H[i] = [a - q * b for a, b in zip(H[i], H[r])]
                U[i] = [a - q * b for a, b in zip(U[i], U[r])]
        pivots.append(c)
        r += 1
    return H, U


@dataclass
class Lattice:
    """A sublattice of Z^n given by generating rows, kept in Hermite form."""

    ncols: int
    gens: List[List[int]]
    H: List[List[int]] = field(init=False)
    U: List[List[int]] = field(init=False)
    pivots: List[int] = field(init=False)

    def __post_init__(self):
        self.H, self.U = hermite_rows(self.gens, self.ncols)
        self.pivots = []
        for row in self.H:
            nz = [c for c, a in enumerate(row) if a]
            if not nz:
                break
            self.pivots.append(nz[0])

    def reduce(self, v: Sequence[int]) -> Tuple[List[int], List[int]]:
        """Return ``(remainder, coeffs)`` with ``v = remainder + coeffs @ gens``."""
        v = list(v)
        q_h = [0] * len(self.pivots)
        for k, c in enumerate(self.pivots):
            row = self.H[k]
            q = v[c] // row[c]
            if q:
                v = [a - q * b for a, b in zip(v, row)]
                q_h[k] = q
        coeffs = [0] * len(self.gens)
        for k, q in enumerate(q_h):
            if q:
                for j, u in enumerate(self.U[k]):
                    coeffs[j] += q * u
        return v, coeffs

    def contains(self, v: Sequence[int]) -> Optional[List[int]]:
        rem, coeffs = self.reduce(v)
        if any(rem):
            return None
        return coeffs

    def index(self) -> Optional[int]:
        if len(self.pivots) < self.ncols:
            return None
        out = 1
        for k, c in enumerate(self.pivots):
            out *= self.H[k][c]
        return out

    def left_kernel(self) -> List[List[int]]:
        return [self.U[k] for k in range(len(self.pivots), len(self.gens))]


def smith_normal_form(m: Sequence[Sequence[int]]):
    """Smith normal form ``(U, D, V)`` with ``U @ m @ V == D``.

    Diagonal entries of ``D`` are nonnegative and form a divisibility chain;
    ``U`` and ``V`` are unimodular.  Returned as lists of lists.
    """
    rows = len(m)
    cols = len(m[0]) if rows else 0
    if rows == 0 or cols == 0:
        ident = lambda n: [[int(i == j) for j in range(n)] for i in range(n)]
        return ident(rows), [[0] * cols for _ in range(rows)], ident(cols)
    M = Matrix(m)
    D, U, V = smith_normal_decomp(M)
    D = [[int(D[i, j]) for j in range(cols)] for i in range(rows)]
    U = [[int(U[i, j]) for j in range(rows)] for i in range(rows)]
    V = [[int(V[i, j]) for j in range(cols)] for i in range(cols)]
    for i in range(min(rows, cols)):
        if D[i][i] < 0:
            D[i][i] = -D[i][i]
            U[i] = [-a for a in U[i]]
    return U, D, V


def snf_invariants(m: Sequence[Sequence[int]], ncols: int) -> Tuple[int, Tuple[int, ...]]:
    """(free rank, torsion divisors > 1) of Z^ncols modulo the row span of m."""
    rows = [list(r) for r in m if any(r)]
    if not rows:
        return ncols, ()
    _, D, _ = smith_normal_form(rows)
    diag = [D[i][i] for i in range(min(len(rows), ncols))]
    nonzero = [d for d in diag if d != 0]
    return ncols - len(nonzero), tuple(d for d in nonzero if d > 1)


# ---------------------------------------------------------------------------
# group interface


class Group:
    """Abstract element algebra.  Subclasses fill in the primitives."""

    kind = "abstract"
    gens: Tuple[str, ...] = ()

    # primitives -----------------------------------------------------------
    def identity(self):
        raise NotImplementedError

    def mul(self, x, y):
        raise NotImplementedError

    def inv(self, x):
        raise NotImplementedError

    def gen(self, name: str):
        raise NotImplementedError

    def word_of(self, x) -> Word:
        """Canonical word for an element."""
        raise NotImplementedError

    def relators(self) -> List[Word]:
        raise NotImplementedError

    def order(self) -> Optional[int]:
        return None

    def describe(self) -> str:
        return self.kind

    # derived --------------------------------------------------------------
    def check_word(self, w: Sequence[Letter]) -> None:
        names = set(self.gens)
        for g, _ in w:
            if g not in names:
                raise UnknownGenerator(f"generator {g!r} not in {self.describe()}", generator=g)

    def evaluate(self, w: Sequence[Letter]):
        self.check_word(w)
        x = self.identity()
        for g, e in w:
            y = self.gen(g)
            x = self.mul(x, y if e > 0 else self.inv(y))
        return x

    def power(self, x, n: int):
        if n < 0:
            x, n = self.inv(x), -n
        out = self.identity()
        base = x
        while n:
            if n & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            n >>= 1
        return out

    def is_identity_element(self, x) -> bool:
        return x == self.identity()

    def product(self, *xs):
        out = self.identity()
        for x in xs:
            out = self.mul(out, x)
        return out

    def conj(self, g, x):
        """g x g^-1"""
        return self.mul(self.mul(g, x), self.inv(g))

    def subgroup(self, gens: Sequence) -> "Subgroup":
        return Subgroup(self, tuple(gens))

    def subgroup_from_words(self, words: Sequence[Word]) -> "Subgroup":
        return Subgroup(self, tuple(self.evaluate(w) for w in words))

    def elements(self) -> List:
        raise UnsupportedBackend(f"{self.kind} groups are not enumerable")

    def is_trivial(self) -> bool:
        return all(self.gen(g) == self.identity() for g in self.gens)

    def has_infinite_order(self, x) -> Optional[bool]:
        return None

    # subgroup hooks; each backend overrides what it supports
    def _sub_prepare(self, gens: Tuple):
        raise UnsupportedBackend(f"subgroup membership is not available for {self.kind}")

    def _sub_member(self, data, x) -> Optional[Witness]:
        raise UnsupportedBackend(f"subgroup membership is not available for {self.kind}")

    def _sub_left_rep(self, data, x):
        raise UnsupportedBackend(f"coset representatives are not available for {self.kind}")

    def _sub_index(self, data) -> Optional[int]:
        raise UnsupportedBackend(f"index computation is not available for {self.kind}")

    def _sub_right_key(self, data, x):
        raise UnsupportedBackend(f"coset enumeration is not available for {self.kind}")

    def _enumerate_shortlex(self) -> Iterable:
        """Elements in shortlex order of their canonical words (may be infinite)."""
        raise UnsupportedBackend(f"shortlex enumeration is not available for {self.kind}")


def shortlex_key(w: Word, gens: Sequence[str]):
    order = {l: i for i, l in enumerate(letters_of(gens))}
    return (len(w), tuple(order[l] for l in w))


# ---------------------------------------------------------------------------
# finite groups


class Finite(Group):
    """Finite group from a multiplication table over elements 0..n-1."""

    kind = "Finite"

    def __init__(self, table, generators: Sequence[Tuple[str, int]], labels=None, check: bool = True, name: str = ""):
        self.table = [list(map(int, row)) for row in table]
        n = len(self.table)
        if n == 0 or any(len(row) != n for row in self.table):
            raise InvalidGroup("multiplication table must be square and nonempty")
        self.n = n
        self.name = name
        self.labels = list(labels) if labels is not None else [str(i) for i in range(n)]
        self.gens = tuple(g for g, _ in generators)
        self._gen = {g: int(i) for g, i in generators}
        if len(set(self.gens)) != len(self.gens):
            raise InvalidGroup("duplicate generator names")
        ident = [i for i in range(n) if self.table[i] == list(range(n))]
        if not ident:
            raise InvalidGroup("table has no identity")
        self.e = ident[0]
        if check and n <= 512:
            self._check_axioms()
        self._inv = [0] * n
        for x in range(n):
            for y in range(n):
                if self.table[x][y] == self.e:
                    self._inv[x] = y
                    break
        self._build_words()

    def _check_axioms(self):
        t = np.array(self.table)
        n = self.n
        if t.min() < 0 or t.max() >= n:
            raise InvalidGroup("table entries out of range")
        if any(self.table[x][self.e] != x for x in range(n)):
            raise InvalidGroup("identity is not two-sided")
        for row in self.table:
            if sorted(row) != list(range(n)):
                raise InvalidGroup("table rows are not permutations (no inverses)")
        for x in range(n):
            if sorted(self.table[y][x] for y in range(n)) != list(range(n)):
                raise InvalidGroup("table columns are not permutations")
        # (x y) z == x (y z) for all triples, vectorised
        lhs = t[t, :]  # lhs[x, y, z] = (xy) z
        rhs = t[:, t]  # rhs[x, y, z] = x (yz)
        if not np.array_equal(lhs, rhs):
            raise InvalidGroup("table is not associative")

    def _build_words(self):
        words = {self.e: EMPTY}
        order = [self.e]
        q = deque([self.e])
        letters = letters_of(self.gens)
        while q:
            x = q.popleft()
            for g, e in letters:
                y = self.mul(x, self._gen[g] if e > 0 else self._inv[self._gen[g]])
                if y not in words:
                    words[y] = words[x] + ((g, e),)
                    order.append(y)
                    q.append(y)
        if len(words) != self.n:
            raise InvalidGroup(f"generators {list(self.gens)} do not generate the whole table")
        self._words = words
        self._shortlex = order
        self._rank = {x: i for i, x in enumerate(order)}

    # element algebra
    def identity(self):
        return self.e

    def mul(self, x, y):
        return self.table[x][y]

    def inv(self, x):
        return self._inv[x]

    def gen(self, name):
        try:
            return self._gen[name]
        except KeyError:
            raise UnknownGenerator(f"generator {name!r} not in {self.describe()}", generator=name)

    def word_of(self, x):
        return self._words[x]

    def order(self):
        return self.n

    def elements(self):
        return list(self._shortlex)

    def describe(self):
        return self.name or f"Finite(order {self.n})"

    def has_infinite_order(self, x):
        return False

    def relators(self) -> List[Word]:
        """Schreier relators of the Cayley graph; they present the table."""
        out = []
        seen = set()
        for x in self._shortlex:
            for g in self.gens:
                y = self.mul(x, self._gen[g])
                rel = free_reduce(self._words[x] + ((g, 1),) + inverse_word(self._words[y]))
                if rel and rel not in seen:
                    seen.add(rel)
                    out.append(rel)
        return out

    def element_label(self, x) -> str:
        return self.labels[x]

    # subgroups
    def _sub_prepare(self, gens):
        wit = {self.e: ()}
        q = deque([self.e])
        while q:
            x = q.popleft()
            for i, h in enumerate(gens):
                for sgn, y in ((1, self.mul(x, h)), (-1, self.mul(x, self.inv(h)))):
                    if y not in wit:
                        wit[y] = wit[x] + ((i, sgn),)
                        q.append(y)
        # right cosets Hg, keyed by their shortlex-least member
        right = {}
        for g in self._shortlex:
            if g in right:
                continue
            for h in wit:
                right[self.mul(h, g)] = g
        return {"wit": wit, "right": right}

    def _sub_member(self, data, x):
        w = data["wit"].get(x)
        return None if w is None else _reduce_witness(w)

    def _sub_left_rep(self, data, x):
        coset = [self.mul(x, h) for h in data["wit"]]
        r = min(coset, key=lambda y: self._rank[y])
        return r, _reduce_witness(data["wit"][self.mul(self.inv(r), x)])

    def _sub_index(self, data):
        return self.n // len(data["wit"])

    def _sub_right_key(self, data, x):
        return data["right"][x]

    def _enumerate_shortlex(self):
        return iter(self._shortlex)


def cyclic(n: int, name: str = "a") -> Finite:
    table = [[(i + j) % n for j in range(n)] for i in range(n)]
    return Finite(table, [(name, 1 % n)], labels=[f"{name}^{i}" for i in range(n)], name=f"Z/{n}")


def from_permutations(perms: Sequence[Tuple[str, Sequence[int]]], name: str = "") -> Finite:
    """Finite group generated by permutations; product is 'x then y'."""
    perms = [(g, tuple(p)) for g, p in perms]
    deg = len(perms[0][1]) if perms else 0
    ident = tuple(range(deg))
    elems = [ident]
    index = {ident: 0}
    q = deque([ident])
    while q:
        x = q.popleft()
        for _, p in perms:
            y = tuple(p[x[i]] for i in range(deg))
            if y not in index:
                index[y] = len(elems)
                elems.append(y)
                q.append(y)
    n = len(elems)
    table = [[0] * n for _ in range(n)]
    for i, x in enumerate(elems):
        for j, y in enumerate(elems):
            table[i][j] = index[tuple(y[x[k]] for k in range(deg))]
    return Finite(table, [(g, index[p]) for g, p in perms], labels=[str(e) for e in elems], name=name)


def symmetric3(names=("s", "r")) -> Finite:
    return from_permutations([(names[0], (1, 0, 2)), (names[1], (1, 2, 0))], name="S3")


def dihedral(n: int, names=("r", "s")) -> Finite:
    """Dihedral group of order 2n as permutations of an n-gon."""
    rot = tuple((i + 1) % n for i in range(n))
    ref = tuple((-i) % n for i in range(n))
    return from_permutations([(names[0], rot), (names[1], ref)], name=f"D{n}")


def klein_four(names=("x", "y")) -> Finite:
    return from_permutations([(names[0], (1, 0, 2, 3)), (names[1], (0, 1, 3, 2))], name="Z/2xZ/2")


# ---------------------------------------------------------------------------
# finitely generated abelian groups


class FreeAbelian(Group):
    """Z^rank + Z/d1 + ... + Z/dk with d1 | d2 | ... ; elements are vectors."""

    kind = "FreeAbelian"

    def __init__(self, rank: int, torsion: Sequence[int] = (), names: Optional[Sequence[str]] = None):
        torsion = tuple(int(d) for d in torsion)
        if rank < 0:
            raise InvalidGroup("rank must be nonnegative")
        if any(d < 2 for d in torsion):
            raise InvalidGroup("torsion divisors must be at least 2")
        if any(b % a for a, b in zip(torsion, torsion[1:])):
            raise InvalidGroup(f"torsion divisors {list(torsion)} do not form a divisibility chain")
        self.rank = rank
        self.torsion = torsion
        n = rank + len(torsion)
        self.gens = tuple(names) if names is not None else tuple(default_names(n))
        if len(self.gens) != n or len(set(self.gens)) != n:
            raise InvalidGroup("FreeAbelian needs one distinct name per coordinate")
        self._index = {g: i for i, g in enumerate(self.gens)}
        self.n = n
        self.mods = (0,) * rank + torsion

    def _norm(self, v):
        return tuple(a % m if m else a for a, m in zip(v, self.mods))

    def identity(self):
        return (0,) * self.n

    def mul(self, x, y):
        return self._norm(tuple(a + b for a, b in zip(x, y)))

    def inv(self, x):
        return self._norm(tuple(-a for a in x))

    def gen(self, name):
        try:
            i = self._index[name]
        except KeyError:
            raise UnknownGenerator(f"generator {name!r} not in {self.describe()}", generator=name)
        v = [0] * self.n
        v[i] = 1
        return self._norm(v)

    def evaluate(self, w):
        self.check_word(w)
        v = [0] * self.n
        for g, e in w:
            v[self._index[g]] += e
        return self._norm(v)

    def power(self, x, n):
        return self._norm(tuple(a * n for a in x))

    def word_of(self, x):
        out = []
        for g, a in zip(self.gens, x):
            out.extend([(g, 1 if a > 0 else -1)] * abs(a))
        return tuple(out)

    def order(self):
        if self.rank:
            return None
        out = 1
        for d in self.torsion:
            out *= d
        return out

    def elements(self):
        if self.rank:
            return super().elements()
        return [tuple(v) for v in itertools.product(*[range(d) for d in self.torsion])]

    def describe(self):
        if not self.torsion:
            return f"Z^{self.rank}"
        parts = [f"Z^{self.rank}"] if self.rank else []
        parts += [f"Z/{d}" for d in self.torsion]
        return "+".join(parts)

    def has_infinite_order(self, x):
        return any(x[: self.rank])

    def relators(self):
        out = []
        for i, j in itertools.combinations(range(self.n), 2):
            a, b = self.gens[i], self.gens[j]
            out.append(((a, 1), (b, 1), (a, -1), (b, -1)))
        for k, d in enumerate(self.torsion):
            out.append(((self.gens[self.rank + k], 1),) * d)
        return out

    def _relation_rows(self):
        rows = []
        for k, d in enumerate(self.torsion):
            v = [0] * self.n
            v[self.rank + k] = d
            rows.append(v)
        return rows

    # subgroups
    def _sub_prepare(self, gens):
        rows = [list(h) for h in gens] + self._relation_rows()
        return {"lat": Lattice(self.n, rows), "k": len(gens)}

    def _sub_member(self, data, x):
        coeffs = data["lat"].contains(x)
        if coeffs is None:
            return None
        out = []
        for i, c in enumerate(coeffs[: data["k"]]):
            out.extend([(i, 1 if c > 0 else -1)] * abs(c))
        return tuple(out)

    def _sub_left_rep(self, data, x):
        rem, _ = data["lat"].reduce(x)
        r = self._norm(rem)
        return r, self._sub_member(data, self.mul(self.inv(r), x))

    def _sub_index(self, data):
        return data["lat"].index()

    def _sub_right_key(self, data, x):
        return self._norm(data["lat"].reduce(x)[0])

    def _enumerate_shortlex(self):
        letters = letters_of(self.gens)
        order = {l: i for i, l in enumerate(letters)}
        seen = set()
        for length in itertools.count(0):
            batch = []
            for v in _vectors_of_l1(self.n, length):
                x = self._norm(v)
                w = self.word_of(x)
                if len(w) != length or x in seen:
                    continue
                batch.append((tuple(order[l] for l in w), x))
            batch.sort()
            for _, x in batch:
                seen.add(x)
                yield x
            if self.rank == 0 and len(seen) == self.order():
                return


def _vectors_of_l1(n: int, total: int):
    if n == 0:
        if total == 0:
            yield ()
        return
    for first in range(-total, total + 1):
        rest = total - abs(first)
        for tail in _vectors_of_l1(n - 1, rest):
            yield (first,) + tail


# ---------------------------------------------------------------------------
# free groups and Stallings graphs


class StallingsGraph:
    """Folded graph of a finitely generated subgroup of a free group.

    Edges carry a tag: a word in the subgroup generators.  For every vertex
    there is a (conceptual) element pi(v) with pi(base) = 1 and, for each
    edge u -x-> w, tag = pi(u) x pi(w)^-1.  Reading a closed path at the
    base then yields a witness for membership.
    """

    def __init__(self, gens: Sequence[Word]):
        self.base = 0
        self.nv = 1
        # edges: id -> [u, letter_gen, w, tag]; letter direction +1 from u to w
        self.edges: Dict[int, list] = {}
        self._next = 0
        for j, w in enumerate(gens):
            w = free_reduce(w)
            if not w:
                continue
            prev = self.base
            for k, (g, e) in enumerate(w):
                nxt = self.base if k == len(w) - 1 else self._new_vertex()
                tag = ((j, 1),) if k == 0 else ()
                if e > 0:
                    self._add(prev, g, nxt, tag)
                else:
                    self._add(nxt, g, prev, _inverse_witness(tag))
                prev = nxt
        self._fold()
        self._index_out()

    def _new_vertex(self):
        v = self.nv
        self.nv += 1
        return v

    def _add(self, u, g, w, tag):
        self.edges[self._next] = [u, g, w, tuple(tag)]
        self._next += 1

    def _incident(self, v):
        """(letter, edge id, other end, tag read along the letter) at v."""
        for eid, (u, g, w, tag) in self.edges.items():
            if u == v:
                yield (g, 1), eid, w, tag
            if w == v:
                yield (g, -1), eid, u, _inverse_witness(tag)

    def _fold(self):
        while True:
            hit = None
            for v in self._vertices():
                seen = {}
                for letter, eid, other, tag in self._incident(v):
                    if letter in seen and seen[letter][0] != eid:
                        hit = (v, letter, seen[letter], (eid, other, tag))
                        break
                    seen.setdefault(letter, (eid, other, tag))
                if hit:
                    break
            if not hit:
                return
            v, letter, (e1, w1, t1), (e2, w2, t2) = hit
            if w1 == w2:
                del self.edges[e2]
                continue
            if w2 == self.base:
                (e1, w1, t1), (e2, w2, t2) = (e2, w2, t2), (e1, w1, t1)
            # merge w2 into w1; delta = t1^-1 t2
            delta = _reduce_witness(_inverse_witness(t1) + t2)
            del self.edges[e2]
            for eid, edge in self.edges.items():
                u, g, w, tag = edge
                if u == w2:
                    tag = _reduce_witness(delta + tag)
                    u = w1
                if w == w2:
                    tag = _reduce_witness(tag + _inverse_witness(delta))
                    w = w1
                self.edges[eid] = [u, g, w, tag]

    def _vertices(self):
        vs = {self.base}
        for u, _, w, _ in self.edges.values():
            vs.add(u)
            vs.add(w)
        return sorted(vs)

    def _index_out(self):
        self.out: Dict[int, Dict[Letter, Tuple[int, Witness]]] = {v: {} for v in self._vertices()}
        for u, g, w, tag in self.edges.values():
            self.out[u][(g, 1)] = (w, tag)
            self.out[w][(g, -1)] = (u, _inverse_witness(tag))
        self.vertices = sorted(self.out)

    def read(self, w: Word):
        """Follow w from the base; return (vertex, tags, unread suffix)."""
        v, tags = self.base, []
        for k, l in enumerate(w):
            step = self.out[v].get(l)
            if step is None:
                return v, tuple(tags), tuple(w[k:])
            v = step[0]
            tags.extend(step[1])
        return v, tuple(tags), ()

    def rank(self) -> int:
        return len(self.edges) - len(self.vertices) + 1

    def geodesics(self, letters: Sequence[Letter]) -> Dict[int, Word]:
        paths = {self.base: EMPTY}
        q = deque([self.base])
        while q:
            v = q.popleft()
            for l in letters:
                step = self.out[v].get(l)
                if step and step[0] not in paths:
                    paths[step[0]] = paths[v] + (l,)
                    q.append(step[0])
        return paths

    def is_complete(self, letters: Sequence[Letter]) -> bool:
        return all(l in self.out[v] for v in self.vertices for l in letters)


class Free(Group):
    kind = "Free"

    def __init__(self, rank: int = 0, names: Optional[Sequence[str]] = None):
        self.gens = tuple(names) if names is not None else tuple(default_names(rank))
        if len(set(self.gens)) != len(self.gens):
            raise InvalidGroup("duplicate generator names")
        self.rank = len(self.gens)
        self._names = set(self.gens)

    def identity(self):
        return EMPTY

    def mul(self, x, y):
        return free_reduce(x + y)

    def inv(self, x):
        return inverse_word(x)

    def gen(self, name):
        if name not in self._names:
            raise UnknownGenerator(f"generator {name!r} not in {self.describe()}", generator=name)
        return ((name, 1),)

    def evaluate(self, w):
        self.check_word(w)
        return free_reduce(w)

    def word_of(self, x):
        return x

    def order(self):
        return 1 if self.rank == 0 else None

    def elements(self):
        if self.rank == 0:
            return [EMPTY]
        return super().elements()

    def describe(self):
        return f"F{self.rank}"

    def relators(self):
        return []

    def has_infinite_order(self, x):
        return bool(x)

    # subgroups
    def _sub_prepare(self, gens):
        sg = StallingsGraph(gens)
        return {"sg": sg, "geo": sg.geodesics(letters_of(self.gens))}

    def _sub_member(self, data, x):
        v, tags, rest = data["sg"].read(x)
        if rest or v != data["sg"].base:
            return None
        return _reduce_witness(tags)

    def _right_rep(self, data, y):
        # canonical representative of the right coset H y
        v, tags, rest = data["sg"].read(y)
        return free_reduce(data["geo"][v] + rest)

    def _sub_left_rep(self, data, x):
        rho = self._right_rep(data, inverse_word(x))
        r = inverse_word(rho)
        return r, self._sub_member(data, self.mul(self.inv(r), x))

    def _sub_index(self, data):
        sg = data["sg"]
        if sg.is_complete(letters_of(self.gens)):
            return len(sg.vertices)
        return None

    def _sub_right_key(self, data, x):
        return self._right_rep(data, x)

    def _enumerate_shortlex(self):
        letters = letters_of(self.gens)
        layer = [EMPTY]
        yield EMPTY
        if not letters:
            return
        while True:
            nxt = []
            for w in layer:
                for l in letters:
                    if w and w[-1] == (l[0], -l[1]):
                        continue
                    nxt.append(w + (l,))
            for w in nxt:
                yield w
            layer = nxt


# ---------------------------------------------------------------------------
# subgroups, homomorphisms and oracles


class Subgroup:
    """Subgroup of ``ambient`` generated by the listed elements."""

    def __init__(self, ambient: Group, gens: Tuple):
        self.ambient = ambient
        self.gens = tuple(gens)
        self._data = None

    @property
    def data(self):
        if self._data is None:
            self._data = self.ambient._sub_prepare(self.gens)
        return self._data

    def generator_words(self) -> List[Word]:
        return [self.ambient.word_of(h) for h in self.gens]

    def member(self, x) -> Optional[Witness]:
        if x == self.ambient.identity():
            return ()
        return self.ambient._sub_member(self.data, x)

    def contains(self, x) -> bool:
        return self.member(x) is not None

    def evaluate_witness(self, witness: Witness):
        A = self.ambient
        out = A.identity()
        for i, e in witness:
            out = A.mul(out, self.gens[i] if e > 0 else A.inv(self.gens[i]))
        return out

    def left_rep(self, x):
        """(r, witness) with x = r * h, r canonical for the left coset xH."""
        return self.ambient._sub_left_rep(self.data, x)

    def index(self) -> Optional[int]:
        return self.ambient._sub_index(self.data)

    def is_whole(self) -> bool:
        return all(self.contains(self.ambient.gen(g)) for g in self.ambient.gens)

    def is_trivial(self) -> bool:
        e = self.ambient.identity()
        return all(h == e for h in self.gens)

    def contains_subgroup(self, other: "Subgroup") -> bool:
        return all(self.contains(h) for h in other.gens)

    def equals(self, other: "Subgroup") -> bool:
        return self.contains_subgroup(other) and other.contains_subgroup(self)

    def describe(self) -> str:
        return "<" + ", ".join(format_word(w) for w in self.generator_words()) + ">"


def is_identity(w: Sequence[Letter], g: Group) -> bool:
    return g.is_identity_element(g.evaluate(w))


def subgroup_membership(w: Sequence[Letter], h: Subgroup) -> Optional[Word]:
    """Witness word in h's generators (named h0, h1, ...) or None."""
    if h.ambient.kind == "GoGPi1" and not getattr(h.ambient, "supports_designated_membership", False):
        raise UnsupportedBackend("membership in GoGPi1 groups is limited to designated edge subgroups")
    wit = h.member(h.ambient.evaluate(w))
    if wit is None:
        return None
    return witness_word(wit, [f"h{i}" for i in range(len(h.gens))])


@dataclass
class Transversal:
    reps: List[Word]
    complete: bool
    index: Optional[int]


def coset_transversal(h: Subgroup, bound: int, require_complete: bool = False) -> Transversal:
    """Right coset representatives, identity first, in shortlex order."""
    A = h.ambient
    if A.kind not in ("Finite", "FreeAbelian", "Free"):
        raise UnsupportedBackend(f"coset transversals need a Finite, FreeAbelian or Free ambient, not {A.kind}")
    index = h.index()
    if require_complete and (index is None or index > bound):
        raise InfiniteIndexUnbounded(f"index {'infinite' if index is None else index} exceeds bound {bound}")
    reps: List[Word] = []
    keys = set()
    target = index if index is not None and index <= bound else bound
    if A.kind == "Free":
        data = h.data
        for x in A._enumerate_shortlex():
            k = A._sub_right_key(data, x)
            if k not in keys:
                keys.add(k)
                reps.append(A.word_of(x))
                if len(reps) >= target:
                    break
    else:
        for x in A._enumerate_shortlex():
            k = A._sub_right_key(h.data, x)
            if k not in keys:
                keys.add(k)
                reps.append(A.word_of(x))
                if len(reps) >= target:
                    break
    complete = index is not None and len(reps) == index
    return Transversal(reps, complete, index)


def element_order(w: Sequence[Letter], g: Group, bound: int = 64) -> Optional[int]:
    x = g.evaluate(w)
    return element_order_of(g, x, bound)


def element_order_of(g: Group, x, bound: int = 64) -> Optional[int]:
    e = g.identity()
    y = x
    for n in range(1, bound + 1):
        if y == e:
            return n
        y = g.mul(y, x)
    return None


class Homomorphism:
    """Map determined by images of the source generators."""

    def __init__(self, source: Group, target: Group, images: Dict[str, object], mono: bool = False):
        self.source = source
        self.target = target
        missing = [g for g in source.gens if g not in images]
        if missing:
            raise InvalidHomomorphism(f"no image for generators {missing}")
        self.images = {g: images[g] for g in source.gens}
        self.mono = mono

    @classmethod
    def from_words(cls, source: Group, target: Group, images: Dict[str, Word], mono: bool = False):
        return cls(source, target, {g: target.evaluate(w) for g, w in images.items()}, mono=mono)

    def apply_word(self, w: Sequence[Letter]):
        T = self.target
        out = T.identity()
        for g, e in w:
            y = self.images[g]
            out = T.mul(out, y if e > 0 else T.inv(y))
        return out

    def __call__(self, x):
        return self.apply_word(self.source.word_of(x))

    def check(self) -> None:
        for r in self.source.relators():
            if not self.target.is_identity_element(self.apply_word(r)):
                raise InvalidHomomorphism(f"relator {format_word(r)} does not map to the identity")

    def image_subgroup(self) -> Subgroup:
        return Subgroup(self.target, tuple(self.images[g] for g in self.source.gens))

    def image_words(self) -> Dict[str, Word]:
        return {g: self.target.word_of(x) for g, x in self.images.items()}

    def preimage(self, y):
        """Some x with f(x) = y, or None; uses membership in the image."""
        sub = self.image_subgroup()
        wit = sub.member(y)
        if wit is None:
            return None
        return self.source.evaluate(witness_word(wit, self.source.gens))

    def compose(self, after: "Homomorphism") -> "Homomorphism":
        """after o self"""
        return Homomorphism(self.source, after.target, {g: after(x) for g, x in self.images.items()})

    def is_identity_map(self) -> bool:
        return self.source is self.target and all(self.images[g] == self.source.gen(g) for g in self.source.gens)


def identity_hom(g: Group) -> Homomorphism:
    return Homomorphism(g, g, {x: g.gen(x) for x in g.gens})


def injectivity_check(f: Homomorphism) -> bool:
    """True iff f has trivial kernel (raises UnsupportedBackend when undecided)."""
    S, T = f.source, f.target
    if S.kind == "GoGPi1":
        raise UnsupportedBackend("injectivity of maps out of GoGPi1 groups is not decided")
    if S.kind == "Finite" or (S.kind == "FreeAbelian" and S.rank == 0) or (S.kind == "Free" and S.rank == 0):
        elems = S.elements()
        images = {f(x) for x in elems}
        return len(images) == len(elems)
    if S.kind == "FreeAbelian":
        if T.kind == "FreeAbelian":
            return _abelian_injective(f)
        if T.kind == "Finite":
            return False
        if T.kind == "Free":
            if S.torsion or S.rank > 1:
                return False
            return f.images[S.gens[0]] != T.identity()
        if T.kind == "GoGPi1":
            return T.injectivity_into(f)
    if S.kind == "Free":
        if T.kind == "Free":
            sg = StallingsGraph([f.images[g] for g in S.gens])
            return sg.rank() == S.rank and S.rank == len(S.gens)
        if T.kind == "Finite":
            return False
        if T.kind == "FreeAbelian":
            if S.rank > 1:
                return False
            return bool(T.has_infinite_order(f.images[S.gens[0]]))
        if T.kind == "GoGPi1":
            if S.rank == 1:
                inf = T.has_infinite_order(f.images[S.gens[0]])
                if inf is not None:
                    return inf
            return T.injectivity_into(f)
    raise UnsupportedBackend(f"injectivity from {S.kind} into {T.kind} is not decided")


def _abelian_injective(f: Homomorphism) -> bool:
    S, T = f.source, f.target
    M = [list(f.images[g]) for g in S.gens]
    rel_t = T._relation_rows()
    m = len(M)
    # x M = y R_t  <=>  (x, -y) [M; R_t] = 0
    stacked = Lattice(T.n, M + rel_t)
    kernel = [row[:m] for row in stacked.left_kernel()]
    src_rel = Lattice(S.n, S._relation_rows() or [[0] * S.n])
    return all(src_rel.contains(v) is not None for v in kernel)
