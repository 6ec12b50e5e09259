"""Finite partially ordered sets, monotone functions and upper-set machinery."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

UPPER_SET_CAP = 16


def _transitive_closure(rel: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure of a boolean relation matrix."""
    closure = rel | np.eye(rel.shape[0], dtype=bool)
    while True:
        step = closure | ((closure.astype(np.uint8) @ closure.astype(np.uint8)) > 0)
        if (step == closure).all():
            return closure
        closure = step


class FinitePoset:
    """Finite ground set with a dense partial-order table.

    ``leq[i, j]`` is True iff element ``i`` precedes or equals element ``j``.
    Reflexivity, antisymmetry and transitivity are validated at construction;
    invalid input fails fast. Instances are immutable and safe to share.
    """

    __slots__ = ("elements", "leq", "_index")

    def __init__(self, elements, leq, check_transitive: bool = True):
        elements = list(elements)
        n = len(elements)
        if n == 0:
            raise ValueError("poset needs at least one element")
        if len(set(elements)) != n:
            raise ValueError("duplicate element labels")
        leq = np.array(leq, dtype=bool)
        if leq.shape != (n, n):
            raise ValueError(f"relation table must be {n}x{n}, got {leq.shape}")
        if not leq.diagonal().all():
            raise ValueError("relation is not reflexive")
        if (leq & leq.T & ~np.eye(n, dtype=bool)).any():
            raise ValueError("relation is not antisymmetric")
        if check_transitive and (_transitive_closure(leq) != leq).any():
            raise ValueError("relation is not transitive")
        leq.setflags(write=False)
        self.elements = elements
        self.leq = leq
        self._index = {e: i for i, e in enumerate(elements)}

    @classmethod
    def from_covers(cls, elements, covers) -> "FinitePoset":
        """Build from covering relations ``(a, b)`` meaning a < b; closure is computed."""
        elements = list(elements)
        index = {e: i for i, e in enumerate(elements)}
        rel = np.eye(len(elements), dtype=bool)
        for a, b in covers:
            if a not in index or b not in index:
                raise ValueError(f"cover ({a!r}, {b!r}) references undeclared element")
            rel[index[a], index[b]] = True
        return cls(elements, _transitive_closure(rel))

    @classmethod
    def chain(cls, labels) -> "FinitePoset":
        labels = list(labels)
        n = len(labels)
        idx = np.arange(n)
        return cls(labels, idx[:, None] <= idx[None, :])

    @classmethod
    def antichain(cls, labels) -> "FinitePoset":
        labels = list(labels)
        return cls(labels, np.eye(len(labels), dtype=bool))

    @property
    def n(self) -> int:
        return len(self.elements)

    def index(self, label) -> int:
        return self._index[label]

    def le(self, a, b) -> bool:
        return bool(self.leq[self._index[a], self._index[b]])

    def up_closure(self, indices) -> np.ndarray:
        """Boolean mask of every element above some member of ``indices``."""
        mask = np.zeros(self.n, dtype=bool)
        for i in indices:
            mask |= self.leq[i]
        return mask

    def __repr__(self):
        return f"FinitePoset({self.elements!r}, relations={int(self.leq.sum()) - self.n})"

    def __eq__(self, other):
        if not isinstance(other, FinitePoset):
            return NotImplemented
        return self.elements == other.elements and (self.leq == other.leq).all()

    def __hash__(self):
        return hash((tuple(self.elements), self.leq.tobytes()))


def parse_poset(text: str) -> FinitePoset:
    """Parse the plain-text poset format: one line per element, one line
    per covering relation ``a < b``. Blank lines and ``#`` comments ignored."""
    elements: list[str] = []
    covers: list[tuple[str, str]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "<" in line:
            a, _, b = line.partition("<")
            covers.append((a.strip(), b.strip()))
        else:
            elements.append(line)
    if not elements:
        raise ValueError("poset file declares no elements")
    return FinitePoset.from_covers(elements, covers)


def load_poset(path) -> FinitePoset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_poset(fh.read())


class ProductPoset(FinitePoset):
    """Coordinatewise product of finite posets; elements are label tuples."""

    __slots__ = ("factors",)

    def __init__(self, factors):
        factors = list(factors)
        if not factors:
            raise ValueError("empty factor list")
        elements = list(itertools.product(*(f.elements for f in factors)))
        # Kronecker product realises the coordinatewise order in row-major
        # element order (rightmost factor varying fastest); products of
        # transitive relations are transitive, so skip the cubic recheck.
        leq = reduce(np.kron, (f.leq.astype(np.uint8) for f in factors)).astype(bool)
        super().__init__(elements, leq, check_transitive=False)
        self.factors = factors


def product_poset(factors) -> ProductPoset:
    """Product of the given posets under the coordinatewise order."""
    return ProductPoset(factors)


@dataclass(frozen=True)
class UpperSet:
    """Upward-closed subset of a poset; its indicator is monotone 0/1."""

    poset: FinitePoset
    members: frozenset

    def __post_init__(self):
        idx = [self.poset.index(m) for m in self.members]
        mask = np.zeros(self.poset.n, dtype=bool)
        mask[idx] = True
        above = self.poset.up_closure(idx)
        if (above & ~mask).any():
            raise ValueError("set is not upward closed")

    def indicator(self) -> np.ndarray:
        values = np.zeros(self.poset.n)
        for m in self.members:
            values[self.poset.index(m)] = 1.0
        return values

    def __len__(self):
        return len(self.members)


def enumerate_upper_sets(poset: FinitePoset, cap: int = UPPER_SET_CAP) -> list[UpperSet]:
    """All upward-closed subsets, found by filtering the full power set.

    Exhaustive and duplicate-free; includes the empty and the full set.
    Refuses posets above ``cap`` elements instead of truncating.
    """
    n = poset.n
    if n > cap:
        raise ValueError(f"upper-set enumeration capped at {cap} elements, got {n}")
    up_masks = [int(sum(1 << j for j in np.flatnonzero(poset.leq[i]))) for i in range(n)]
    out = []
    for mask in range(1 << n):
        closed = True
        m = mask
        while m:
            i = (m & -m).bit_length() - 1
            if up_masks[i] & ~mask:
                closed = False
                break
            m &= m - 1
        if closed:
            members = frozenset(poset.elements[i] for i in range(n) if mask >> i & 1)
            out.append(UpperSet(poset, members))
    return out


def upper_set_matrix(poset: FinitePoset, upper_sets=None) -> np.ndarray:
    """Indicator matrix, one row per upper set, columns in element order."""
    if upper_sets is None:
        upper_sets = enumerate_upper_sets(poset)
    mat = np.zeros((len(upper_sets), poset.n), dtype=bool)
    for r, u in enumerate(upper_sets):
        for m in u.members:
            mat[r, poset.index(m)] = True
    return mat


def is_monotone(values, poset: FinitePoset) -> bool:
    """True iff x <= y in the poset implies values[x] <= values[y]."""
    if isinstance(values, dict):
        v = np.array([values[e] for e in poset.elements], dtype=float)
    else:
        v = np.asarray(values, dtype=float)
    if v.shape != (poset.n,):
        raise ValueError("need one value per element")
    return not (poset.leq & (v[:, None] > v[None, :])).any()


class DiscreteDistribution:
    """Probability vector over a poset's elements."""

    __slots__ = ("poset", "mass")

    def __init__(self, poset: FinitePoset, mass):
        mass = np.asarray(mass, dtype=float).copy()
        if mass.shape != (poset.n,):
            raise ValueError("need one mass per element")
        if (mass < 0).any():
            raise ValueError("negative mass")
        if abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {mass.sum()!r}, not 1 within 1e-12")
        mass.setflags(write=False)
        self.poset = poset
        self.mass = mass

    def expect(self, values) -> float:
        return float(self.mass @ np.asarray(values, dtype=float))

    def __repr__(self):
        return f"DiscreteDistribution({self.mass.tolist()})"
