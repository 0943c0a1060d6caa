"""Valuation distributions that are subadditive over independent items.

Subsets of the ground set are int bitmasks (bit i = item i, 0-based).
A valuation is materialized as a table indexed by mask.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Tuple, Union

from .config import DEFAULT_CAPS, Caps
from .distributions import Info, OneDimDist, PrivateInfoDist
from .errors import AxiomViolation, ParameterError, ResourceError

KINDS = ("additive", "kdemand", "downward_closed", "xos")
ZERO = Fraction(0)


def items_of(mask: int) -> list:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_of(items: Iterable[int]) -> int:
    m = 0
    for i in items:
        m |= 1 << i
    return m


def lex_key(mask: int) -> tuple:
    """Sort key: lexicographic order of the sorted item tuple."""
    return tuple(items_of(mask))


def down_closure(sets: Iterable[int]) -> frozenset:
    out = {0}
    for s in sets:
        sub = s
        while True:
            out.add(sub)
            if sub == 0:
                break
            sub = (sub - 1) & s
    return frozenset(out)


@dataclass(frozen=True)
class ValuationSpec:
    """A product distribution over private info plus a valuation class.

    ``kind`` is one of additive, kdemand (uses ``k``), downward_closed (uses
    ``feasible``, a downward-closed family of masks containing every
    singleton), or xos (uses ``J``; each item's info is a J-vector).
    """

    n: int
    kind: str
    items: Tuple[PrivateInfoDist, ...]
    k: Optional[int] = None
    feasible: Optional[frozenset] = None
    J: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown valuation class {self.kind!r}")
        if self.n < 0 or len(self.items) != self.n:
            raise ParameterError(f"expected {self.n} item distributions, got {len(self.items)}")
        if self.kind == "kdemand":
            if self.k is None or not (1 <= self.k) or (self.n > 0 and self.k > self.n):
                raise ParameterError(f"k-demand needs 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.kind == "downward_closed":
            fam = self.feasible
            if fam is None:
                raise ParameterError("downward_closed needs a feasible family")
            full = (1 << self.n) - 1
            if any(s & ~full for s in fam):
                raise ParameterError("feasible set mentions items outside [n]")
            if down_closure(fam) != frozenset(fam):
                raise ParameterError("feasible family is not downward closed")
            if any((1 << i) not in fam for i in range(self.n)):
                raise ParameterError("feasible family must contain every singleton")
        if self.kind == "xos":
            if self.J is None or self.J < 1:
                raise ParameterError("xos needs a positive clause count J")
        for i, d in enumerate(self.items):
            for x, _ in d.support:
                if self.kind == "xos":
                    if not isinstance(x, tuple) or len(x) != self.J:
                        raise ParameterError(f"item {i}: xos info must be a {self.J}-vector")
                elif isinstance(x, tuple):
                    raise ParameterError(f"item {i}: scalar info expected for {self.kind}")

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def support_size(self) -> int:
        out = 1
        for d in self.items:
            out *= len(d)
        return out

    def with_items(self, items: Sequence[PrivateInfoDist]) -> "ValuationSpec":
        return ValuationSpec(self.n, self.kind, tuple(items), self.k, self.feasible, self.J)


@dataclass(frozen=True)
class Valuation:
    """A set function on [n] materialized as a table of length 2**n."""

    n: int
    table: Tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.table) != 1 << self.n:
            raise ParameterError("table length must be 2**n")

    def __call__(self, mask: int) -> Fraction:
        return self.table[mask]


@dataclass(frozen=True)
class TypeEntry:
    prob: Fraction
    table: Tuple[Fraction, ...]
    info: Optional[tuple] = None


@dataclass(frozen=True)
class TypeSpace:
    """Explicit finite distribution over valuation tables."""

    n: int
    entries: Tuple[TypeEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ParameterError("empty type space")
        size = 1 << self.n
        total = ZERO
        for e in self.entries:
            if e.prob <= 0:
                raise ParameterError("type probabilities must be positive")
            if len(e.table) != size:
                raise ParameterError("table length must be 2**n")
            if e.table[0] != 0:
                raise ParameterError("v(empty set) must be 0")
            total += e.prob
        if total != 1:
            raise ParameterError(f"type probabilities sum to {total}, not 1")

    @classmethod
    def of(cls, n: int, pairs: Iterable) -> "TypeSpace":
        """Build from (prob, table) or (prob, table, info) tuples."""
        entries = []
        for row in pairs:
            prob, table = row[0], row[1]
            info = row[2] if len(row) > 2 else None
            entries.append(TypeEntry(Fraction(prob), tuple(Fraction(v) for v in table), info))
        return cls(n, tuple(entries))

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def __len__(self):
        return len(self.entries)

    def grand_bundle_dist(self) -> OneDimDist:
        return OneDimDist.of((e.table[self.full], e.prob) for e in self.entries)

    def val(self) -> Fraction:
        return sum((e.prob * e.table[self.full] for e in self.entries), ZERO)

    def scaled(self, c) -> "TypeSpace":
        c = Fraction(c)
        return TypeSpace(self.n, tuple(
            TypeEntry(e.prob, tuple(c * v for v in e.table), e.info) for e in self.entries))

    def merged(self) -> "TypeSpace":
        """Merge entries with identical tables (info dropped)."""
        acc: dict = {}
        for e in self.entries:
            acc[e.table] = acc.get(e.table, ZERO) + e.prob
        return TypeSpace(self.n, tuple(TypeEntry(p, t) for t, p in acc.items()))


# ---------------------------------------------------------------- evaluation

def _check_info(spec: ValuationSpec, info: Sequence[Info]):
    if len(info) != spec.n:
        raise ParameterError(f"info vector has arity {len(info)}, expected {spec.n}")


def evaluate(spec: ValuationSpec, info: Sequence[Info], S: int) -> Fraction:
    """V({x_i}_{i in S}, S) under the spec's valuation class."""
    _check_info(spec, info)
    if S & ~spec.full:
        raise ParameterError("subset mentions items outside [n]")
    members = items_of(S)
    if not members:
        return ZERO
    kind = spec.kind
    if kind == "additive":
        return sum((info[i] for i in members), ZERO)
    if kind == "kdemand":
        vals = sorted((info[i] for i in members), reverse=True)
        return sum(vals[: spec.k], ZERO)
    if kind == "downward_closed":
        best = ZERO
        for T in spec.feasible:
            if T & ~S == 0:
                s = sum((info[i] for i in items_of(T)), ZERO)
                if s > best:
                    best = s
        return best
    # xos
    return max(sum((info[i][j] for i in members), ZERO) for j in range(spec.J))


def valuation(spec: ValuationSpec, info: Sequence[Info]) -> Valuation:
    return Valuation(spec.n, tuple(evaluate(spec, info, S) for S in range(1 << spec.n)))


def _tables_for(spec: ValuationSpec, info) -> tuple:
    return valuation(spec, info).table


def single_item_dist(obj: Union[ValuationSpec, TypeSpace], i: int) -> OneDimDist:
    """Distribution of v({i})."""
    if not 0 <= i < obj.n:
        raise ParameterError(f"item index {i} out of range")
    if isinstance(obj, TypeSpace):
        return OneDimDist.of((e.table[1 << i], e.prob) for e in obj.entries)
    d = obj.items[i]
    if obj.kind == "xos":
        return OneDimDist.of((max(x), p) for x, p in d.support)
    return OneDimDist.of(d.support)


def grand_bundle_dist(obj: Union[ValuationSpec, TypeSpace], caps: Caps = DEFAULT_CAPS) -> OneDimDist:
    if isinstance(obj, ValuationSpec):
        obj = enumerate_type_space(obj, caps)
    return obj.grand_bundle_dist()


# ---------------------------------------------------------------- demand

def demand_set(v: Valuation, prices: Sequence, caps: Caps = DEFAULT_CAPS) -> Tuple[int, Fraction]:
    """Utility-maximizing set under item prices.

    Ties go to the higher payment, then to the lexicographically smallest set.
    """
    if v.n > caps.enum_items:
        raise ResourceError(f"demand enumeration over {v.n} items exceeds cap {caps.enum_items}",
                            size=v.n, cap=caps.enum_items)
    if len(prices) != v.n:
        raise ParameterError("one price per item expected")
    prices = [Fraction(p) for p in prices]
    if any(p < 0 for p in prices):
        raise ParameterError("prices must be nonnegative")
    pay = [ZERO] * (1 << v.n)
    for S in range(1, 1 << v.n):
        low = S & -S
        pay[S] = pay[S ^ low] + prices[low.bit_length() - 1]
    best = None
    best_key = None
    for S in range(1 << v.n):
        key = (v.table[S] - pay[S], pay[S])
        if best is None or key > best_key or (key == best_key and lex_key(S) < lex_key(best)):
            best, best_key = S, key
    return best, pay[best]


# ---------------------------------------------------------------- axioms

@dataclass
class AxiomReport:
    ok: bool
    checked: int
    violation: Optional[str] = None
    details: dict = field(default_factory=dict)


def _table_violation(n: int, table) -> Optional[str]:
    if table[0] != 0:
        return f"v(empty) = {table[0]} != 0"
    size = 1 << n
    for S in range(size):
        if table[S] < 0:
            return f"negative value v({items_of(S)}) = {table[S]}"
        for T in range(size):
            U = S | T
            if table[S] > table[U]:
                return f"monotonicity: v({items_of(S)})={table[S]} > v({items_of(U)})={table[U]}"
            if table[U] > table[S] + table[T]:
                return (f"subadditivity: v({items_of(U)})={table[U]} > "
                        f"v({items_of(S)})+v({items_of(T)})={table[S] + table[T]}")
    return None


def check_axioms(obj: Union[ValuationSpec, TypeSpace], caps: Caps = DEFAULT_CAPS) -> AxiomReport:
    """Exhaustively check v(empty)=0, monotonicity, subadditivity and no externalities."""
    ts = enumerate_type_space(obj, caps) if isinstance(obj, ValuationSpec) else obj
    if ts.n > caps.enum_items:
        raise ResourceError(f"{ts.n} items exceeds cap", size=ts.n, cap=caps.enum_items)
    size = 1 << ts.n
    work = len(ts) * size * size
    with_info = [e for e in ts.entries if e.info is not None]
    work += len(with_info) ** 2 * size
    if work > caps.pair_checks:
        raise ResourceError(f"axiom check needs {work} comparisons", size=work, cap=caps.pair_checks)
    checked = 0
    for idx, e in enumerate(ts.entries):
        msg = _table_violation(ts.n, e.table)
        checked += size * size
        if msg:
            return AxiomReport(False, checked, f"type {idx}: {msg}")
    # no externalities: v(S) may depend only on info of items in S
    for a, ea in enumerate(with_info):
        for eb in with_info[a + 1:]:
            agree = mask_of(i for i in range(ts.n) if ea.info[i] == eb.info[i])
            sub = agree
            while True:
                checked += 1
                if ea.table[sub] != eb.table[sub]:
                    return AxiomReport(False, checked,
                                       f"externality: infos {ea.info} and {eb.info} agree on "
                                       f"{items_of(sub)} but values differ")
                if sub == 0:
                    break
                sub = (sub - 1) & agree
    return AxiomReport(True, checked)


def require_axioms(obj, caps: Caps = DEFAULT_CAPS):
    rep = check_axioms(obj, caps)
    if not rep.ok:
        raise AxiomViolation(rep.violation)
    return rep


# ---------------------------------------------------------------- restriction

def _restrict_table(table, A_items) -> tuple:
    return tuple(table[mask_of(A_items[j] for j in items_of(loc))]
                 for loc in range(1 << len(A_items)))


def restrict(obj: Union[ValuationSpec, TypeSpace], A: int):
    """Restrict to the items in mask A, re-indexed 0..|A|-1 in increasing order."""
    if A & ~obj.full:
        raise ParameterError("restriction set mentions items outside [n]")
    A_items = items_of(A)
    if isinstance(obj, TypeSpace):
        return TypeSpace(len(A_items), tuple(
            TypeEntry(e.prob, _restrict_table(e.table, A_items),
                      None if e.info is None else tuple(e.info[i] for i in A_items))
            for e in obj.entries))
    m = len(A_items)
    items = tuple(obj.items[i] for i in A_items)
    if obj.kind == "kdemand":
        return ValuationSpec(m, "kdemand", items, k=max(1, min(obj.k, m)))
    if obj.kind == "downward_closed":
        local = {A_items[j]: j for j in range(m)}
        fam = frozenset(mask_of(local[i] for i in items_of(F)) for F in obj.feasible if F & ~A == 0)
        return ValuationSpec(m, "downward_closed", items, feasible=fam)
    if obj.kind == "xos":
        return ValuationSpec(m, "xos", items, J=obj.J)
    return ValuationSpec(m, "additive", items)


# ---------------------------------------------------------------- enumeration

def type_space_cells(spec: ValuationSpec) -> int:
    return spec.support_size() * (1 << spec.n)


def enumerate_type_space(spec: ValuationSpec, caps: Caps = DEFAULT_CAPS) -> TypeSpace:
    """Materialize the product support as an explicit TypeSpace (info kept per entry)."""
    cells = type_space_cells(spec)
    if cells > caps.lp_cells:
        raise ResourceError(f"type space has {cells} cells, cap is {caps.lp_cells}",
                            size=cells, cap=caps.lp_cells)
    entries = []
    for combo in itertools.product(*(d.support for d in spec.items)):
        info = tuple(x for x, _ in combo)
        prob = Fraction(1)
        for _, p in combo:
            prob *= p
        entries.append(TypeEntry(prob, _tables_for(spec, info), info))
    return TypeSpace(spec.n, tuple(entries))
