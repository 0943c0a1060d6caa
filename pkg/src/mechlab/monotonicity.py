"""Coupled dominance pairs and approximate revenue monotonicity."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from .config import DEFAULT_CAPS, Caps
from .core_tail import compute_cutoff
from .errors import DominanceError, ParameterError
from .optimal_rev import exact_rev
from .rational import fmt
from .simple_mech import brev, srev_star
from .valuation import (TypeEntry, TypeSpace, ValuationSpec, enumerate_type_space, items_of,
                        popcount)

ZERO = Fraction(0)
TRANSFORMS = ("identity", "shift", "scale", "clamp")


@dataclass(frozen=True)
class Transform:
    """Deterministic per-item map on private info, applied coordinatewise to XOS vectors.

    shift: x + c, scale: c * x, clamp: max(x, c), identity: x.
    """

    kind: str
    amount: Fraction = ZERO

    def __post_init__(self):
        if self.kind not in TRANSFORMS:
            raise ParameterError(f"unknown transform {self.kind!r}")

    def _one(self, x: Fraction) -> Fraction:
        if self.kind == "shift":
            return x + self.amount
        if self.kind == "scale":
            return x * self.amount
        if self.kind == "clamp":
            return max(x, self.amount)
        return x

    def __call__(self, x):
        if isinstance(x, tuple):
            return tuple(self._one(v) for v in x)
        return self._one(x)

    def to_json(self) -> dict:
        return {"kind": self.kind, "amount": fmt(self.amount)}


IDENTITY = Transform("identity")


@dataclass(frozen=True)
class CoupledPair:
    """D and D+ coupled through x -> T(x), item by item."""

    base: ValuationSpec
    transforms: Tuple[Transform, ...]

    def __post_init__(self):
        if len(self.transforms) != self.base.n:
            raise ParameterError("one transform per item expected")

    @classmethod
    def uniform(cls, base: ValuationSpec, t: Transform) -> "CoupledPair":
        return cls(base, tuple(t for _ in range(base.n)))

    @property
    def plus(self) -> ValuationSpec:
        return self.base.with_items([d.map(t) for d, t in zip(self.base.items, self.transforms)])

    def spaces(self, caps: Caps = DEFAULT_CAPS) -> Tuple[TypeSpace, TypeSpace]:
        """Aligned type spaces: entry k of D+ is the image of entry k of D."""
        D = enumerate_type_space(self.base, caps)
        from .valuation import valuation
        plus_spec = self.plus
        entries = []
        for e in D.entries:
            info = tuple(t(x) for t, x in zip(self.transforms, e.info))
            entries.append(TypeEntry(e.prob, valuation(plus_spec, info).table, info))
        return D, TypeSpace(D.n, tuple(entries))

    @property
    def single_dimensional(self) -> bool:
        return False


@dataclass(frozen=True)
class TablePair:
    """D and an explicit dominating D+ aligned entry by entry."""

    base: ValuationSpec
    D: TypeSpace
    Dplus: TypeSpace
    single_dimensional: bool = False

    def spaces(self, caps: Caps = DEFAULT_CAPS) -> Tuple[TypeSpace, TypeSpace]:
        return self.D, self.Dplus


Pair = Union[CoupledPair, TablePair]


@dataclass
class DominanceReport:
    ok: bool
    delta_bar: Fraction
    checked: int


def check_dominance(pair: Pair, caps: Caps = DEFAULT_CAPS) -> DominanceReport:
    """Verify v+(S) >= v(S) on every coupled draw and set; return E[max_S delta(S)]."""
    D, P = pair.spaces(caps)
    if len(D.entries) != len(P.entries):
        raise ParameterError("coupled spaces must be aligned")
    dbar = ZERO
    checked = 0
    for e, f in zip(D.entries, P.entries):
        best = ZERO
        for S in range(1 << D.n):
            checked += 1
            d = f.table[S] - e.table[S]
            if d < 0:
                raise DominanceError(f"v+({items_of(S)}) = {fmt(f.table[S])} < v({items_of(S)}) = "
                                     f"{fmt(e.table[S])} at info {e.info}")
            best = max(best, d)
        dbar += e.prob * best
    return DominanceReport(True, dbar, checked)


def single_dim_dominator(spec: ValuationSpec, caps: Caps = DEFAULT_CAPS) -> TablePair:
    """v+(S) = max_i v({i}) * |S| on each type, coupled to the type itself."""
    D = enumerate_type_space(spec, caps)
    entries = []
    for e in D.entries:
        top = max((e.table[1 << i] for i in range(D.n)), default=ZERO)
        entries.append(TypeEntry(e.prob, tuple(top * popcount(S) for S in range(1 << D.n)), e.info))
    pair = TablePair(spec, D, TypeSpace(D.n, tuple(entries)), single_dimensional=True)
    check_dominance(pair, caps)
    return pair


def monotonicity_gap(pair: Pair, caps: Caps = DEFAULT_CAPS):
    """Rev(D) / Rev(D+); math.inf when only the denominator vanishes."""
    D, P = pair.spaces(caps)
    r = exact_rev(D, caps)[0]
    rp = exact_rev(P, caps)[0]
    if rp == 0:
        return Fraction(1) if r == 0 else math.inf
    return r / rp


@dataclass
class MonoRow:
    pair_id: str
    rev: Fraction
    rev_plus: Fraction
    gap: Union[Fraction, float]
    passed: bool
    brev_ok: bool
    srev_star_ok: bool
    single_dim_ok: Optional[bool] = None

    def row(self, alpha) -> dict:
        gap = "inf" if self.gap == math.inf else fmt(self.gap)
        out = {"pair": self.pair_id, "rev": fmt(self.rev), "rev_plus": fmt(self.rev_plus),
               "gap": gap, f"pass@{fmt(alpha)}": self.passed,
               "brev_monotone": self.brev_ok, "srev_star_monotone": self.srev_star_ok}
        if self.single_dim_ok is not None:
            out["rev_plus_equals_brev_plus"] = self.single_dim_ok
        return out


@dataclass
class MonoReport:
    alpha: Fraction
    rows: List[MonoRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed and r.brev_ok and r.srev_star_ok and r.single_dim_ok is not False
                   for r in self.rows)

    @property
    def max_gap(self):
        return max((r.gap for r in self.rows), default=Fraction(1))

    def to_json(self) -> dict:
        return {"alpha": fmt(self.alpha), "rows": [r.row(self.alpha) for r in self.rows],
                "pass": self.ok}


def verify_alpha_monotone(pairs: Sequence[Tuple[str, Pair]], alpha, caps: Caps = DEFAULT_CAPS) -> MonoReport:
    alpha = Fraction(alpha)
    rep = MonoReport(alpha)
    for pid, pair in pairs:
        check_dominance(pair, caps)
        D, P = pair.spaces(caps)
        r = exact_rev(D, caps)[0]
        rp = exact_rev(P, caps)[0]
        gap = (Fraction(1) if r == 0 else math.inf) if rp == 0 else r / rp
        bp = brev(P)
        try:
            qbar = list(compute_cutoff(pair.base).p)
        except Exception:           # degenerate base: compare at q = 0
            qbar = [ZERO] * D.n
        s_ok = srev_star(P, qbar) >= srev_star(D, qbar)
        single = (rp == bp) if pair.single_dimensional else None
        rep.rows.append(MonoRow(pid, r, rp, gap, alpha * rp >= r, bp >= brev(D), s_ok, single))
    return rep


def converse_bound(alpha, srev, brev_value) -> Fraction:
    """alpha ((37 alpha + 24) SRev + 6 BRev), reported alongside measured gaps."""
    alpha = Fraction(alpha)
    return alpha * ((37 * alpha + 24) * Fraction(srev) + 6 * Fraction(brev_value))


def random_pair(rng: random.Random, n: int = 2, kind: str = "additive", support: int = 2,
                vmax: int = 6) -> CoupledPair:
    """A random spec with a random shift/scale/clamp coupling."""
    from .generate import random_spec
    spec = random_spec(rng, n, kind, support, vmax)
    ts = []
    for _ in range(n):
        k = rng.choice(("shift", "scale", "clamp"))
        if k == "shift":
            ts.append(Transform("shift", Fraction(rng.randint(0, 3))))
        elif k == "scale":
            ts.append(Transform("scale", Fraction(rng.randint(2, 6), 2)))
        else:
            ts.append(Transform("clamp", Fraction(rng.randint(0, vmax))))
    return CoupledPair(spec, tuple(ts))


def search_nonmonotone(seed: int, trials: int = 200, caps: Caps = DEFAULT_CAPS) -> Optional[CoupledPair]:
    """Best-effort search for a coupled pair with Rev(D) > Rev(D+)."""
    rng = random.Random(seed)
    for _ in range(trials):
        kind = rng.choice(("additive", "kdemand", "xos", "downward_closed"))
        pair = random_pair(rng, 2, kind, 2)
        D, P = pair.spaces(caps)
        if exact_rev(D, caps)[0] > exact_rev(P, caps)[0]:
            return pair
    return None
