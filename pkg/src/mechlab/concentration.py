"""Lipschitz constants, grand-bundle medians and the subadditive tail bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Union

import numpy as np

from .config import DEFAULT_CAPS, Caps
from .errors import InvariantViolation, ParameterError, ResourceError
from .rational import Interval, LN2, fmt, power, verdict
from .simple_mech import brev
from .valuation import (TypeSpace, ValuationSpec, enumerate_type_space, evaluate, items_of,
                        popcount, single_item_dist, type_space_cells)

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)

SpecLike = Union[ValuationSpec, TypeSpace]


@dataclass(frozen=True)
class ConcentrationParams:
    a: Fraction
    c: Fraction
    q: Fraction
    k: Fraction

    def __post_init__(self):
        if self.a < 0 or self.c < 0:
            raise ParameterError("a and c must be nonnegative")
        if self.q <= 0 or self.k < 0:
            raise ParameterError("q must be positive and k nonnegative")

    @classmethod
    def of(cls, a, c, q, k) -> "ConcentrationParams":
        return cls(Fraction(a), Fraction(c), Fraction(q), Fraction(k))

    @property
    def threshold(self) -> Fraction:
        return (self.q + 1) * self.a + self.k * self.c


def lipschitz_constant(obj: SpecLike, caps: Caps = DEFAULT_CAPS, check: bool = True) -> Fraction:
    """Largest singleton value; optionally verify the Lipschitz condition exhaustively.

    Entries of a TypeSpace without info are treated as differing on every item.
    """
    ts = enumerate_type_space(obj, caps) if isinstance(obj, ValuationSpec) else obj
    n = ts.n
    c = max((e.table[1 << i] for e in ts.entries for i in range(n)), default=ZERO)
    if not check:
        return c
    size = 1 << n
    work = len(ts) ** 2 * size * size
    if work > caps.pair_checks:
        raise ResourceError(f"Lipschitz check needs {work} comparisons", size=work, cap=caps.pair_checks)
    pop = [popcount(S) for S in range(size)]
    for a, ex in enumerate(ts.entries):
        for b, ey in enumerate(ts.entries):
            if ex.info is not None and ey.info is not None:
                differ = sum(1 << i for i in range(n) if ex.info[i] != ey.info[i])
            else:
                differ = 0 if a == b else (1 << n) - 1
            for S in range(size):
                vx = ex.table[S]
                for T in range(size):
                    inter = S & T
                    dist = pop[S | T] - pop[inter] + pop[inter & differ]
                    if abs(vx - ey.table[T]) > c * dist:
                        raise InvariantViolation(
                            f"not {fmt(c)}-Lipschitz: |v_{a}({items_of(S)}) - v_{b}({items_of(T)})| "
                            f"= {fmt(abs(vx - ey.table[T]))} > {fmt(c * dist)}")
    return c


def median_grand_bundle(obj: SpecLike, caps: Caps = DEFAULT_CAPS) -> Fraction:
    """Smallest support value a of v([n]) with P[v([n]) <= a] >= 1/2."""
    ts = enumerate_type_space(obj, caps) if isinstance(obj, ValuationSpec) else obj
    acc = ZERO
    for v, p in ts.grand_bundle_dist().points:
        acc += p
        if acc >= HALF:
            return v
    raise AssertionError("unreachable")  # pragma: no cover


def schechtman_bound(params: ConcentrationParams, p_le_a=None, median_form: bool = False):
    """P[v([n]) <= a]^(-q) q^(-k), or 2^q q^(-k) when a is a median.

    Returns a Fraction when the value is rational by construction, an
    Interval otherwise, and None for +infinity.
    """
    q, k = params.q, params.k
    if median_form:
        if q <= 1:
            raise ParameterError("the median form needs q > 1")
        lead = power(2, q) if q.denominator != 1 else Interval.exact(Fraction(2) ** int(q))
    else:
        if p_le_a is None:
            raise ParameterError("P[v([n]) <= a] is required outside the median form")
        p_le_a = Fraction(p_le_a)
        if p_le_a == 0:
            return None
        lead = (Interval.exact(1 / p_le_a ** int(q)) if q.denominator == 1
                else power(1 / p_le_a, q))
    if k.denominator == 1 and q.denominator == 1:
        tail = Interval.exact(Fraction(1) / q ** int(k))
    else:
        tail = power(1 / q, k)
    out = lead * tail
    return out.lo if out.lo == out.hi else out


@dataclass
class ConcentrationRow:
    k: int
    threshold: Fraction
    prob: Fraction
    bound: Fraction
    passed: bool
    ci_high: Optional[float] = None

    def row(self) -> dict:
        out = {"k": self.k, "threshold": fmt(self.threshold), "prob": fmt(self.prob),
               "bound": fmt(self.bound), "pass": self.passed}
        if self.ci_high is not None:
            out["ci_high"] = repr(self.ci_high)
        return out


@dataclass
class ConcentrationReport:
    a: Fraction
    c: Fraction
    method: str                     # "exact" or "statistical"
    rows: List[ConcentrationRow] = field(default_factory=list)
    mean: Optional[Fraction] = None
    mean_bound: Optional[Interval] = None
    mean_verdict: str = "pass"
    brev_half_median: bool = True

    @property
    def ok(self) -> bool:
        return (all(r.passed for r in self.rows) and self.mean_verdict == "pass"
                and self.brev_half_median)

    def to_json(self) -> dict:
        return {"a": fmt(self.a), "c": fmt(self.c), "method": self.method,
                "rows": [r.row() for r in self.rows],
                "mean": None if self.mean is None else fmt(self.mean),
                "mean_bound_lo": None if self.mean_bound is None else fmt(self.mean_bound.lo),
                "mean_verdict": self.mean_verdict,
                "brev_at_least_half_median": self.brev_half_median, "pass": self.ok}


def wilson_interval(hits: int, n: int, z: float = 3.2905267314918945) -> tuple:
    """Wilson score interval (default z for two-sided 0.001)."""
    if n == 0:
        return 0.0, 1.0
    ph = hits / n
    denom = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def sample_grand_bundle(spec: ValuationSpec, samples: int, seed: int) -> List[Fraction]:
    """Seeded draws of v([n]); one child stream per item."""
    ss = np.random.SeedSequence(seed)
    streams = [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(spec.n)]
    picks = []
    for d, g in zip(spec.items, streams):
        probs = np.array([float(p) for _, p in d.support])
        picks.append(g.choice(len(d.support), size=samples, p=probs / probs.sum()))
    cache = {}
    out = []
    for row in zip(*picks):
        key = tuple(int(x) for x in row)
        v = cache.get(key)
        if v is None:
            info = [spec.items[i].support[j][0] for i, j in enumerate(key)]
            v = cache[key] = evaluate(spec, info, spec.full)
        out.append(v)
    return out


def verify_concentration(obj: SpecLike, ks: Sequence[int] = range(11), caps: Caps = DEFAULT_CAPS,
                         samples: int = 20000, seed: Optional[int] = None) -> ConcentrationReport:
    """Check P[v([n]) >= 3a + k c] <= 4 2^(-k) and E[v([n])] <= 3a + 4c/ln 2."""
    exact = not (isinstance(obj, ValuationSpec) and type_space_cells(obj) > caps.lp_cells)
    if exact:
        ts = enumerate_type_space(obj, caps) if isinstance(obj, ValuationSpec) else obj
        c = lipschitz_constant(ts, caps, check=len(ts) ** 2 * 4 ** ts.n <= caps.pair_checks)
        a = median_grand_bundle(ts)
        dist = ts.grand_bundle_dist()
        rep = ConcentrationReport(a, c, "exact")
        for k in ks:
            thr = 3 * a + k * c
            prob = dist.prob_ge(thr)
            bound = 4 * Fraction(1, 2 ** k)
            rep.rows.append(ConcentrationRow(k, thr, prob, bound, prob <= bound))
        rep.mean = dist.mean()
        rep.mean_bound = 3 * a + 4 * c / LN2
        rep.mean_verdict = verdict(rep.mean, rep.mean_bound)
        rep.brev_half_median = brev(ts) >= a / 2
        return rep
    if seed is None:
        raise ParameterError("a seed is required for the statistical fallback")
    spec = obj
    c = max(single_item_dist(spec, i).values[-1] for i in range(spec.n))
    draws = sorted(sample_grand_bundle(spec, samples, seed))
    a = draws[(len(draws) - 1) // 2]
    rep = ConcentrationReport(a, c, "statistical")
    for k in ks:
        thr = 3 * a + k * c
        hits = sum(1 for v in draws if v >= thr)
        bound = 4 * Fraction(1, 2 ** k)
        hi = wilson_interval(hits, len(draws))[1]
        rep.rows.append(ConcentrationRow(k, thr, Fraction(hits, len(draws)), bound,
                                         hits / len(draws) <= float(bound), ci_high=hi))
    rep.mean = sum(draws, ZERO) / len(draws)
    rep.mean_bound = 3 * a + 4 * c / LN2
    rep.mean_verdict = verdict(rep.mean, rep.mean_bound)
    return rep
