"""Core/tail cutoff, conditioning on the tail set, and the revenue inequality chain."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import sympy

from .config import DEFAULT_CAPS, Caps
from .distributions import PrivateInfoDist
from .errors import DegenerateInstanceError, EmptyEventError, ParameterError
from .optimal_rev import exact_rev
from .rational import Interval, LN2, fmt, ln, log2, power, verdict
from .simple_mech import brev, myerson_one_dim, srev_star
from .valuation import (TypeEntry, TypeSpace, ValuationSpec, enumerate_type_space, items_of,
                        restrict, single_item_dist)

ZERO = Fraction(0)
ONE = Fraction(1)
HALF = Fraction(1, 2)
MODES = ("exact_half", "threshold_only")
BISECT_BITS = 40


@dataclass(frozen=True)
class CutoffReport:
    t: Fraction
    theta: Fraction
    p: Tuple[Fraction, ...]
    p_empty: Fraction
    mode: str
    exact: bool          # p_empty == 1/2 exactly

    def to_json(self) -> dict:
        return {"t": fmt(self.t), "theta": fmt(self.theta), "p": [fmt(x) for x in self.p],
                "p_empty": fmt(self.p_empty), "mode": self.mode, "exact_half": self.exact}


@dataclass
class Entry:
    name: str
    lhs: Fraction
    rhs: Union[Fraction, Interval, None]     # None stands for +infinity
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def slack(self) -> Optional[Fraction]:
        """Certified lower bound on rhs - lhs (None when rhs is infinite)."""
        if self.rhs is None:
            return None
        lo = self.rhs.lo if isinstance(self.rhs, Interval) else self.rhs
        return lo - self.lhs

    def row(self) -> dict:
        if self.rhs is None:
            rhs = "inf"
        elif isinstance(self.rhs, Interval):
            rhs = fmt(self.rhs.lo) if self.rhs.lo == self.rhs.hi else f"[{fmt(self.rhs.lo)},{fmt(self.rhs.hi)}]"
        else:
            rhs = fmt(self.rhs)
        slack = self.slack
        return {"name": self.name, "lhs": fmt(self.lhs), "rhs": rhs,
                "slack": "inf" if slack is None else fmt(slack), "pass": self.passed,
                "verdict": self.verdict}


def make_entry(name: str, lhs, rhs) -> Entry:
    lhs = Fraction(lhs)
    if rhs is None:
        return Entry(name, lhs, None, "pass")
    return Entry(name, lhs, rhs, verdict(lhs, rhs))


@dataclass
class DecompositionReport:
    cutoff: CutoffReport
    epsilon: Fraction
    rev: Fraction
    val_core: Fraction
    tail_contribution: Fraction
    srev_star: Fraction
    brev: Fraction
    brev_core: Fraction
    entries: List[Entry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_json(self) -> dict:
        return {"cutoff": self.cutoff.to_json(), "epsilon": fmt(self.epsilon),
                "rev": fmt(self.rev), "val_core": fmt(self.val_core),
                "tail_contribution": fmt(self.tail_contribution),
                "srev_star": fmt(self.srev_star), "brev": fmt(self.brev),
                "brev_core": fmt(self.brev_core),
                "entries": [e.row() for e in self.entries], "pass": self.ok}


# ---------------------------------------------------------------- cutoff

def _singleton(spec: ValuationSpec, x) -> Fraction:
    return max(x) if spec.kind == "xos" else x


def _p_empty(a, b, theta) -> Fraction:
    out = ONE
    for ai, bi in zip(a, b):
        out *= 1 - ai - theta * bi
    return out


def _solve_theta(a, b) -> Tuple[Fraction, bool]:
    """theta in (0, 1] with prod(1 - a_i - theta b_i) = 1/2, exact when rational."""
    th = sympy.Symbol("th")
    poly = sympy.Poly(sympy.prod([1 - sympy.Rational(ai.numerator, ai.denominator)
                                  - th * sympy.Rational(bi.numerator, bi.denominator)
                                  for ai, bi in zip(a, b)]) - sympy.Rational(1, 2), th, domain="QQ")
    for r in sorted(poly.ground_roots()):
        r = Fraction(int(r.p), int(r.q))
        if 0 < r <= 1 and _p_empty(a, b, r) == HALF:
            return r, True
    lo, hi = ZERO, ONE
    # invariant: p_empty(lo) >= 1/2 > p_empty(hi)
    for _ in range(BISECT_BITS):
        mid = (lo + hi) / 2
        if _p_empty(a, b, mid) >= HALF:
            lo = mid
        else:
            hi = mid
    return lo, False


def compute_cutoff(spec: ValuationSpec, mode: str = "exact_half") -> CutoffReport:
    if mode not in MODES:
        raise ParameterError(f"unknown cutoff mode {mode!r}")
    dists = [single_item_dist(spec, i) for i in range(spec.n)]
    if spec.n == 0 or all(d.values[-1] == 0 for d in dists):
        raise DegenerateInstanceError("every singleton value is zero")
    grid = sorted({v for d in dists for v in d.values})
    for t in grid:
        a = [d.prob_gt(t) for d in dists]
        b = [d.prob_eq(t) for d in dists]
        pe0 = _p_empty(a, b, ZERO)
        if mode == "threshold_only":
            if pe0 >= HALF:
                return CutoffReport(t, ZERO, tuple(a), pe0, mode, pe0 == HALF)
            continue
        if pe0 > HALF:
            theta, _ = _solve_theta(a, b)
            p = tuple(ai + theta * bi for ai, bi in zip(a, b))
            pe = _p_empty(a, b, theta)
            return CutoffReport(t, theta, p, pe, mode, pe == HALF)
    raise AssertionError("unreachable: the top support value always qualifies")  # pragma: no cover


def subset_prob(report: CutoffReport, A: int) -> Fraction:
    out = ONE
    for i, pi in enumerate(report.p):
        out *= pi if (A >> i) & 1 else 1 - pi
    return out


# ---------------------------------------------------------------- conditioning

def _branch(spec: ValuationSpec, report: CutoffReport, i: int, tail: bool) -> PrivateInfoDist:
    t, theta = report.t, report.theta
    pairs = []
    for x, p in spec.items[i].support:
        v = _singleton(spec, x)
        if v > t:
            w = p if tail else ZERO
        elif v == t:
            w = p * (theta if tail else 1 - theta)
        else:
            w = ZERO if tail else p
        if w:
            pairs.append((x, w))
    mass = sum((w for _, w in pairs), ZERO)
    if mass == 0:
        side = "tail" if tail else "core"
        raise EmptyEventError(f"item {i} has zero {side} probability")
    return PrivateInfoDist(tuple((x, w / mass) for x, w in pairs))


def condition_spec(spec: ValuationSpec, report: CutoffReport, A: int) -> ValuationSpec:
    """D conditioned on A being exactly the tail set (a product spec over all n items)."""
    if subset_prob(report, A) == 0:
        raise EmptyEventError(f"tail set {items_of(A)} has probability 0")
    return spec.with_items([_branch(spec, report, i, bool((A >> i) & 1)) for i in range(spec.n)])


def conditioned_spaces(spec: ValuationSpec, report: CutoffReport, A: int,
                       caps: Caps = DEFAULT_CAPS) -> Tuple[TypeSpace, TypeSpace]:
    """(D_A^T, D_A^C) as explicit type spaces."""
    DA = condition_spec(spec, report, A)
    tail = enumerate_type_space(restrict(DA, A), caps)
    core = enumerate_type_space(restrict(DA, spec.full & ~A), caps)
    return tail, core


def core_value(spec: ValuationSpec, report: CutoffReport, caps: Caps = DEFAULT_CAPS) -> Fraction:
    """Val(D_empty^C)."""
    return enumerate_type_space(condition_spec(spec, report, 0), caps).val()


def positive_subsets(report: CutoffReport) -> List[int]:
    n = len(report.p)
    return [A for A in range(1 << n) if subset_prob(report, A) > 0]


def tail_contribution(spec: ValuationSpec, report: CutoffReport, caps: Caps = DEFAULT_CAPS,
                      detail: Optional[Dict[int, Fraction]] = None) -> Fraction:
    """sum_A p_A Rev(D_A^T)."""
    total = ZERO
    for A in positive_subsets(report):
        if A == 0:
            continue
        ts, _ = conditioned_spaces(spec, report, A, caps)
        r = exact_rev(ts, caps)[0]
        if detail is not None:
            detail[A] = r
        total += subset_prob(report, A) * r
    return total


# ---------------------------------------------------------------- marginal mechanism

def verify_marginal(ts: TypeSpace, S: int, epsilon, caps: Caps = DEFAULT_CAPS) -> Entry:
    """Rev(D) <= (1/eps + 1/(1-eps)) Val(D_S) + 1/(1-eps) E[Rev(D_T | v_S)]."""
    eps = Fraction(epsilon)
    if not 0 < eps < 1:
        raise ParameterError("epsilon must lie strictly between 0 and 1")
    if S & ~ts.full:
        raise ParameterError("S mentions items outside [n]")
    T = ts.full & ~S
    rev = exact_rev(ts, caps)[0]
    val_S = sum((e.prob * e.table[S] for e in ts.entries), ZERO)
    DS = restrict(ts, S)
    DT = restrict(ts, T)
    groups: Dict[tuple, list] = {}
    for eS, eT in zip(DS.entries, DT.entries):
        groups.setdefault(eS.table, []).append(eT)
    cond = ZERO
    for members in groups.values():
        mass = sum((e.prob for e in members), ZERO)
        sub = TypeSpace(DT.n, tuple(TypeEntry(e.prob / mass, e.table) for e in members))
        cond += mass * exact_rev(sub, caps)[0]
    rhs = (1 / eps + 1 / (1 - eps)) * val_S + cond / (1 - eps)
    return make_entry(f"marginal_mechanism S={items_of(S)} eps={fmt(eps)}", rev, rhs)


# ---------------------------------------------------------------- the chain

CHAIN_NAMES = {
    "a": "(a) subdomain_stitching",
    "b": "(b) core_decomposition",
    "c": "(c) tail_threshold",
    "d": "(d) core_concentration",
    "e": "(e) weak_item_bound",
    "f": "(f) tail_bound",
    "g": "(g) main_bound",
}


def tail_factor(p_empty: Fraction) -> Interval:
    """(6/p)(1 + 7L + 6L^2 + L^3) with L = ln(1/p), as a certified interval."""
    L = ln(1 / Fraction(p_empty))
    return (6 / Interval.exact(p_empty)) * (1 + 7 * L + 6 * L ** 2 + L ** 3)


def weak_factor(n: int) -> Interval:
    """6 n^{log2 6}."""
    if n <= 1:
        return Interval.exact(6)
    return 6 * power(n, log2(6))


def verify_chain(spec: ValuationSpec, epsilon=HALF, mode: str = "exact_half",
                 caps: Caps = DEFAULT_CAPS) -> DecompositionReport:
    eps = Fraction(epsilon)
    if not 0 < eps < 1:
        raise ParameterError("epsilon must lie strictly between 0 and 1")
    report = compute_cutoff(spec, mode)
    n = spec.n
    D = enumerate_type_space(spec, caps)
    rev = exact_rev(D, caps)[0]

    stitched = ZERO
    tail = ZERO
    core_space = None
    for A in positive_subsets(report):
        pA = subset_prob(report, A)
        DA_spec = condition_spec(spec, report, A)
        DA = enumerate_type_space(DA_spec, caps)
        stitched += pA * exact_rev(DA, caps)[0]
        if A == 0:
            core_space = DA
        else:
            tail += pA * exact_rev(enumerate_type_space(restrict(DA_spec, A), caps), caps)[0]
    val_core = core_space.val() if core_space is not None else ZERO
    brev_core = brev(core_space) if core_space is not None else ZERO
    p_vec = list(report.p)
    sstar = srev_star(spec, p_vec)
    brev_d = brev(D)
    pe = report.p_empty
    t = report.t

    entries = [
        make_entry(CHAIN_NAMES["a"], rev, stitched),
        make_entry(CHAIN_NAMES["b"], rev, (1 / eps + 1 / (1 - eps)) * val_core + tail / (1 - eps)),
        make_entry(CHAIN_NAMES["c"], t * pe * (1 - pe), sstar),
        make_entry(CHAIN_NAMES["d"], val_core, 6 * brev_core + 4 * t / LN2),
        make_entry(CHAIN_NAMES["e"], rev, weak_factor(n) * sum(
            (myerson_one_dim(single_item_dist(spec, i))[1] for i in range(n)), ZERO)),
        make_entry(CHAIN_NAMES["f"], tail, tail_factor(pe) * sstar),
    ]
    if mode == "exact_half":
        entries.append(make_entry(CHAIN_NAMES["g"], rev, 314 * sstar + 24 * brev_d))
    else:
        # general-form constants, keeping t explicit since p_empty may be far from 1/2
        rhs = 24 * brev_d + 16 * t / LN2 + 2 * tail_factor(pe) * sstar
        entries.append(make_entry(CHAIN_NAMES["g"], rev, rhs))
    return DecompositionReport(report, eps, rev, val_core, tail, sstar, brev_d, brev_core, entries)
