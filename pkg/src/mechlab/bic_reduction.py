"""Replica-surrogate reduction from a BIC mechanism for D to one for a dominating D+.

Each bidder j gets r-1 replicas drawn from D_j+ and r surrogates drawn from
D_j. Replicas (plus the bidder) are matched to surrogates by a VCG
max-weight matching whose edge weights are interim utilities in the
discounted mechanism M^eps. Matched surrogates then play M^eps and the
bidder pays the VCG price plus the surrogate's payment.

The simulator aggregates identical types: a pool is a pair of count vectors
and the matching is a small transportation problem. The real bidder sits at
a uniformly random left position, so the surrogate selected for it is
distributed exactly as D_j.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .config import DEFAULT_CAPS, Caps
from .errors import InvariantViolation, ParameterError, PreconditionError, ResourceError
from .matching import transport_max, vcg_matching
from .monotonicity import CoupledPair, Pair, Transform, check_dominance
from .rational import as_fraction, fmt
from .valuation import TypeSpace, ValuationSpec, enumerate_type_space, lex_key

ZERO = Fraction(0)
ONE = Fraction(1)

Profile = Tuple[int, ...]
Outcome = Tuple[Tuple[Fraction, Tuple[int, ...]], ...]   # lottery of (prob, mask per bidder)


# ---------------------------------------------------------------- mechanisms

@dataclass
class DirectMechanism:
    """Tabular direct mechanism: profile -> allocation lottery and expected payments."""

    spaces: Tuple[TypeSpace, ...]
    outcomes: Dict[Profile, Outcome]
    payments: Dict[Profile, Tuple[Fraction, ...]]
    name: str = "mechanism"
    _interim: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.spaces = tuple(self.spaces)
        if not self.spaces:
            raise ParameterError("at least one bidder is required")
        if len({ts.n for ts in self.spaces}) != 1:
            raise ParameterError("all bidders must share the item set")
        for prof in self.profiles():
            out = self.outcomes.get(prof)
            pay = self.payments.get(prof)
            if out is None or pay is None or len(pay) != self.m:
                raise ParameterError(f"profile {prof} is missing or malformed")
            if sum((p for p, _ in out), ZERO) != 1 or any(p < 0 for p, _ in out):
                raise ParameterError(f"allocation lottery at {prof} is not a distribution")
            for _, masks in out:
                if len(masks) != self.m:
                    raise ParameterError(f"allocation at {prof} has the wrong arity")
                seen = 0
                for S in masks:
                    if S & seen or S & ~self.full:
                        raise InvariantViolation(f"infeasible allocation {masks} at {prof}")
                    seen |= S

    @property
    def m(self) -> int:
        return len(self.spaces)

    @property
    def n(self) -> int:
        return self.spaces[0].n

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def profiles(self):
        return itertools.product(*(range(len(ts)) for ts in self.spaces))

    def prob(self, prof: Profile) -> Fraction:
        out = ONE
        for ts, t in zip(self.spaces, prof):
            out *= ts.entries[t].prob
        return out

    def interim(self, j: int, t: int) -> Tuple[Dict[int, Fraction], Fraction]:
        """Allocation distribution and expected payment of bidder j reporting type t."""
        key = (j, t)
        hit = self._interim.get(key)
        if hit is not None:
            return hit
        alloc: Dict[int, Fraction] = {}
        pay = ZERO
        others = [range(len(ts)) if k != j else (t,) for k, ts in enumerate(self.spaces)]
        for prof in itertools.product(*others):
            w = self.prob(prof) / self.spaces[j].entries[t].prob
            pay += w * self.payments[prof][j]
            for p, masks in self.outcomes[prof]:
                alloc[masks[j]] = alloc.get(masks[j], ZERO) + w * p
        self._interim[key] = (alloc, pay)
        return alloc, pay

    def interim_utility(self, j: int, table: Sequence[Fraction], report: int) -> Fraction:
        alloc, pay = self.interim(j, report)
        return sum((p * table[S] for S, p in alloc.items()), ZERO) - pay

    def revenue(self) -> Fraction:
        return sum((self.prob(prof) * sum(self.payments[prof], ZERO) for prof in self.profiles()), ZERO)

    def to_json(self) -> dict:
        return {"name": self.name, "bidders": self.m, "items": self.n, "revenue": fmt(self.revenue())}


@dataclass
class MechanismCheck:
    bic: bool
    ir: bool
    min_gap: Fraction
    violation: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.bic and self.ir


def check_bic(M: DirectMechanism) -> MechanismCheck:
    """Exact interim BIC and IR by enumerating every opponent profile."""
    bic = ir = True
    min_gap = None
    violation = None
    for j, ts in enumerate(M.spaces):
        for t, e in enumerate(ts.entries):
            truth = M.interim_utility(j, e.table, t)
            if truth < 0 and ir:
                ir = False
                violation = violation or f"bidder {j} type {t}: interim utility {fmt(truth)} < 0"
            for s in range(len(ts)):
                if s == t:
                    continue
                gap = truth - M.interim_utility(j, e.table, s)
                min_gap = gap if min_gap is None else min(min_gap, gap)
                if gap < 0 and bic:
                    bic = False
                    violation = violation or f"bidder {j} type {t} gains {fmt(-gap)} reporting {s}"
    return MechanismCheck(bic, ir, ZERO if min_gap is None else min_gap, violation)


def discount_mechanism(M: DirectMechanism, epsilon) -> DirectMechanism:
    """Same allocations; every payment multiplied by (1 - epsilon)."""
    eps = as_fraction(epsilon)
    if not 0 <= eps <= 1:
        raise ParameterError("epsilon must lie in [0, 1]")
    keep = 1 - eps
    pays = {prof: tuple(keep * p for p in pay) for prof, pay in M.payments.items()}
    return DirectMechanism(M.spaces, M.outcomes, pays, name=f"{M.name}@{fmt(eps)}")


def _best_subset(table, avail: int, prices: Sequence[Fraction]) -> Tuple[int, Fraction]:
    """Utility-maximizing subset of the available items; ties to higher payment, then lex."""
    best, best_key = 0, (ZERO, ZERO)
    sub = avail
    while True:
        pay = sum((prices[i] for i in range(len(prices)) if sub >> i & 1), ZERO)
        key = (table[sub] - pay, pay)
        if key > best_key or (key == best_key and lex_key(sub) < lex_key(best)):
            best, best_key = sub, key
        if sub == 0:
            break
        sub = (sub - 1) & avail
    return best, best_key[1]


def serial_posted_price(spaces: Sequence[TypeSpace], prices: Sequence) -> DirectMechanism:
    """Bidders 0, 1, ... in turn buy a favourite set of the remaining items at fixed prices."""
    spaces = tuple(spaces)
    prices = [as_fraction(p) for p in prices]
    if len(prices) != spaces[0].n or any(p < 0 for p in prices):
        raise ParameterError("one nonnegative price per item expected")
    outcomes, payments = {}, {}
    full = (1 << spaces[0].n) - 1
    for prof in itertools.product(*(range(len(ts)) for ts in spaces)):
        avail = full
        masks, pays = [], []
        for ts, t in zip(spaces, prof):
            S, pay = _best_subset(ts.entries[t].table, avail, prices)
            masks.append(S)
            pays.append(pay)
            avail &= ~S
        outcomes[prof] = ((ONE, tuple(masks)),)
        payments[prof] = tuple(pays)
    return DirectMechanism(spaces, outcomes, payments, name="serial_posted_price")


def bundle_random_bidder(spaces: Sequence[TypeSpace], reserve) -> DirectMechanism:
    """A uniformly random bidder is offered the grand bundle at the reserve price."""
    spaces = tuple(spaces)
    reserve = as_fraction(reserve)
    if reserve < 0:
        raise ParameterError("reserve must be nonnegative")
    m = len(spaces)
    full = (1 << spaces[0].n) - 1
    outcomes, payments = {}, {}
    for prof in itertools.product(*(range(len(ts)) for ts in spaces)):
        out = {}
        pays = [ZERO] * m
        for j, (ts, t) in enumerate(zip(spaces, prof)):
            masks = [0] * m
            if ts.entries[t].table[full] >= reserve:
                masks[j] = full
                pays[j] = reserve / m
            out[tuple(masks)] = out.get(tuple(masks), ZERO) + Fraction(1, m)
        outcomes[prof] = tuple(sorted((p, k) for k, p in out.items()))
        payments[prof] = tuple(pays)
    return DirectMechanism(spaces, outcomes, payments, name="bundle_random_bidder")


def edge_weight(Meps: DirectMechanism, j: int, replica_table: Sequence[Fraction], surrogate: int) -> Fraction:
    """Interim utility of a replica with the given table for the surrogate's outcome."""
    return Meps.interim_utility(j, replica_table, surrogate)


# ---------------------------------------------------------------- welfare of delta

def _pair_spaces(pair: Pair, caps: Caps) -> Tuple[TypeSpace, TypeSpace]:
    D, P = pair.spaces(caps)
    if len(D) != len(P):
        raise ParameterError("coupled spaces must be aligned")
    return D, P


def val_delta(pairs: Sequence[Pair], caps: Caps = DEFAULT_CAPS) -> Fraction:
    """E[max over assignments of items to bidders (or nobody) of sum_j delta_j(S_j)]."""
    per = []
    n = None
    for pair in pairs:
        D, P = _pair_spaces(pair, caps)
        n = D.n
        per.append([(e.prob, tuple(f.table[S] - e.table[S] for S in range(1 << D.n)))
                    for e, f in zip(D.entries, P.entries)])
    m = len(per)
    profiles = math.prod(len(x) for x in per)
    work = profiles * (m + 1) ** n
    if work > caps.assignments:
        raise ResourceError(f"welfare enumeration needs {work} assignments", size=work, cap=caps.assignments)
    full = (1 << n) - 1
    total = ZERO
    for combo in itertools.product(*per):
        # best[mask]: best value of items in mask among bidders j.. (items may stay unassigned)
        best = [ZERO] * (1 << n)
        for prob, delta in reversed(combo):
            nxt = []
            for mask in range(1 << n):
                b = best[mask]
                sub = mask
                while sub:
                    b = max(b, delta[sub] + best[mask & ~sub])
                    sub = (sub - 1) & mask
                nxt.append(b)
            best = nxt
        total += math.prod((c[0] for c in combo), start=ONE) * best[full]
    return total


# ---------------------------------------------------------------- simulation

@dataclass(frozen=True)
class ReductionConfig:
    epsilon: Fraction
    r: int
    trials: int
    seed: int
    corrupt: bool = False          # negative control: edge weights ignore payments

    def __post_init__(self):
        object.__setattr__(self, "epsilon", as_fraction(self.epsilon))
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        if self.r < 1 or self.trials < 1:
            raise ParameterError("r and trials must be positive")


class _Bidder:
    """Integer edge weights and cached pool matchings for one bidder."""

    def __init__(self, Meps: DirectMechanism, j: int, D: TypeSpace, P: TypeSpace, r: int, corrupt: bool):
        self.j = j
        self.r = r
        self.D, self.P = D, P
        self.true_w = [[edge_weight(Meps, j, f.table, b) for b in range(len(D))] for f in P.entries]
        if corrupt:
            seen = [[Meps.interim_utility(j, f.table, b) + Meps.interim(j, b)[1] for b in range(len(D))]
                    for f in P.entries]
        else:
            seen = self.true_w
        self.seen_w = seen
        self.den = 1
        for row in seen:
            for x in row:
                self.den = lcm(self.den, x.denominator)
        self.wint = [[int(x * self.den) for x in row] for row in seen]
        self.gain = [[None if x < 0 else x * (r + 1) + 1 for x in row] for row in self.wint]
        self.pp = np.array([float(e.prob) for e in P.entries])
        self.pd = np.array([float(e.prob) for e in D.entries])
        self.pp /= self.pp.sum()
        self.pd /= self.pd.sum()
        self.solve = lru_cache(maxsize=200_000)(self._solve)

    def _solve(self, L: Tuple[int, ...], R: Tuple[int, ...]):
        _, flow = transport_max(self.gain, L, R)
        W = sum(flow[a][b] * self.wint[a][b] for a in range(len(L)) for b in range(len(R)))
        return W, flow

    def assign(self, L: Tuple[int, ...], R: Tuple[int, ...], a: int, u_rank: float, u_fill: float):
        """Surrogate type for a left node of type a at rank u_rank, VCG price, matched flag."""
        W, flow = self.solve(L, R)
        k = min(int(u_rank * L[a]), L[a] - 1)
        acc = 0
        for b, f in enumerate(flow[a]):
            acc += f
            if k < acc:
                Lm = list(L)
                Lm[a] -= 1
                Wm = self.solve(tuple(Lm), R)[0]
                price = Fraction(Wm - (W - self.wint[a][b]), self.den)
                return b, price, True
        free = [R[b] - sum(flow[x][b] for x in range(len(L))) for b in range(len(R))]
        k = min(int(u_fill * sum(free)), sum(free) - 1)
        acc = 0
        for b, f in enumerate(free):
            acc += f
            if k < acc:
                return b, ZERO, False
        raise InvariantViolation("no unmatched surrogate left for an unmatched bidder")

    def pools(self, g: np.random.Generator, real: Optional[int] = None):
        if real is None:
            real = int(g.choice(len(self.pp), p=self.pp))
        reps = g.choice(len(self.pp), size=self.r - 1, p=self.pp)
        surs = g.choice(len(self.pd), size=self.r, p=self.pd)
        L = np.bincount(reps, minlength=len(self.pp))
        R = tuple(int(x) for x in np.bincount(surs, minlength=len(self.pd)))
        return real, L, R


def _trial_rng(seed: int, r: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r, trial)))


def _prepare(M: DirectMechanism, pairs: Sequence[Pair], caps: Caps):
    if len(pairs) != M.m:
        raise ParameterError("one coupled pair per bidder expected")
    chk = check_bic(M)
    if not chk.ok:
        raise PreconditionError(f"base mechanism is not BIC and IR: {chk.violation}")
    spaces = []
    for j, pair in enumerate(pairs):
        check_dominance(pair, caps)
        D, P = _pair_spaces(pair, caps)
        mine = M.spaces[j]
        if [(e.prob, e.table) for e in D.entries] != [(e.prob, e.table) for e in mine.entries]:
            raise PreconditionError(f"pair {j} does not match the mechanism's type space")
        spaces.append((D, P))
    return spaces


@dataclass
class RevenueEstimate:
    r: int
    trials: int
    epsilon: Fraction
    mean: Fraction
    stderr: float
    bound: Fraction
    rev_base: Fraction
    val_delta: Fraction
    vcg_mean: Fraction
    mech_mean: Fraction
    matched_rate: float
    surrogate_counts: List[List[int]]

    @property
    def passed(self) -> bool:
        return float(self.mean) >= float(self.bound) - 3 * self.stderr

    def row(self) -> dict:
        return {"r": self.r, "trials": self.trials, "mean": repr(float(self.mean)),
                "stderr": repr(self.stderr), "bound": fmt(self.bound),
                "vcg_mean": repr(float(self.vcg_mean)), "mech_mean": repr(float(self.mech_mean)),
                "matched_rate": repr(self.matched_rate), "pass": self.passed}


def theorem_bound(rev_base, val, epsilon) -> Fraction:
    eps = as_fraction(epsilon)
    return (1 - eps) * (as_fraction(rev_base) - as_fraction(val) / eps)


def run_reduction(M: DirectMechanism, pairs: Sequence[Pair], config: ReductionConfig,
                  caps: Caps = DEFAULT_CAPS) -> RevenueEstimate:
    """Monte-Carlo revenue of the reduced mechanism on D+ against the exact bound."""
    spaces = _prepare(M, pairs, caps)
    Meps = discount_mechanism(M, config.epsilon)
    bidders = [_Bidder(Meps, j, D, P, config.r, config.corrupt) for j, (D, P) in enumerate(spaces)]
    m = M.m
    total = ZERO
    total_sq = ZERO
    vcg = ZERO
    mech = ZERO
    matched = 0
    counts = [[0] * len(D) for D, _ in spaces]
    for trial in range(config.trials):
        g = _trial_rng(config.seed, config.r, trial)
        prof = []
        won = []
        rev = ZERO
        for bd in bidders:
            real, L, R = bd.pools(g)
            L[real] += 1
            L = tuple(int(x) for x in L)
            b, price, ok = bd.assign(L, R, real, g.random(), g.random())
            prof.append(b)
            won.append(ok)
            counts[bd.j][b] += 1
            if ok:
                rev += price
                vcg += price
                matched += 1
        pays = Meps.payments[tuple(prof)]
        for j in range(m):
            if won[j]:
                rev += pays[j]
                mech += pays[j]
        total += rev
        total_sq += rev * rev
    T = config.trials
    mean = total / T
    var = float(total_sq / T - mean * mean) * T / (T - 1) if T > 1 else 0.0
    stderr = math.sqrt(max(var, 0.0) / T)
    rev_base = M.revenue()
    val = val_delta(pairs, caps)
    return RevenueEstimate(config.r, T, config.epsilon, mean, stderr,
                           theorem_bound(rev_base, val, config.epsilon), rev_base, val,
                           vcg / T, mech / T, matched / (T * m), counts)


@dataclass
class MarginalReport:
    bidder: int
    observed: List[int]
    expected: List[float]
    p_value: float
    alpha: float = 0.001

    @property
    def ok(self) -> bool:
        return self.p_value >= self.alpha

    def to_json(self) -> dict:
        return {"bidder": self.bidder, "observed": self.observed,
                "expected": [repr(x) for x in self.expected], "p_value": repr(self.p_value),
                "alpha": repr(self.alpha), "pass": self.ok}


def surrogate_marginal_check(estimate: RevenueEstimate, D: TypeSpace, bidder: int = 0,
                             alpha: float = 0.001) -> MarginalReport:
    """Chi-square test of the selected surrogates against D_j."""
    obs = estimate.surrogate_counts[bidder]
    T = sum(obs)
    exp = [float(e.prob) * T for e in D.entries]
    if len(obs) == 1:
        return MarginalReport(bidder, list(obs), exp, 1.0, alpha)
    p = float(stats.chisquare(obs, exp).pvalue)
    return MarginalReport(bidder, list(obs), exp, p, alpha)


@dataclass
class BICRow:
    true_type: int
    report: int
    mean_gain: float               # E[u(truth) - u(report)]
    stderr: float

    @property
    def passed(self) -> bool:
        return self.mean_gain >= -3 * self.stderr

    def row(self) -> dict:
        return {"true": self.true_type, "report": self.report, "mean_gain": repr(self.mean_gain),
                "stderr": repr(self.stderr), "pass": self.passed}


@dataclass
class EmpiricalBICReport:
    bidder: int
    rows: List[BICRow]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_json(self) -> dict:
        return {"bidder": self.bidder, "rows": [r.row() for r in self.rows], "pass": self.ok}


def verify_empirical_bic(M: DirectMechanism, pairs: Sequence[Pair], config: ReductionConfig,
                         bidder: int = 0, type_pairs: Optional[Sequence[Tuple[int, int]]] = None,
                         caps: Caps = DEFAULT_CAPS) -> EmpiricalBICReport:
    """Paired simulation of interim utility for truthful reports against misreports.

    The opponents' surrogates are distributed as D_{-j}, so each bidder's
    utility given its own pool is computed exactly in the interim.
    """
    spaces = _prepare(M, pairs, caps)
    Meps = discount_mechanism(M, config.epsilon)
    D, P = spaces[bidder]
    bd = _Bidder(Meps, bidder, D, P, config.r, config.corrupt)
    A = len(P)
    if type_pairs is None:
        type_pairs = [(a, s) for a in range(A) for s in range(A) if a != s]
    diffs: Dict[Tuple[int, int], List[float]] = {tp: [] for tp in type_pairs}
    for trial in range(config.trials):
        g = _trial_rng(config.seed, config.r, trial)
        _, base, R = bd.pools(g, real=0)
        u_rank, u_fill = g.random(), g.random()
        util = {}

        def u(a, s):
            key = (a, s)
            if key not in util:
                L = list(int(x) for x in base)
                L[s] += 1
                b, price, ok = bd.assign(tuple(L), R, s, u_rank, u_fill)
                util[key] = bd.true_w[a][b] - price if ok else ZERO
            return util[key]

        for a, s in type_pairs:
            diffs[(a, s)].append(float(u(a, a) - u(a, s)))
    rows = []
    for (a, s), xs in diffs.items():
        arr = np.array(xs)
        se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        rows.append(BICRow(a, s, float(arr.mean()), se))
    return EmpiricalBICReport(bidder, rows)


def pool_payment_check(M: DirectMechanism, pairs: Sequence[Pair], epsilon, bidder: int,
                       left: Sequence[int], right: Sequence[int],
                       caps: Caps = DEFAULT_CAPS) -> Tuple[Fraction, Fraction]:
    """Exact expected payment of bidder j given the pools, against the surrogate accounting.

    left lists the types of all r left nodes (the bidder at a uniformly random
    one) and right the r surrogate types. Returns (payment, lower bound).
    """
    if len(left) != len(right):
        raise ParameterError("pools must have equal size")
    Meps = discount_mechanism(M, epsilon)
    D, P = _pair_spaces(pairs[bidder], caps)
    W = [[edge_weight(Meps, bidder, P.entries[a].table, b) for b in right] for a in left]
    res = vcg_matching(W)
    r = len(left)
    pay = ZERO
    lower = ZERO
    for i, k in res.pairs:
        s_pay = Meps.interim(bidder, right[k])[1]
        pay += res.prices[i] + s_pay
        lower += s_pay
    return pay / r, lower / r


# ---------------------------------------------------------------- configuration

def standard_fixture(shift="1/4"):
    """Two bidders, two additive items uniform on {1, 3}, serial pricing at 2 per item."""
    from .distributions import PrivateInfoDist
    item = PrivateInfoDist.uniform([1, 3])
    spec = ValuationSpec(2, "additive", (item, item))
    D = enumerate_type_space(spec)
    M = serial_posted_price([D, D], [2, 2])
    couplings = {
        "identity": [CoupledPair.uniform(spec, Transform("identity"))] * 2,
        "shift": [CoupledPair.uniform(spec, Transform("shift", as_fraction(shift)))] * 2,
    }
    return M, couplings


@dataclass
class ReductionSetup:
    mechanism: DirectMechanism
    pairs: List[Pair]
    epsilon: Fraction
    r_values: List[int]
    trials: int
    seed: int


def _transforms(obj, n: int) -> Tuple[Transform, ...]:
    if isinstance(obj, dict):
        obj = [obj] * n
    if not isinstance(obj, list) or len(obj) != n:
        raise ParameterError("coupling must be one transform or a list with one per item")
    return tuple(Transform(t["kind"], as_fraction(t.get("amount", 0))) for t in obj)


def setup_from_json(obj: dict, caps: Caps = DEFAULT_CAPS) -> ReductionSetup:
    """Build mechanism, couplings and sweep parameters from a config object."""
    from .io import spec_from_json
    try:
        m = int(obj.get("bidders", 2))
        if m < 1:
            raise ParameterError("bidders must be positive")
        spec = spec_from_json(obj["instance"])
        D = enumerate_type_space(spec, caps)
        mech = obj["mechanism"]
        kind = mech["kind"]
        if kind == "serial_posted_price":
            M = serial_posted_price([D] * m, mech["prices"])
        elif kind == "bundle_random_bidder":
            M = bundle_random_bidder([D] * m, mech["reserve"])
        else:
            raise ParameterError(f"unknown mechanism kind {kind!r}")
        pair = CoupledPair(spec, _transforms(obj.get("coupling", {"kind": "identity"}), spec.n))
        r_values = [int(r) for r in obj.get("r_values", [4, 16, 64])]
        return ReductionSetup(M, [pair] * m, as_fraction(obj.get("epsilon", "1/2")), r_values,
                              int(obj.get("trials", 10000)), int(obj.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed reduction config: {exc!r}") from exc
