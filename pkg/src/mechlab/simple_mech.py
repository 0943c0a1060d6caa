"""Simple-mechanism benchmarks: Myerson, BRev, Rev_q, SRev*_q, SRev and induced pricing."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import List, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_CAPS, Caps
from .distributions import OneDimDist
from .errors import InvariantViolation, ParameterError, ResourceError
from .valuation import (TypeSpace, ValuationSpec, enumerate_type_space, items_of, lex_key,
                        single_item_dist)

ZERO = Fraction(0)
ONE = Fraction(1)

SpecLike = Union[ValuationSpec, TypeSpace]


@dataclass(frozen=True)
class QuantilePrice:
    price: Fraction
    sale_prob: Fraction
    atom_fraction: Fraction


def _types(obj: SpecLike, caps: Caps) -> TypeSpace:
    return enumerate_type_space(obj, caps) if isinstance(obj, ValuationSpec) else obj


# ---------------------------------------------------------------- one dimension

def myerson_one_dim(d: OneDimDist) -> Tuple[Fraction, Fraction]:
    """Lowest support price maximizing p * P[v >= p]."""
    best_p, best_r = None, None
    tail = ONE
    for v, p in d.points:
        r = v * tail
        if best_r is None or r > best_r:
            best_p, best_r = v, r
        tail -= p
    return best_p, best_r


def rev_q(d: OneDimDist, q) -> Tuple[Fraction, QuantilePrice]:
    """Best reserve revenue selling with probability exactly q' for some q' <= q.

    The sale probability q' is realized by selling the whole mass above the
    price plus a fraction of the atom at the price.
    """
    q = Fraction(q)
    if not 0 <= q <= 1:
        raise ParameterError(f"q must lie in [0, 1], got {q}")
    top = d.points[-1][0]
    if q == 0:
        return ZERO, QuantilePrice(top, ZERO, ZERO)
    cands = {d.prob_ge(w) for w in d.values} | {q}
    best = None
    for qq in sorted(cands, reverse=True):
        if qq > q or qq <= 0:
            continue
        price = max(w for w in d.values if d.prob_ge(w) >= qq)
        r = qq * price
        if best is None or r > best[0]:
            above = d.prob_gt(price)
            frac = (qq - above) / d.prob_eq(price)
            best = (r, QuantilePrice(price, qq, frac))
    return best


def brev(obj: SpecLike, caps: Caps = DEFAULT_CAPS) -> Fraction:
    return myerson_one_dim(_types(obj, caps).grand_bundle_dist())[1]


def brev_price(obj: SpecLike, caps: Caps = DEFAULT_CAPS) -> Fraction:
    return myerson_one_dim(_types(obj, caps).grand_bundle_dist())[0]


def _item_dists(obj: SpecLike) -> List[OneDimDist]:
    return [single_item_dist(obj, i) for i in range(obj.n)]


def srev_star(obj: SpecLike, qvec: Sequence) -> Fraction:
    """prod_i (1 - q_i) * sum_i Rev_{q_i}(D_i)."""
    qvec = [Fraction(q) for q in qvec]
    if len(qvec) != obj.n:
        raise ParameterError("one quantile per item expected")
    factor = ONE
    for q in qvec:
        factor *= 1 - q
    total = sum((rev_q(d, q)[0] for d, q in zip(_item_dists(obj), qvec)), ZERO)
    return factor * total


def sum_item_rev(obj: SpecLike) -> Fraction:
    """sum_i Rev(D_i), each by Myerson's single-item optimum."""
    return sum((myerson_one_dim(d)[1] for d in _item_dists(obj)), ZERO)


# ---------------------------------------------------------------- demand with coins

def _demand_eta(table, prices, eta_mask: int, n: int) -> Tuple[int, Fraction]:
    """Demand when items in eta_mask cost an extra infinitesimal.

    Utility is compared first by its real part, then by fewer infinitesimal
    surcharges; remaining ties go to the higher payment, then the
    lexicographically smallest set.
    """
    best, best_key = 0, (ZERO, 0, ZERO)
    for S in range(1, 1 << n):
        pay = sum((prices[i] for i in items_of(S)), ZERO)
        key = (table[S] - pay, -bin(S & eta_mask).count("1"), pay)
        if key > best_key or (key == best_key and lex_key(S) < lex_key(best)):
            best, best_key = S, key
    return best, best_key[2]


def pricing_revenue(obj: SpecLike, prices: Sequence, atom_fraction: Sequence = None,
                    caps: Caps = DEFAULT_CAPS) -> Fraction:
    """Exact expected revenue of item prices under the canonical demand rule.

    ``atom_fraction[i]`` is the chance that a buyer tied at item i's price is
    let through at that price; otherwise the price is perturbed upward by an
    infinitesimal. The coins are independent across items.
    """
    ts = _types(obj, caps)
    n = ts.n
    prices = [Fraction(p) for p in prices]
    if atom_fraction is None:
        atom_fraction = [ONE] * n
    atom_fraction = [Fraction(a) for a in atom_fraction]
    coins = [i for i in range(n) if 0 < atom_fraction[i] < 1]
    forced = sum(1 << i for i in range(n) if atom_fraction[i] == 0)
    total = ZERO
    for outcome in itertools.product((0, 1), repeat=len(coins)):
        weight = ONE
        mask = forced
        for i, tails in zip(coins, outcome):
            if tails:
                weight *= 1 - atom_fraction[i]
                mask |= 1 << i
            else:
                weight *= atom_fraction[i]
        for e in ts.entries:
            total += weight * e.prob * _demand_eta(e.table, prices, mask, n)[1]
    return total


def induced_pricing(obj: SpecLike, qvec: Sequence, caps: Caps = DEFAULT_CAPS):
    """Item prices at the Rev_q reserves with their exact revenue.

    Returns (prices, atom fractions, revenue). Raises InvariantViolation if
    the revenue falls short of SRev*_q.
    """
    qvec = [Fraction(q) for q in qvec]
    dists = _item_dists(obj)
    quotes = [rev_q(d, q)[1] for d, q in zip(dists, qvec)]
    prices = [qp.price for qp in quotes]
    fracs = [qp.atom_fraction for qp in quotes]
    rev = pricing_revenue(obj, prices, fracs, caps)
    bound = srev_star(obj, qvec)
    if rev < bound:
        raise InvariantViolation(f"induced pricing revenue {rev} < SRev*_q {bound}")
    return prices, fracs, rev


# ---------------------------------------------------------------- SRev

def critical_grid(obj: SpecLike, caps: Caps = DEFAULT_CAPS) -> List[List[Fraction]]:
    """Per item: {v(S) - v(S minus i) : support v, S containing i} plus 0."""
    ts = _types(obj, caps)
    out = []
    for i in range(ts.n):
        bit = 1 << i
        vals = {ZERO}
        for e in ts.entries:
            for S in range(1 << ts.n):
                if S & bit:
                    vals.add(e.table[S] - e.table[S ^ bit])
        out.append(sorted(v for v in vals if v >= 0))
    return out


def grid_srev(obj: SpecLike, grid: List[List[Fraction]], caps: Caps = DEFAULT_CAPS):
    """Best revenue over a product grid of deterministic price vectors."""
    ts = _types(obj, caps)
    size = 1
    for g in grid:
        size *= len(g)
    if size * len(ts) > caps.pair_checks:
        raise ResourceError(f"grid search needs {size * len(ts)} demand queries",
                            size=size * len(ts), cap=caps.pair_checks)
    best, best_p = None, None
    for p in itertools.product(*grid):
        r = pricing_revenue(ts, p)
        if best is None or r > best:
            best, best_p = r, list(p)
    return best, best_p


def _directions(n: int):
    """Hyperplane normals in {-1,0,1}^n up to sign, first nonzero entry +1."""
    out = []
    for d in itertools.product((-1, 0, 1), repeat=n):
        nz = [x for x in d if x]
        if nz and nz[0] == 1:
            out.append(d)
    return out


def _adj_det(M):
    """Integer adjugate and determinant of a small integer matrix."""
    k = len(M)
    from sympy import Matrix
    A = Matrix(M)
    det = int(A.det())
    if det == 0:
        return None, 0
    adj = A.adjugate()
    return [[int(adj[i, j]) for j in range(k)] for i in range(k)], det


def srev_exact(obj: SpecLike, caps: Caps = DEFAULT_CAPS) -> Tuple[Fraction, List[Fraction]]:
    """Optimal deterministic item pricing, found exactly.

    Revenue is piecewise linear in the price vector with pieces cut out by
    the tie hyperplanes p(S) - p(T) = v(S) - v(T) and the box 0 <= p_i <= M.
    Seller-favorable tie-breaking makes revenue upper semicontinuous, so a
    vertex of this arrangement is optimal. Every vertex is scored in exact
    integer arithmetic; the winner is re-scored with rationals.
    """
    ts = _types(obj, caps).merged()
    n = ts.n
    if n == 0:
        return ZERO, []
    full = (1 << n) - 1
    M = max(e.table[full] for e in ts.entries) + 1
    dirs = _directions(n)
    # rhs sets per direction
    rhs = {}
    for d in dirs:
        pos = sum(1 << i for i in range(n) if d[i] == 1)
        neg = sum(1 << i for i in range(n) if d[i] == -1)
        rest = full & ~(pos | neg)
        vals = set()
        C = rest
        while True:
            for e in ts.entries:
                vals.add(e.table[pos | C] - e.table[neg | C])
            if C == 0:
                break
            C = (C - 1) & rest
        if sum(abs(x) for x in d) == 1:
            vals |= {ZERO, M}
        rhs[d] = sorted(vals)
    L = 1
    for vals in rhs.values():
        for v in vals:
            L = lcm(L, v.denominator)
    for e in ts.entries:
        for v in e.table:
            L = lcm(L, v.denominator)

    combos = []
    D = 1
    for trip in itertools.combinations(dirs, n):
        adj, det = _adj_det([list(d) for d in trip])
        if det == 0:
            continue
        D = lcm(D, abs(det))
        combos.append((trip, adj, det))
    scale = D * L  # prices are held as integers in units of 1/scale

    total = 0
    for trip, _, _ in combos:
        c = 1
        for d in trip:
            c *= len(rhs[d])
        total += c
    if total > caps.srev_vertices:
        raise ResourceError(f"{total} candidate vertices exceed cap {caps.srev_vertices}",
                            size=total, cap=caps.srev_vertices)

    Q = 1
    for e in ts.entries:
        Q = lcm(Q, e.prob.denominator)
    Mi = int(M * scale)
    # int64 is exact while the largest possible weighted revenue fits
    dtype = np.int64 if Q * Mi * n * len(ts) < 2 ** 62 else object
    weights = np.array([int(e.prob * Q) for e in ts.entries], dtype=dtype)
    tables = np.array([[int(v * scale) for v in e.table] for e in ts.entries], dtype=dtype)
    masks = np.array([[(S >> i) & 1 for i in range(n)] for S in range(1 << n)], dtype=dtype)

    best_val, best_p = -1, None
    for trip, adj, det in combos:
        grids = [np.array([int(v * L) for v in rhs[d]], dtype=dtype) for d in trip]
        mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, n)
        factor = D // abs(det) * (1 if det > 0 else -1)
        P = mesh @ (np.array(adj, dtype=dtype).T * factor)
        ok = np.all((P >= 0) & (P <= Mi), axis=1)
        P = P[ok]
        for start in range(0, len(P), 65536):
            chunk = P[start:start + 65536]
            rev = _score(chunk, tables, weights, masks)
            if len(rev) == 0:
                continue
            top = rev.max()
            if top < best_val:
                continue
            cand = chunk[rev == top]
            order = np.lexsort(cand.T[::-1])
            first = cand[order[0]]
            if top > best_val or tuple(first) < tuple(best_p):
                best_val, best_p = int(top), first.copy()
    prices = [Fraction(int(x), scale) for x in best_p]
    exact = pricing_revenue(ts, prices)
    if exact * Q * scale != best_val:  # pragma: no cover
        raise InvariantViolation("vectorized and exact pricing revenue disagree")
    return exact, prices


def _score(P, tables, weights, masks):
    pay = P @ masks.T                            # (B, 2^n)
    rev = np.zeros(len(P), dtype=P.dtype)
    for t in range(len(tables)):
        util = tables[t][None, :] - pay
        top = util.max(axis=1, keepdims=True)
        sel = np.where(util == top, pay, -1).max(axis=1)
        rev += weights[t] * sel
    return rev
