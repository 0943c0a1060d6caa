"""Optimal single-buyer revenue via the lottery-menu LP, plus menu checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

from .config import DEFAULT_CAPS, Caps
from .errors import ParameterError, ResourceError, SolverError
from .lp import ExactLP
from .rational import fmt
from .valuation import TypeSpace, items_of

ZERO = Fraction(0)


@dataclass(frozen=True)
class Lottery:
    weights: Tuple[Tuple[int, Fraction], ...]   # (subset mask, probability), masks nonzero
    price: Fraction

    def __post_init__(self):
        if self.price < 0:
            raise ParameterError("lottery price must be nonnegative")
        if any(w < 0 for _, w in self.weights):
            raise ParameterError("lottery weights must be nonnegative")
        if sum((w for _, w in self.weights), ZERO) > 1:
            raise ParameterError("lottery weights sum above 1")

    def value(self, table) -> Fraction:
        return sum((w * table[S] for S, w in self.weights), ZERO)

    def utility(self, table) -> Fraction:
        return self.value(table) - self.price

    def to_json(self) -> dict:
        return {"weights": [[items_of(S), fmt(w)] for S, w in self.weights], "price": fmt(self.price)}


@dataclass(frozen=True)
class Menu:
    """One lottery per type entry of the TypeSpace it was built for."""

    lotteries: Tuple[Lottery, ...]

    def to_json(self) -> dict:
        return {"lotteries": [l.to_json() for l in self.lotteries]}


@dataclass
class MenuReport:
    ok: bool
    min_slack: Optional[Fraction]
    violations: List[tuple] = field(default_factory=list)   # (kind, v, u, slack)


def _lp_cells(T: int, n: int) -> int:
    return T * (1 << n)


def exact_rev(ts: TypeSpace, caps: Caps = DEFAULT_CAPS) -> Tuple[Fraction, Menu]:
    """Exact optimal revenue of a finite type space and a menu attaining it."""
    keys: dict = {}
    groups: list = []
    owner = []
    for e in ts.entries:
        g = keys.get(e.table)
        if g is None:
            g = keys[e.table] = len(groups)
            groups.append([e.table, ZERO])
        groups[g][1] += e.prob
        owner.append(g)
    T = len(groups)
    n = ts.n
    cells = _lp_cells(T, n)
    if cells > caps.lp_cells:
        raise ResourceError(f"LP has {cells} cells, cap is {caps.lp_cells}", size=cells, cap=caps.lp_cells)
    if n == 0:
        return ZERO, Menu(tuple(Lottery((), ZERO) for _ in ts.entries))

    K = 1 << n               # per type: K-1 allocation vars + 1 price
    nvar = T * K
    m = 2 * T + T * (T - 1)
    lp = ExactLP(m, nvar)

    def xv(v, S):
        return v * K + S - 1

    def pv(v):
        return v * K + K - 1

    for v, (table, prob) in enumerate(groups):
        lp.set_c(pv(v), prob)
        for S in range(1, K):
            lp.set(v, xv(v, S), 1)
        lp.set_b(v, 1)
        # IR: p_v - sum_S v(S) x_{v,S} <= 0
        r = T + v
        lp.set(r, pv(v), 1)
        for S in range(1, K):
            lp.set(r, xv(v, S), -table[S])
    r = 2 * T
    for v, (tv, _) in enumerate(groups):
        for u in range(T):
            if u == v:
                continue
            # v prefers own lottery: sum v(S) x_u,S - p_u - sum v(S) x_v,S + p_v <= 0
            for S in range(1, K):
                if tv[S] != 0:
                    lp.set(r, xv(u, S), tv[S])
                    lp.set(r, xv(v, S), -tv[S])
            lp.set(r, pv(u), -1)
            lp.set(r, pv(v), 1)
            r += 1
    res = lp.solve()
    lots = []
    for v in range(T):
        w = tuple((S, res.x[xv(v, S)]) for S in range(1, K) if res.x[xv(v, S)] != 0)
        lots.append(Lottery(w, res.x[pv(v)]))
    menu = Menu(tuple(lots[owner[i]] for i in range(len(ts.entries))))
    rep = verify_menu_ic(ts, menu)
    if not rep.ok:  # pragma: no cover
        raise SolverError(f"LP menu fails IC/IR: {rep.violations[:3]}")
    return res.value, menu


def verify_menu_ic(ts: TypeSpace, menu: Menu) -> MenuReport:
    """Check every IR and pairwise IC constraint exactly."""
    if len(menu.lotteries) != len(ts.entries):
        raise ParameterError("menu must have one lottery per type")
    violations = []
    min_slack = None
    for v, e in enumerate(ts.entries):
        own = menu.lotteries[v].utility(e.table)
        if own < 0:
            violations.append(("IR", v, None, own))
        min_slack = own if min_slack is None else min(min_slack, own)
        for u, l in enumerate(menu.lotteries):
            if u == v:
                continue
            slack = own - l.utility(e.table)
            if slack < 0:
                violations.append(("IC", v, u, slack))
            min_slack = min(min_slack, slack)
    return MenuReport(not violations, min_slack, violations)


def choose(table, menu: Menu) -> Optional[int]:
    """Index of the lottery a buyer picks, or None for the outside option.

    Ties go to the higher price, then the lower index.
    """
    best, key = None, (ZERO, ZERO)
    for i, l in enumerate(menu.lotteries):
        k = (l.utility(table), l.price)
        if k > key:
            best, key = i, k
    return best


def menu_revenue(ts: TypeSpace, menu: Menu) -> Fraction:
    total = ZERO
    for e in ts.entries:
        i = choose(e.table, menu)
        if i is not None:
            total += e.prob * menu.lotteries[i].price
    return total


def posted_bundle_menu(ts: TypeSpace, S: int, price) -> Menu:
    """Every type is offered the same deterministic lottery."""
    l = Lottery(((S, Fraction(1)),) if S else (), Fraction(price))
    return Menu(tuple(l for _ in ts.entries))


def menu_from_choice(ts: TypeSpace, offers: List[Lottery]) -> Menu:
    """Let each type pick from a list of offers; the result is IC by construction."""
    base = Menu(tuple(offers))
    out = []
    for e in ts.entries:
        i = choose(e.table, base)
        out.append(offers[i] if i is not None else Lottery((), ZERO))
    return Menu(tuple(out))
