from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from conftest import specs, uniform12
from mechlab.distributions import OneDimDist, PrivateInfoDist
from mechlab.errors import ParameterError, ResourceError
from mechlab.config import Caps
from mechlab.simple_mech import (brev, brev_price, critical_grid, grid_srev, induced_pricing,
                                 myerson_one_dim, pricing_revenue, rev_q, srev_exact, srev_star,
                                 sum_item_rev)
from mechlab.valuation import TypeSpace, ValuationSpec, enumerate_type_space, single_item_dist


def d(**kw):
    return OneDimDist.of([(F(k[1:]), F(v)) for k, v in kw.items()])


one_dims = st.lists(st.tuples(st.integers(0, 9), st.integers(1, 4)), min_size=1, max_size=4,
                    unique_by=lambda t: t[0]).map(
    lambda pts: OneDimDist.of([(F(v), F(w, sum(x[1] for x in pts))) for v, w in pts]))


# ---------------------------------------------------------------- one dimension

def test_myerson_examples():
    assert myerson_one_dim(OneDimDist.point(F(7, 2))) == (F(7, 2), F(7, 2))
    assert myerson_one_dim(d(v1="1/2", v2="1/2")) == (1, 1)
    # prices 1 and 4 both earn 1; the lowest optimal price is returned
    assert myerson_one_dim(d(v1="3/4", v4="1/4")) == (1, 1)


@given(one_dims)
def test_myerson_matches_enumeration(dist):
    price, rev = myerson_one_dim(dist)
    best = max(w * dist.prob_ge(w) for w in dist.values)
    assert rev == best == price * dist.prob_ge(price)
    assert price == min(w for w in dist.values if w * dist.prob_ge(w) == best)


def test_rev_q_examples():
    r, qp = rev_q(OneDimDist.point(1), F(1, 2))
    assert r == F(1, 2) and (qp.price, qp.sale_prob, qp.atom_fraction) == (1, F(1, 2), F(1, 2))
    r, qp = rev_q(d(v1="1/2", v2="1/2"), F(1, 4))
    assert r == F(1, 2) and qp.price == 2 and qp.atom_fraction == F(1, 2)
    assert rev_q(d(v1="1/2", v2="1/2"), 0)[0] == 0
    with pytest.raises(ParameterError):
        rev_q(OneDimDist.point(1), F(3, 2))


@given(one_dims, st.fractions(0, 1), st.fractions(0, 1))
def test_rev_q_properties(dist, q1, q2):
    lo, hi = sorted((q1, q2))
    r_lo, qp = rev_q(dist, lo)
    r_hi, _ = rev_q(dist, hi)
    assert r_lo <= r_hi
    assert rev_q(dist, 1)[0] == myerson_one_dim(dist)[1]
    top = dist.values[-1]
    assert lo * top >= r_lo
    if lo > 0:
        inv = max(w for w in dist.values if dist.prob_ge(w) >= lo) if dist.prob_ge(dist.values[0]) >= lo else 0
        assert r_lo >= lo * inv
        # the quantile price is realized exactly
        assert qp.sale_prob == dist.prob_gt(qp.price) + qp.atom_fraction * dist.prob_eq(qp.price)
        assert qp.sale_prob <= lo and r_lo == qp.sale_prob * qp.price


@given(one_dims, st.integers(0, 3), st.fractions(0, 1))
def test_rev_q_monotone_under_dominance(dist, shift, q):
    up = OneDimDist.of([(v + shift, p) for v, p in dist.points])
    assert dist.dominated_by(up)
    assert rev_q(up, q)[0] >= rev_q(dist, q)[0]


# ---------------------------------------------------------------- bundle and proxies

def test_brev_examples(add12, unit12):
    ts = TypeSpace.of(2, [(1, (0, 2, 2, 3))])
    assert brev(ts) == 3
    assert brev(add12) == F(9, 4) and brev_price(add12) == 3
    assert brev(unit12) == F(3, 2)


def test_srev_star_examples(add12):
    assert srev_star(add12, [0, 0]) == 0
    one = uniform12(1)
    q = F(1, 4)
    assert srev_star(one, [q]) == (1 - q) * rev_q(single_item_dist(one, 0), q)[0]
    assert srev_star(add12, [F(1, 4), F(1, 4)]) == F(9, 16)
    with pytest.raises(ParameterError):
        srev_star(add12, [0])


# ---------------------------------------------------------------- SRev

def test_srev_examples(add12, unit12):
    r, p = srev_exact(add12)
    assert r == 2 and pricing_revenue(add12, p) == 2
    r, _ = srev_exact(unit12)
    assert r <= sum_item_rev(unit12) == 2
    assert r == grid_srev(unit12, critical_grid(unit12))[0]


def test_srev_beats_the_marginal_grid():
    """The marginal-value grid can miss the optimum; vertex search does not."""
    ts = TypeSpace.of(2, [(F(1, 2), (0, 5, 4, 5)), (F(1, 2), (0, 0, 3, 3))])
    r, p = srev_exact(ts)
    assert r == F(7, 2) and p == [4, 3]
    assert grid_srev(ts, critical_grid(ts))[0] == 3


@given(specs(n_max=2, support=2, vmax=4))
def test_srev_dominates_dense_grid(spec):
    r, p = srev_exact(spec)
    assert pricing_revenue(spec, p) == r
    top = max(e.table[-1] for e in enumerate_type_space(spec).entries)
    halves = [F(k, 2) for k in range(0, 2 * int(top) + 3)]
    assert r >= grid_srev(spec, [halves] * spec.n)[0]


@given(specs(n_max=3, support=2, kinds=("additive",)))
def test_srev_additive_separability(spec):
    assert srev_exact(spec)[0] == sum_item_rev(spec)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_unit_demand_factor_n_witness(n):
    spec = ValuationSpec(n, "kdemand", tuple(PrivateInfoDist.point(5) for _ in range(n)), k=1)
    assert sum_item_rev(spec) == n * srev_exact(spec)[0] == 5 * n


def test_srev_cap(add12):
    with pytest.raises(ResourceError):
        srev_exact(add12, Caps(srev_vertices=1))


# ---------------------------------------------------------------- induced pricing

def test_induced_pricing_examples(add12):
    prices, fracs, rev = induced_pricing(add12, [0, 0])
    assert rev == 0
    prices, fracs, rev = induced_pricing(add12, [F(1, 4), F(1, 4)])
    assert prices == [2, 2] and fracs == [F(1, 2), F(1, 2)] and rev == 1 >= F(9, 16)
    one = uniform12(1)
    for q in (F(1, 4), F(1, 2), F(3, 4), 1):
        _, _, rev = induced_pricing(one, [q])
        assert rev == rev_q(single_item_dist(one, 0), q)[0]


@given(specs(n_max=3, support=2), st.lists(st.fractions(0, 1, max_denominator=6), min_size=3, max_size=3))
def test_induced_pricing_meets_proxy(spec, q):
    q = q[: spec.n]
    _, _, rev = induced_pricing(spec, q)
    assert rev >= srev_star(spec, q)


def test_pricing_revenue_coin_split():
    one = uniform12(1)
    assert pricing_revenue(one, [2], [F(1, 2)]) == F(1, 2)
    assert pricing_revenue(one, [2], [0]) == 0
    assert pricing_revenue(one, [2]) == 1
