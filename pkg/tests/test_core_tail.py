import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings

from conftest import specs
from mechlab.core_tail import (CHAIN_NAMES, compute_cutoff, condition_spec, conditioned_spaces,
                               core_value, subset_prob, tail_contribution, verify_chain,
                               verify_marginal)
from mechlab.distributions import PrivateInfoDist
from mechlab.errors import DegenerateInstanceError, EmptyEventError, ParameterError
from mechlab.optimal_rev import exact_rev
from mechlab.rational import Interval
from mechlab.simple_mech import rev_q
from mechlab.valuation import ValuationSpec, enumerate_type_space, single_item_dist


def two_point():
    return ValuationSpec(1, "additive", (PrivateInfoDist.uniform([1, 2]),))


def point_mass(*ws, kind="additive", **kw):
    return ValuationSpec(len(ws), kind, tuple(PrivateInfoDist.point(w) for w in ws), **kw)


# ---------------------------------------------------------------- cutoff

def test_cutoff_point_mass_single_item():
    rep = compute_cutoff(point_mass(3))
    assert rep.t == 3 and rep.theta == F(1, 2) and rep.p_empty == F(1, 2) and rep.exact


def test_cutoff_point_masses_need_bisection():
    rep = compute_cutoff(point_mass(3, 3))
    assert rep.t == 3 and not rep.exact
    assert abs(float(rep.theta) - (1 - math.sqrt(0.5))) < 2 ** -39
    assert rep.p_empty >= F(1, 2)


def test_cutoff_two_point_single_item():
    rep = compute_cutoff(two_point())
    assert (rep.t, rep.theta, rep.p, rep.p_empty) == (2, 1, (F(1, 2),), F(1, 2))


def test_cutoff_uniform12_pair(add12):
    rep = compute_cutoff(add12)
    assert rep.t == 2
    assert abs(float(rep.theta) - (2 - math.sqrt(2))) < 2 ** -38
    assert rep.p_empty >= F(1, 2) and rep.p_empty - F(1, 2) < F(1, 2 ** 38)
    assert rep.p == (rep.theta / 2, rep.theta / 2)


def test_cutoff_threshold_only(add12):
    rep = compute_cutoff(add12, "threshold_only")
    assert rep.t == 2 and rep.theta == 0 and rep.p_empty == 1


def test_cutoff_errors():
    with pytest.raises(DegenerateInstanceError):
        compute_cutoff(point_mass(0, 0))
    with pytest.raises(ParameterError):
        compute_cutoff(two_point(), "nope")


@given(specs(support=3))
def test_cutoff_invariants(spec):
    try:
        rep = compute_cutoff(spec)
    except DegenerateInstanceError:
        return
    for i, pi in enumerate(rep.p):
        di = single_item_dist(spec, i)
        assert pi == di.prob_gt(rep.t) + rep.theta * di.prob_eq(rep.t)
    assert rep.p_empty >= F(1, 2) and float(rep.p_empty) - 0.5 < 1e-10
    assert sum(subset_prob(rep, A) for A in range(1 << spec.n)) == 1


# ---------------------------------------------------------------- subsets and conditioning

def test_subset_prob_endpoints(add12):
    rep = compute_cutoff(add12)
    assert subset_prob(rep, 0) == rep.p_empty
    assert subset_prob(rep, 0b11) == rep.p[0] * rep.p[1]


def test_conditioned_tail_point_mass():
    spec = two_point()
    rep = compute_cutoff(spec)
    tail, core = conditioned_spaces(spec, rep, 1)
    assert [(e.prob, e.table) for e in tail.entries] == [(1, (0, 2))]
    assert core.n == 0
    with pytest.raises(EmptyEventError):
        conditioned_spaces(spec, rep.__class__(rep.t, F(0), (F(0),), F(1), rep.mode, False), 1)


@given(specs(support=3))
def test_conditioning_recomposes(spec):
    try:
        rep = compute_cutoff(spec)
    except DegenerateInstanceError:
        return
    mix = {}
    for A in range(1 << spec.n):
        pA = subset_prob(rep, A)
        if pA == 0:
            continue
        for e in enumerate_type_space(condition_spec(spec, rep, A)).entries:
            mix[e.info] = mix.get(e.info, 0) + pA * e.prob
    assert mix == {e.info: e.prob for e in enumerate_type_space(spec).entries}


def test_core_value_and_tail_examples(add12):
    spec = point_mass(4)
    rep = compute_cutoff(spec)
    assert core_value(spec, rep) == 4
    rep0 = compute_cutoff(point_mass(4, 2), "threshold_only")
    assert rep0.p == (0, 0) and tail_contribution(point_mass(4, 2), rep0) == 0
    rep = compute_cutoff(add12)
    th = rep.theta
    # core items are 1 or (with weight 1 - theta) 2, conditioned independently
    per_item = (F(1, 2) * 1 + F(1, 2) * (1 - th) * 2) / (F(1, 2) + F(1, 2) * (1 - th))
    assert core_value(add12, rep) == 2 * per_item
    detail = {}
    tail = tail_contribution(add12, rep, detail=detail)
    assert sorted(detail) == [1, 2, 3] and tail == sum(subset_prob(rep, A) * r for A, r in detail.items())


@given(specs(n_max=1, support=3))
def test_single_item_tail_is_rev_q(spec):
    try:
        rep = compute_cutoff(spec)
    except DegenerateInstanceError:
        return
    expect = rev_q(single_item_dist(spec, 0), rep.p[0])[0]
    assert tail_contribution(spec, rep) == expect


# ---------------------------------------------------------------- marginal mechanism

def test_marginal_examples(add12):
    ts = enumerate_type_space(add12)
    rev = exact_rev(ts)[0]
    e = verify_marginal(ts, 0, F(1, 2))
    assert e.lhs == rev and e.rhs == 2 * rev and e.passed and e.slack > 0
    e = verify_marginal(ts, 0b11, F(1, 2))
    assert e.rhs == 4 * ts.val() and e.passed
    e = verify_marginal(ts, 0b01, F(1, 2))
    assert e.rhs == 8 and e.passed
    with pytest.raises(ParameterError):
        verify_marginal(ts, 0, 1)


@given(specs(n_max=2, support=2))
def test_marginal_holds(spec):
    ts = enumerate_type_space(spec)
    for S in range(ts.full + 1):
        for eps in (F(1, 3), F(1, 2), F(3, 4)):
            assert verify_marginal(ts, S, eps).passed


# ---------------------------------------------------------------- chain

def test_chain_names_are_stable():
    rep = verify_chain(two_point())
    assert [e.name for e in rep.entries] == list(CHAIN_NAMES.values())
    assert rep.ok


def test_chain_point_mass_large_slack():
    rep = verify_chain(point_mass(3, 5))
    assert rep.ok
    main = rep.entries[-1]
    assert main.slack > 10 * main.lhs


@settings(max_examples=25)
@given(specs(n_max=1, support=3))
def test_chain_single_item(spec):
    try:
        rep = verify_chain(spec)
    except DegenerateInstanceError:
        return
    assert rep.ok, [e.row() for e in rep.entries if not e.passed]


@settings(max_examples=15)
@given(specs(n_max=3, support=2))
def test_chain_both_modes(spec):
    for mode in ("exact_half", "threshold_only"):
        try:
            rep = verify_chain(spec, mode=mode)
        except DegenerateInstanceError:
            return
        assert rep.ok, [e.row() for e in rep.entries if not e.passed]
        for e in rep.entries:
            if isinstance(e.rhs, Interval):
                assert e.lhs <= e.rhs.lo       # a pass is certified, never rounded up


def test_chain_json_is_exact(add12):
    out = verify_chain(add12).to_json()
    assert out["pass"] is True
    assert all(isinstance(v, str) for v in (out["rev"], out["val_core"], out["tail_contribution"]))
