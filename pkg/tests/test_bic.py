import itertools
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import uniform12
from oracles import best_assignment, brute_force_matching, lex_best_matching, vcg_prices
from mechlab.bic_reduction import (DirectMechanism, ReductionConfig, bundle_random_bidder,
                                   check_bic, discount_mechanism, edge_weight, pool_payment_check,
                                   run_reduction, serial_posted_price, setup_from_json,
                                   standard_fixture, surrogate_marginal_check, theorem_bound,
                                   val_delta, verify_empirical_bic, _Bidder)
from mechlab.config import Caps
from mechlab.distributions import PrivateInfoDist
from mechlab.errors import ParameterError, PreconditionError, ResourceError
from mechlab.matching import max_weight, vcg_matching
from mechlab.monotonicity import IDENTITY, CoupledPair, Transform
from mechlab.valuation import ValuationSpec, enumerate_type_space

matrices = st.integers(1, 5).flatmap(lambda r: st.lists(
    st.lists(st.fractions(-3, 5, max_denominator=3), min_size=r, max_size=r), min_size=r, max_size=r))


# ---------------------------------------------------------------- matching

def test_matching_examples():
    res = vcg_matching([[-1, -2], [-3, -1]], np.random.default_rng(0))
    assert res.pairs == [] and res.weight == 0
    assert sorted(i for i, _ in res.completion) == [0, 1]
    assert sorted(j for _, j in res.completion) == [0, 1]
    res = vcg_matching([[F(5, 2)]])
    assert res.pairs == [(0, 0)] and res.prices == {0: 0}
    W = [[3, 1], [2, 0]]
    res = vcg_matching(W)
    assert res.pairs == [(0, 0), (1, 1)] and res.weight == 3
    assert res.prices == vcg_prices([[F(x) for x in row] for row in W], res.pairs) == {0: 2, 1: 0}
    with pytest.raises(ParameterError):
        vcg_matching([[1, 2]])


def test_matching_lexicographic_ties():
    res = vcg_matching([[1, 1, 1]] * 3)
    assert res.pairs == [(0, 0), (1, 1), (2, 2)]
    res = vcg_matching([[0, 2], [2, 0]])
    assert res.pairs == [(0, 1), (1, 0)]


@given(matrices)
def test_matching_equals_brute_force(W):
    res = vcg_matching(W)
    best, edges = lex_best_matching(W)
    assert res.weight == best == brute_force_matching(W)[0] == max_weight(W)
    assert res.pairs == edges
    assert res.prices == vcg_prices(W, res.pairs)
    for i, j in res.pairs:
        assert res.prices[i] >= 0 and W[i][j] - res.prices[i] >= 0


@given(matrices, st.integers(0, 1000))
def test_completion_is_a_perfect_matching_and_seeded(W, seed):
    a = vcg_matching(W, np.random.default_rng(seed))
    b = vcg_matching(W, np.random.default_rng(seed))
    assert a.completion == b.completion
    pairs = a.pairs + a.completion
    assert sorted(i for i, _ in pairs) == list(range(len(W)))
    assert sorted(j for _, j in pairs) == list(range(len(W)))


# ---------------------------------------------------------------- mechanisms

@pytest.fixture
def fixture():
    return standard_fixture()


def test_fixtures_are_bic(fixture):
    M, _ = fixture
    assert check_bic(M).ok
    D = enumerate_type_space(uniform12())
    B = bundle_random_bidder([D, D], 3)
    assert check_bic(B).ok and B.revenue() == F(3, 4) * 3


def test_serial_posted_price_revenue(fixture):
    M, _ = fixture
    # each item sells when either bidder values it at 3
    assert M.revenue() == 2 * 2 * F(3, 4)


def test_discount(fixture):
    M, _ = fixture
    assert discount_mechanism(M, 0).payments == M.payments
    half = discount_mechanism(M, F(1, 2))
    for prof in M.profiles():
        assert half.payments[prof] == tuple(p / 2 for p in M.payments[prof])
        assert half.outcomes[prof] == M.outcomes[prof]
    assert half.revenue() == M.revenue() / 2


def test_edge_weight_enumeration(fixture):
    M, _ = fixture
    Meps = discount_mechanism(M, F(1, 2))
    D = M.spaces[1]
    for j in range(2):
        for s in range(len(D)):
            for e in D.entries:
                # independent expectation over the opponent and the allocation
                expect = F(0)
                for o, eo in enumerate(M.spaces[1 - j].entries):
                    prof = (s, o) if j == 0 else (o, s)
                    (p, masks), = M.outcomes[prof]
                    expect += eo.prob * (e.table[masks[j]] - M.payments[prof][j] / 2)
                assert edge_weight(Meps, j, e.table, s) == expect
    # ties the truthful weight to the interim utility, which is nonnegative in a BIC/IR mechanism
    for s, e in enumerate(D.entries):
        assert edge_weight(Meps, 0, e.table, s) >= edge_weight(M, 0, e.table, s) >= 0


def test_edge_weight_zero_payment():
    D = enumerate_type_space(uniform12())
    free = bundle_random_bidder([D, D], 0)
    free = DirectMechanism(free.spaces, free.outcomes, {k: (0, 0) for k in free.payments})
    for s, e in enumerate(D.entries):
        assert edge_weight(free, 0, e.table, s) == e.table[3] / 2


def test_infeasible_and_malformed_mechanisms():
    D = enumerate_type_space(uniform12(1))
    profs = list(itertools.product(range(2), range(2)))
    with pytest.raises(Exception):
        DirectMechanism((D, D), {p: ((1, (1, 1)),) for p in profs}, {p: (0, 0) for p in profs})
    with pytest.raises(ParameterError):
        DirectMechanism((D, D), {}, {})


def non_bic_mechanism():
    D = enumerate_type_space(uniform12(1))
    spaces = (D, D)
    outcomes, payments = {}, {}
    for prof in itertools.product(range(2), range(2)):
        outcomes[prof] = ((F(1), (1, 0)),)
        payments[prof] = (D.entries[prof[0]].table[1], F(0))
    return DirectMechanism(spaces, outcomes, payments), ValuationSpec(1, "additive", (PrivateInfoDist.uniform([1, 2]),))


def test_non_bic_rejected():
    M, spec = non_bic_mechanism()
    assert not check_bic(M).bic
    pairs = [CoupledPair.uniform(spec, IDENTITY)] * 2
    with pytest.raises(PreconditionError):
        run_reduction(M, pairs, ReductionConfig(F(1, 2), 2, 10, 0))


# ---------------------------------------------------------------- welfare of delta

def test_val_delta_examples(fixture):
    M, cps = fixture
    assert val_delta(cps["identity"]) == 0
    for n in (1, 2, 3):
        spec = uniform12(n)
        assert val_delta([CoupledPair.uniform(spec, Transform("shift", F(1)))]) == n
    assert val_delta(cps["shift"]) == F(1, 2)
    with pytest.raises(ResourceError):
        val_delta(cps["shift"], Caps(assignments=10))


@settings(max_examples=20)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_val_delta_matches_assignment_enumeration(seed, m):
    from mechlab.monotonicity import random_pair
    rng = random.Random(seed)
    pairs = [random_pair(rng, 2, rng.choice(("additive", "kdemand", "xos")), 2) for _ in range(m)]
    per = []
    for pair in pairs:
        D, P = pair.spaces()
        per.append([(e.prob, [f.table[S] - e.table[S] for S in range(4)]) for e, f in zip(D.entries, P.entries)])
    expect = F(0)
    for combo in itertools.product(*per):
        prob = F(1)
        for p, _ in combo:
            prob *= p
        expect += prob * best_assignment([d for _, d in combo], 2)
    assert val_delta(pairs) == expect


# ---------------------------------------------------------------- simulation

def test_config_validation():
    with pytest.raises(ParameterError):
        ReductionConfig(0, 4, 10, 0)
    with pytest.raises(ParameterError):
        ReductionConfig(F(1, 2), 0, 10, 0)
    with pytest.raises(ParameterError):
        ReductionConfig(F(1, 2), 4, 0, 0)


def test_identity_coupling_small_epsilon(fixture):
    M, cps = fixture
    est = run_reduction(M, cps["identity"], ReductionConfig(F(1, 10), 8, 400, 3))
    assert est.bound == F(9, 10) * M.revenue()
    assert est.passed


def test_single_replica_is_degenerate(fixture):
    M, cps = fixture
    est = run_reduction(M, cps["shift"], ReductionConfig(F(1, 2), 1, 300, 4))
    assert est.vcg_mean == 0          # no competition, so VCG prices vanish
    assert est.mean == est.mech_mean


def test_reduction_reproducible(fixture):
    M, cps = fixture
    cfg = ReductionConfig(F(1, 2), 4, 200, 11)
    a = run_reduction(M, cps["shift"], cfg)
    b = run_reduction(M, cps["shift"], cfg)
    assert a.row() == b.row() and a.surrogate_counts == b.surrogate_counts
    c = run_reduction(M, cps["shift"], ReductionConfig(F(1, 2), 4, 200, 12))
    assert c.row() != a.row()


def test_theorem_bound_formula():
    assert theorem_bound(3, F(1, 2), F(1, 2)) == F(1, 2) * (3 - 1)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_surrogate_marginal(fixture, seed):
    M, cps = fixture
    est = run_reduction(M, cps["shift"], ReductionConfig(F(1, 2), 6, 1500, seed))
    for j in range(2):
        assert surrogate_marginal_check(est, M.spaces[j], j).ok


def test_surrogate_marginal_single_replica(fixture):
    M, cps = fixture
    est = run_reduction(M, cps["identity"], ReductionConfig(F(1, 2), 1, 1500, 9))
    rep = surrogate_marginal_check(est, M.spaces[0], 0)
    assert rep.ok and sum(rep.observed) == 1500


def test_empirical_bic_and_negative_control(fixture):
    M, cps = fixture
    ok = verify_empirical_bic(M, cps["identity"], ReductionConfig(F(1, 2), 8, 400, 5))
    assert ok.ok
    shift = verify_empirical_bic(M, cps["shift"], ReductionConfig(F(1, 2), 8, 400, 5))
    assert shift.ok and all(r.mean_gain >= 0 for r in shift.rows)


def test_negative_control_breaks_bic(fixture):
    # prices at the top value make payments matter, so weights that ignore them invite misreports
    base, cps = fixture
    D = base.spaces[0]
    M = serial_posted_price([D, D], [F(3), F(3)])
    cfg = ReductionConfig(F(1, 2), 4, 1000, 5)
    assert verify_empirical_bic(M, cps["identity"], cfg).ok
    bad = verify_empirical_bic(M, cps["identity"], ReductionConfig(F(1, 2), 4, 1000, 5, corrupt=True))
    assert not bad.ok


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6), st.integers(1, 5))
def test_pool_payment_accounting(seed, r):
    M, cps = standard_fixture()
    rng = random.Random(seed)
    left = [rng.randrange(4) for _ in range(r)]
    right = [rng.randrange(4) for _ in range(r)]
    pay, lower = pool_payment_check(M, cps["shift"], F(1, 2), 0, left, right)
    assert pay >= lower


@settings(max_examples=30)
@given(st.integers(0, 10 ** 6), st.integers(1, 6))
def test_type_pools_match_node_matching(seed, r):
    M, cps = standard_fixture()
    Meps = discount_mechanism(M, F(1, 2))
    D, P = cps["shift"][0].spaces()
    bd = _Bidder(Meps, 0, D, P, r, False)
    rng = random.Random(seed)
    left = [rng.randrange(4) for _ in range(r)]
    right = [rng.randrange(4) for _ in range(r)]
    L = tuple(left.count(a) for a in range(4))
    R = tuple(right.count(b) for b in range(4))
    W = [[bd.true_w[a][b] for b in right] for a in left]
    total, flow = bd.solve(L, R)
    assert F(total, bd.den) == max_weight(W)
    node = vcg_matching(W)
    assert sum(map(sum, flow)) == len(node.pairs)
    for i, k in node.pairs:
        a = left[i]
        Lm = list(L)
        Lm[a] -= 1
        price = F(bd.solve(tuple(Lm), R)[0] - (total - bd.wint[a][right[k]]), bd.den)
        assert price == node.prices[i]


def test_setup_from_json():
    obj = {"bidders": 2, "epsilon": "1/2", "r_values": [2, 4], "trials": 50, "seed": 3,
           "instance": {"n": 2, "class": {"kind": "additive"},
                        "items": [{"support": [{"x": 1, "p": "1/2"}, {"x": 3, "p": "1/2"}]}] * 2},
           "mechanism": {"kind": "serial_posted_price", "prices": ["2", "2"]},
           "coupling": {"kind": "shift", "amount": "1/4"}}
    setup = setup_from_json(obj)
    M, cps = standard_fixture()
    assert setup.mechanism.payments == M.payments and setup.r_values == [2, 4]
    assert val_delta(setup.pairs) == val_delta(cps["shift"])
    with pytest.raises(ParameterError):
        setup_from_json({"instance": obj["instance"], "mechanism": {"kind": "nope"}})
    with pytest.raises(ParameterError):
        setup_from_json({"mechanism": obj["mechanism"]})
