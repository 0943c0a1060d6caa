"""Acceptance suite. Each test prints one PASS/FAIL line for its criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear in the
terminal even when output capture is on.
"""
import json
import random
import sys
from fractions import Fraction as F
from functools import lru_cache

import numpy as np
import pytest

from oracles import best_deterministic_menu, lex_best_matching, vcg_prices
from mechlab.bic_reduction import (ReductionConfig, run_reduction, standard_fixture,
                                   surrogate_marginal_check, verify_empirical_bic)
from mechlab.cli import main
from mechlab.concentration import verify_concentration
from mechlab.core_tail import verify_chain
from mechlab.distributions import OneDimDist, PrivateInfoDist
from mechlab.generate import corpus, random_spec
from mechlab.matching import vcg_matching
from mechlab.monotonicity import CoupledPair, Transform, single_dim_dominator, verify_alpha_monotone
from mechlab.optimal_rev import exact_rev
from mechlab.simple_mech import myerson_one_dim, rev_q, srev_exact, sum_item_rev
from mechlab.valuation import TypeSpace, ValuationSpec, single_item_dist

SEED = 2026


@pytest.fixture
def report(request):
    def emit(k: int, ok: bool, detail: str):
        with request.config.pluginmanager.getplugin("capturemanager").global_and_fixture_disabled():
            print(f"\n[criterion {k}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


@lru_cache(maxsize=None)
def chains():
    return [(name, spec, verify_chain(spec)) for name, spec in corpus(SEED)]


def test_criterion_1_main_bound(report):
    reps = chains()
    assert len(reps) == 100
    kinds = {spec.kind for _, spec, _ in reps}
    assert all(spec.n in (2, 3) and all(len(d.support) <= 3 for d in spec.items) for _, spec, _ in reps)
    main_rows = [rep.entries[-1] for _, _, rep in reps]
    assert all(e.name.startswith("(g)") for e in main_rows)
    # exact rationals: the bound has no logarithm, so the slack is a Fraction
    bad = [name for (name, _, _), e in zip(reps, main_rows)
           if not (isinstance(e.slack, F) and e.slack >= 0)]
    least = min(e.slack for e in main_rows)
    report(1, not bad, f"{len(reps)} instances over {len(kinds)} classes, min slack {least}, failures {bad}")


def test_criterion_2_chain(report):
    reps = chains()
    failures = [(name, e.name) for name, _, rep in reps for e in rep.entries if not e.passed]
    entries = sum(len(rep.entries) for _, _, rep in reps)
    names = sorted({e.name[:3] for _, _, rep in reps for e in rep.entries})
    ok = not failures and names == ["(a)", "(b)", "(c)", "(d)", "(e)", "(f)", "(g)"]
    report(2, ok, f"{entries} chain entries {''.join(names)}, failures {failures}")


def test_criterion_3_additive_separability(report):
    additive = [spec for _, spec in corpus(SEED) if spec.kind == "additive"]
    bad = [k for k, spec in enumerate(additive)
           if srev_exact(spec)[0] != sum(myerson_one_dim(single_item_dist(spec, i))[1] for i in range(spec.n))]
    n = 3
    unit = ValuationSpec(n, "kdemand", tuple(PrivateInfoDist.point(5) for _ in range(n)), k=1)
    witness = sum_item_rev(unit) == n * srev_exact(unit)[0] == 15
    report(3, not bad and witness,
           f"{len(additive)} additive instances, mismatches {bad}; unit-demand factor {n} witness {witness}")


def test_criterion_4_rev_q_point_mass(report):
    value, qp = rev_q(OneDimDist.point(1), F(1, 2))
    report(4, value == F(1, 2), f"rev_q(point 1, 1/2) = {value} (price {qp.price}, atom fraction {qp.atom_fraction})")


def test_criterion_5_concentration(report):
    failures = []
    for name, spec in corpus(SEED):
        rep = verify_concentration(spec, ks=range(11))
        assert rep.method == "exact"
        if not all(r.passed for r in rep.rows) or rep.mean_verdict != "pass":
            failures.append(name)
    report(5, not failures, f"100 instances, 11 tail levels each, mean bound with rounded-down rhs; failures {failures}")


def _shift_scale_pairs(count: int):
    rng = random.Random(SEED)
    kinds = ("additive", "kdemand", "downward_closed", "xos")
    out = []
    for k in range(count):
        spec = random_spec(rng, 2, kinds[k % 4], 2, 6)
        ts = tuple(Transform("shift", F(rng.randint(0, 3))) if rng.random() < 0.5
                   else Transform("scale", F(rng.randint(2, 6), 2)) for _ in range(spec.n))
        out.append((f"pair_{k:02d}", CoupledPair(spec, ts)))
    return out


def test_criterion_6_monotonicity(report):
    pairs = _shift_scale_pairs(50)
    dominated = corpus(SEED)[::4][:25]
    pairs += [(f"{name}:single_dim", single_dim_dominator(spec)) for name, spec in dominated]
    rep = verify_alpha_monotone(pairs, 338)
    single = [r for r in rep.rows if r.single_dim_ok is not None]
    bound_ok = all(r.passed for r in rep.rows)
    single_ok = len(single) == 25 and all(r.single_dim_ok for r in single)
    report(6, bound_ok and single_ok,
           f"{len(rep.rows)} pairs, max Rev(D)/Rev(D+) = {rep.max_gap}, "
           f"Rev(D+) = BRev(D+) on {sum(r.single_dim_ok for r in single)}/25 single-dimensional")


def test_criterion_7_bic_reduction(report):
    M, couplings = standard_fixture()
    lines = []
    ok = True
    for cname, pairs in couplings.items():
        for r in (4, 16, 64):
            est = run_reduction(M, pairs, ReductionConfig(F(1, 2), r, 10_000, SEED))
            pvals = [surrogate_marginal_check(est, M.spaces[j], j).p_value for j in range(M.m)]
            ok &= min(pvals) >= 0.001
            if r == 64:
                ok &= est.passed
                lines.append(f"{cname}: mean {float(est.mean):.4f} >= {est.bound} - 3*{float(est.stderr):.4f}")
        cfg = ReductionConfig(F(1, 2), 64, 10_000, SEED)
        for j in range(M.m):
            ok &= verify_empirical_bic(M, pairs, cfg, j).ok
    rng = np.random.default_rng(SEED)
    agree = 0
    for _ in range(1000):
        r = int(rng.integers(1, 7))
        W = [[F(int(x), 2) for x in row] for row in rng.integers(-4, 13, size=(r, r))]
        res = vcg_matching(W)
        best, edges = lex_best_matching(W)
        agree += res.weight == best and res.pairs == edges and res.prices == vcg_prices(W, res.pairs)
    ok &= agree == 1000
    report(7, ok, "; ".join(lines) + f"; marginals and misreports pass; matching oracle {agree}/1000")


def _four_type_suite():
    """Families whose optimal menu is provably deterministic: one item, or a common single-dimensional shape."""
    rng = random.Random(SEED)
    out = []
    for k in range(25):
        vals = sorted(rng.sample(range(1, 13), 4))
        w = [rng.randint(1, 5) for _ in range(4)]
        out.append(TypeSpace.of(1, [(F(x, sum(w)), (F(0), F(v))) for x, v in zip(w, vals)]))
    for k in range(25):
        a, b = rng.randint(1, 4), rng.randint(1, 4)
        g = (F(0), F(a), F(b), F(max(a, b) + rng.randint(0, min(a, b))))
        w = [rng.randint(1, 5) for _ in range(4)]
        scales = rng.sample(range(1, 9), 4)
        out.append(TypeSpace.of(2, [(F(x, sum(w)), tuple(s * v for v in g)) for x, s in zip(w, scales)]))
    return out


def test_criterion_8_oracle_equivalence(report):
    suite = _four_type_suite()
    assert len(suite) == 50 and all(len(ts) == 4 for ts in suite)
    bad = [k for k, ts in enumerate(suite) if exact_rev(ts)[0] != best_deterministic_menu(ts)]
    report(8, not bad, f"50 four-type instances, mismatches {bad}")


def test_criterion_9_reproducibility(report, tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"n": 2, "class": {"kind": "xos", "J": 2},
                                "items": [{"support": [{"x": ["1", "3"], "p": "1/2"},
                                                       {"x": ["2", "0"], "p": "1/2"}]}] * 2}))
    runs = {
        "gen": ["gen", "--per-class", "2"],
        "rev": ["rev", "--instance", str(inst)],
        "simple": ["simple", "--instance", str(inst)],
        "coretail": ["coretail", "--instance", str(inst), "--format", "csv"],
        "theorem": ["theorem", "--instance", str(inst)],
        "concentration": ["concentration", "--instance", str(inst)],
        "mono": ["mono", "--pairs", "6", "--single-dim"],
        "bicreduce": ["bicreduce", "--coupling", "shift", "--r", "4,16", "--trials", "1000"],
    }
    same = []
    for cmd, argv in runs.items():
        outs = []
        for k in range(2):
            dest = tmp_path / f"{cmd}_{k}.out"
            assert main(argv + ["--seed", str(SEED), "--output", str(dest)]) == 0
            outs.append(dest.read_bytes())
        if outs[0] == outs[1] and outs[0]:
            same.append(cmd)
    report(9, len(same) == len(runs), f"byte-identical reruns for {len(same)}/{len(runs)} commands: {', '.join(same)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
