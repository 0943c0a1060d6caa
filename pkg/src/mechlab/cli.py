"""Command-line runner: instance generation and verification reports.

Exit codes: 0 every asserted inequality passed, 1 some check failed,
2 bad input, 3 an enumeration cap was exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from . import __version__
from .config import Caps
from .errors import MechlabError, ParameterError, ResourceError
from .io import dumps, load_instance, spec_to_json, write_atomic
from .rational import as_fraction, fmt

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_CAP = 0, 1, 2, 3


class Result:
    """A command's JSON payload, flat CSV rows and overall verdict."""

    def __init__(self, payload, rows: List[dict], ok: bool):
        self.payload = payload
        self.rows = rows
        self.ok = ok


# ---------------------------------------------------------------- helpers

def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MECHLAB_SEED")
    if env is None:
        raise ParameterError("this command needs --seed or MECHLAB_SEED")
    try:
        return int(env)
    except ValueError as exc:
        raise ParameterError(f"MECHLAB_SEED must be an integer, got {env!r}") from exc


def _instances(args) -> List[Tuple[str, object]]:
    out = []
    for path in args.instance or []:
        out.append((Path(path).stem, load_instance(path)))
    if args.corpus:
        root = Path(args.corpus)
        if not root.is_dir():
            raise ParameterError(f"{root} is not a directory")
        for path in sorted(root.glob("*.json")):
            if path.name != "manifest.json":
                out.append((path.stem, load_instance(path)))
    if not out:
        raise ParameterError("give --instance or --corpus")
    return out


def _q_vector(text: Optional[str], n: int) -> Optional[List[Fraction]]:
    if text is None:
        return None
    parts = [as_fraction(x) for x in text.split(",") if x.strip()]
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise ParameterError(f"--q needs 1 or {n} values")
    return parts


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _flat(prefix: dict, obj: dict) -> dict:
    row = dict(prefix)
    for k, v in obj.items():
        if isinstance(v, (list, dict)):
            v = json.dumps(v, sort_keys=True, default=str)
        row[k] = v
    return row


# ---------------------------------------------------------------- commands

def cmd_gen(args, caps: Caps) -> Result:
    from .generate import KINDS, corpus
    from .valuation import check_axioms
    seed = _seed(args)
    n_values = tuple(int(x) for x in args.n.split(","))
    kinds = tuple(args.kinds.split(",")) if args.kinds else KINDS
    specs = corpus(seed, args.per_class, n_values, args.support, args.vmax, kinds)
    manifest = {"seed": seed, "per_class": args.per_class, "n": list(n_values),
                "support": args.support, "vmax": args.vmax, "kinds": list(kinds),
                "version": __version__, "instances": []}
    rows = []
    ok = True
    out = Path(args.out_dir) if args.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for name, spec in specs:
        axioms = check_axioms(spec, caps).ok
        ok &= axioms
        text = dumps(spec_to_json(spec))
        if args.out_dir is not None:
            write_atomic(out / f"{name}.json", text)
        manifest["instances"].append({"name": name, "kind": spec.kind, "n": spec.n, "axioms": axioms})
        rows.append({"name": name, "kind": spec.kind, "n": spec.n, "axioms": axioms})
    if args.out_dir is not None:
        write_atomic(out / "manifest.json", dumps(manifest))
        return Result(manifest, rows, ok)
    return Result({"manifest": manifest, "instances": {n: spec_to_json(s) for n, s in specs}}, rows, ok)


def _rev_one(job):
    name, spec, caps = job
    from .optimal_rev import exact_rev, verify_menu_ic
    from .valuation import enumerate_type_space
    ts = enumerate_type_space(spec, caps)
    value, menu = exact_rev(ts, caps)
    ic = verify_menu_ic(ts, menu)
    return {"name": name, "rev": fmt(value), "menu": menu.to_json(), "ic": ic.ok}


def cmd_rev(args, caps: Caps) -> Result:
    res = _map(_rev_one, [(n, s, caps) for n, s in _instances(args)], args.jobs)
    rows = [{"name": r["name"], "rev": r["rev"], "lotteries": len(r["menu"]["lotteries"]), "ic": r["ic"]}
            for r in res]
    return Result(res, rows, all(r["ic"] for r in res))


TIE_RULE = "buyer ties go to the higher payment, then the lexicographically smallest set"


def _simple_one(job):
    name, spec, qtext, caps = job
    from .core_tail import compute_cutoff
    from .simple_mech import brev, brev_price, induced_pricing, srev_exact, srev_star, sum_item_rev
    q = _q_vector(qtext, spec.n)
    if q is None:
        q = list(compute_cutoff(spec).p)
    srev, prices = srev_exact(spec, caps)
    star = srev_star(spec, q)
    ind_prices, fracs, ind_rev = induced_pricing(spec, q, caps)
    return {"name": name, "srev": fmt(srev), "srev_prices": [fmt(p) for p in prices],
            "brev": fmt(brev(spec, caps)), "brev_price": fmt(brev_price(spec, caps)),
            "sum_item_rev": fmt(sum_item_rev(spec)), "q": [fmt(x) for x in q],
            "srev_star": fmt(star), "induced_prices": [fmt(p) for p in ind_prices],
            "induced_atom_fractions": [fmt(f) for f in fracs], "induced_rev": fmt(ind_rev),
            "srev_star_le_srev": star <= srev, "tie_rule": TIE_RULE}


def cmd_simple(args, caps: Caps) -> Result:
    res = _map(_simple_one, [(n, s, args.q, caps) for n, s in _instances(args)], args.jobs)
    rows = [_flat({}, r) for r in res]
    return Result(res, rows, all(r["srev_star_le_srev"] for r in res))


def _chain_one(job):
    name, spec, eps, mode, caps = job
    from .core_tail import verify_chain
    rep = verify_chain(spec, eps, mode, caps)
    return name, rep.to_json(), rep.ok


def cmd_coretail(args, caps: Caps) -> Result:
    eps = as_fraction(args.epsilon)
    res = _map(_chain_one, [(n, s, eps, args.mode, caps) for n, s in _instances(args)], args.jobs)
    rows = [_flat({"instance": name}, e) for name, rep, _ in res for e in rep["entries"]]
    return Result({name: rep for name, rep, _ in res}, rows, all(ok for _, _, ok in res))


def cmd_theorem(args, caps: Caps) -> Result:
    eps = as_fraction(args.epsilon)
    if args.instance or args.corpus:
        inst = _instances(args)
    else:
        from .generate import corpus
        inst = corpus(_seed(args))
    res = _map(_chain_one, [(n, s, eps, args.mode, caps) for n, s in inst], args.jobs)
    payload = {}
    rows = []
    ok = True
    for name, rep, _ in res:
        main = rep["entries"][-1]
        payload[name] = {"rev": rep["rev"], "srev_star": rep["srev_star"], "brev": rep["brev"],
                         "bound": main}
        rows.append(_flat({"instance": name, "rev": rep["rev"], "srev_star": rep["srev_star"],
                           "brev": rep["brev"]}, main))
        ok &= main["pass"]
    return Result(payload, rows, ok)


def _conc_one(job):
    name, spec, seed, caps = job
    from .concentration import verify_concentration
    rep = verify_concentration(spec, caps=caps, seed=seed)
    return name, rep.to_json(), rep.ok


def cmd_concentration(args, caps: Caps) -> Result:
    seed = args.seed if args.seed is not None else (
        int(os.environ["MECHLAB_SEED"]) if "MECHLAB_SEED" in os.environ else None)
    res = _map(_conc_one, [(n, s, seed, caps) for n, s in _instances(args)], args.jobs)
    rows = [_flat({"instance": name}, r) for name, rep, _ in res for r in rep["rows"]]
    return Result({name: rep for name, rep, _ in res}, rows, all(ok for _, _, ok in res))


def _parse_transform(text: str):
    from .monotonicity import Transform
    kind, _, amount = text.partition(":")
    return Transform(kind, as_fraction(amount or 0))


def cmd_mono(args, caps: Caps) -> Result:
    from .monotonicity import (CoupledPair, converse_bound, random_pair, single_dim_dominator,
                               verify_alpha_monotone)
    from .simple_mech import brev, srev_exact
    pairs = []
    if args.instance or args.corpus:
        t = _parse_transform(args.transform)
        for name, spec in _instances(args):
            pairs.append((f"{name}:{args.transform}", CoupledPair.uniform(spec, t)))
            if args.single_dim:
                pairs.append((f"{name}:single_dim", single_dim_dominator(spec, caps)))
    else:
        rng = random.Random(_seed(args))
        from .generate import KINDS
        for k in range(args.pairs):
            pairs.append((f"pair_{k:03d}", random_pair(rng, rng.choice((2, 3)), KINDS[k % len(KINDS)], 2)))
    rep = verify_alpha_monotone(pairs, as_fraction(args.alpha), caps)
    payload = rep.to_json()
    if args.converse:
        conv = {}
        for pid, pair in pairs:
            D, _ = pair.spaces(caps)
            conv[pid] = fmt(converse_bound(args.alpha, srev_exact(D, caps)[0], brev(D)))
        payload["converse_bound"] = conv
    return Result(payload, [_flat({}, r) for r in payload["rows"]], rep.ok)


def cmd_bicreduce(args, caps: Caps) -> Result:
    from .bic_reduction import (ReductionConfig, ReductionSetup, run_reduction, setup_from_json,
                                standard_fixture, surrogate_marginal_check, verify_empirical_bic)
    if args.config:
        try:
            obj = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ParameterError(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{args.config}: invalid JSON: {exc}") from exc
        if args.seed is not None:
            obj["seed"] = args.seed
        elif "seed" not in obj:
            obj["seed"] = _seed(args)
        setup = setup_from_json(obj, caps)
    else:
        M, couplings = standard_fixture()
        if args.coupling not in couplings:
            raise ParameterError(f"unknown fixture coupling {args.coupling!r}")
        setup = ReductionSetup(M, couplings[args.coupling], as_fraction(args.epsilon),
                               [4, 16, 64], 10_000, _seed(args))
    if args.r:
        setup.r_values = [int(x) for x in args.r.split(",")]
    if args.trials:
        setup.trials = args.trials
    rows = []
    marginals = []
    for r in setup.r_values:
        cfg = ReductionConfig(setup.epsilon, r, setup.trials, setup.seed)
        est = run_reduction(setup.mechanism, setup.pairs, cfg, caps)
        rows.append(est.row())
        for j in range(setup.mechanism.m):
            mr = surrogate_marginal_check(est, setup.mechanism.spaces[j], j)
            marginals.append(dict(mr.to_json(), r=r))
    last = ReductionConfig(setup.epsilon, setup.r_values[-1], min(setup.trials, 2000), setup.seed)
    bic = [verify_empirical_bic(setup.mechanism, setup.pairs, last, j, caps=caps).to_json()
           for j in range(setup.mechanism.m)]
    ok = rows[-1]["pass"] and all(m["pass"] for m in marginals) and all(b["pass"] for b in bic)
    payload = {"mechanism": setup.mechanism.to_json(), "epsilon": fmt(setup.epsilon),
               "seed": setup.seed, "estimates": rows, "surrogate_marginals": marginals,
               "empirical_bic": bic, "pass": ok}
    return Result(payload, rows, ok)


COMMANDS = {
    "gen": cmd_gen, "rev": cmd_rev, "simple": cmd_simple, "coretail": cmd_coretail,
    "theorem": cmd_theorem, "concentration": cmd_concentration, "mono": cmd_mono,
    "bicreduce": cmd_bicreduce,
}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", action="append", help="instance JSON (repeatable)")
    common.add_argument("--corpus", help="directory of instance JSON files")
    common.add_argument("--seed", type=int, help="seed (falls back to MECHLAB_SEED)")
    common.add_argument("--caps", help="e.g. lp_cells=5000,enum_items=12")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", help="report path (default stdout)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for corpus runs")
    common.add_argument("--mode", choices=("exact_half", "threshold_only"), default="exact_half")
    common.add_argument("--epsilon", default="1/2")
    common.add_argument("--q", help="quantiles, one value or one per item")

    p = argparse.ArgumentParser(prog="mechlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mechlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a seeded random corpus")
    g.add_argument("--out-dir", help="directory for instance files and manifest.json")
    g.add_argument("--per-class", type=int, default=25)
    g.add_argument("--n", default="2,3", help="comma-separated item counts")
    g.add_argument("--support", type=int, default=3)
    g.add_argument("--vmax", type=int, default=8)
    g.add_argument("--kinds", help="comma-separated valuation classes")
    g.set_defaults(out=".")

    sub.add_parser("rev", parents=[common], help="optimal revenue and menu")
    sub.add_parser("simple", parents=[common], help="SRev, BRev and SRev* benchmarks")
    sub.add_parser("coretail", parents=[common], help="cutoff and inequality chain")
    sub.add_parser("theorem", parents=[common], help="main revenue bound on a corpus")
    sub.add_parser("concentration", parents=[common], help="grand-bundle tail bounds")

    m = sub.add_parser("mono", parents=[common], help="approximate revenue monotonicity")
    m.add_argument("--alpha", default="338")
    m.add_argument("--transform", default="shift:1", help="kind:amount applied to every item")
    m.add_argument("--single-dim", action="store_true", help="also test the single-dimensional dominator")
    m.add_argument("--pairs", type=int, default=50, help="generated pairs when no instance is given")
    m.add_argument("--converse", action="store_true", help="report the converse bound")

    b = sub.add_parser("bicreduce", parents=[common], help="replica-surrogate reduction simulation")
    b.add_argument("--config", help="reduction config JSON")
    b.add_argument("--coupling", default="identity", help="fixture coupling: identity or shift")
    b.add_argument("--r", help="comma-separated replica counts")
    b.add_argument("--trials", type=int)
    return p


def _render(result: Result, fmt_name: str) -> str:
    if fmt_name == "json":
        return dumps(result.payload)
    buf = io.StringIO()
    fields: List[str] = []
    for row in result.rows:
        for k in row:
            if k not in fields:
                fields.append(k)
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for row in result.rows:
        w.writerow(row)
    return buf.getvalue()


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        caps = Caps.parse(args.caps)
        result = COMMANDS[args.command](args, caps)
    except ResourceError as exc:
        print(f"mechlab: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ParameterError, json.JSONDecodeError) as exc:
        print(f"mechlab: bad input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MechlabError as exc:
        print(f"mechlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARSE if _is_input_error(exc) else EXIT_FAIL
    text = _render(result, args.format)
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    if not result.ok:
        print("mechlab: at least one check failed", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_FAIL


def _is_input_error(exc: Exception) -> bool:
    from .errors import (AxiomViolation, DegenerateInstanceError, DominanceError, EmptyEventError,
                         PreconditionError)
    return isinstance(exc, (AxiomViolation, DegenerateInstanceError, DominanceError, EmptyEventError,
                            PreconditionError))


if __name__ == "__main__":
    sys.exit(main())
