"""Seeded random instances and the standard corpus."""
from __future__ import annotations

import random
from fractions import Fraction
from typing import List, Tuple

from .distributions import PrivateInfoDist
from .errors import ParameterError
from .valuation import KINDS, ValuationSpec, down_closure


def _probs(rng: random.Random, m: int) -> List[Fraction]:
    w = [rng.randint(1, 4) for _ in range(m)]
    tot = sum(w)
    return [Fraction(x, tot) for x in w]


def random_spec(rng: random.Random, n: int, kind: str, support: int = 3, vmax: int = 8) -> ValuationSpec:
    """A random spec with integer private info in [0, vmax] and up to ``support`` points per item."""
    if kind not in KINDS:
        raise ParameterError(f"unknown valuation class {kind!r}")
    if n < 1 or support < 1 or vmax < 1:
        raise ParameterError("n, support and vmax must be positive")
    J = rng.randint(2, 3) if kind == "xos" else None
    items = []
    for _ in range(n):
        m = rng.randint(1, support)
        if kind == "xos":
            seen = set()
            while len(seen) < m:
                seen.add(tuple(Fraction(rng.randint(0, vmax)) for _ in range(J)))
            xs = sorted(seen)
        else:
            xs = sorted(Fraction(v) for v in rng.sample(range(0, vmax + 1), m))
        items.append(PrivateInfoDist(tuple(zip(xs, _probs(rng, m)))))
    kw = {}
    if kind == "kdemand":
        kw["k"] = rng.randint(1, max(1, n - 1))
    elif kind == "downward_closed":
        full = (1 << n) - 1
        big = [S for S in range(1, full + 1) if bin(S).count("1") >= 2]
        chosen = [S for S in big if rng.random() < 0.4]
        kw["feasible"] = down_closure(chosen + [1 << i for i in range(n)])
    elif kind == "xos":
        kw["J"] = J
    spec = ValuationSpec(n, kind, tuple(items), **kw)
    if all(max((max(x) if isinstance(x, tuple) else x) for x, _ in d.support) == 0
           for d in spec.items):
        return random_spec(rng, n, kind, support, vmax)
    return spec


def corpus(seed: int, per_class: int = 25, n_values=(2, 3), support: int = 3,
           vmax: int = 8, kinds=KINDS) -> List[Tuple[str, ValuationSpec]]:
    """per_class instances for each valuation class, named deterministically."""
    rng = random.Random(seed)
    out = []
    for kind in kinds:
        for j in range(per_class):
            n = n_values[j % len(n_values)]
            out.append((f"{kind}_{j:03d}", random_spec(rng, n, kind, support, vmax)))
    return out
