"""JSON instance schema and deterministic report serialization."""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Union

from .distributions import PrivateInfoDist
from .errors import MechlabError, ParameterError
from .rational import as_fraction, fmt
from .valuation import ValuationSpec, items_of, mask_of


def _x_to_json(x):
    if isinstance(x, tuple):
        return [fmt(v) for v in x]
    return fmt(x)


def spec_to_json(spec: ValuationSpec) -> dict:
    cls = {"kind": spec.kind}
    if spec.kind == "kdemand":
        cls["k"] = spec.k
    elif spec.kind == "downward_closed":
        cls["feasible"] = sorted((items_of(S) for S in spec.feasible), key=lambda s: (len(s), s))
    elif spec.kind == "xos":
        cls["J"] = spec.J
    return {
        "n": spec.n,
        "class": cls,
        "items": [{"support": [{"x": _x_to_json(x), "p": fmt(p)} for x, p in d.support]}
                  for d in spec.items],
    }


def _num(v):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ParameterError(f"expected a number or rational string, got {v!r}")
    return as_fraction(v)


def spec_from_json(obj) -> ValuationSpec:
    try:
        n = obj["n"]
        cls = obj["class"]
        kind = cls["kind"]
        if not isinstance(n, int) or isinstance(n, bool):
            raise ParameterError("n must be an integer")
        items = []
        for it in obj["items"]:
            pairs = []
            for entry in it["support"]:
                x = entry["x"]
                x = tuple(_num(v) for v in x) if isinstance(x, list) else _num(x)
                pairs.append((x, _num(entry["p"])))
            items.append(PrivateInfoDist(tuple(pairs)))
        kw = {}
        if kind == "kdemand":
            kw["k"] = cls["k"]
        elif kind == "downward_closed":
            kw["feasible"] = frozenset(mask_of(s) for s in cls["feasible"]) | {0}
        elif kind == "xos":
            kw["J"] = cls["J"]
        return ValuationSpec(n, kind, tuple(items), **kw)
    except MechlabError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParameterError(f"malformed instance: {exc!r}") from exc


def load_instance(path: Union[str, Path]) -> ValuationSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON: {exc}") from exc
    return spec_from_json(obj)


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, Fraction):
        return fmt(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_atomic(path: Union[str, Path], text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)
