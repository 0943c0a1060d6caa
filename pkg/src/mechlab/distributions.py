from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Tuple, Union

from .errors import ParameterError
from .rational import as_fraction

Info = Union[Fraction, Tuple[Fraction, ...]]


def _norm_info(x) -> Info:
    if isinstance(x, (list, tuple)):
        return tuple(as_fraction(v) for v in x)
    return as_fraction(x)


@dataclass(frozen=True)
class PrivateInfoDist:
    """Finite distribution of one item's private information.

    Info is a nonnegative rational, or a tuple of them (one per XOS clause).
    """

    support: Tuple[Tuple[Info, Fraction], ...]

    def __post_init__(self):
        if not self.support:
            raise ParameterError("empty support")
        infos = [x for x, _ in self.support]
        if len(set(infos)) != len(infos):
            raise ParameterError("support entries must be distinct")
        total = Fraction(0)
        for x, p in self.support:
            if not isinstance(p, Fraction) or p <= 0:
                raise ParameterError(f"probabilities must be positive rationals, got {p!r}")
            vals = x if isinstance(x, tuple) else (x,)
            if any((not isinstance(v, Fraction)) or v < 0 for v in vals):
                raise ParameterError(f"private info must be nonnegative rationals, got {x!r}")
            total += p
        if total != 1:
            raise ParameterError(f"probabilities sum to {total}, not 1")

    @classmethod
    def of(cls, pairs: Iterable) -> "PrivateInfoDist":
        """Build from (info, prob) pairs, merging repeated infos."""
        merged: dict = {}
        for x, p in pairs:
            x = _norm_info(x)
            merged[x] = merged.get(x, Fraction(0)) + as_fraction(p)
        return cls(tuple((x, p) for x, p in merged.items() if p != 0))

    @classmethod
    def uniform(cls, infos: Iterable) -> "PrivateInfoDist":
        infos = list(infos)
        return cls.of((x, Fraction(1, len(infos))) for x in infos)

    @classmethod
    def point(cls, info) -> "PrivateInfoDist":
        return cls.of([(info, 1)])

    def map(self, fn) -> "PrivateInfoDist":
        return PrivateInfoDist.of((fn(x), p) for x, p in self.support)

    def __len__(self):
        return len(self.support)


@dataclass(frozen=True)
class OneDimDist:
    """Finite distribution on nonnegative rationals, sorted by value."""

    points: Tuple[Tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        if not self.points:
            raise ParameterError("empty distribution")
        vals = [v for v, _ in self.points]
        if vals != sorted(set(vals)):
            raise ParameterError("values must be distinct and sorted")
        if sum(p for _, p in self.points) != 1 or any(p <= 0 for _, p in self.points):
            raise ParameterError("probabilities must be positive and sum to 1")

    @classmethod
    def of(cls, pairs: Iterable) -> "OneDimDist":
        merged: dict = {}
        for v, p in pairs:
            v = as_fraction(v)
            merged[v] = merged.get(v, Fraction(0)) + as_fraction(p)
        return cls(tuple(sorted((v, p) for v, p in merged.items() if p != 0)))

    @classmethod
    def point(cls, v) -> "OneDimDist":
        return cls.of([(v, 1)])

    @property
    def values(self):
        return [v for v, _ in self.points]

    def prob_ge(self, w) -> Fraction:
        return sum((p for v, p in self.points if v >= w), Fraction(0))

    def prob_gt(self, w) -> Fraction:
        return sum((p for v, p in self.points if v > w), Fraction(0))

    def prob_eq(self, w) -> Fraction:
        return sum((p for v, p in self.points if v == w), Fraction(0))

    def mean(self) -> Fraction:
        return sum((v * p for v, p in self.points), Fraction(0))

    def as_dict(self) -> dict:
        return dict(self.points)

    def dominated_by(self, other: "OneDimDist") -> bool:
        """First-order dominance: P_other[v >= w] >= P_self[v >= w] for all w."""
        grid = sorted(set(self.values) | set(other.values))
        return all(other.prob_ge(w) >= self.prob_ge(w) for w in grid)
