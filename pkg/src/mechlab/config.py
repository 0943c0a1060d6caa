from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ParameterError


@dataclass(frozen=True)
class Caps:
    """Enumeration limits. Exceeding one raises ResourceError."""

    enum_items: int = 20
    lp_cells: int = 20_000
    srev_vertices: int = 2_000_000
    pair_checks: int = 5_000_000
    assignments: int = 1_000_000

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ParameterError(f"cap {f.name} must be positive")

    @classmethod
    def parse(cls, text: str | None) -> "Caps":
        """Parse ``"lp_cells=100,enum_items=12"`` into a Caps."""
        if not text:
            return cls()
        known = {f.name for f in fields(cls)}
        updates = {}
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise ParameterError(f"bad cap spec {part!r}")
            try:
                updates[key] = int(value)
            except ValueError as exc:
                raise ParameterError(f"bad cap value {part!r}") from exc
        return replace(cls(), **updates)


DEFAULT_CAPS = Caps()
