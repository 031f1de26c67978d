"""Per-component execution cost accounting for query runs."""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass, field

DENSE, SCATTER, RARE, NEEDLE = "Dense", "Scatter", "Rare", "NeedleInHaystack"

# Components reported for every search, even when their cost is zero.
SEARCH_COMPONENTS = (
    "command.search",
    "command.search.index",
    "command.search.rawdata",
    "command.search.kv",
    "command.search.rex",
)


def classify_density(hits: int, scanned: int) -> str:
    """Result density class from the scanned:hits ratio.

    Dense up to 1 result per 1,000 scanned events, Scatter up to one per
    million, Rare up to one per billion, NeedleInHaystack beyond (and for
    zero hits).
    """
    if hits < 0 or scanned < hits:
        raise ValueError("need scanned >= hits >= 0")
    if hits == 0:
        return NEEDLE
    ratio = scanned / hits
    if ratio <= 1_000:
        return DENSE
    if ratio <= 1_000_000:
        return SCATTER
    if ratio <= 1_000_000_000:
        return RARE
    return NEEDLE


@dataclass
class Component:
    name: str
    duration_s: float = 0.0
    calls: int = 0
    input_count: int | None = None
    output_count: int | None = None


@dataclass
class SearchProfile:
    total_seconds: float = 0.0
    components: list[Component] = field(default_factory=list)
    hits: int = 0
    scanned: int = 0
    density: str = NEEDLE

    def component(self, name: str) -> Component | None:
        for c in self.components:
            if c.name == name:
                return c
        return None

    def duration(self, name: str) -> float:
        c = self.component(name)
        return c.duration_s if c else 0.0

    def to_dict(self) -> dict:
        return {
            "total_seconds": self.total_seconds,
            "hits": self.hits,
            "scanned": self.scanned,
            "density": self.density,
            "components": [
                {
                    "name": c.name,
                    "duration_s": c.duration_s,
                    "calls": c.calls,
                    "input_count": c.input_count,
                    "output_count": c.output_count,
                }
                for c in self.components
            ],
        }


class Profiler:
    """Accumulates component timings; satisfies the index store's timer hook."""

    def __init__(self):
        self._components: dict[str, Component] = {}
        for name in SEARCH_COMPONENTS:
            self._components[name] = Component(name)

    def get(self, name: str) -> Component:
        if name not in self._components:
            self._components[name] = Component(name)
        return self._components[name]

    @contextlib.contextmanager
    def time(self, name: str, calls: int = 1):
        comp = self.get(name)
        start = time.perf_counter()
        try:
            yield comp
        finally:
            comp.duration_s += time.perf_counter() - start
            comp.calls += calls

    def add(self, name: str, duration_s: float = 0.0, calls: int = 0):
        comp = self.get(name)
        comp.duration_s += duration_s
        comp.calls += calls

    def counts(self, name: str, input_count: int | None = None,
               output_count: int | None = None):
        comp = self.get(name)
        if input_count is not None:
            comp.input_count = (comp.input_count or 0) + input_count
        if output_count is not None:
            comp.output_count = (comp.output_count or 0) + output_count

    def build(self, total_seconds: float, hits: int, scanned: int) -> SearchProfile:
        return SearchProfile(
            total_seconds=total_seconds,
            components=list(self._components.values()),
            hits=hits,
            scanned=scanned,
            density=classify_density(hits, scanned),
        )
