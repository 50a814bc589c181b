"""Configuration spaces of agents and references to their components."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .depmeasures import Kind
from .errors import UsageError

__all__ = [
    "ConfigurationComponent",
    "ConfigurationSpace",
    "ComponentRef",
    "categorical",
    "discrete",
    "interval",
]


@dataclass(frozen=True)
class ConfigurationComponent:
    """One axis of a configuration space.

    Discrete components hold their numeric ``values``; categorical ones also
    carry ``labels`` and use the codes ``0..k-1`` as values. Continuous
    components span ``[low, high]`` and may declare a ``grid`` used whenever
    the component has to be discretised (state-space axes).
    """

    name: str
    kind: Kind
    values: tuple = ()
    labels: tuple = ()
    low: Optional[float] = None
    high: Optional[float] = None
    grid: tuple = ()
    # continuous upper bound excluded (angles wrap)
    wraps: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.CONTINUOUS:
            if self.low is None or self.high is None or not self.low < self.high:
                raise UsageError(f"component {self.name}: continuous range needs low < high")
        elif not self.values:
            raise UsageError(f"component {self.name}: discrete component needs values")

    @property
    def is_discrete(self) -> bool:
        return self.kind.is_discrete

    @property
    def levels(self) -> tuple:
        """Discrete values, or the declared grid of a continuous component."""
        if self.is_discrete:
            return self.values
        if not self.grid:
            raise UsageError(f"component {self.name}: continuous component has no grid")
        return self.grid

    @property
    def cardinality(self) -> int:
        return len(self.levels)

    @property
    def bounds(self):
        if self.is_discrete:
            return float(min(self.values)), float(max(self.values))
        return float(self.low), float(self.high)

    def index_of(self, value) -> int:
        """Position of ``value`` among the levels; continuous values snap to the nearest grid point."""
        levels = np.asarray(self.levels, dtype=np.float64)
        if self.is_discrete:
            hits = np.flatnonzero(levels == value)
            if hits.size == 0:
                raise UsageError(f"component {self.name}: {value!r} is not a declared value")
            return int(hits[0])
        diff = np.abs(levels - value)
        if self.wraps:
            span = self.high - self.low
            diff = np.minimum(diff, span - diff)
        return int(np.argmin(diff))

    def contains(self, value) -> bool:
        if self.is_discrete:
            return value in self.values
        if self.wraps:
            return self.low <= value < self.high
        return self.low <= value <= self.high

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Uniform draws from the component's domain."""
        if self.is_discrete:
            vals = np.asarray(self.values, dtype=np.float64)
            return vals[rng.integers(0, vals.shape[0], size=size)]
        return rng.uniform(self.low, self.high, size=size)

    def label(self, value) -> str:
        if self.kind is Kind.CATEGORICAL:
            return str(self.labels[int(value)])
        return repr(float(value)) if not float(value).is_integer() else str(int(value))


def categorical(name: str, labels: Sequence[str]) -> ConfigurationComponent:
    return ConfigurationComponent(name, Kind.CATEGORICAL, values=tuple(range(len(labels))), labels=tuple(labels))


def discrete(name: str, values: Sequence[float]) -> ConfigurationComponent:
    return ConfigurationComponent(name, Kind.DISCRETE, values=tuple(values))


def interval(name: str, low: float, high: float, grid: Sequence[float] = (), wraps: bool = False) -> ConfigurationComponent:
    return ConfigurationComponent(name, Kind.CONTINUOUS, low=float(low), high=float(high), grid=tuple(grid), wraps=wraps)


@dataclass(frozen=True)
class ConfigurationSpace:
    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def refs(self, agent_id: str) -> list:
        return [ComponentRef(agent_id, i, c) for i, c in enumerate(self.components)]


@dataclass(frozen=True, order=True)
class ComponentRef:
    """Component ``component_index`` of agent ``agent_id``; ordered lexicographically."""

    agent_id: str
    component_index: int
    descriptor: ConfigurationComponent = field(compare=False, hash=False, repr=False)

    @property
    def key(self):
        return (self.agent_id, self.component_index)

    @property
    def name(self) -> str:
        return self.descriptor.name

    def __str__(self):
        return f"{self.agent_id}.{self.descriptor.name}"
