"""Tabular Q-learning over a state space that can grow and shrink at runtime."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import ComponentRef
from .errors import CycleError, UsageError

__all__ = [
    "Axis",
    "ExpansionRecord",
    "StateSpace",
    "ActionSpace",
    "QPolicy",
    "EpsilonSchedule",
    "IntegrationGraph",
    "select_action",
    "update",
    "expand_state_space",
    "merge_state_space",
    "epsilon_at",
    "q_snapshot_rows",
]


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple
    source: Optional[ComponentRef] = None

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ExpansionRecord:
    source: ComponentRef
    k: int
    step: int


class StateSpace:
    """Product of discrete axes; the last axis varies fastest in the flat index."""

    def __init__(self, axes: Sequence[Axis]):
        self.base_axes = tuple(axes)
        self.axes = list(axes)
        self.lineage = []

    @property
    def size(self) -> int:
        return int(np.prod([a.size for a in self.axes], dtype=np.int64)) if self.axes else 1

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def sources(self) -> set:
        return {r.source.key for r in self.lineage}

    def index(self, coords: Sequence[int]) -> int:
        if len(coords) != len(self.axes):
            raise UsageError(f"expected {len(self.axes)} coordinates, got {len(coords)}")
        idx = 0
        for c, a in zip(coords, self.axes):
            if not 0 <= c < a.size:
                raise UsageError(f"coordinate {c} outside axis {a.name}")
            idx = idx * a.size + int(c)
        return idx

    def coords(self, index: int) -> tuple:
        out = []
        for a in reversed(self.axes):
            index, c = divmod(index, a.size)
            out.append(c)
        return tuple(reversed(out))

    def state_tuple(self, index: int) -> tuple:
        return tuple(a.values[c] for a, c in zip(self.axes, self.coords(index)))

    def replay(self) -> list:
        """Axes obtained by applying the lineage to the base axes."""
        axes = list(self.base_axes)
        for rec in self.lineage:
            d = rec.source.descriptor
            axes.append(Axis(str(rec.source), tuple(d.levels), rec.source))
        return axes


@dataclass(frozen=True)
class ActionSpace:
    """``relative`` actions move each axis by -1/0/+1; ``absolute`` ones jump to a configuration."""

    actions: tuple
    mode: str

    @classmethod
    def relative(cls, n_axes: int) -> "ActionSpace":
        return cls(tuple(itertools.product((-1, 0, 1), repeat=n_axes)), "relative")

    @classmethod
    def absolute(cls, sizes: Sequence[int]) -> "ActionSpace":
        return cls(tuple(itertools.product(*[range(s) for s in sizes])), "absolute")

    def __len__(self):
        return len(self.actions)

    def apply(self, coords: Sequence[int], action: int, sizes: Sequence[int], wrap: Sequence[bool]) -> tuple:
        """Configuration coordinates after ``action``; relative moves wrap or clamp per axis."""
        act = self.actions[action]
        if self.mode == "absolute":
            return tuple(act)
        out = []
        for c, d, s, w in zip(coords, act, sizes, wrap):
            v = c + d
            out.append(v % s if w else min(max(v, 0), s - 1))
        return tuple(out)


class QPolicy:
    def __init__(self, n_states: int, n_actions: int, alpha: float = 0.1, gamma: float = 0.9,
                 init_value: float = 0.0):
        if not 0 < alpha <= 1:
            raise UsageError("alpha must lie in (0, 1]")
        if not 0 <= gamma < 1:
            raise UsageError("gamma must lie in [0, 1)")
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.init_value = float(init_value)
        self.q = np.full((n_states, n_actions), self.init_value)

    @property
    def n_states(self) -> int:
        return self.q.shape[0]

    @property
    def n_actions(self) -> int:
        return self.q.shape[1]

    def greedy(self, state: int) -> int:
        # np.argmax returns the first maximum, i.e. the lowest action index
        return int(np.argmax(self.q[state]))


def select_action(policy: QPolicy, state: int, epsilon: float, rng: np.random.Generator):
    """Epsilon-greedy choice; returns ``(action, explored)``."""
    if not 0 <= state < policy.n_states:
        raise UsageError(f"state {state} outside the state space")
    if rng.random() < epsilon:
        return int(rng.integers(policy.n_actions)), True
    return policy.greedy(state), False


def update(policy: QPolicy, s: int, a: int, r: float, s_next: int) -> None:
    """One-step Q-learning update of cell ``(s, a)``."""
    if not math.isfinite(r):
        raise UsageError("reward must be finite")
    q = policy.q
    q[s, a] += policy.alpha * (r + policy.gamma * q[s_next].max() - q[s, a])


class IntegrationGraph:
    """Directed edges ``observer -> observed`` that must stay acyclic."""

    def __init__(self):
        self.edges = {}

    def _reaches(self, start, goal) -> bool:
        stack = [start]
        seen = set()
        while stack:
            node = stack.pop()
            if node == goal:
                return True
            if node in seen:
                continue
            seen.add(node)
            stack.extend(self.edges.get(node, ()))
        return False

    def would_cycle(self, observer: str, observed: str) -> bool:
        return observer == observed or self._reaches(observed, observer)

    def add(self, observer: str, observed: str) -> None:
        if self.would_cycle(observer, observed):
            raise CycleError(f"integrating {observed} into {observer} would close a cycle")
        self.edges.setdefault(observer, {})
        self.edges[observer][observed] = self.edges[observer].get(observed, 0) + 1

    def remove(self, observer: str, observed: str) -> None:
        targets = self.edges.get(observer, {})
        if observed not in targets:
            raise UsageError(f"no edge {observer} -> {observed}")
        targets[observed] -= 1
        if targets[observed] == 0:
            del targets[observed]

    def edge_list(self) -> list:
        return sorted((a, b) for a, tgt in self.edges.items() for b in tgt)

    def is_acyclic(self) -> bool:
        nodes = set(self.edges) | {b for t in self.edges.values() for b in t}
        return not any(self._reaches(b, a) for a in nodes for b in self.edges.get(a, ()))


def expand_state_space(policy: QPolicy, space: StateSpace, source: ComponentRef, k: Optional[int] = None,
                       step: int = 0, graph: Optional[IntegrationGraph] = None,
                       owner: Optional[str] = None) -> None:
    """Append an axis for ``source``; every child state inherits its parent's Q-row.

    ``k`` defaults to the number of levels of the source component. With a
    ``graph`` the edge ``owner -> source.agent_id`` is added first and the
    expansion is refused if it would close a cycle.
    """
    if source.key in space.sources:
        raise UsageError(f"{source} is already an axis of the state space")
    levels = tuple(source.descriptor.levels)
    if k is None:
        k = len(levels)
    if k != len(levels):
        raise UsageError(f"k={k} does not match the {len(levels)} levels of {source}")
    if graph is not None:
        if owner is None:
            raise UsageError("owner is required when a graph is given")
        graph.add(owner, source.agent_id)
    policy.q = np.repeat(policy.q, k, axis=0)
    space.axes.append(Axis(str(source), levels, source))
    space.lineage.append(ExpansionRecord(source, k, step))


def merge_state_space(policy: QPolicy, space: StateSpace, source: ComponentRef,
                      graph: Optional[IntegrationGraph] = None, owner: Optional[str] = None) -> None:
    """Remove the most recent axis; the parent row becomes the mean of its child rows."""
    if not space.lineage or space.lineage[-1].source.key != source.key:
        raise UsageError(f"{source} is not the most recent expansion")
    rec = space.lineage.pop()
    space.axes.pop()
    policy.q = policy.q.reshape(-1, rec.k, policy.n_actions).mean(axis=1)
    if graph is not None:
        graph.remove(owner, source.agent_id)


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    decay_factor: float = 0.9
    decay_interval_steps: int = 10000
    floor: float = 0.05

    def __post_init__(self):
        if self.decay_interval_steps < 1:
            raise UsageError("decay_interval_steps must be positive")


def epsilon_at(schedule: EpsilonSchedule, step: int) -> float:
    """``max(floor, start * factor ** (step // interval))``."""
    if step < 0:
        raise UsageError("step must be non-negative")
    return max(schedule.floor, schedule.start * schedule.decay_factor ** (step // schedule.decay_interval_steps))


def q_snapshot_rows(policy: QPolicy, space: StateSpace):
    """Header and rows of a Q-table snapshot: state-tuple columns then one column per action."""
    header = [a.name for a in space.axes] + [f"a{j}" for j in range(policy.n_actions)]
    rows = []
    for s in range(policy.n_states):
        rows.append(list(space.state_tuple(s)) + [float(v) for v in policy.q[s]])
    return header, rows
