"""The per-agent runtime loop: observe, share, detect influences, adapt, act, learn."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import influence as inf
from .config import ComponentRef, ConfigurationSpace
from .depmeasures import Measure
from .errors import CycleError, OrderingError, UsageError
from .rl import (ActionSpace, Axis, EpsilonSchedule, IntegrationGraph, QPolicy, StateSpace,
                 epsilon_at, expand_state_space, merge_state_space, select_action, update)

__all__ = [
    "AgentSettings",
    "Exchange",
    "AgentRuntime",
    "StepRecord",
    "MultiAgentSystem",
    "integration_order_check",
]


@dataclass(frozen=True)
class AgentSettings:
    """Learning and detection parameters shared by the agents of one run."""

    alpha: float = 0.1
    gamma: float = 0.9
    schedule: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    action_mode: str = "relative"
    # keep the agent's own configuration as state axes
    own_state: bool = True
    detection: bool = False
    detect_every: int = 10000
    detect_min_samples: int = 10000
    window: int = 10000
    measures: tuple = ()
    decision_measure: Optional[Measure] = None
    factor: float = inf.DEFAULT_FACTOR
    min_random_fraction: Optional[float] = inf.DEFAULT_MIN_RANDOM_FRACTION
    conditioning: bool = False
    parts: int = 2
    discrete_parts: Optional[int] = None
    min_bucket_samples: int = 5
    # also condition on the peer components already in the state space
    condition_on_integrated: bool = True
    n_perm: int = 0
    max_p_value: Optional[float] = None
    # rounds below the threshold before an integrated axis is merged back (0 = never)
    revert_after: int = 3


class Exchange:
    """Write-once store of the configuration each agent uses at each step."""

    def __init__(self, keep: int = 2):
        self._data: Dict[tuple, tuple] = {}
        self.keep = keep

    def publish(self, agent_id: str, step: int, config: tuple) -> None:
        key = (agent_id, step)
        if key in self._data:
            raise UsageError(f"{agent_id} already published a configuration for step {step}")
        self._data[key] = tuple(config)

    def get(self, agent_id: str, step: int) -> tuple:
        try:
            return self._data[(agent_id, step)]
        except KeyError:
            raise OrderingError(f"configuration of {agent_id} for step {step} is not available yet") from None

    def has(self, agent_id: str, step: int) -> bool:
        return (agent_id, step) in self._data

    def prune(self, before: int) -> None:
        for key in [k for k in self._data if k[1] < before]:
            del self._data[key]


@dataclass
class StepRecord:
    step: int
    agent_id: str
    state: tuple
    action: int
    config: tuple
    reward: Optional[float]
    epsilon: float
    explored: bool
    events: list = field(default_factory=list)


class AgentRuntime:
    """One learning agent (Algorithm 1).

    ``peers`` maps every other agent id to its configuration space. The
    agent's configuration is a tuple of level indices into its own space.
    """

    def __init__(self, agent_id: str, own_space: ConfigurationSpace, peers: Dict[str, ConfigurationSpace],
                 settings: AgentSettings, seed: int = 0, graph: Optional[IntegrationGraph] = None):
        self.agent_id = agent_id
        self.own_space = own_space
        self.settings = settings
        self.graph = graph if graph is not None else IntegrationGraph()
        self.own_refs = own_space.refs(agent_id)
        self.peer_refs = {a: sp.refs(a) for a, sp in sorted(peers.items())}
        self.sources = [r for a in self.peer_refs for r in self.peer_refs[a]]
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, _agent_code(agent_id)]))
        self.seed = seed
        self.sizes = tuple(c.cardinality for c in own_space)
        self.wrap = tuple(c.wraps or c.name == "PAN" for c in own_space)
        if settings.action_mode == "relative":
            if not settings.own_state:
                raise UsageError("relative actions need the own configuration in the state")
            self.actions = ActionSpace.relative(len(own_space))
        elif settings.action_mode == "absolute":
            self.actions = ActionSpace.absolute(self.sizes)
        else:
            raise UsageError(f"unknown action mode {settings.action_mode!r}")
        base = [Axis(str(r), tuple(r.descriptor.levels), None) for r in self.own_refs] if settings.own_state else []
        self.space = StateSpace(base)
        self.policy = QPolicy(self.space.size, len(self.actions), settings.alpha, settings.gamma)
        keys = [r.key for r in self.own_refs] + [r.key for r in self.sources]
        self.log = inf.ObservationLog(keys, settings.window)
        self.coords = tuple(int(self.rng.integers(s)) for s in self.sizes)
        self._prev = None
        self._miss: Dict[tuple, int] = {}
        self.estimate_count = 0
        self.reports: List[tuple] = []
        self.refused: List[tuple] = []

    @property
    def integrated(self) -> set:
        return self.space.sources

    def config_values(self, coords=None) -> tuple:
        coords = self.coords if coords is None else coords
        return tuple(float(c.levels[i]) for c, i in zip(self.own_space, coords))

    def _context(self, exchange: Exchange, t: int) -> dict:
        out = {}
        for rec in self.space.lineage:
            src = rec.source
            if src.agent_id not in out:
                out[src.agent_id] = exchange.get(src.agent_id, t)
        return out

    def _state_index(self, coords, peer_configs) -> int:
        idx = list(coords) if self.settings.own_state else []
        for rec in self.space.lineage:
            src = rec.source
            idx.append(src.descriptor.index_of(peer_configs[src.agent_id][src.component_index]))
        return self.space.index(idx)

    def _integrate(self, src: ComponentRef, t: int, events: list) -> None:
        expand_state_space(self.policy, self.space, src, step=t, graph=self.graph, owner=self.agent_id)
        self._miss[src.key] = 0
        events.append({"event": "expand", "source": str(src), "states": self.space.size})

    def _detect(self, t: int, events: list) -> None:
        s = self.settings
        window = self.log.window()
        if s.min_random_fraction is not None:
            window = inf.filter_exploration(window, s.min_random_fraction, rng_seed=self.seed + t)
        if len(window) < 2:
            return
        scheme = self._scheme if s.conditioning else inf.ConditioningScheme()
        measures = s.measures or ((s.decision_measure,) if s.decision_measure else ())
        report = inf.build_report(window, self.sources, scheme, measures, s.factor, rng_seed=self.seed + t,
                                  decision_measure=s.decision_measure, n_perm=s.n_perm,
                                  max_p_value=s.max_p_value, target=self.agent_id)
        self.estimate_count += report.estimate_count
        self.reports.append((t, report))
        candidates = {c.key for c in report.candidates}
        # reversion of integrations that no longer beat the threshold, most recent first
        for key in list(self._miss):
            self._miss[key] = 0 if key in candidates else self._miss[key] + 1
        if s.revert_after:
            while self.space.lineage:
                last = self.space.lineage[-1].source
                if self._miss.get(last.key, 0) < s.revert_after:
                    break
                merge_state_space(self.policy, self.space, last, graph=self.graph, owner=self.agent_id)
                del self._miss[last.key]
                events.append({"event": "merge", "source": str(last), "states": self.space.size})
        for src in report.ranking:
            if src.key not in candidates or src.key in self.integrated:
                continue
            if self.graph.would_cycle(self.agent_id, src.agent_id):
                self.refused.append((t, str(src)))
                events.append({"event": "refused", "source": str(src), "reason": "cycle"})
                continue
            self._integrate(src, t, events)
            break

    def _scheme(self, src: ComponentRef) -> inf.ConditioningScheme:
        s = self.settings
        refs = list(self.own_refs) + [r for r in self.peer_refs[src.agent_id] if r.key != src.key]
        if s.condition_on_integrated:
            seen = {r.key for r in refs}
            refs += [rec.source for rec in self.space.lineage if rec.source.key not in seen]
        return inf.ConditioningScheme(tuple(refs), s.parts, s.min_bucket_samples, s.discrete_parts)

    def integrate_at_start(self, src: ComponentRef) -> None:
        self._integrate(src, 0, [])

    def detect_if_due(self, t: int) -> list:
        """Estimate, evaluate and possibly adapt; returns the structural events."""
        s = self.settings
        events: list = []
        if s.detection and t > 0 and t % s.detect_every == 0 and len(self.log) >= s.detect_min_samples:
            self._detect(t, events)
        return events

    def act(self, t: int, exchange: Exchange, events: Optional[list] = None) -> StepRecord:
        """Action selection for step ``t`` and the deferred Q-update of step ``t - 1``.

        Needs the step-``t`` configuration of every integrated peer in ``exchange``.
        """
        s = self.settings
        events = [] if events is None else events
        peers = self._context(exchange, t)
        state = self._state_index(self.coords, peers)
        eps = epsilon_at(s.schedule, t)
        action, explored = select_action(self.policy, state, eps, self.rng)
        new_coords = self.actions.apply(self.coords, action, self.sizes, self.wrap)
        if self._prev is not None:
            prev_coords, prev_peers, prev_action, prev_reward = self._prev
            prev_state = self._state_index(prev_coords, prev_peers)
            update(self.policy, prev_state, prev_action, prev_reward, state)
        self._state_coords = self.coords
        self.coords = new_coords
        exchange.publish(self.agent_id, t, self.config_values())
        self._pending = (action, explored)
        return StepRecord(t, self.agent_id, self.space.state_tuple(state), action, self.config_values(),
                          None, eps, explored, events)

    def observe(self, t: int, reward: float, joint: Dict[str, tuple]) -> None:
        """Record the step's reward and every agent's configuration."""
        action, explored = self._pending
        values = list(self.config_values())
        for a, refs in self.peer_refs.items():
            values.extend(joint[a][r.component_index] for r in refs)
        self.log.append(t, reward, explored, values)
        # the state is rebuilt from coordinates and peer configurations at update
        # time, so it stays valid if the state space changes in between
        self._prev = (self._state_coords, dict(joint), action, float(reward))


def _agent_code(agent_id: str) -> int:
    return int.from_bytes(agent_id.encode(), "little") % (2 ** 63)


def integration_order_check(runtimes: Sequence[AgentRuntime]) -> IntegrationGraph:
    """Rebuild the observer graph from every runtime's lineage; raises on a cycle."""
    graph = IntegrationGraph()
    for rt in runtimes:
        for rec in rt.space.lineage:
            graph.add(rt.agent_id, rec.source.agent_id)
    return graph


class MultiAgentSystem:
    """Agents stepping one scenario under a per-step barrier.

    Within a step agents act in topological order of the observer graph so
    every integrated peer configuration is published before it is needed.
    """

    def __init__(self, scenario, settings: AgentSettings, seed: int = 0, trace: Optional[Callable] = None):
        self.scenario = scenario
        self.graph = IntegrationGraph()
        self.exchange = Exchange()
        spaces = {a: scenario.space(a) for a in scenario.agent_ids}
        self.agents = {
            a: AgentRuntime(a, spaces[a], {b: sp for b, sp in spaces.items() if b != a}, settings, seed, self.graph)
            for a in scenario.agent_ids
        }
        self.trace = trace
        self.t = 0

    def order(self) -> list:
        ids = list(self.scenario.agent_ids)
        deps = {a: set(self.graph.edges.get(a, {})) for a in ids}
        out = []
        while deps:
            ready = [a for a in ids if a in deps and not deps[a]]
            if not ready:
                raise CycleError("observer graph has a cycle")
            for a in ready:
                out.append(a)
                del deps[a]
            for d in deps.values():
                d.difference_update(ready)
        return out

    def step(self) -> Dict[str, StepRecord]:
        t = self.t
        records = {}
        # detection may add observer edges, so it runs before the action order is fixed
        events = {a: self.agents[a].detect_if_due(t) for a in self.scenario.agent_ids}
        for a in self.order():
            records[a] = self.agents[a].act(t, self.exchange, events[a])
        joint = {a: self.exchange.get(a, t) for a in self.scenario.agent_ids}
        rewards = self.scenario.step(joint)
        for a in self.scenario.agent_ids:
            self.agents[a].observe(t, rewards[a], joint)
            records[a].reward = rewards[a]
        self.exchange.prune(t)
        if self.trace is not None:
            self.trace(t, records)
        self.t += 1
        return records

    def run(self, n_steps: int, on_step: Optional[Callable] = None) -> None:
        for _ in range(n_steps):
            recs = self.step()
            if on_step is not None:
                on_step(self.t - 1, recs)
