"""From observation logs to influence reports.

Pairs an agent's reward with the configuration components of its peers,
estimates their dependence (optionally conditioned on other components),
compares each estimate with the one obtained for a simulated independent
("notional") system and ranks the sources.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import depmeasures as dm
from .config import ComponentRef, ConfigurationComponent
from .depmeasures import DependencyEstimate, Kind, Measure, PairedSamples, SampleSeries
from .errors import DataError, UsageError

__all__ = [
    "ObservationRecord",
    "ObservationWindow",
    "ObservationLog",
    "ConditioningScheme",
    "InfluenceScore",
    "InfluenceReport",
    "assemble_pairs",
    "conditioned_estimate",
    "notional_baseline",
    "conditioned_p_value",
    "build_report",
    "filter_exploration",
    "default_decision_measure",
    "REPORT_COLUMNS",
]

DEFAULT_FACTOR = 1.5
DEFAULT_MIN_RANDOM_FRACTION = 0.66
REPORT_COLUMNS = ("step", "target_agent", "source_agent", "component", "measure",
                  "value", "notional", "p_value", "decision_flag")


def _key(ref):
    return ref.key if isinstance(ref, ComponentRef) else tuple(ref)


@dataclass(frozen=True)
class ObservationRecord:
    step: int
    reward: float
    explored: bool
    # (agent_id, component_index) -> realised value, own components included
    configs: Mapping


class ObservationWindow:
    """Immutable, time-ordered block of observations in column form."""

    def __init__(self, keys, steps, rewards, explored, values, window_len=None):
        self.keys = tuple(tuple(k) for k in keys)
        self._col = {k: i for i, k in enumerate(self.keys)}
        self.steps = np.asarray(steps, dtype=np.int64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.explored = np.asarray(explored, dtype=bool)
        self.values = np.asarray(values, dtype=np.float64).reshape(len(self.steps), len(self.keys))
        self.window_len = len(self.steps) if window_len is None else int(window_len)
        if len(self.steps) > self.window_len:
            raise UsageError("window holds more records than its length allows")
        if np.any(np.diff(self.steps) < 0):
            raise UsageError("records must be time-ordered")

    @classmethod
    def from_records(cls, records: Sequence[ObservationRecord], window_len=None, keys=None):
        records = list(records)
        if keys is None:
            seen = {}
            for r in records:
                for k in r.configs:
                    seen.setdefault(tuple(k), None)
            keys = list(seen)
        keys = [tuple(k) for k in keys]
        values = np.full((len(records), len(keys)), np.nan)
        for i, r in enumerate(records):
            for j, k in enumerate(keys):
                if k in r.configs:
                    values[i, j] = r.configs[k]
        if window_len is not None and len(records) > window_len:
            records = records[-window_len:]
            values = values[-window_len:]
        return cls(keys, [r.step for r in records], [r.reward for r in records],
                   [r.explored for r in records], values, window_len)

    def __len__(self):
        return self.steps.shape[0]

    @property
    def records(self) -> list:
        return [
            ObservationRecord(int(self.steps[i]), float(self.rewards[i]), bool(self.explored[i]),
                              {k: float(self.values[i, j]) for j, k in enumerate(self.keys)
                               if not math.isnan(self.values[i, j])})
            for i in range(len(self))
        ]

    @property
    def exploration_fraction(self) -> float:
        return float(self.explored.mean()) if len(self) else 0.0

    def has(self, ref) -> bool:
        return _key(ref) in self._col

    def column(self, ref) -> np.ndarray:
        key = _key(ref)
        if key not in self._col:
            raise DataError(f"no realisation of component {key} in record 0")
        col = self.values[:, self._col[key]]
        missing = np.flatnonzero(np.isnan(col))
        if missing.size:
            raise DataError(f"no realisation of component {key} in record {int(missing[0])}")
        return col

    def select(self, indices) -> "ObservationWindow":
        idx = np.asarray(indices)
        return ObservationWindow(self.keys, self.steps[idx], self.rewards[idx], self.explored[idx],
                                 self.values[idx], self.window_len)

    def tail(self, n: int) -> "ObservationWindow":
        return self.select(np.arange(max(0, len(self) - n), len(self)))

    def with_column(self, ref, values) -> "ObservationWindow":
        """Copy with the column of ``ref`` replaced (added if absent)."""
        key = _key(ref)
        vals = np.asarray(values, dtype=np.float64)
        if key in self._col:
            new = self.values.copy()
            new[:, self._col[key]] = vals
            return ObservationWindow(self.keys, self.steps, self.rewards, self.explored, new, self.window_len)
        new = np.column_stack([self.values, vals])
        return ObservationWindow(self.keys + (key,), self.steps, self.rewards, self.explored, new, self.window_len)


class ObservationLog:
    """Ring buffer keeping the ``window_len`` most recent observations."""

    def __init__(self, keys, window_len: int):
        if window_len < 1:
            raise UsageError("window_len must be positive")
        self.keys = tuple(tuple(k) for k in keys)
        self.window_len = int(window_len)
        self._steps = np.zeros(window_len, dtype=np.int64)
        self._rewards = np.zeros(window_len)
        self._explored = np.zeros(window_len, dtype=bool)
        self._values = np.full((window_len, len(self.keys)), np.nan)
        self._head = 0
        self._count = 0

    def __len__(self):
        return self._count

    def append(self, step: int, reward: float, explored: bool, values) -> None:
        if self._count and step < self._steps[(self._head - 1) % self.window_len]:
            raise UsageError("records must be appended in time order")
        i = self._head
        self._steps[i] = step
        self._rewards[i] = reward
        self._explored[i] = explored
        self._values[i] = values
        self._head = (i + 1) % self.window_len
        self._count = min(self._count + 1, self.window_len)

    def window(self) -> ObservationWindow:
        if self._count < self.window_len:
            order = np.arange(self._count)
        else:
            order = (np.arange(self.window_len) + self._head) % self.window_len
        return ObservationWindow(self.keys, self._steps[order], self._rewards[order],
                                 self._explored[order], self._values[order], self.window_len)


def _reward_series(window: ObservationWindow) -> SampleSeries:
    return SampleSeries(window.rewards, dm.infer_kind(window.rewards))


def assemble_pairs(window: ObservationWindow, source: ComponentRef) -> PairedSamples:
    """Own reward (x) against the source component (y), paired by time step."""
    if len(window) == 0:
        raise UsageError("cannot assemble pairs from an empty window")
    y = window.column(source)
    return PairedSamples(_reward_series(window), SampleSeries(y, source.descriptor.kind))


@dataclass(frozen=True)
class ConditioningScheme:
    """Components whose values split the records into buckets.

    Continuous components are cut into ``parts_per_continuous_component``
    equal-width parts of their declared range. Discrete components use one
    bucket per value unless ``discrete_parts`` is set, in which case numeric
    components with more values than that are cut like continuous ones.
    """

    conditioned_on: tuple = ()
    parts_per_continuous_component: int = 2
    min_bucket_samples: int = 5
    discrete_parts: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "conditioned_on", tuple(self.conditioned_on))
        if self.parts_per_continuous_component < 1 or self.min_bucket_samples < 1:
            raise UsageError("parts and min_bucket_samples must be positive")

    def excluding(self, source) -> "ConditioningScheme":
        key = _key(source)
        keep = tuple(r for r in self.conditioned_on if r.key != key)
        return ConditioningScheme(keep, self.parts_per_continuous_component,
                                  self.min_bucket_samples, self.discrete_parts)

    def _parts(self, desc: ConfigurationComponent) -> Optional[int]:
        if not desc.is_discrete:
            return self.parts_per_continuous_component
        if (self.discrete_parts is not None and desc.kind is Kind.DISCRETE
                and len(desc.values) > self.discrete_parts):
            return self.discrete_parts
        return None

    def component_cardinality(self, desc: ConfigurationComponent) -> int:
        parts = self._parts(desc)
        return len(desc.values) if parts is None else parts

    @property
    def bucket_count(self) -> int:
        return int(np.prod([self.component_cardinality(r.descriptor) for r in self.conditioned_on]))

    def bucket_ids(self, window: ObservationWindow) -> Optional[np.ndarray]:
        """Bucket index per record, or ``None`` without conditioning components."""
        if not self.conditioned_on:
            return None
        ids = np.zeros(len(window), dtype=np.int64)
        for ref in self.conditioned_on:
            desc = ref.descriptor
            col = window.column(ref)
            parts = self._parts(desc)
            if parts is None:
                levels = np.asarray(sorted(desc.values), dtype=np.float64)
                code = np.searchsorted(levels, col)
                card = len(levels)
            else:
                lo, hi = desc.bounds
                code = np.floor((col - lo) / (hi - lo) * parts).astype(np.int64)
                code = np.clip(code, 0, parts - 1)
                card = parts
            ids = ids * card + code
        return ids


def _bucket_groups(buckets, min_samples):
    order = np.argsort(buckets, kind="stable")
    sorted_b = buckets[order]
    cuts = np.flatnonzero(np.diff(sorted_b)) + 1
    return [g for g in np.split(order, cuts) if g.shape[0] >= min_samples]


def _estimate_buckets(pairs: PairedSamples, buckets, scheme, measure, options) -> DependencyEstimate:
    measure = Measure(measure)
    if not dm.applicable(measure, pairs):
        return DependencyEstimate(measure, float("nan"), len(pairs), defined=False)
    if buckets is None:
        return dm.estimate(measure, pairs, **options)
    if measure is Measure.DISCRETE_MI:
        # all buckets in one pass; same per-bucket values as the loop below
        _, values, counts = dm.discrete_mi_by_group(pairs.x.values, pairs.y.values, buckets)
        keep = counts >= scheme.min_bucket_samples
        if not keep.any():
            return DependencyEstimate(measure, float("nan"), 0, defined=False)
        return DependencyEstimate(measure, math.fsum(values[keep].tolist()), int(counts[keep].sum()))
    total = []
    count = 0
    for idx in _bucket_groups(buckets, scheme.min_bucket_samples):
        sub = PairedSamples(SampleSeries(pairs.x.values[idx], pairs.x.kind),
                            SampleSeries(pairs.y.values[idx], pairs.y.kind))
        est = dm.estimate(measure, sub, **options)
        if est.defined:
            total.append(est.strength)
            count += idx.shape[0]
    if not total:
        return DependencyEstimate(measure, float("nan"), count, defined=False)
    return DependencyEstimate(measure, math.fsum(total), count)


def conditioned_estimate(window: ObservationWindow, source: ComponentRef, scheme: ConditioningScheme,
                         measure, **options) -> DependencyEstimate:
    """Sum over buckets of the per-bucket dependence strength.

    Buckets with fewer than ``scheme.min_bucket_samples`` records are
    skipped. Without conditioning components this is the plain (signed)
    estimate over the whole window. Measures that do not accept the data
    kinds yield an undefined estimate.
    """
    if any(r.key == source.key for r in scheme.conditioned_on):
        raise UsageError(f"cannot condition on the source component {source}")
    pairs = assemble_pairs(window, source)
    return _estimate_buckets(pairs, scheme.bucket_ids(window), scheme, measure, options)


def measure_seed(rng_seed: int, measure) -> np.random.SeedSequence:
    """Seed for the notional series of one measure."""
    return np.random.SeedSequence([int(rng_seed), dm.ALL_MEASURES.index(Measure(measure))])


def notional_series(window, descriptor: ConfigurationComponent, measure, rng_seed) -> np.ndarray:
    rng = np.random.default_rng(measure_seed(rng_seed, measure))
    return descriptor.sample(rng, len(window))


def notional_baseline(window: ObservationWindow, source_descriptor: ConfigurationComponent,
                      scheme: ConditioningScheme, measure, rng_seed: int, **options) -> DependencyEstimate:
    """Same conditioned estimate against an independent, uniformly configured system."""
    if len(window) == 0:
        raise UsageError("cannot build a notional baseline from an empty window")
    y = notional_series(window, source_descriptor, measure, rng_seed)
    pairs = PairedSamples(_reward_series(window), SampleSeries(y, source_descriptor.kind))
    return _estimate_buckets(pairs, scheme.bucket_ids(window), scheme, measure, options)


def conditioned_p_value(window, source, scheme, measure, n_perm: int, rng_seed: int, **options) -> float:
    """Permutation p-value of the conditioned estimate.

    The source series is shuffled within each bucket so the conditioning
    stays intact; ``(1 + exceed) / (1 + n_perm)``.
    """
    if n_perm < 1:
        raise UsageError("n_perm must be at least 1")
    pairs = assemble_pairs(window, source)
    buckets = scheme.bucket_ids(window)
    observed = _estimate_buckets(pairs, buckets, scheme, measure, options)
    if not observed.defined:
        return 1.0
    groups = [np.arange(len(pairs))] if buckets is None else _bucket_groups(buckets, 1)
    rng = np.random.default_rng(rng_seed)
    y = pairs.y.values
    exceed = 0
    for _ in range(n_perm):
        perm = y.copy()
        for g in groups:
            perm[g] = y[g[rng.permutation(g.shape[0])]]
        est = _estimate_buckets(pairs.with_y(perm), buckets, scheme, measure, options)
        if est.strength >= observed.strength:
            exceed += 1
    return (1 + exceed) / (1 + n_perm)


@dataclass(frozen=True)
class InfluenceScore:
    target: str
    source: ComponentRef
    measure: Measure
    value: float
    notional_value: float
    p_value: float
    sample_count: int
    defined: bool = True

    @property
    def strength(self) -> float:
        return abs(self.value) if self.defined else 0.0


@dataclass(frozen=True)
class InfluenceReport:
    scores: tuple
    ranking: tuple
    decision: Optional[ComponentRef]
    decision_measure: Measure
    candidates: tuple = ()
    # number of (source component) estimates, independent of how many measures ran
    estimate_count: int = 0

    def score(self, source, measure) -> InfluenceScore:
        key = _key(source)
        measure = Measure(measure)
        for s in self.scores:
            if s.source.key == key and s.measure is measure:
                return s
        raise KeyError((key, measure))

    def rows(self, step: int, target_agent: str) -> list:
        """CSV rows in the column order of ``REPORT_COLUMNS``."""
        decided = self.decision.key if self.decision is not None else None
        out = []
        for s in self.scores:
            flag = int(s.source.key == decided and s.measure is self.decision_measure)
            out.append((step, target_agent, s.source.agent_id, s.source.name, s.measure.value,
                        s.value, s.notional_value, s.p_value, flag))
        return out


def default_decision_measure(sources: Iterable[ComponentRef]) -> Measure:
    """Discrete MI when every source is discrete, distance correlation otherwise."""
    if all(s.descriptor.is_discrete for s in sources):
        return Measure.DISCRETE_MI
    return Measure.DCOR


def build_report(window: ObservationWindow, sources: Sequence[ComponentRef], scheme: ConditioningScheme,
                 measures: Sequence = dm.ALL_MEASURES, factor: float = DEFAULT_FACTOR, rng_seed: int = 0,
                 decision_measure=None, n_perm: int = 0, max_p_value: Optional[float] = None,
                 target: str = "", **options) -> InfluenceReport:
    """Score every source with every measure and pick at most one to integrate.

    A source is a candidate when its decision-measure strength exceeds
    ``factor`` times the notional strength (and, if ``max_p_value`` is set,
    its permutation p-value is at most that). Sources are ranked by the
    decision-measure strength, ties broken by ``(agent_id, component_index)``;
    the decision is the best-ranked candidate. ``scheme`` may list the
    sources themselves; each source is dropped from its own conditioning.
    ``scheme`` may also be a callable mapping a source to its scheme.
    With ``n_perm == 0`` no p-values are computed (reported as NaN).
    """
    if factor < 1:
        raise UsageError("factor must be at least 1")
    sources = sorted(sources)
    if decision_measure is None:
        decision_measure = default_decision_measure(sources)
    decision_measure = Measure(decision_measure)
    measures = [Measure(m) for m in measures]
    if decision_measure not in measures:
        measures.append(decision_measure)
    if max_p_value is not None and n_perm < 1:
        raise UsageError("a p-value threshold needs n_perm >= 1")
    scores = []
    strength = {}
    candidates = []
    for src in sources:
        sch = (scheme(src) if callable(scheme) else scheme).excluding(src)
        pairs = assemble_pairs(window, src)
        buckets = sch.bucket_ids(window)
        for m in measures:
            real = _estimate_buckets(pairs, buckets, sch, m, options)
            notional = notional_baseline(window, src.descriptor, sch, m, rng_seed, **options)
            p = float("nan")
            if n_perm:
                p = conditioned_p_value(window, src, sch, m, n_perm, rng_seed, **options)
            score = InfluenceScore(target, src, m, real.value, notional.value if notional.defined else float("nan"),
                                   p, real.sample_count, real.defined)
            scores.append(score)
            if m is decision_measure:
                strength[src.key] = score.strength
                beats = real.defined and real.strength > factor * notional.strength
                if beats and (max_p_value is None or p <= max_p_value):
                    candidates.append(src)
    ranking = tuple(sorted(sources, key=lambda s: (-strength[s.key], s.agent_id, s.component_index)))
    decision = next((s for s in ranking if s in candidates), None)
    return InfluenceReport(tuple(scores), ranking, decision, decision_measure,
                           tuple(candidates), len(sources))


def filter_exploration(window: ObservationWindow, min_random_fraction: float = DEFAULT_MIN_RANDOM_FRACTION,
                       rng_seed: int = 0) -> ObservationWindow:
    """Drop uniformly chosen greedy records until explored ones make up the required share."""
    if not 0 < min_random_fraction <= 1:
        raise UsageError("min_random_fraction must lie in (0, 1]")
    if len(window) == 0 or window.exploration_fraction >= min_random_fraction:
        return window
    explored = np.flatnonzero(window.explored)
    greedy = np.flatnonzero(~window.explored)
    keep_greedy = int(math.floor(explored.shape[0] * (1 - min_random_fraction) / min_random_fraction + 1e-9))
    rng = np.random.default_rng(rng_seed)
    chosen = rng.choice(greedy, size=keep_greedy, replace=False)
    return window.select(np.sort(np.concatenate([explored, chosen])))
