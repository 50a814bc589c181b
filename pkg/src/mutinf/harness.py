"""Experiment runner: detection-rate curves, reward curves and CSV output.

Experiments are described by flat ``key = value`` spec files (see
:func:`parse_spec`). Run ``r`` of an experiment uses the seed
``seed_base + r``, so a spec and its seed base determine every output byte.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import influence as inf
from .agent import AgentSettings, MultiAgentSystem
from .config import ComponentRef
from .depmeasures import ALL_MEASURES, Measure
from .env import make_scenario
from .env.camera import load_layout
from .errors import UsageError
from .rl import EpsilonSchedule, epsilon_at, q_snapshot_rows

__all__ = [
    "SpecError",
    "ExperimentSpec",
    "parse_spec",
    "load_spec",
    "format_spec",
    "DetectionCurve",
    "RewardCurve",
    "run_detection_experiment",
    "run_reward_experiment",
    "simulate",
    "plateau",
    "smooth",
    "emit_csv",
    "DETECTION_COLUMNS",
    "REWARD_COLUMNS",
    "NETWORK_COLUMNS",
    "EVENT_COLUMNS",
]

DETECTION_COLUMNS = ("samples", "measure", "detection_rate", "n_runs", "component", "step", "epsilon")
REWARD_COLUMNS = ("step", "mean_reward", "n_runs", "smoothing_window")
NETWORK_COLUMNS = ("from_agent", "to_agent", "components", "run")
EVENT_COLUMNS = ("run", "step", "agent", "event", "source")

MODES = ("random-config", "q-relative", "q-absolute")
ADAPTATIONS = ("none", "at-start", "dynamic")


class SpecError(UsageError):
    """Malformed or inconsistent experiment spec."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment."""

    scenario_id: str
    name: str = ""
    n_runs: int = 10
    n_steps: int = 100
    mode: str = "random-config"
    adaptation: str = "none"
    measures: tuple = ALL_MEASURES
    conditioning: bool = False
    parts: int = 2
    discrete_parts: Optional[int] = None
    min_bucket_samples: int = 5
    window: int = 10000
    seed_base: int = 0
    # camera configuration spaces: continuous or discrete
    config_mode: str = "continuous"
    layout: Optional[str] = None
    # detection experiments
    target: str = ""
    source: str = ""
    comparator: str = "notional"
    components: tuple = ()
    grid: tuple = ()
    eval_every: int = 0
    # learning
    alpha: float = 0.1
    gamma: float = 0.9
    own_state: bool = True
    eps_start: float = 1.0
    eps_factor: float = 0.9
    eps_interval: int = 10000
    eps_floor: float = 0.05
    detect_every: int = 10000
    detect_min_samples: int = 0
    decision_measure: Optional[Measure] = None
    factor: float = inf.DEFAULT_FACTOR
    min_random_fraction: Optional[float] = inf.DEFAULT_MIN_RANDOM_FRACTION
    n_perm: int = 0
    max_p_value: Optional[float] = None
    revert_after: int = 3
    # observer:observed pairs integrated before the first step (default: overlap pairs)
    at_start: tuple = ()
    at_start_components: tuple = ()
    smoothing: int = 1000
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise SpecError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.adaptation not in ADAPTATIONS:
            raise SpecError(f"adaptation must be one of {', '.join(ADAPTATIONS)}, got {self.adaptation!r}")
        if self.config_mode not in ("continuous", "discrete"):
            raise SpecError(f"config_mode must be continuous or discrete, got {self.config_mode!r}")
        if self.n_runs < 1 or self.n_steps < 1:
            raise SpecError("n_runs and n_steps must be positive")
        if self.window < 1 or self.smoothing < 1 or self.jobs < 1:
            raise SpecError("window, smoothing and jobs must be positive")
        if list(self.grid) != sorted(set(self.grid)) or any(g < 1 for g in self.grid):
            raise SpecError("grid must be strictly increasing positive sample counts")
        if self.grid and self.grid[-1] > self.n_steps:
            raise SpecError("grid exceeds n_steps")

    @property
    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_start, self.eps_factor, self.eps_interval, self.eps_floor)

    @property
    def action_mode(self) -> str:
        return "absolute" if self.mode == "q-absolute" else "relative"

    def settings(self) -> AgentSettings:
        return AgentSettings(
            alpha=self.alpha, gamma=self.gamma, schedule=self.schedule, action_mode=self.action_mode,
            own_state=self.own_state, detection=self.adaptation == "dynamic", detect_every=self.detect_every,
            detect_min_samples=self.detect_min_samples or self.window, window=self.window,
            measures=tuple(self.measures) if self.decision_measure is None else (), decision_measure=self.decision_measure,
            factor=self.factor, min_random_fraction=self.min_random_fraction, conditioning=self.conditioning,
            parts=self.parts, discrete_parts=self.discrete_parts, min_bucket_samples=self.min_bucket_samples,
            n_perm=self.n_perm, max_p_value=self.max_p_value, revert_after=self.revert_after,
        )


_FIELDS = {f.name: f for f in fields(ExperimentSpec)}
_INT = {"n_runs", "n_steps", "parts", "discrete_parts", "min_bucket_samples", "window", "seed_base",
        "eval_every", "eps_interval", "detect_every", "detect_min_samples", "n_perm", "revert_after",
        "smoothing", "jobs"}
_FLOAT = {"alpha", "gamma", "eps_start", "eps_factor", "eps_floor", "factor", "min_random_fraction", "max_p_value"}
_BOOL = {"conditioning", "own_state"}
_OPTIONAL = {"discrete_parts", "layout", "decision_measure", "min_random_fraction", "max_p_value"}
_TRUE = ("1", "true", "on", "yes")
_FALSE = ("0", "false", "off", "no")


def _convert(key: str, raw: str, lineno: int):
    where = f"line {lineno}: {key}"
    text = raw.strip()
    if key in _OPTIONAL and text.lower() in ("", "none"):
        return None
    try:
        if key in _INT:
            return int(text)
        if key in _FLOAT:
            return float(text)
    except ValueError:
        raise SpecError(f"{where}: expected a number, got {text!r}") from None
    if key in _BOOL:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise SpecError(f"{where}: expected on/off, got {text!r}")
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    if key == "measures":
        if items == ("all",):
            return ALL_MEASURES
        try:
            return tuple(Measure(m) for m in items)
        except ValueError as exc:
            raise SpecError(f"{where}: {exc}") from None
    if key == "decision_measure":
        try:
            return Measure(text)
        except ValueError as exc:
            raise SpecError(f"{where}: {exc}") from None
    if key == "grid":
        try:
            return tuple(_grid_items(items))
        except ValueError:
            raise SpecError(f"{where}: expected integers or start:stop:step ranges, got {text!r}") from None
    if key in ("components", "at_start_components"):
        return tuple(s.upper() for s in items)
    if key == "at_start":
        pairs = []
        for item in items:
            obs, _, src = item.partition(":")
            if not obs or not src:
                raise SpecError(f"{where}: expected observer:observed pairs, got {item!r}")
            pairs.append((obs.strip(), src.strip()))
        return tuple(pairs)
    return text


def _grid_items(items):
    out = []
    for item in items:
        if ":" in item:
            start, stop, step = (int(v) for v in item.split(":"))
            out.extend(range(start, stop + 1, step))
        else:
            out.append(int(item))
    return out


def parse_spec(text: str, **overrides) -> ExperimentSpec:
    """Build a spec from ``key = value`` lines; ``#`` starts a comment.

    Lists are comma separated, ranges in ``grid`` are ``start:stop:step``
    (inclusive), booleans accept on/off, true/false, yes/no, 1/0.
    """
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise SpecError(f"line {lineno}: expected key = value")
        if key not in _FIELDS:
            raise SpecError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise SpecError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "scenario_id" not in values:
        raise SpecError("spec needs a scenario_id")
    try:
        return ExperimentSpec(**values)
    except TypeError as exc:
        raise SpecError(str(exc)) from None


def load_spec(path, **overrides) -> ExperimentSpec:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec file {p}: {exc.strerror or exc}") from None
    spec = parse_spec(text, **overrides)
    if not spec.name:
        spec = replace(spec, name=p.stem)
    return spec


def format_spec(spec: ExperimentSpec) -> str:
    """Inverse of :func:`parse_spec` (one line per field)."""
    lines = []
    for f in fields(spec):
        v = getattr(spec, f.name)
        if v is None:
            text = "none"
        elif isinstance(v, bool):
            text = "on" if v else "off"
        elif f.name == "at_start":
            text = ", ".join(f"{a}:{b}" for a, b in v)
        elif isinstance(v, tuple):
            text = ", ".join(m.value if isinstance(m, Measure) else str(m) for m in v)
        elif isinstance(v, Measure):
            text = v.value
        else:
            text = str(v)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def _scenario(spec: ExperimentSpec, seed: int):
    layout = load_layout(spec.layout) if spec.layout else None
    return make_scenario(spec.scenario_id, spec.config_mode, seed, layout=layout)


def _ref(scenario, agent_id: str, name: str) -> ComponentRef:
    for ref in scenario.space(agent_id).refs(agent_id):
        if ref.name == name:
            return ref
    raise SpecError(f"agent {agent_id!r} has no component {name!r}")


# ---------------------------------------------------------------- detection


@dataclass
class DetectionCurve:
    """Fraction of runs in which the influencing source scored strictly higher than the comparator."""

    spec: ExperimentSpec
    # (component, measure, grid index) -> wins
    wins: dict
    samples: dict
    steps: tuple
    epsilons: tuple
    n_runs: int

    def rate(self, component: str, measure, index: int) -> float:
        return self.wins[(component, Measure(measure), index)] / self.n_runs

    def rates(self, component: str, measure) -> np.ndarray:
        return np.array([self.rate(component, measure, i) for i in range(len(self.steps))])

    def rows(self) -> list:
        out = []
        for comp in self.spec.components:
            for i, step in enumerate(self.steps):
                for m in self.spec.measures:
                    out.append((self.samples[(comp, i)], m.value, self.rate(comp, m, i), self.n_runs,
                                comp, step, self.epsilons[i]))
        return out


def _check_detection(spec: ExperimentSpec, scenario):
    ids = scenario.agent_ids
    for who in ("target", "source"):
        if getattr(spec, who) not in ids:
            raise SpecError(f"{who} {getattr(spec, who)!r} is not an agent of {spec.scenario_id}")
    if spec.comparator != "notional" and spec.comparator not in ids:
        raise SpecError(f"comparator must be 'notional' or an agent of {spec.scenario_id}")
    if len({spec.target, spec.source, spec.comparator}) < 3:
        raise SpecError("target, source and comparator must differ")
    if not spec.components:
        raise SpecError("detection experiments need components")
    for c in spec.components:
        _ref(scenario, spec.source, c)
    if spec.mode == "random-config" and not spec.grid:
        raise SpecError("random-config detection needs a grid of sample counts")
    if spec.mode != "random-config" and spec.eval_every < 1:
        raise SpecError("learning detection experiments need eval_every")


def _scheme_for(spec, scenario, src: ComponentRef) -> inf.ConditioningScheme:
    if not spec.conditioning:
        return inf.ConditioningScheme()
    own = scenario.space(spec.target).refs(spec.target)
    others = [r for r in scenario.space(src.agent_id).refs(src.agent_id) if r.key != src.key]
    return inf.ConditioningScheme(tuple(own) + tuple(others), spec.parts, spec.min_bucket_samples,
                                  spec.discrete_parts)


def _score_window(spec, scenario, window, rng_seed) -> dict:
    """Win flags per (component, measure) for one window."""
    out = {}
    for comp in spec.components:
        src = _ref(scenario, spec.source, comp)
        sch = _scheme_for(spec, scenario, src)
        if spec.comparator != "notional":
            cmp_ref = _ref(scenario, spec.comparator, comp)
            cmp_sch = _scheme_for(spec, scenario, cmp_ref)
        for m in spec.measures:
            real = inf.conditioned_estimate(window, src, sch, m)
            if spec.comparator == "notional":
                other = inf.notional_baseline(window, src.descriptor, sch, m, rng_seed)
            else:
                other = inf.conditioned_estimate(window, cmp_ref, cmp_sch, m)
            other_strength = other.strength if other.defined else 0.0
            out[(comp, m)] = bool(real.defined and real.strength > other_strength)
    return out


def _random_log(spec, scenario, seed: int) -> inf.ObservationWindow:
    """Target's observations under uniformly random configurations of every agent."""
    # a spawn key keeps this stream apart from the notional series seeded with [seed, measure index]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    ids = scenario.agent_ids
    spaces = {a: scenario.space(a) for a in ids}
    n = spec.grid[-1]
    draws = {a: np.column_stack([c.sample(rng, n) for c in spaces[a]]) for a in ids}
    keys = [r.key for a in ids for r in spaces[a].refs(a)]
    values = np.column_stack([draws[a] for a in ids])
    rewards = np.empty(n)
    for t in range(n):
        joint = {a: tuple(draws[a][t]) for a in ids}
        rewards[t] = scenario.step(joint)[spec.target]
    return inf.ObservationWindow(keys, np.arange(n), rewards, np.ones(n, dtype=bool), values)


def _detection_run(spec: ExperimentSpec, r: int):
    seed = spec.seed_base + r
    scenario = _scenario(spec, seed)
    flags = []
    if spec.mode == "random-config":
        window = _random_log(spec, scenario, seed)
        for g in spec.grid:
            flags.append((g, g, 1.0, _score_window(spec, scenario, window.select(np.arange(g)), seed)))
        return flags
    system = MultiAgentSystem(scenario, replace(spec, adaptation="none").settings(), seed)
    agent = system.agents[spec.target]
    for t in range(1, spec.n_steps + 1):
        system.step()
        if t % spec.eval_every == 0 and len(agent.log) >= spec.window:
            window = agent.log.window()
            eps = epsilon_at(spec.schedule, t - 1)
            flags.append((len(window), t, eps, _score_window(spec, scenario, window, seed + t)))
    return flags


def _map_runs(fn, spec, jobs):
    runs = range(spec.n_runs)
    if jobs <= 1 or spec.n_runs == 1:
        return [fn(spec, r) for r in runs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # results are keyed by run index, so worker scheduling does not matter
        return list(pool.map(fn, [spec] * spec.n_runs, runs))


def run_detection_experiment(spec: ExperimentSpec) -> DetectionCurve:
    """Detection rate per component, measure and grid point over ``spec.n_runs`` seeded runs.

    ``random-config`` runs draw every configuration uniformly and score the
    first ``g`` samples for each grid point ``g``. Learning modes run
    independent Q-learners and score the target's last ``window`` records
    every ``eval_every`` steps. A run counts as a detection only if the
    source's strength is strictly higher than the comparator's.
    """
    _check_detection(spec, _scenario(spec, spec.seed_base))
    results = _map_runs(_detection_run, spec, spec.jobs)
    points = results[0]
    if any(len(res) != len(points) for res in results):
        raise RuntimeError("runs produced different evaluation grids")
    wins = {}
    samples = {}
    for comp in spec.components:
        for i, (n, _, _, _) in enumerate(points):
            samples[(comp, i)] = n
            for m in spec.measures:
                wins[(comp, m, i)] = sum(int(res[i][3][(comp, m)]) for res in results)
    return DetectionCurve(spec, wins, samples, tuple(p[1] for p in points), tuple(p[2] for p in points),
                          spec.n_runs)


# ---------------------------------------------------------------- rewards


@dataclass
class RewardCurve:
    """Per-step system reward (sum over agents) averaged across runs."""

    spec: ExperimentSpec
    mean_reward: np.ndarray
    n_runs: int
    smoothing_window: int
    # (run, step, agent, event, source)
    events: list = field(default_factory=list)
    # (run, observer, observed, components)
    networks: list = field(default_factory=list)
    run_rewards: Optional[np.ndarray] = None

    @property
    def smoothed(self) -> np.ndarray:
        return smooth(self.mean_reward, self.smoothing_window)

    def plateau(self, fraction: float = 0.1) -> float:
        return plateau(self.mean_reward, fraction)

    def rows(self) -> list:
        sm = self.smoothed
        return [(t, float(sm[t]), self.n_runs, self.smoothing_window) for t in range(sm.shape[0])]

    def network_rows(self) -> list:
        return [(a, b, comps, run) for run, a, b, comps in self.networks]


def smooth(values, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` values (fewer at the start)."""
    v = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise UsageError("smoothing window must be positive")
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, v.shape[0] + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def plateau(values, fraction: float = 0.1) -> float:
    """Mean of the final ``fraction`` of a reward series."""
    v = np.asarray(values, dtype=np.float64)
    if not 0 < fraction <= 1 or v.shape[0] == 0:
        raise UsageError("plateau needs a non-empty series and 0 < fraction <= 1")
    n = max(1, int(round(v.shape[0] * fraction)))
    return float(v[-n:].mean())


def _at_start_pairs(spec, scenario) -> tuple:
    if spec.at_start:
        return spec.at_start
    ids = list(scenario.agent_ids)
    # each overlapping pair oriented from the earlier to the later agent, which keeps the graph acyclic
    pairs = {tuple(sorted(p, key=ids.index)) for p in scenario.influences()}
    return tuple(sorted(pairs, key=lambda p: (ids.index(p[0]), ids.index(p[1]))))


def _build_system(spec: ExperimentSpec, seed: int, trace=None) -> MultiAgentSystem:
    scenario = _scenario(spec, seed)
    system = MultiAgentSystem(scenario, spec.settings(), seed, trace=trace)
    if spec.adaptation == "at-start":
        for observer, observed in _at_start_pairs(spec, scenario):
            if observer not in system.agents or observed not in system.agents:
                raise SpecError(f"at_start pair {observer}:{observed} names an unknown agent")
            agent = system.agents[observer]
            for ref in agent.peer_refs[observed]:
                if not spec.at_start_components or ref.name in spec.at_start_components:
                    agent.integrate_at_start(ref)
    return system


def _network(system) -> list:
    out = []
    for a, agent in system.agents.items():
        by_peer = {}
        for rec in agent.space.lineage:
            by_peer.setdefault(rec.source.agent_id, []).append(rec.source.name)
        for b in sorted(by_peer):
            out.append((a, b, ",".join(by_peer[b])))
    return out


def _reward_run(spec: ExperimentSpec, r: int):
    seed = spec.seed_base + r
    system = _build_system(spec, seed)
    rewards = np.empty(spec.n_steps)
    events = []
    for t in range(spec.n_steps):
        recs = system.step()
        rewards[t] = math.fsum(rec.reward for rec in recs.values())
        for a, rec in recs.items():
            for e in rec.events:
                events.append((r, t, a, e["event"], e["source"]))
    return rewards, events, [(r,) + edge for edge in _network(system)]


def run_reward_experiment(spec: ExperimentSpec) -> RewardCurve:
    """Average per-step system reward of ``spec.n_runs`` learning runs."""
    if spec.mode == "random-config":
        raise SpecError("reward experiments need a q-relative or q-absolute mode")
    results = _map_runs(_reward_run, spec, spec.jobs)
    runs = np.vstack([res[0] for res in results])
    events = [e for res in results for e in res[1]]
    networks = [n for res in results for n in res[2]]
    return RewardCurve(spec, runs.mean(axis=0), spec.n_runs, spec.smoothing, events, networks, runs)


# ---------------------------------------------------------------- single run


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    return v


def simulate(spec: ExperimentSpec, seed: int, out_dir, trace: bool = True) -> MultiAgentSystem:
    """One learning run with a JSON-lines trace, final Q-tables, network and influence reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fh = open(out / "trace.jsonl", "w", newline="\n") if trace else None

    def write(t, records):
        agents = {}
        for a, rec in records.items():
            agents[a] = {"state": _jsonable(rec.state), "action": rec.action, "config": _jsonable(rec.config),
                         "reward": _jsonable(rec.reward), "epsilon": rec.epsilon, "explored": rec.explored,
                         "events": rec.events}
        fh.write(json.dumps({"step": t, "agents": agents}, sort_keys=True) + "\n")

    try:
        system = _build_system(spec, seed, trace=write if fh else None)
        system.run(spec.n_steps)
    finally:
        if fh:
            fh.close()
    for a, agent in system.agents.items():
        header, rows = q_snapshot_rows(agent.policy, agent.space)
        emit_csv(out / f"q_{a}.csv", header, rows)
    emit_csv(out / "network.csv", NETWORK_COLUMNS[:3], _network(system))
    rows = [row for a, agent in system.agents.items() for t, rep in agent.reports for row in rep.rows(t, a)]
    emit_csv(out / "reports.csv", inf.REPORT_COLUMNS, rows)
    return system


# ---------------------------------------------------------------- CSV


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_csv(path, header: Sequence[str], rows) -> None:
    """Header row then ``rows`` in the given order; LF endings, '.' decimals."""
    p = Path(path)
    try:
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc.strerror or exc}") from exc
