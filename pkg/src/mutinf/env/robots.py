"""Two robots moving a box together or working a two-man saw."""

from __future__ import annotations

from ..config import ConfigurationSpace, categorical
from ..errors import UsageError

PULL = 0
PUSH = 1
MODE = categorical("MODE", ("PULL", "PUSH"))


def box_step(c_a: int, c_b: int):
    """The box only moves (reward 1 for both) when both robots push."""
    _check(c_a, c_b)
    r = int(c_a == PUSH and c_b == PUSH)
    return r, r


def saw_step(c_a: int, c_b: int):
    """The saw moves (reward 1 for both) when one robot pushes and the other pulls."""
    _check(c_a, c_b)
    r = int(c_a != c_b)
    return r, r


def _check(*modes):
    for m in modes:
        if m not in (PULL, PUSH):
            raise UsageError(f"robot mode must be PULL (0) or PUSH (1), got {m!r}")


class RobotScenario:
    """Robots ``A`` and ``B`` with the single component MODE (PULL=0, PUSH=1)."""

    agent_ids = ("A", "B")

    def __init__(self, kind: str, seed: int = 0):
        if kind not in ("box", "saw"):
            raise UsageError(f"unknown robot scenario {kind!r}")
        self.kind = kind
        self.scenario_id = kind.upper()
        self._fn = box_step if kind == "box" else saw_step
        self.reset(seed)

    def reset(self, seed: int = 0) -> None:
        self.seed = seed
        self.t = 0

    def space(self, agent_id: str) -> ConfigurationSpace:
        if agent_id not in self.agent_ids:
            raise UsageError(f"unknown agent {agent_id!r}")
        return ConfigurationSpace((MODE,))

    def influences(self):
        return {("A", "B"), ("B", "A")}

    def step(self, joint) -> dict:
        r_a, r_b = self._fn(int(joint["A"][0]), int(joint["B"][0]))
        self.t += 1
        return {"A": r_a, "B": r_b}
