"""Exact operation and memory counters shared by the instrumented builders."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

PHASES = ("rl_to_sle", "sle_to_qubo", "solve", "recovery", "policy_update")


@dataclass
class OpCounters:
    """Multiply-add counts and peak allocated entries, keyed by phase."""

    ops: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    entries: dict[str, int] = field(default_factory=lambda: defaultdict(int))
    wall_time: dict[str, float] = field(default_factory=lambda: defaultdict(float))

    def add(self, phase: str, n: int) -> None:
        if n < 0:
            raise ValueError("operation counts only grow")
        self.ops[phase] += int(n)

    def alloc(self, phase: str, n: int) -> None:
        self.entries[phase] = max(self.entries[phase], int(n))


class _Null:
    def add(self, phase, n):
        pass

    def alloc(self, phase, n):
        pass


NULL = _Null()
