"""Result containers shared by the NOMA and TDMA optimizers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from m2meh.metrics import Allocation, EnergyReport
from m2meh.verify import ViolationReport

CONVERGED = "converged"
MAX_OUTER = "max_outer"
SET_CYCLE = "harvest_set_cycle"
INFEASIBLE = "infeasible"


@dataclass
class TraceSegment:
    """One fixed-harvest-set stretch of the optimization.

    `objectives` holds the smooth-model objective after the warm start and
    after every block step; it is non-increasing within the segment.
    """

    outer: int
    harvest_signature: tuple[tuple[int, ...], ...]
    objectives: list[float] = field(default_factory=list)

    @property
    def blocks(self) -> int:
        return max(len(self.objectives) - 1, 0)


@dataclass
class SolveTrace:
    strategy: str
    segments: list[TraceSegment] = field(default_factory=list)
    outer_objectives: list[float] = field(default_factory=list)
    termination: str = ""
    phase1_used: bool = False
    notes: list[str] = field(default_factory=list)

    def to_records(self) -> list[dict]:
        recs = []
        for seg in self.segments:
            recs.append(
                {
                    "outer": seg.outer,
                    "set_sizes": [len(s) for s in seg.harvest_signature],
                    "objectives_j": seg.objectives,
                }
            )
        return recs


@dataclass
class SolveResult:
    strategy: str
    allocation: Allocation | None
    report: EnergyReport | None
    verification: ViolationReport | None
    trace: SolveTrace
    objective_j: float | None
    iterations: int

    @property
    def feasible(self) -> bool:
        return self.verification is not None and self.verification.feasible
