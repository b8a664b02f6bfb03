"""Hardware-time accounting and recovery feasibility analysis.

Every candidate evaluation on a single reconfigurable device costs real time:
programming the device plus running the fitness test.  The ledger accumulates
those costs as exact integer nanoseconds; its total is the reconfiguration
time of the whole search.  A recovery is judged effective only if it is both
logically correct (function restored) and temporally correct (finished within
the recovery deadline) -- one without the other fixes nothing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, NamedTuple

from .durations import format_duration


class LedgerError(ValueError):
    pass


class ZeroCostEvaluation(LedgerError):
    """Budget queries need a positive per-evaluation cost."""


class LedgerEntry(NamedTuple):
    evaluation_index: int
    t_program_ns: int
    t_eval_ns: int


class TimeLedger:
    """Append-only account of per-evaluation hardware time.

    Single-writer: owned by one run at a time.  The cached total is the sum
    of ``t_program + t_eval`` over all entries, exact by integer arithmetic.
    """

    __slots__ = ("_entries", "_total_ns")

    def __init__(self) -> None:
        self._entries: list[LedgerEntry] = []
        self._total_ns = 0

    def charge(self, t_program_ns: int, t_eval_ns: int) -> "TimeLedger":
        if t_program_ns < 0 or t_eval_ns < 0:
            raise LedgerError("durations charged to the ledger must be >= 0")
        self._entries.append(LedgerEntry(len(self._entries), t_program_ns, t_eval_ns))
        self._total_ns += t_program_ns + t_eval_ns
        return self

    @property
    def total_ns(self) -> int:
        return self._total_ns

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[LedgerEntry]:
        return iter(self._entries)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index", "t_program_ns", "t_eval_ns", "cumulative_ns"])
            cumulative = 0
            for entry in self._entries:
                cumulative += entry.t_program_ns + entry.t_eval_ns
                writer.writerow(
                    [entry.evaluation_index, entry.t_program_ns, entry.t_eval_ns, cumulative]
                )


def charge(ledger: TimeLedger, t_program_ns: int, t_eval_ns: int) -> TimeLedger:
    """Append one evaluation's hardware cost to the ledger."""
    return ledger.charge(t_program_ns, t_eval_ns)


class Classification(Enum):
    """Consequence severity of a missed deadline: catastrophic vs degraded."""

    HARD = "hard"
    SOFT = "soft"


@dataclass(frozen=True)
class RecoveryRequirement:
    """A recovery deadline, typically one outcome of an FMEA."""

    deadline_ns: int
    classification: Classification = Classification.HARD
    description: str = ""

    def __post_init__(self) -> None:
        if self.deadline_ns < 0:
            raise LedgerError("recovery deadline cannot be negative")


@dataclass(frozen=True)
class RecoveryVerdict:
    """Effective means logically correct AND temporally correct, never less."""

    logically_correct: bool
    temporally_correct: bool
    effective: bool
    margin_ns: int

    def describe(self) -> str:
        logical = "restored" if self.logically_correct else "NOT restored"
        if self.temporally_correct:
            temporal = f"met deadline with {format_duration(self.margin_ns)} to spare"
        else:
            temporal = f"missed deadline by {format_duration(-self.margin_ns)}"
        outcome = "EFFECTIVE" if self.effective else "NOT EFFECTIVE"
        return f"{outcome}: function {logical}; {temporal}"


def check(
    total_ns: int, requirement: RecoveryRequirement, logically_correct: bool
) -> RecoveryVerdict:
    """Render the recovery verdict for an accumulated reconfiguration time.

    The deadline boundary is inclusive: finishing exactly at the deadline is
    temporally correct.
    """
    margin = requirement.deadline_ns - total_ns
    temporally_correct = margin >= 0
    return RecoveryVerdict(
        logically_correct=logically_correct,
        temporally_correct=temporally_correct,
        effective=logically_correct and temporally_correct,
        margin_ns=margin,
    )


def evaluation_budget(t_program_ns: int, t_eval_ns: int, deadline_ns: int) -> int:
    """Largest number of whole evaluations that fit within the deadline."""
    cost = t_program_ns + t_eval_ns
    if cost <= 0:
        raise ZeroCostEvaluation("per-evaluation cost must be positive")
    if deadline_ns < 0:
        return 0
    return deadline_ns // cost


def plan(
    deadline_ns: int, t_program_ns: int, t_eval_ns: int, population_size: int
) -> int:
    """Largest whole-generation count guaranteed to finish by the deadline."""
    if population_size <= 0:
        raise LedgerError("population size must be positive")
    return evaluation_budget(t_program_ns, t_eval_ns, deadline_ns) // population_size
