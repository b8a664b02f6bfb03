"""Exact duration arithmetic in integer nanoseconds.

A recovery run charges hundreds of thousands of per-evaluation costs to a
single ledger, so durations are carried as integer nanosecond counts end to
end.  Values like 3.8 ms or 628.8 ms are exact in this unit and sums never
accumulate float drift.  Floats appear only at the display boundary.
"""

from __future__ import annotations

import re
from decimal import Decimal

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000
NS_PER_MIN = 60 * NS_PER_S
NS_PER_HOUR = 3_600 * NS_PER_S

_UNIT_NS = {
    "ns": 1,
    "us": NS_PER_US,
    "ms": NS_PER_MS,
    "s": NS_PER_S,
    "min": NS_PER_MIN,
    "h": NS_PER_HOUR,
}

_DURATION_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ns|us|ms|s|min|h)\s*$")


class DurationError(ValueError):
    """Raised for unparseable or non-integral durations."""


def parse_duration(text: str) -> int:
    """Parse a duration like ``"625ms"``, ``"10h"`` or ``"0 s"`` to nanoseconds.

    The numeric part is read exactly (decimal, not float); fractions that do
    not land on a whole nanosecond are rejected.
    """
    m = _DURATION_RE.match(text)
    if m is None:
        raise DurationError(
            f"invalid duration {text!r}: expected <number><unit> with unit "
            f"one of {', '.join(_UNIT_NS)}"
        )
    value = Decimal(m.group(1)) * _UNIT_NS[m.group(2)]
    ns = int(value)
    if ns != value:
        raise DurationError(f"duration {text!r} is not a whole number of nanoseconds")
    return ns


def from_ms(value: float | int) -> int:
    """Milliseconds (possibly fractional) to integer nanoseconds, rounded."""
    if isinstance(value, int):
        return value * NS_PER_MS
    return round(value * NS_PER_MS)


def from_s(value: float | int) -> int:
    if isinstance(value, int):
        return value * NS_PER_S
    return round(value * NS_PER_S)


def to_ms(ns: int) -> float:
    return ns / NS_PER_MS


def to_s(ns: int) -> float:
    return ns / NS_PER_S


def exact_str(ns: int, unit: str) -> str:
    """Render ``ns`` in ``unit`` as an exact decimal string, e.g. ``"628.8"``.

    Only power-of-ten unit ratios terminate; min/h renderings may therefore
    raise for awkward values and are intended for totals that divide evenly.
    """
    q = Decimal(ns) / Decimal(_UNIT_NS[unit])
    s = format(q, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def format_duration(ns: int) -> str:
    """Human-oriented rendering: exact value in the largest natural unit."""
    if ns == 0:
        return "0 s"
    if ns % NS_PER_HOUR == 0:
        return f"{ns // NS_PER_HOUR} h"
    if ns % NS_PER_MIN == 0:
        return f"{ns // NS_PER_MIN} min"
    if ns >= NS_PER_S:
        return f"{exact_str(ns, 's')} s"
    if ns >= NS_PER_MS:
        return f"{exact_str(ns, 'ms')} ms"
    if ns >= NS_PER_US:
        return f"{exact_str(ns, 'us')} us"
    return f"{ns} ns"
