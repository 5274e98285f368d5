"""Injectable time sources. Nothing in the package reads the wall clock directly."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Protocol


class Clock(Protocol):
    def now(self) -> datetime:
        """Current UTC time."""


class Timer(Protocol):
    """Monotonic time plus sleep, so retry backoff is testable with a fake."""

    def monotonic(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


@dataclass
class FixedClock:
    """Always reports the same instant; the determinism seam for tests and corpus runs."""

    instant: datetime

    def now(self) -> datetime:
        return self.instant


class SystemTimer:
    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)


@dataclass
class FakeTimer:
    """Virtual timer: sleep() advances monotonic time instead of blocking."""

    current: float = 0.0
    sleeps: list[float] = field(default_factory=list)

    def monotonic(self) -> float:
        return self.current

    def sleep(self, seconds: float) -> None:
        self.sleeps.append(seconds)
        self.current += seconds

    def advance(self, seconds: float) -> None:
        self.current += seconds


def parse_fixed_clock(value: str) -> FixedClock:
    """Parse an ISO-8601 instant (naive values are taken as UTC)."""
    text = value.strip()
    # datetime.fromisoformat() grows Z support only in 3.11.
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    instant = datetime.fromisoformat(text)
    if instant.tzinfo is None:
        instant = instant.replace(tzinfo=timezone.utc)
    return FixedClock(instant)
