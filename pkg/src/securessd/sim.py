"""Deterministic discrete-event core: virtual clock, event queue, seeded RNG.

All simulated time is integer nanoseconds.  The clock only moves when the
event queue dispatches, so two runs that schedule the same events in the
same order produce bit-identical timelines.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

MASK64 = (1 << 64) - 1

DEFAULT_EVENT_CAP = 10**9


class SimulationError(Exception):
    """Base class for simulator engine errors."""


class EventCapExceeded(SimulationError):
    """run_until_idle dispatched more events than the configured cap."""


class CausalityError(SimulationError):
    """An event was scheduled to fire in the past."""


def splitmix64(x: int) -> int:
    """One splitmix64 step; used to expand seeds into generator state."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


class SeededRng:
    """xorshift64* generator.

    Recurrence (all arithmetic mod 2^64), reproducible in any language:

        state ^= state >> 12
        state ^= state << 25
        state ^= state >> 27
        output = state * 0x2545F4914F6CDD1D

    The initial state is splitmix64(seed), replaced with a fixed non-zero
    constant if that ever yields zero (xorshift state must be non-zero).
    """

    MULT = 0x2545F4914F6CDD1D

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = splitmix64(self.seed) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        s = self.state
        s ^= s >> 12
        s = (s ^ (s << 25)) & MASK64
        s ^= s >> 27
        self.state = s
        return (s * self.MULT) & MASK64

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.randbelow(hi - lo + 1)

    def randbytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out += self.next_u64().to_bytes(8, "little")
        return bytes(out[:n])

    def shuffle(self, seq: list) -> None:
        for i in range(len(seq) - 1, 0, -1):
            j = self.randbelow(i + 1)
            seq[i], seq[j] = seq[j], seq[i]


@dataclass(frozen=True)
class Event:
    fire_at: int
    kind: str
    payload: Any
    seq: int
    action: Optional[Callable[["Simulator", "Event"], None]] = None


@dataclass
class SimClock:
    now: int = 0


class Simulator:
    """Single-threaded event loop with a stable (fire_at, seq) dispatch order.

    Instances are never shared across workers; parallel experiments run
    independent simulators.
    """

    def __init__(self, seed: int = 0, event_cap: int = DEFAULT_EVENT_CAP):
        self.clock = SimClock(0)
        self.rng = SeededRng(seed)
        self.event_cap = event_cap
        self.dispatched = 0
        self._queue: list[tuple[int, int, Event]] = []
        self._next_seq = 0
        self._handlers: dict[str, Callable[[Simulator, Event], None]] = {}

    @property
    def now(self) -> int:
        return self.clock.now

    def on(self, kind: str, handler: Callable[["Simulator", Event], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, delay_ns: int, kind: str, payload: Any = None,
                 action: Optional[Callable[["Simulator", Event], None]] = None) -> int:
        if delay_ns < 0:
            raise CausalityError(f"negative delay {delay_ns}")
        seq = self._next_seq
        self._next_seq += 1
        ev = Event(self.clock.now + delay_ns, kind, payload, seq, action)
        heapq.heappush(self._queue, (ev.fire_at, seq, ev))
        return seq

    def schedule_at(self, fire_at: int, kind: str, payload: Any = None,
                    action: Optional[Callable[["Simulator", Event], None]] = None) -> int:
        if fire_at < self.clock.now:
            raise CausalityError(f"fire_at {fire_at} < now {self.clock.now}")
        return self.schedule(fire_at - self.clock.now, kind, payload, action)

    def advance_to(self, t: int) -> None:
        """Move the clock forward without dispatching (phase accounting)."""
        if t < self.clock.now:
            raise CausalityError(f"advance_to {t} < now {self.clock.now}")
        self.clock.now = t

    def run_until_idle(self) -> int:
        while self._queue:
            fire_at, _, ev = heapq.heappop(self._queue)
            if fire_at < self.clock.now:
                raise CausalityError(
                    f"event {ev.kind} at {fire_at} fired behind clock {self.clock.now}")
            self.clock.now = fire_at
            self.dispatched += 1
            if self.dispatched > self.event_cap:
                raise EventCapExceeded(f"event cap {self.event_cap} exceeded")
            if ev.action is not None:
                ev.action(self, ev)
            elif ev.kind in self._handlers:
                self._handlers[ev.kind](self, ev)
        return self.clock.now
