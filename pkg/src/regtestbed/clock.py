"""Time sources: a real drift-free periodic runner and a virtual event loop.

Real-backend runs use threads and the monotonic clock.  Mock runs use
``VirtualLoop``, a single-threaded discrete-event loop in which a 300 s
measurement window costs only the work done inside it, and whose ordering
is fully determined by (time, priority, insertion order).
"""
from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Callable


def run_periodic(fn: Callable[[int, float], None], interval: float, stop: threading.Event,
                 *, start: float | None = None, until: float | None = None,
                 clock: Callable[[], float] = time.monotonic) -> int:
    """Call ``fn(k, t_k)`` at ``t_k = start + k*interval`` for k = 1, 2, ...

    Tick times never accumulate drift: a late tick fires immediately and the
    next one keeps its original slot.  Returns the number of ticks fired.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    start = clock() if start is None else start
    fired = 0
    k = 1
    while True:
        due = start + k * interval
        if until is not None and due > until + 1e-9:
            break
        delay = due - clock()
        if delay > 0 and stop.wait(delay):
            break
        if stop.is_set():
            break
        fn(k, due)
        fired += 1
        k += 1
    return fired


class VirtualLoop:
    """Discrete-event scheduler over virtual seconds.

    ``time()`` is the current virtual time; ``wall_ns()`` maps it onto a
    Unix-nanosecond timeline starting at ``epoch_ns``.
    """

    def __init__(self, epoch_ns: int | None = None):
        self.now = 0.0
        self.epoch_ns = time.time_ns() if epoch_ns is None else int(epoch_ns)
        self._queue: list = []
        self._seq = itertools.count()

    def time(self) -> float:
        return self.now

    def wall_ns(self, t: float | None = None) -> int:
        return self.epoch_ns + round((self.now if t is None else t) * 1e9)

    def at(self, t: float, fn: Callable[[float], None], priority: int = 0) -> None:
        if t < self.now - 1e-12:
            raise ValueError(f"cannot schedule in the past ({t} < {self.now})")
        heapq.heappush(self._queue, (t, priority, next(self._seq), fn))

    def every(self, interval: float, fn: Callable[[int, float], None], *, start: float | None = None,
              until: float | None = None, priority: int = 0, include_start: bool = False) -> None:
        """Periodic ticks at ``start + k*interval`` (k >= 1, or k >= 0 with ``include_start``)."""
        if interval <= 0:
            raise ValueError("interval must be positive")
        origin = self.now if start is None else start

        def fire(k: int):
            def run(t: float):
                fn(k, t)
                nxt = origin + (k + 1) * interval
                if until is None or nxt <= until + 1e-9:
                    self.at(nxt, fire(k + 1), priority)
            return run

        k0 = 0 if include_start else 1
        first = origin + k0 * interval
        if until is None or first <= until + 1e-9:
            self.at(first, fire(k0), priority)

    def run_until(self, t: float) -> None:
        while self._queue and self._queue[0][0] <= t + 1e-9:
            when, _, _, fn = heapq.heappop(self._queue)
            self.now = max(self.now, when)
            fn(when)
        self.now = max(self.now, t)

    def clear(self) -> None:
        self._queue.clear()
