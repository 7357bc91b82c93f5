"""Event loop, processor-sharing stations and FCFS thread pools.

Processes are generators that yield commands to the engine:

* ``("delay", t)`` resume after ``t`` seconds,
* ``("ps", station, work, tag)`` receive ``work`` seconds of service at a
  processor-sharing station,
* ``("acquire", pool, tag)`` / ``("release", pool, tag)`` take or return a
  thread.

``tag`` labels the customer class so statistics can be split by it.

Ties in event time are broken by insertion order, so a run is a pure
function of its random stream.
"""
from __future__ import annotations

import heapq
import itertools
from collections import deque


class SimulationError(RuntimeError):
    pass


class TimeAverage:
    """Time integral of a piecewise-constant level, restartable."""

    __slots__ = ("level", "area", "last", "start")

    def __init__(self):
        self.level = 0.0
        self.area = 0.0
        self.last = 0.0
        self.start = 0.0

    def change(self, now: float, delta: float) -> None:
        self.area += self.level * (now - self.last)
        self.last = now
        self.level += delta

    def reset(self, now: float) -> None:
        self.area = 0.0
        self.last = now
        self.start = now

    def mean(self, now: float) -> float:
        span = now - self.start
        return (self.area + self.level * (now - self.last)) / span if span > 0 else 0.0


class PsStation:
    """``m``-server processor sharing via virtual time: each of ``n`` jobs
    progresses at rate ``min(1, m / n)``."""

    def __init__(self, engine: "Engine", name: str, servers: int = 1, infinite: bool = False):
        self.engine = engine
        self.name = name
        self.servers = servers
        self.infinite = infinite
        self.vtime = 0.0
        self.last = 0.0
        self.jobs: list = []
        self.version = 0
        self.count: dict = {}
        self.busy: dict = {}
        self.tagged: dict = {}
        self.done: dict = {}
        self.arrivals = 0
        self.departures = 0

    def _rate(self) -> float:
        n = len(self.jobs)
        if n == 0 or self.infinite:
            return 1.0
        return min(1.0, self.servers / n)

    def _advance(self, now: float) -> None:
        self.vtime += (now - self.last) * self._rate()
        self.last = now

    def _levels(self, now: float) -> None:
        n = len(self.jobs)
        share = 1.0 if self.infinite else (min(1.0, self.servers / n) / self.servers if n else 0.0)
        for tag, k in self.tagged.items():
            if tag not in self.count:
                self.count[tag] = TimeAverage()
                self.busy[tag] = TimeAverage()
                self.count[tag].reset(self.engine.measure_start)
                self.busy[tag].reset(self.engine.measure_start)
            c, b = self.count[tag], self.busy[tag]
            c.change(now, k - c.level)
            b.change(now, k * share - b.level)

    def arrive(self, proc, work: float, tag=None) -> None:
        now = self.engine.now
        self._advance(now)
        heapq.heappush(self.jobs, (self.vtime + work, next(self.engine.seq), proc, tag))
        self.arrivals += 1
        self.tagged[tag] = self.tagged.get(tag, 0) + 1
        self._levels(now)
        self._reschedule()

    def _reschedule(self) -> None:
        self.version += 1
        if self.jobs:
            dt = max(self.jobs[0][0] - self.vtime, 0.0) / self._rate()
            self.engine.schedule(dt, self._complete, self.version)

    def _complete(self, version: int) -> None:
        if version != self.version:
            return
        now = self.engine.now
        self._advance(now)
        _, _, proc, tag = heapq.heappop(self.jobs)
        self.departures += 1
        self.tagged[tag] -= 1
        if self.engine.measuring:
            self.done[tag] = self.done.get(tag, 0) + 1
        self._levels(now)
        self._reschedule()
        self.engine.resume(proc, None)


class ThreadPool:
    """FCFS admission to a task with ``tokens`` threads."""

    def __init__(self, engine: "Engine", name: str, tokens: int):
        self.engine = engine
        self.name = name
        self.free = tokens
        self.tokens = tokens
        self.waiting: deque = deque()
        self.busy: dict = {}
        self.count: dict = {}
        self.arrivals = 0
        self.departures = 0

    def _bump(self, table: dict, tag, delta: float) -> None:
        if tag not in table:
            table[tag] = TimeAverage()
            table[tag].reset(self.engine.measure_start)
        table[tag].change(self.engine.now, delta)

    def acquire(self, proc, tag=None) -> None:
        self.arrivals += 1
        self._bump(self.count, tag, 1.0)
        if self.free > 0:
            self.free -= 1
            self._bump(self.busy, tag, 1.0)
            self.engine.resume(proc, None)
        else:
            self.waiting.append((proc, tag))

    def release(self, proc, tag=None) -> None:
        self.departures += 1
        self._bump(self.count, tag, -1.0)
        self._bump(self.busy, tag, -1.0)
        if self.waiting:
            nxt, ntag = self.waiting.popleft()
            self._bump(self.busy, ntag, 1.0)
            self.engine.resume(nxt, None)
        else:
            self.free += 1
        self.engine.resume(proc, None)

    @property
    def in_system(self) -> int:
        return self.tokens - self.free + len(self.waiting)


class Engine:
    def __init__(self):
        self.now = 0.0
        self.heap: list = []
        self.seq = itertools.count()
        self.events = 0
        self.stations: dict[str, PsStation] = {}
        self.pools: dict[str, ThreadPool] = {}
        self.measuring = False
        self.measure_start = 0.0

    def start_measuring(self) -> None:
        """Discard statistics gathered so far (end of warm-up)."""
        self.measuring = True
        self.measure_start = self.now
        for st in self.stations.values():
            st.done.clear()
            for t in list(st.count.values()) + list(st.busy.values()):
                t.reset(self.now)
        for pool in self.pools.values():
            for t in list(pool.count.values()) + list(pool.busy.values()):
                t.reset(self.now)

    def schedule(self, dt: float, fn, *args) -> None:
        heapq.heappush(self.heap, (self.now + dt, next(self.seq), fn, args))

    def resume(self, proc, value) -> None:
        self.schedule(0.0, self._step, proc, value)

    def spawn(self, proc) -> None:
        self.resume(proc, None)

    def _step(self, proc, value) -> None:
        try:
            cmd = proc.send(value)
        except StopIteration:
            return
        op = cmd[0]
        if op == "delay":
            self.schedule(cmd[1], self._step, proc, None)
        elif op == "ps":
            self.stations[cmd[1]].arrive(proc, cmd[2], cmd[3] if len(cmd) > 3 else None)
        elif op == "acquire":
            self.pools[cmd[1]].acquire(proc, cmd[2] if len(cmd) > 2 else None)
        elif op == "release":
            self.pools[cmd[1]].release(proc, cmd[2] if len(cmd) > 2 else None)
        else:
            raise SimulationError(f"unknown command {op!r}")

    def run(self, max_events: int) -> None:
        heap = self.heap
        while heap and self.events < max_events:
            t, _, fn, args = heapq.heappop(heap)
            self.now = t
            self.events += 1
            fn(*args)
