"""Exact event-driven simulation of the agent / uncertainty hybrid system.

Between events every rate is affine in time, so each ``R_i`` is a quadratic
and every event time is a root of a linear or quadratic polynomial. There is
no ODE solver anywhere; the cost is integrated in closed form.

Regions of point ``i`` are delimited by its five critical positions
``alpha - r, alpha - w, alpha, alpha + w, alpha + r`` with
``w = r (1 - A/B)``; inside ``(alpha - w, alpha + w)`` the queue drains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .model import (ConfigError, MissionConfig, SamplePoint, SwitchingSchedule,
                    joint_detection_probability)


class Region(IntEnum):
    FAR_LEFT = 0
    NEAR_LEFT_RISING = 1
    NEAR_LEFT_FALLING = 2
    NEAR_RIGHT_FALLING = 3
    NEAR_RIGHT_RISING = 4
    FAR_RIGHT = 5
    EMPTY_DWELL = 6


# boundary ids of the critical positions, left to right
BOUNDARY_NAMES = ("alpha-r", "alpha-w", "alpha", "alpha+w", "alpha+r")

FALLING = (Region.NEAR_LEFT_FALLING, Region.NEAR_RIGHT_FALLING)


@dataclass(frozen=True)
class PointMode:
    direction: int
    region: Region

    @property
    def mode_set(self) -> str:
        """Automaton class: Q1 empty, Q2 out of range, Q3 left of alpha, Q4 right."""
        if self.region == Region.EMPTY_DWELL:
            return "Q1"
        if self.region in (Region.FAR_LEFT, Region.FAR_RIGHT):
            return "Q2"
        if self.region in (Region.NEAR_LEFT_RISING, Region.NEAR_LEFT_FALLING):
            return "Q3"
        return "Q4"


@dataclass(frozen=True)
class Event:
    """A discrete transition.

    ``kind`` is one of ``switch``, ``empty``, ``cross``, ``reflect``,
    ``inflow``, ``control`` and ``horizon``. ``index`` is the 1-based switching index for
    ``switch`` and the 0-based point index for ``empty`` / ``cross``;
    ``boundary`` is the critical-position id for ``cross`` and the wall
    position for ``reflect`` and the chosen velocity for ``control``. ``segment`` is the index of the first segment
    that starts at or after the event.
    """

    time: float
    kind: str
    index: int | None = None
    boundary: float | None = None
    segment: int = 0

    def detail(self) -> str:
        if self.kind == "switch":
            return f"theta_{self.index}"
        if self.kind == "empty":
            return f"R_{self.index + 1}"
        if self.kind == "cross":
            return f"R_{self.index + 1}:{BOUNDARY_NAMES[int(self.boundary)]}"
        if self.kind == "reflect":
            return "L" if self.boundary else "0"
        if self.kind == "control":
            return f"u={self.boundary:.17g}"
        return ""


_ORDER = {"empty": 0, "cross": 1, "inflow": 2, "control": 3, "switch": 3, "reflect": 4,
          "horizon": 5}


@dataclass(frozen=True)
class Trajectory:
    """Piecewise description of ``s(t)`` and ``R(t)``.

    On segment ``k`` with ``tau = t - t0[k]``::

        s(t)   = s0[k] + u[k] * tau
        R_i(t) = R0[k, i] + rate0[k, i] * tau + 0.5 * slope[k, i] * tau**2
    """

    t0: np.ndarray
    t1: np.ndarray
    s0: np.ndarray
    u: np.ndarray
    R0: np.ndarray
    rate0: np.ndarray
    slope: np.ndarray
    region: np.ndarray
    dwell: np.ndarray
    events: tuple[Event, ...]
    cost: float
    config: MissionConfig
    schedule: SwitchingSchedule | None = None
    R_final: np.ndarray | None = None
    s_final: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def K(self) -> int:
        return len(self.t0)

    @property
    def durations(self) -> np.ndarray:
        return self.t1 - self.t0

    @property
    def t_start(self) -> float:
        return float(self.t0[0]) if self.K else 0.0

    @property
    def t_end(self) -> float:
        return float(self.t1[-1]) if self.K else 0.0

    def _segment_index(self, t: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.t0, t, side="right") - 1
        return np.clip(k, 0, self.K - 1)

    def position(self, t):
        t = np.asarray(t, dtype=float)
        k = self._segment_index(t)
        out = self.s0[k] + self.u[k] * (t - self.t0[k])
        return float(out) if out.ndim == 0 else out

    def uncertainty(self, t) -> np.ndarray:
        """``R`` at time(s) ``t``; shape ``(M,)`` or ``(len(t), M)``."""
        t = np.asarray(t, dtype=float)
        k = self._segment_index(t)
        tau = (t - self.t0[k])[..., None]
        R = self.R0[k] + self.rate0[k] * tau + 0.5 * self.slope[k] * tau ** 2
        return np.maximum(R, 0.0)

    def segment_end_state(self):
        tau = self.durations[:, None]
        R_end = self.R0 + self.rate0 * tau + 0.5 * self.slope * tau ** 2
        s_end = self.s0 + self.u * self.durations
        return s_end, R_end

    def min_uncertainty(self) -> np.ndarray:
        """Exact per-point minimum of ``R_i`` over the whole trajectory."""
        tau = self.durations[:, None]
        _, R_end = self.segment_end_state()
        lo = np.minimum(self.R0, R_end)
        with np.errstate(divide="ignore", invalid="ignore"):
            vertex = np.where(self.slope != 0, -self.rate0 / self.slope, -1.0)
        inside = (vertex > 0) & (vertex < tau)
        at_vertex = self.R0 + self.rate0 * vertex + 0.5 * self.slope * vertex ** 2
        lo = np.where(inside, np.minimum(lo, at_vertex), lo)
        return lo.min(axis=0)

    def switch_events(self) -> list[Event]:
        return [e for e in self.events if e.kind == "switch"]

    def reflect_events(self) -> list[Event]:
        return [e for e in self.events if e.kind == "reflect"]

    def touches_boundary(self) -> bool:
        """True if ``s`` reaches 0 or ``L`` at some ``t > 0``."""
        L = self.config.L
        tol = 1e-12 * max(1.0, L)
        s_end, _ = self.segment_end_state()
        ends = np.concatenate([self.s0[self.t0 > self.t_start], s_end])
        return bool(np.any(ends <= tol) or np.any(ends >= L - tol))

    def satisfies_prop1(self) -> bool:
        """Optimality check: no reflection and ``0 < s(t) < L`` for ``t > 0``."""
        return not self.reflect_events() and not self.touches_boundary()

    def sample(self, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Uniform grid plus every event time, sorted and de-duplicated."""
        t_a, t_b = self.t_start, self.t_end
        n = int(math.floor((t_b - t_a) / dt + 1e-9))
        grid = t_a + dt * np.arange(n + 1)
        times = np.concatenate([grid, self.t0, [t_b], [e.time for e in self.events]])
        times = np.unique(np.clip(times, t_a, t_b))
        keep = np.concatenate([[True], np.diff(times) > 1e-12 * max(1.0, t_b)])
        times = times[keep]
        return times, self.position(times), self.uncertainty(times)


def segment_integrals(R0, rate0, slope, dt) -> np.ndarray:
    """Exact ``int_0^dt R dtau`` for quadratic pieces (broadcasts)."""
    return R0 * dt + 0.5 * rate0 * dt ** 2 + slope * dt ** 3 / 6.0


def cost(trajectory: Trajectory) -> float:
    """Average total uncertainty over the trajectory's time span."""
    dt = trajectory.durations[:, None]
    total = segment_integrals(trajectory.R0, trajectory.rate0, trajectory.slope, dt).sum()
    span = trajectory.t_end - trajectory.t_start
    return float(total / span) if span > 0 else 0.0


def _region_codes(d: np.ndarray, offsets: np.ndarray, v: float, tol: float) -> np.ndarray:
    rel = d[:, None] - offsets
    if v >= 0:
        passed = rel >= -tol
    else:
        passed = rel > tol
    return passed.sum(axis=1)


def _offsets(A: np.ndarray, B: float, r: float) -> np.ndarray:
    w = r * (1.0 - A / B)
    ones = np.ones_like(A)
    return np.stack([-r * ones, -w, 0.0 * ones, w, r * ones], axis=1)


def classify_mode(point: SamplePoint, s: float, u: float, R: float,
                  config: MissionConfig, t: float = 0.0) -> PointMode:
    """Mode of one point; a position exactly on a boundary counts as lying on
    the side the agent is moving towards."""
    A = np.array([point.inflow_at(t)])
    tol = 1e-12 * max(1.0, config.L)
    code = int(_region_codes(np.array([s - point.alpha]), _offsets(A, config.B, config.r),
                             u, tol)[0])
    region = Region(code)
    if R <= 1e-12 * max(1.0, point.R0) and region in FALLING:
        region = Region.EMPTY_DWELL
    return PointMode(1 if u >= 0 else -1, region)


def _first_root(c: float, b: float, a: float) -> float:
    """Smallest positive root of ``a t^2 + b t + c`` (``inf`` if none)."""
    if a == 0.0:
        if b == 0.0:
            return math.inf
        t = -c / b
        return t if t > 0 else math.inf
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return math.inf
    sq = math.sqrt(disc)
    q = -0.5 * (b + (sq if b >= 0 else -sq))
    best = math.inf
    for t in (q / a, c / q if q != 0 else math.inf):
        if 0 < t < best:
            best = t
    return best


@dataclass
class SegmentState:
    """Continuous state at an event boundary plus the next switching index."""

    t: float
    s: float
    u: float
    R: np.ndarray
    next_switch: int = 0


class Engine:
    """Advances the hybrid system segment by segment and records the pieces.

    The velocity ``u`` may be any value in ``[-1, 1]`` (the receding-horizon
    search uses fractional speeds); switching schedules assume ``|u| = 1``.
    """

    MAX_SEGMENTS = 5_000_000

    def __init__(self, config: MissionConfig, state: SegmentState | None = None,
                 thetas: Sequence[float] = (), record: bool = True):
        self.config = config
        self.alpha = config.alphas
        self.r, self.B, self.L = config.r, config.B, config.L
        self.tol_t = 1e-12 * max(1.0, config.T)
        self.tol_x = 1e-12 * max(1.0, config.L)
        self.snap = 1e-12 * np.maximum(1.0, config.R0)
        self.change_times = config.inflow_change_times()
        self.thetas = np.asarray(thetas, dtype=float)
        if state is None:
            state = SegmentState(0.0, 0.0, 1.0, config.R0.copy())
        self.t = float(state.t)
        self.s = float(state.s)
        self.u = float(state.u)
        self.R = np.array(state.R, dtype=float)
        self.j = int(state.next_switch)
        self.record = record
        self.segments: list[tuple] = []
        self.events: list[Event] = []
        self.integral = 0.0
        self.warnings: list[str] = []
        self._set_inflow(self.t)

    def state(self) -> SegmentState:
        return SegmentState(self.t, self.s, self.u, self.R.copy(), self.j)

    def _set_inflow(self, t: float) -> None:
        cfg = self.config
        self.A = cfg.inflows_at(t) if cfg.time_varying else cfg.inflows
        self.offsets = _offsets(self.A, self.B, self.r)
        self.crit = self.alpha[:, None] + self.offsets
        self.crit_sorted = np.unique(self.crit.ravel())

    def _log(self, kind: str, index=None, boundary=None) -> None:
        self.events.append(Event(self.t, kind, index, boundary, len(self.segments)))

    # --- per-segment dynamics ---------------------------------------------

    def _window(self) -> tuple[int, int]:
        """Index range of the points that may be within sensing range."""
        reach = self.r + 4 * self.tol_x
        lo = int(np.searchsorted(self.alpha, self.s - reach, side="left"))
        hi = int(np.searchsorted(self.alpha, self.s + reach, side="right"))
        return lo, hi

    def modes(self):
        lo, hi = self._win = self._window()
        M = self.config.M
        region = np.zeros(M, dtype=np.int8)
        region[:lo] = Region.FAR_RIGHT
        dwell = np.zeros(M, dtype=bool)
        if hi > lo:
            d = self.s - self.alpha[lo:hi]
            reg = _region_codes(d, self.offsets[lo:hi], self.u, self.tol_x)
            region[lo:hi] = reg
            dwell[lo:hi] = ((reg == 2) | (reg == 3)) & (self.R[lo:hi] <= 0.0)
        return region, dwell

    def rates(self, region, dwell):
        lo, hi = self._win
        rate0 = self.A.copy()
        slope = np.zeros(self.config.M)
        if hi > lo:
            r, B = self.r, self.B
            reg, dw = region[lo:hi], dwell[lo:hi]
            d = self.s - self.alpha[lo:hi]
            left = (reg == 1) | (reg == 2)
            right = (reg == 3) | (reg == 4)
            dpds = (left.astype(float) - right.astype(float)) / r
            p = np.where(left | right, np.maximum(0.0, 1.0 - np.abs(d) / r), 0.0)
            rate0[lo:hi] = np.where(dw, 0.0, self.A[lo:hi] - B * p)
            slope[lo:hi] = np.where(dw, 0.0, -B * dpds * self.u)
        return rate0, slope

    def _next_position(self) -> float:
        """Travel distance to the nearest position event (``inf`` if parked)."""
        if self.u == 0:
            return math.inf
        s, tol = self.s, self.tol_x
        cs = self.crit_sorted
        if self.u > 0:
            best = self.L - s
            k = np.searchsorted(cs, s + tol, side="right")
            if k < len(cs):
                best = min(best, cs[k] - s)
        else:
            best = s
            k = np.searchsorted(cs, s - tol, side="left") - 1
            if k >= 0:
                best = min(best, s - cs[k])
        if self.j < len(self.thetas):
            dist = (self.thetas[self.j] - s) * np.sign(self.u)
            if dist > tol:
                best = min(best, dist)
        return max(best, 0.0)

    def candidates(self, t_end: float, region, dwell, rate0, slope):
        """Time to the next event from each source."""
        dt_h = t_end - self.t
        dist = self._next_position()
        dt_pos = dist / abs(self.u) if self.u != 0 else math.inf
        dt_in = math.inf
        if len(self.change_times):
            k = np.searchsorted(self.change_times, self.t + self.tol_t, side="right")
            if k < len(self.change_times):
                dt_in = self.change_times[k] - self.t
        lo, hi = self._win
        reg = region[lo:hi]
        drain = lo + np.nonzero(((reg == 2) | (reg == 3)) & ~dwell[lo:hi]
                                & (self.R[lo:hi] > 0))[0]
        roots = np.array([_first_root(self.R[i], rate0[i], 0.5 * slope[i]) for i in drain])
        dt_q = roots.min() if len(roots) else math.inf
        return dt_h, dt_pos, dist, dt_in, drain, roots, dt_q

    # --- event processing -------------------------------------------------

    def _process_turns(self) -> None:
        tol = self.tol_x
        while self.j < len(self.thetas) and abs(self.thetas[self.j] - self.s) <= tol:
            self.s = float(self.thetas[self.j])
            self.u = -self.u
            self.j += 1
            self._log("switch", self.j)
        if self.u < 0 and self.s <= tol:
            self.s = 0.0
            self.u = -self.u
            self._log("reflect", boundary=0.0)
        elif self.u > 0 and self.s >= self.L - tol:
            self.s = self.L
            self.u = -self.u
            self._log("reflect", boundary=self.L)

    def run(self, t_end: float) -> None:
        """Advance to ``t_end`` (events at ``t_end`` itself are not processed)."""
        if self.t == 0.0 and not self.segments and not self.events:
            self._process_turns()
        if len(self.change_times):
            A_now = self.config.inflows_at(self.t)
            if not np.array_equal(A_now, self.A):
                self._set_inflow(self.t)
                self._log("inflow")
        while self.t < t_end - self.tol_t:
            if len(self.segments) > self.MAX_SEGMENTS:
                raise RuntimeError("segment budget exhausted")
            region, dwell = self.modes()
            rate0, slope = self.rates(region, dwell)
            dt_h, dt_pos, dist, dt_in, drain, roots, dt_q = self.candidates(
                t_end, region, dwell, rate0, slope)
            dt = min(dt_h, dt_pos, dt_in, dt_q)
            tol = self.tol_t
            R_start = self.R
            seg = (self.t, self.t + dt, self.s, self.u, R_start, rate0, slope, region, dwell)
            self.integral += float(segment_integrals(R_start, rate0, slope, dt).sum())
            R_new = R_start + rate0 * dt + 0.5 * slope * dt * dt
            emptied = set(drain[roots <= dt + tol].tolist()) if len(drain) else set()
            emptied.update(int(i) for i in drain if R_new[i] <= self.snap[i])
            emptied = sorted(emptied)
            R_new[emptied] = 0.0
            np.maximum(R_new, 0.0, out=R_new)
            for i in emptied:
                a = rate0[i] + slope[i] * dt
                if abs(a) < 1e-10:
                    self.warnings.append(
                        f"t={self.t + dt:.12g}: R_{i + 1} reaches zero tangentially")
            if self.record:
                self.segments.append(seg)
            hit_h = dt_h <= dt + tol
            hit_pos = dt_pos <= dt + tol
            self.t = t_end if hit_h else self.t + dt
            if hit_pos:
                self.s = self.s + np.sign(self.u) * dist
            else:
                self.s = self.s + self.u * dt
            self.s = min(max(self.s, 0.0), self.L)
            self.R = R_new
            for i in emptied:
                self._log("empty", int(i))
            if hit_pos:
                near = np.argwhere(np.abs(self.crit - self.s) <= 4 * self.tol_x)
                for i, b in near:
                    self._log("cross", int(i), float(b))
            if dt_in <= dt + tol and not hit_h:
                self._set_inflow(self.t)
                self._log("inflow")
            if hit_h:
                break
            self._process_turns()

    def trajectory(self, schedule: SwitchingSchedule | None = None,
                   horizon_event: bool = True) -> Trajectory:
        if horizon_event:
            self._log("horizon")
        M = self.config.M
        if self.segments:
            cols = list(zip(*self.segments))
            arrays = [np.fromiter(c, dtype=float, count=len(c)) for c in cols[:4]]
            R0, rate0, slope = (np.stack(c).astype(float, copy=False) for c in cols[4:7])
            region = np.stack(cols[7]).astype(np.int8, copy=False)
            dwell = np.stack(cols[8]).astype(bool, copy=False)
        else:
            arrays = [np.zeros(0)] * 4
            R0 = rate0 = slope = np.zeros((0, M))
            region = np.zeros((0, M), dtype=np.int8)
            dwell = np.zeros((0, M), dtype=bool)
        t0, t1, s0, u = arrays
        span = (t1[-1] - t0[0]) if len(t0) else 0.0
        J = self.integral / span if span > 0 else 0.0
        return Trajectory(t0=t0, t1=t1, s0=s0, u=u, R0=R0, rate0=rate0, slope=slope,
                          region=region, dwell=dwell, events=tuple(self.events),
                          cost=J, config=self.config, schedule=schedule,
                          R_final=self.R.copy(), s_final=self.s,
                          warnings=tuple(self.warnings))


def simulate(config: MissionConfig, schedule: SwitchingSchedule | Sequence[float]) -> Trajectory:
    """Simulate ``[0, T]`` from ``s=0``, ``u=+1``, turning at each ``theta_j``.

    With no switching location left the agent reflects off the walls.
    """
    if not isinstance(schedule, SwitchingSchedule):
        schedule = SwitchingSchedule(tuple(schedule))
    schedule.check(config.L)
    if not config.time_varying:
        return _simulate_compiled(config, schedule)
    engine = Engine(config, thetas=schedule.theta)
    engine.run(config.T)
    return engine.trajectory(schedule)


def simulate_reference(config: MissionConfig,
                       schedule: SwitchingSchedule | Sequence[float]) -> Trajectory:
    """Same as :func:`simulate` but always through the pure-Python engine."""
    if not isinstance(schedule, SwitchingSchedule):
        schedule = SwitchingSchedule(tuple(schedule))
    schedule.check(config.L)
    engine = Engine(config, thetas=schedule.theta)
    engine.run(config.T)
    return engine.trajectory(schedule)


_KIND_NAMES = {0: "empty", 1: "cross", 3: "switch", 4: "reflect"}


def _simulate_compiled(config: MissionConfig, schedule: SwitchingSchedule) -> Trajectory:
    from . import _fast

    eng = Engine(config, thetas=schedule.theta, record=False)
    M = config.M
    cap = int(config.T * (6 * M / config.L + 2)) + 64
    while True:
        seg_f = np.empty((cap, 4))
        seg_M = np.empty((3, cap, M))
        seg_reg = np.empty((cap, M), dtype=np.int8)
        seg_dw = np.empty((cap, M), dtype=bool)
        ev = np.empty((3 * cap + 10 * M + 16, 5))
        tang = np.empty((cap, 2))
        K, n_ev, n_tang, integral, t_last, s_end, R_end = _fast.run_kernel(
            eng.alpha, eng.A, eng.offsets, eng.crit_sorted, eng.B, eng.r, eng.L,
            config.T, eng.thetas, eng.R, eng.tol_t, eng.tol_x, eng.snap,
            seg_f, seg_M, seg_reg, seg_dw, ev, tang)
        if K >= 0:
            break
        if cap > Engine.MAX_SEGMENTS:
            raise RuntimeError("segment budget exhausted")
        cap *= 2
    events = []
    for row in ev[:n_ev]:
        kind = _KIND_NAMES[int(row[1])]
        if kind == "reflect":
            events.append(Event(float(row[0]), kind, None, float(row[3]), int(row[4])))
        elif kind == "cross":
            events.append(Event(float(row[0]), kind, int(row[2]), float(row[3]), int(row[4])))
        else:
            events.append(Event(float(row[0]), kind, int(row[2]), None, int(row[4])))
    events.append(Event(float(t_last), "horizon", None, None, K))
    warnings = tuple(f"t={tt:.12g}: R_{int(i) + 1} reaches zero tangentially"
                     for tt, i in tang[:n_tang])
    t0, t1, s0, u = (seg_f[:K, c].copy() for c in range(4))
    span = (t1[-1] - t0[0]) if K else 0.0
    return Trajectory(t0=t0, t1=t1, s0=s0, u=u, R0=seg_M[0, :K].copy(),
                      rate0=seg_M[1, :K].copy(), slope=seg_M[2, :K].copy(),
                      region=seg_reg[:K].copy(), dwell=seg_dw[:K].copy(),
                      events=tuple(events), cost=integral / span if span > 0 else 0.0,
                      config=config, schedule=schedule, R_final=R_end.copy(),
                      s_final=float(s_end), warnings=warnings)


def next_event(config: MissionConfig, schedule: SwitchingSchedule | Sequence[float],
               state: SegmentState, t_end: float | None = None) -> list[Event]:
    """Events that end the segment starting at ``state``, all at the same time.

    The state is not modified. Several events may tie; they are returned in
    processing order.
    """
    thetas = schedule.theta if isinstance(schedule, SwitchingSchedule) else tuple(schedule)
    t_end = config.T if t_end is None else t_end
    engine = Engine(config, state, thetas, record=False)
    region, dwell = engine.modes()
    rate0, slope = engine.rates(region, dwell)
    dt_h, dt_pos, dist, dt_in, drain, roots, dt_q = engine.candidates(
        t_end, region, dwell, rate0, slope)
    dt = min(dt_h, dt_pos, dt_in, dt_q)
    tol = engine.tol_t
    t_ev = state.t + dt
    out: list[Event] = []
    for i in drain[roots <= dt + tol]:
        out.append(Event(t_ev, "empty", int(i)))
    if dt_pos <= dt + tol:
        s_hit = state.s + np.sign(state.u) * dist
        for i, b in np.argwhere(np.abs(engine.crit - s_hit) <= 4 * engine.tol_x):
            out.append(Event(t_ev, "cross", int(i), float(b)))
        j = state.next_switch
        if j < len(thetas) and abs(thetas[j] - s_hit) <= engine.tol_x:
            out.append(Event(t_ev, "switch", j + 1))
        elif s_hit <= engine.tol_x or s_hit >= config.L - engine.tol_x:
            out.append(Event(t_ev, "reflect", boundary=0.0 if s_hit <= engine.tol_x else config.L))
    if dt_in <= dt + tol:
        out.append(Event(t_ev, "inflow"))
    if dt_h <= dt + tol:
        out.append(Event(t_end, "horizon"))
    return sorted(out, key=lambda e: _ORDER[e.kind])


def simulate_team(config: MissionConfig, schedules: Sequence[SwitchingSchedule],
                  dt: float = 1e-3, starts: Sequence[float] | None = None):
    """Sampled forward simulation of several agents sharing the sensing field.

    Agents follow their own schedules (reflecting at the walls once a schedule
    is exhausted) and drain each queue through the joint detection
    probability. Returns ``(t, S, R, J)`` with ``S`` of shape ``(n_t, n)`` and
    ``R`` of shape ``(n_t, M)``. First-order accurate in ``dt``.
    """
    if not schedules:
        raise ValueError("at least one agent schedule is required")
    starts = [0.0] * len(schedules) if starts is None else list(starts)
    n = int(math.ceil(config.T / dt))
    t = dt * np.arange(n + 1)
    t[-1] = config.T
    paths = []
    for sched, s_init in zip(schedules, starts):
        if s_init == 0.0:
            traj = simulate(config, sched)
            paths.append(traj.position(t))
        else:
            eng = Engine(config, SegmentState(0.0, s_init, 1.0, config.R0.copy()),
                         thetas=sched.theta)
            eng.run(config.T)
            paths.append(eng.trajectory(sched).position(t))
    S = np.stack(paths, axis=1)
    alpha = config.alphas
    R = np.empty((n + 1, config.M))
    R[0] = config.R0
    for k in range(n):
        p = joint_detection_probability(alpha, S[k], config.r)
        A = config.inflows_at(t[k]) if config.time_varying else config.inflows
        h = t[k + 1] - t[k]
        R[k + 1] = np.maximum(0.0, R[k] + h * (A - config.B * p))
    J = float(np.sum(0.5 * (R[1:] + R[:-1]).sum(axis=1) * np.diff(t)) / config.T)
    return t, S, R, J
