"""Domain types and the sensing / uncertainty laws.

A mission is a segment ``[0, L]`` patrolled by one agent with speed at most 1.
Each sampling point ``alpha_i`` carries an uncertainty ``R_i`` that grows at
rate ``A_i`` and is drained at rate ``B * p_i(s)`` while the agent senses it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ConfigError(ValueError):
    """Invalid mission data. ``code`` is a stable machine-readable tag."""

    def __init__(self, code: str, message: str, line: int | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.line = line

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": self.message}
        if self.line is not None:
            out["line"] = self.line
        return out


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("non_finite", f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SamplePoint:
    """A monitored location.

    ``inflow_changes`` is an optional piecewise-constant override of the inflow
    rate: a sorted sequence of ``(time, A)`` pairs, each taking effect at its
    time. Only the receding-horizon controller is meant to use it.
    """

    alpha: float
    A: float
    R0: float
    inflow_changes: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", _finite("alpha", self.alpha))
        object.__setattr__(self, "A", _finite("A", self.A))
        object.__setattr__(self, "R0", _finite("R0", self.R0))
        if self.A <= 0:
            raise ConfigError("nonpositive_inflow", f"A must be > 0, got {self.A}")
        if self.R0 < 0:
            raise ConfigError("negative_uncertainty", f"R0 must be >= 0, got {self.R0}")
        changes = tuple((_finite("inflow time", t), _finite("inflow rate", a))
                        for t, a in self.inflow_changes)
        if any(b[0] < a[0] for a, b in zip(changes, changes[1:])):
            raise ConfigError("unsorted_inflow", "inflow_changes must be sorted by time")
        if any(a <= 0 for _, a in changes):
            raise ConfigError("nonpositive_inflow", "inflow rates must be > 0")
        object.__setattr__(self, "inflow_changes", changes)

    def inflow_at(self, t: float) -> float:
        rate = self.A
        for when, a in self.inflow_changes:
            if when <= t:
                rate = a
            else:
                break
        return rate

    @property
    def max_inflow(self) -> float:
        return max([self.A] + [a for _, a in self.inflow_changes])


@dataclass(frozen=True)
class MissionConfig:
    L: float
    r: float
    B: float
    T: float
    points: tuple[SamplePoint, ...]

    def __post_init__(self):
        for name in ("L", "r", "B", "T"):
            value = _finite(name, getattr(self, name))
            if value <= 0:
                raise ConfigError("nonpositive_parameter", f"{name} must be > 0, got {value}")
            object.__setattr__(self, name, value)
        points = tuple(self.points)
        if not points:
            raise ConfigError("empty_points", "at least one sampling point is required")
        for k, pt in enumerate(points):
            if not 0.0 <= pt.alpha <= self.L:
                raise ConfigError("alpha_out_of_range",
                                  f"point {k}: alpha={pt.alpha} outside [0, {self.L}]")
            if pt.max_inflow >= self.B:
                raise ConfigError("inflow_not_below_B",
                                  f"point {k}: requires B > A (A={pt.max_inflow}, B={self.B})")
        if any(b.alpha < a.alpha for a, b in zip(points, points[1:])):
            raise ConfigError("unsorted_alphas", "sampling points must be sorted by alpha")
        object.__setattr__(self, "points", points)

    @property
    def M(self) -> int:
        return len(self.points)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([p.alpha for p in self.points])

    @property
    def inflows(self) -> np.ndarray:
        return np.array([p.A for p in self.points])

    @property
    def R0(self) -> np.ndarray:
        return np.array([p.R0 for p in self.points])

    @property
    def time_varying(self) -> bool:
        return any(p.inflow_changes for p in self.points)

    def inflows_at(self, t: float) -> np.ndarray:
        return np.array([p.inflow_at(t) for p in self.points])

    def inflow_change_times(self) -> np.ndarray:
        times = sorted({when for p in self.points for when, _ in p.inflow_changes})
        return np.array(times, dtype=float)


def uniform_config(L: float, r: float, B: float, T: float, M: int,
                   A: float, R0: float) -> MissionConfig:
    """Config with ``M`` points evenly spaced on ``[0, L]``, both ends included."""
    if M < 1:
        raise ConfigError("empty_points", "M must be >= 1")
    alphas = np.linspace(0.0, L, M) if M > 1 else np.array([L / 2.0])
    return MissionConfig(L=L, r=r, B=B, T=T,
                         points=tuple(SamplePoint(float(a), A, R0) for a in alphas))


@dataclass(frozen=True)
class SwitchingSchedule:
    """Chronological switching locations ``theta_1..theta_N``.

    The agent starts at 0 moving right, so odd-indexed entries (1-based) are
    right-to-left turns and even-indexed entries are left-to-right turns.
    """

    theta: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "theta",
                           tuple(_finite("theta", v) for v in np.ravel(self.theta)))

    @property
    def N(self) -> int:
        return len(self.theta)

    def as_array(self) -> np.ndarray:
        return np.array(self.theta, dtype=float)

    @classmethod
    def from_grouped(cls, values: Sequence[float]) -> "SwitchingSchedule":
        """Build from a vector listing all odd-indexed entries, then the even ones.

        ``[95, 95, 5]`` becomes the chronological schedule ``[95, 5, 95]``.
        """
        values = list(values)
        n_odd = (len(values) + 1) // 2
        odd, even = values[:n_odd], values[n_odd:]
        out = []
        for k in range(len(values)):
            out.append(odd[k // 2] if k % 2 == 0 else even[k // 2])
        return cls(tuple(out))

    def grouped(self) -> list[float]:
        return list(self.theta[0::2]) + list(self.theta[1::2])

    def violations(self, L: float, tol: float = 0.0) -> list[str]:
        out = []
        th = self.theta
        for j, v in enumerate(th, start=1):
            if v < -tol or v > L + tol:
                out.append(f"theta_{j}={v} outside [0, {L}]")
        for j in range(2, len(th) + 1):
            prev, cur = th[j - 2], th[j - 1]
            if j % 2 == 0 and cur > prev + tol:
                out.append(f"theta_{j}={cur} > theta_{j - 1}={prev}")
            if j % 2 == 1 and cur < prev - tol:
                out.append(f"theta_{j}={cur} < theta_{j - 1}={prev}")
        return out

    def is_feasible(self, L: float, tol: float = 0.0) -> bool:
        return not self.violations(L, tol)

    def check(self, L: float, tol: float = 0.0) -> None:
        bad = self.violations(L, tol)
        if bad:
            raise ConfigError("infeasible_schedule", "; ".join(bad))


def detection_probability(x, s, r: float):
    """Linear-decay sensing: ``1 - |x - s| / r`` inside the range, else 0."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(s, dtype=float))
    p = np.maximum(0.0, 1.0 - d / r)
    return float(p) if p.ndim == 0 else p


def joint_detection_probability(x, positions: Sequence[float], r: float):
    """Probability that at least one of several independent agents detects at ``x``."""
    positions = list(np.ravel(positions))
    if not positions:
        raise ValueError("positions must be nonempty")
    miss = 1.0
    for s in positions:
        miss = miss * (1.0 - np.asarray(detection_probability(x, s, r)))
    p = 1.0 - miss
    return float(p) if np.ndim(p) == 0 else p


def uncertainty_rate(R: float, p: float, A: float, B: float) -> float:
    if R < 0:
        raise ValueError(f"uncertainty must be nonnegative, got {R}")
    if R == 0 and A < B * p:
        return 0.0
    return A - B * p
