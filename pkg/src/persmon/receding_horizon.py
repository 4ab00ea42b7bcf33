"""Receding-horizon control with a constant velocity per planning window."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .hybrid_sim import Engine, SegmentState, Trajectory
from .model import ConfigError, MissionConfig

SEARCH_MODES = ("binary", "continuous")


@dataclass(frozen=True)
class RhSettings:
    H: float
    h: float
    search: str = "binary"
    grid_points: int = 41
    refine_width: float = 1e-4

    def __post_init__(self):
        if self.search not in SEARCH_MODES:
            raise ConfigError("bad_search_mode", f"search must be one of {SEARCH_MODES}")
        if not (0 < self.h <= self.H):
            raise ConfigError("bad_horizon", f"need 0 < h <= H, got h={self.h}, H={self.H}")
        if self.grid_points < 2:
            raise ConfigError("bad_grid", "grid_points must be >= 2")

    @classmethod
    def default(cls, config: MissionConfig, search: str = "binary") -> "RhSettings":
        H = min(2.0 * config.r, config.T)
        return cls(H=H, h=H / 2.0, search=search)

    def validate(self, config: MissionConfig) -> None:
        if self.H > config.T:
            raise ConfigError("bad_horizon", f"H={self.H} exceeds T={config.T}")


def _engine_at(config: MissionConfig, s: float, R, t: float, u: float) -> Engine:
    state = SegmentState(t=t, s=s, u=u, R=np.asarray(R, dtype=float).copy())
    return Engine(config, state, thetas=(), record=False)


def window_cost(config: MissionConfig, s_now: float, R_now, u: float, H: float,
                t_now: float = 0.0) -> float:
    """Integral of the total uncertainty over ``[t_now, t_now + H]`` under constant ``u``.

    The window is truncated at ``T``. The agent reflects off the walls.
    """
    t_end = min(t_now + H, config.T)
    eng = _engine_at(config, s_now, R_now, t_now, float(u))
    eng._process_turns()
    eng.run(t_end)
    return eng.integral


def rh_step(config: MissionConfig, s_now: float, R_now, settings: RhSettings,
            t_now: float = 0.0) -> float:
    """Velocity minimizing the window cost; ties go to the larger ``u``."""
    if not 0.0 <= s_now <= config.L:
        raise ConfigError("bad_state", f"s={s_now} outside [0, {config.L}]")
    R_now = np.asarray(R_now, dtype=float)
    if np.any(R_now < 0):
        raise ConfigError("bad_state", "R must be nonnegative")

    def cost(u):
        return window_cost(config, s_now, R_now, u, settings.H, t_now)

    if settings.search == "binary":
        candidates = np.array([1.0, -1.0])
    else:
        candidates = np.linspace(1.0, -1.0, settings.grid_points)
    values = np.array([cost(u) for u in candidates])
    k = int(np.argmin(values))  # first minimum, i.e. the largest u among ties
    best_u, best_J = float(candidates[k]), float(values[k])
    if settings.search == "continuous":
        lo = candidates[min(k + 1, len(candidates) - 1)]
        hi = candidates[max(k - 1, 0)]
        res = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                              options={"xatol": settings.refine_width})
        if res.fun < best_J - 1e-12 * max(1.0, abs(best_J)):
            best_u, best_J = float(res.x), float(res.fun)
    return best_u


@dataclass
class RhResult:
    trajectory: Trajectory
    J: float
    decisions: list[tuple[float, float]]
    settings: RhSettings


def rh_run(config: MissionConfig, settings: RhSettings | None = None,
           s0: float = 0.0, R0: Sequence[float] | None = None) -> RhResult:
    """Closed loop: re-plan every ``h`` time units until ``T``."""
    settings = RhSettings.default(config) if settings is None else settings
    settings.validate(config)
    R_init = config.R0 if R0 is None else np.asarray(R0, dtype=float)
    eng = _engine_at(config, s0, R_init, 0.0, 1.0)
    eng.record = True
    decisions = []
    tol = eng.tol_t
    n_steps = int(math.ceil(config.T / settings.h - 1e-9))
    for n in range(n_steps):
        t_dec = n * settings.h
        if t_dec >= config.T - tol:
            break
        u = rh_step(config, eng.s, eng.R, settings, eng.t)
        eng.u = u
        eng._log("control", boundary=u)
        eng._process_turns()
        decisions.append((float(eng.t), u))
        eng.run(min((n + 1) * settings.h, config.T))
    traj = eng.trajectory(None)
    return RhResult(trajectory=traj, J=traj.cost, decisions=decisions, settings=settings)

