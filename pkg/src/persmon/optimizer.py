"""Projected gradient descent over switching locations with Armijo steps.

The outer loop grows the number of switching locations whenever a local
minimum still drives the agent into a wall.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hybrid_sim import Trajectory, simulate
from .ipa import ipa_gradient
from .model import ConfigError, MissionConfig, SwitchingSchedule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArmijoSettings:
    eta0: float = 1.0
    beta: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 40

    def __post_init__(self):
        if self.eta0 <= 0:
            raise ValueError("eta0 must be > 0")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")


@dataclass(frozen=True)
class OptimizerSettings:
    """``xtol`` stops a phase once an accepted step moves ``theta`` by less
    than ``xtol * L`` (the usual outcome at a kink, where the gradient never
    vanishes). ``wall_tol * L`` is how close to a wall counts as touching it
    in the endpoint check. Switching locations ending within ``flag_tol * L``
    of a wall are listed in the report as boundary-converged."""

    eps: float = 2e-10
    max_iters: int = 200
    armijo: ArmijoSettings = field(default_factory=ArmijoSettings)
    max_N_growth: int = 5
    xtol: float = 1e-10
    wall_tol: float = 1e-9
    flag_tol: float = 1e-3

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.max_iters < 0 or self.max_N_growth < 0:
            raise ValueError("iteration caps must be nonnegative")


@dataclass
class Phase:
    N: int
    theta_start: list[float]
    theta_end: list[float]
    iterations: int
    J_history: list[float]
    grad_norm: float
    stop_reason: str


@dataclass
class OptimizerReport:
    theta_star: SwitchingSchedule
    J_star: float
    iterations: list[int]
    J_history: list[float]
    N_history: list[int]
    prop1_satisfied: bool
    converged: bool
    grad_norm: float
    phases: list[Phase]
    trajectory: Trajectory | None = None
    boundary_theta: list[int] = field(default_factory=list)


@dataclass
class ArmijoResult:
    eta: float
    theta: np.ndarray
    J: float
    stalled: bool
    evaluations: int
    trajectory: Trajectory | None = None


def project_schedule(theta: Sequence[float], L: float) -> np.ndarray:
    """Forward sweep enforcing the alternating order, then clamp to ``[0, L]``."""
    th = np.array(theta, dtype=float)
    for j in range(1, len(th)):
        if (j + 1) % 2 == 0:
            th[j] = min(th[j], th[j - 1])
        else:
            th[j] = max(th[j], th[j - 1])
    return np.clip(th, 0.0, L)


def project_direction(grad: Sequence[float], theta: Sequence[float], L: float,
                      tol: float | None = None) -> np.ndarray:
    """Descent direction (to be subtracted) respecting the active constraints.

    Active order constraints the raw step would break have their pair
    averaged; components pushing ``theta`` out of ``[0, L]`` are zeroed.
    """
    th = np.asarray(theta, dtype=float)
    sched = SwitchingSchedule(tuple(th))
    tol = 1e-12 * max(1.0, L) if tol is None else tol
    if not sched.is_feasible(L, tol):
        raise ConfigError("infeasible_schedule", "; ".join(sched.violations(L, tol)))
    d = np.array(grad, dtype=float)
    N = len(d)
    for _ in range(4 * N + 4):
        changed = False
        for j in range(1, N):
            if abs(th[j] - th[j - 1]) > tol:
                continue
            even = (j + 1) % 2 == 0
            # new gap theta_j - theta_{j-1} changes by -(d_j - d_{j-1}) per unit step
            if (even and d[j] < d[j - 1]) or (not even and d[j] > d[j - 1]):
                mean = 0.5 * (d[j] + d[j - 1])
                d[j] = d[j - 1] = mean
                changed = True
        for j in range(N):
            if (th[j] >= L - tol and d[j] < 0) or (th[j] <= tol and d[j] > 0):
                d[j] = 0.0
                changed = True
        if not changed:
            break
    return d


def armijo_step(objective: Callable[[np.ndarray], tuple[float, Trajectory | None]],
                theta: Sequence[float], direction: Sequence[float], J_current: float,
                L: float, settings: ArmijoSettings = ArmijoSettings()) -> ArmijoResult:
    """Backtrack ``eta = eta0 * beta**m`` until sufficient decrease holds."""
    th = np.asarray(theta, dtype=float)
    d = np.asarray(direction, dtype=float)
    dd = float(d @ d)
    eta = settings.eta0
    for m in range(settings.max_backtracks + 1):
        cand = project_schedule(th - eta * d, L)
        J_new, traj = objective(cand)
        if J_new <= J_current - settings.c * eta * dd:
            return ArmijoResult(eta, cand, J_new, False, m + 1, traj)
        eta *= settings.beta
    return ArmijoResult(0.0, th.copy(), J_current, True, settings.max_backtracks + 1)


def default_theta(config: MissionConfig) -> list[float]:
    N = max(1, int(math.floor(config.T / config.L)))
    return [0.9 * config.L if j % 2 == 0 else 0.1 * config.L for j in range(N)]


def _wall_touch(traj: Trajectory, tol: float) -> bool:
    if traj.reflect_events():
        return True
    L = traj.config.L
    s_end, _ = traj.segment_end_state()
    ends = np.concatenate([traj.s0[1:], s_end])
    return bool(np.any(ends <= tol) or np.any(ends >= L - tol))


def _grow(theta: np.ndarray, traj: Trajectory, L: float) -> np.ndarray:
    """Append one switching location without changing the trajectory.

    The new location is the wall of the first reflection, so the agent turns
    exactly where it used to bounce. Without a reflection (a touch at the very
    end) the final position is used, which the agent reaches at ``T``.
    """
    reflects = traj.reflect_events()
    new = float(reflects[0].boundary) if reflects else float(traj.s_final)
    return project_schedule(np.append(theta, new), L)


def optimize(config: MissionConfig, theta0: Sequence[float] | SwitchingSchedule | None = None,
             settings: OptimizerSettings | None = None,
             callback: Callable[[int, np.ndarray, float], None] | None = None) -> OptimizerReport:
    settings = OptimizerSettings() if settings is None else settings
    L = config.L
    if theta0 is None:
        theta = np.array(default_theta(config))
    else:
        sched0 = theta0 if isinstance(theta0, SwitchingSchedule) else SwitchingSchedule(tuple(theta0))
        sched0.check(L)
        theta = sched0.as_array()
    if len(theta) == 0:
        raise ConfigError("empty_schedule", "need at least one switching location")

    def objective(vec):
        traj = simulate(config, SwitchingSchedule(tuple(vec)))
        return traj.cost, traj

    phases: list[Phase] = []
    J_history: list[float] = []
    N_history: list[int] = []
    wall = settings.wall_tol * L
    converged = False
    grad_norm = math.inf
    traj = simulate(config, SwitchingSchedule(tuple(theta)))
    J = traj.cost
    growth = 0
    while True:
        N_history.append(len(theta))
        start = theta.tolist()
        hist = [J]
        reason = "max_iters"
        converged = False
        it = 0
        while True:
            sched = SwitchingSchedule(tuple(theta))
            g = ipa_gradient(config, sched, traj)
            d = project_direction(g, theta, L)
            grad_norm = float(np.linalg.norm(d))
            if grad_norm < settings.eps:
                reason, converged = "gradient", True
                break
            if it >= settings.max_iters:
                break
            step = armijo_step(objective, theta, d, J, L, settings.armijo)
            if step.stalled:
                reason = "stall"
                break
            moved = float(np.max(np.abs(step.theta - theta)))
            theta, J, traj = step.theta, step.J, step.trajectory
            hist.append(J)
            it += 1
            if callback is not None:
                callback(it, theta.copy(), J)
            if moved < settings.xtol * L:
                reason = "step"
                break
        logger.info("phase N=%d: %d iterations, J=%.6g, stop=%s", len(theta), it, J, reason)
        phases.append(Phase(len(theta), start, theta.tolist(), it, hist, grad_norm, reason))
        J_history.extend(hist)
        if not _wall_touch(traj, wall):
            prop1 = True
            break
        prop1 = False
        if growth >= settings.max_N_growth:
            break
        growth += 1
        grown = _grow(theta, traj, L)
        grown_traj = simulate(config, SwitchingSchedule(tuple(grown)))
        logger.info("growing to N=%d with theta_N=%g", len(grown), grown[-1])
        if abs(grown_traj.cost - J) > 1e-9 * max(1.0, abs(J)):
            logger.warning("growth changed J from %.12g to %.12g", J, grown_traj.cost)
        theta, traj, J = grown, grown_traj, grown_traj.cost
    near = settings.flag_tol * L
    flagged = [j + 1 for j, v in enumerate(theta) if v <= near or v >= L - near]
    if flagged:
        logger.warning("switching locations %s converged next to a wall", flagged)
    return OptimizerReport(
        theta_star=SwitchingSchedule(tuple(theta)), J_star=J, boundary_theta=flagged,
        iterations=[p.iterations for p in phases], J_history=J_history,
        N_history=N_history, prop1_satisfied=prop1, converged=converged,
        grad_norm=grad_norm, phases=phases, trajectory=traj)
