"""Infinitesimal perturbation analysis of the cost over switching locations.

Two propagations are provided. :func:`ipa_gradient` uses the closed forms
for this system: after ``theta_j`` is reached, ``ds/dtheta_j = (-1)**j 2 u(t)``;
each ``dR_i/dtheta_j`` is piecewise linear in time, frozen while the point is
out of range or empty, and reset to zero whenever ``R_i`` empties.
:func:`general_ipa_gradient` integrates the generic state-derivative
equations with explicit event-time derivatives and jump conditions and is
kept as a cross-check.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .hybrid_sim import _ORDER, Trajectory, simulate
from .model import MissionConfig, SwitchingSchedule

logger = logging.getLogger(__name__)


@dataclass
class GradientState:
    activation_times: list[float | None]
    dR: np.ndarray
    grad: np.ndarray
    warnings: list[str] = field(default_factory=list)


def grad_s(j: int, t: float, u: float, activation: float | None) -> float:
    """Closed-form ``ds/dtheta_j`` (``j`` is 1-based)."""
    if activation is None or t < activation:
        return 0.0
    return (-1.0) ** j * 2.0 * u


def _check(schedule: SwitchingSchedule, traj: Trajectory) -> None:
    if traj.schedule is not None and tuple(traj.schedule.theta) != tuple(schedule.theta):
        raise ValueError("trajectory was simulated with a different schedule")


def _activation(traj: Trajectory, N: int) -> tuple[np.ndarray, list[float | None]]:
    seg = np.full(N, np.iinfo(np.int64).max, dtype=np.int64)
    times: list[float | None] = [None] * N
    for e in traj.switch_events():
        j = e.index - 1
        if times[j] is None:
            times[j] = e.time
            seg[j] = e.segment
    return seg, times


def ipa_gradient(config: MissionConfig, schedule: SwitchingSchedule,
                 trajectory: Trajectory | None = None, full: bool = False):
    """Exact gradient of the cost with respect to ``theta``.

    With ``full=True`` a :class:`GradientState` is returned instead of the bare
    vector.
    """
    if not isinstance(schedule, SwitchingSchedule):
        schedule = SwitchingSchedule(tuple(schedule))
    traj = simulate(config, schedule) if trajectory is None else trajectory
    _check(schedule, traj)
    N, M = schedule.N, config.M
    act_seg, act_times = _activation(traj, N)
    sign_j = (-1.0) ** np.arange(1, N + 1)
    B, r = config.B, config.r

    reset = np.zeros((traj.K + 1, M), dtype=bool)
    for e in traj.events:
        if e.kind == "empty":
            reset[e.segment, e.index] = True

    region, dwell = traj.region, traj.dwell
    left = ((region == 1) | (region == 2)) & ~dwell
    right = ((region == 3) | (region == 4)) & ~dwell
    dpds_all = (left.astype(float) - right.astype(float)) / r
    grad, dR = _fast.ipa_kernel(traj.u, traj.durations, dpds_all, reset, act_seg,
                                sign_j, B)
    grad /= config.T
    if not full:
        return grad
    return GradientState(activation_times=act_times, dR=dR, grad=grad,
                         warnings=list(traj.warnings))


@dataclass
class GeneralIPAResult:
    grad: np.ndarray
    grad_leibniz: np.ndarray
    tau_prime: list[tuple[float, str, np.ndarray]]
    warnings: list[str]


def general_ipa_gradient(config: MissionConfig, schedule: SwitchingSchedule,
                         trajectory: Trajectory | None = None) -> GeneralIPAResult:
    """Generic propagation of ``x' = dx/dtheta`` with ``x = (s, R_1..R_M)``.

    Inside a segment ``d/dt x' = df/dx x'`` (no explicit ``theta``
    dependence); at an endogenous event with guard ``g``::

        tau' = -(dg/dx f(tau-))**-1 (dg/dtheta + dg/dx x'(tau-))
        x'(tau+) = x'(tau-) + (f(tau-) - f(tau+)) tau'

    The sensing slope ``dp/ds`` is recomputed from geometry at the segment
    midpoint, not taken from the simulator's region labels. The cost gradient
    is assembled twice: from the integrals of ``R'`` alone and with explicit
    ``R(tau) tau'`` boundary terms, which must telescope away.
    """
    if not isinstance(schedule, SwitchingSchedule):
        schedule = SwitchingSchedule(tuple(schedule))
    traj = simulate(config, schedule) if trajectory is None else trajectory
    _check(schedule, traj)
    N, M = schedule.N, config.M
    B, r = config.B, config.r
    alpha = config.alphas
    warnings: list[str] = []

    s_end, R_end = traj.segment_end_state()
    rate_end = traj.rate0 + traj.slope * traj.durations[:, None]

    xs = np.zeros(N)            # ds/dtheta
    xR = np.zeros((M, N))       # dR/dtheta
    grad = np.zeros(N)
    boundary = np.zeros(N)
    tau_log: list[tuple[float, str, np.ndarray]] = []

    by_seg: dict[int, list] = {}
    for e in traj.events:
        by_seg.setdefault(e.segment, []).append(e)

    def jumps(k: int) -> np.ndarray | None:
        """Apply the events preceding segment ``k``; return the boundary tau'."""
        nonlocal xs
        events = by_seg.get(k, [])
        if not events:
            return None
        u_minus = traj.u[k - 1] if k > 0 else 1.0
        f_R_minus = rate_end[k - 1] if k > 0 else traj.rate0[0]
        f_R_plus = traj.rate0[k] if k < traj.K else f_R_minus
        tau_first = None
        u_cur = u_minus
        for e in sorted(events, key=lambda ev: _ORDER[ev.kind]):
            if e.kind == "empty":
                i = e.index
                f_minus = f_R_minus[i]
                if abs(f_minus) < 1e-10:
                    warnings.append(f"t={e.time:.12g}: degenerate empty event for R_{i + 1}")
                    xR[i] = 0.0
                    continue
                tp = -xR[i] / f_minus
                xR[i] = xR[i] + (f_minus - 0.0) * tp
            elif e.kind == "cross":
                i = e.index
                tp = -xs / u_cur
                xR[i] = xR[i] + (f_R_minus[i] - f_R_plus[i]) * tp
            elif e.kind == "switch":
                j = e.index - 1
                dg_dtheta = np.zeros(N)
                dg_dtheta[j] = -1.0
                tp = -(dg_dtheta + xs) / u_cur
                xs = xs + (u_cur - (-u_cur)) * tp
                u_cur = -u_cur
            elif e.kind == "reflect":
                tp = -xs / u_cur
                xs = xs + (u_cur - (-u_cur)) * tp
                u_cur = -u_cur
            else:
                continue
            tau_log.append((e.time, e.kind, tp.copy()))
            if tau_first is None:
                tau_first = tp
        return tau_first

    tau_start = np.zeros(N)
    for k in range(traj.K):
        tp = jumps(k)
        if tp is not None and k > 0:
            tau_start = tp
            # closing term of the previous segment
            boundary += R_end[k - 1].sum() * tp
        elif k > 0:
            tau_start = np.zeros(N)
        boundary -= traj.R0[k].sum() * tau_start
        dt = traj.durations[k]
        s_mid = traj.s0[k] + traj.u[k] * 0.5 * dt
        d = alpha - s_mid
        inside = (np.abs(d) < r) & ~traj.dwell[k]
        dpds = np.where(inside, np.sign(d) / r, 0.0)
        dfds = -B * dpds
        rate = np.outer(dfds, xs)
        grad += xR.sum(axis=0) * dt + 0.5 * rate.sum(axis=0) * dt * dt
        xR += rate * dt
    # horizon event: tau' = 0, closing term vanishes
    grad /= config.T
    leib = grad + boundary / config.T
    return GeneralIPAResult(grad=grad, grad_leibniz=leib, tau_prime=tau_log,
                            warnings=warnings)


@dataclass
class FDResult:
    grad: np.ndarray
    skipped: list[int]
    forward: np.ndarray
    backward: np.ndarray


def finite_difference_gradient(config: MissionConfig, schedule: SwitchingSchedule,
                               step: float | None = None, workers: int = 1,
                               kink_rtol: float = 1e-3) -> FDResult:
    """Central differences of the simulated cost.

    A component is skipped (left as ``nan``) when either perturbed schedule is
    infeasible or the one-sided slopes disagree by more than ``kink_rtol``,
    which signals an event coincidence within the stencil.
    """
    if not isinstance(schedule, SwitchingSchedule):
        schedule = SwitchingSchedule(tuple(schedule))
    h = 1e-6 * config.L if step is None else float(step)
    if h <= 0:
        raise ValueError("step must be positive")
    theta = schedule.as_array()
    N = len(theta)
    J0 = simulate(config, schedule).cost

    def cost_at(vec):
        s = SwitchingSchedule(tuple(vec))
        if not s.is_feasible(config.L):
            return np.nan
        return simulate(config, s).cost

    jobs = []
    for j in range(N):
        for sgn in (1.0, -1.0):
            v = theta.copy()
            v[j] += sgn * h
            jobs.append(v)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(cost_at, jobs))
    else:
        values = [cost_at(v) for v in jobs]
    plus = np.array(values[0::2])
    minus = np.array(values[1::2])
    fwd = (plus - J0) / h
    bwd = (J0 - minus) / h
    grad = (plus - minus) / (2 * h)
    skipped = []
    for j in range(N):
        bad = not (np.isfinite(plus[j]) and np.isfinite(minus[j]))
        scale = max(abs(fwd[j]), abs(bwd[j]), 1e-8)
        if not bad and abs(fwd[j] - bwd[j]) > kink_rtol * scale + 1e-9:
            bad = True
        if bad:
            skipped.append(j)
            grad[j] = np.nan
    if skipped:
        logger.info("finite differences skipped components %s", skipped)
    return FDResult(grad=grad, skipped=skipped, forward=fwd, backward=bwd)
