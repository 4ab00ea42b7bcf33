"""Independent reference implementations used by the tests."""

from __future__ import annotations

import numpy as np


def euler_path(theta, L: float, T: float, dt: float) -> np.ndarray:
    """Agent position on the grid ``0, dt, ..., T`` with exact turning points."""
    n = int(round(T / dt))
    s = np.empty(n + 1)
    s[0] = x = 0.0
    u, j = 1.0, 0
    th = list(theta)
    for k in range(n):
        x += u * dt
        if j < len(th) and (x - th[j]) * u >= 0:
            x = th[j] - (x - th[j])
            u, j = -u, j + 1
        if x < 0:
            x, u = -x, -u
        elif x > L:
            x, u = 2 * L - x, -u
        s[k + 1] = x
    return s


def euler_cost(config, theta, dt: float = 1e-4) -> float:
    """Forward Euler on the uncertainty dynamics along the sampled path.

    Each queue is a reflected random walk with increments ``dt (A - B p)``;
    the reflection at zero is applied in closed form (Lindley recursion), so
    the whole grid is processed with cumulative sums.
    """
    s = euler_path(theta, config.L, config.T, dt)
    alpha, A, R0 = config.alphas, config.inflows, config.R0
    p = np.maximum(0.0, 1.0 - np.abs(s[:-1, None] - alpha[None]) / config.r)
    steps = dt * (A - config.B * p)
    S = np.cumsum(steps, axis=0)
    R = S - np.minimum(-R0, np.minimum.accumulate(S, axis=0))
    R = np.vstack([R0, R])
    # trapezoid on the grid
    total = R.sum(axis=1)
    return float(dt * (total[:-1] + total[1:]).sum() / 2 / config.T)


def check_invariants(traj):
    cfg = traj.config
    L = cfg.L
    s_end, R_end = traj.segment_end_state()
    # analytic minimum over each piece; allow floating roundoff only
    assert np.all(traj.min_uncertainty() >= -1e-12 * max(1.0, cfg.R0.max()))
    assert np.all(traj.uncertainty(np.linspace(0, cfg.T, 301)) >= 0.0)
    assert np.all(traj.R_final >= 0.0)
    assert np.all(traj.s0 >= 0.0) and np.all(traj.s0 <= L)
    assert np.all(s_end >= -1e-12 * L) and np.all(s_end <= L * (1 + 1e-12))
    assert set(np.unique(np.abs(traj.u))) <= {1.0}
    # continuity across segments
    np.testing.assert_allclose(s_end[:-1], traj.s0[1:], atol=1e-9 * max(1.0, L))
    np.testing.assert_allclose(R_end[:-1], traj.R0[1:], atol=1e-9)
    np.testing.assert_allclose(traj.t1[:-1], traj.t0[1:], rtol=0, atol=0)
    assert np.all(traj.durations >= 0)
    times = [e.time for e in traj.events]
    assert times == sorted(times)
    assert traj.events[-1].kind == "horizon"
    assert abs(traj.t_end - cfg.T) <= 1e-9 * cfg.T
