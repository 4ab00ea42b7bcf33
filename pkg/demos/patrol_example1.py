"""Walk through a 20-unit corridor with 21 sampling points.

Starts from a single turn at 12, lets the optimizer add switching locations
until the patrol never touches a wall, then compares the offline optimum with
the receding-horizon controller running online.
"""

import numpy as np

from persmon import RhSettings, optimize, rh_run, simulate, uniform_config

cfg = uniform_config(L=20, r=4, B=3, T=36, M=21, A=0.01, R0=2)

seed = simulate(cfg, [12.0])
print(f"seed theta=[12]: J = {seed.cost:.4f}, walls touched: {len(seed.reflect_events())}")

report = optimize(cfg, [12.0])
for phase in report.phases:
    print(f"  N={phase.N}: {phase.iterations:3d} iterations, "
          f"J {phase.J_history[0]:.4f} -> {phase.J_history[-1]:.4f} ({phase.stop_reason})")
theta = ", ".join(f"{v:.3f}" for v in report.theta_star.theta)
print(f"optimum: theta = [{theta}], J = {report.J_star:.4f}")
if report.boundary_theta:
    print(f"  locations {report.boundary_theta} ended next to a wall")

traj = report.trajectory
t = np.linspace(0, cfg.T, 10)
print("s(t) on a coarse grid:", np.round(traj.position(t), 2))

for search in ("binary", "continuous"):
    rh = rh_run(cfg, RhSettings.default(cfg, search))
    print(f"receding horizon ({search}, H={rh.settings.H:g}, h={rh.settings.h:g}): "
          f"J = {rh.J:.4f}, ratio to optimum {rh.J / report.J_star:.3f}")
