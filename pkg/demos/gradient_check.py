"""Compare perturbation-analysis gradients with central finite differences
on a few random missions."""

import numpy as np

from persmon import (MissionConfig, SamplePoint, SwitchingSchedule,
                     finite_difference_gradient, ipa_gradient)

rng = np.random.default_rng(7)
for trial in range(5):
    L = rng.uniform(8, 20)
    M = int(rng.integers(3, 8))
    points = tuple(SamplePoint(float(a), float(rng.uniform(0.05, 0.8)), float(rng.uniform(0, 3)))
                   for a in np.sort(rng.uniform(0, L, M)))
    cfg = MissionConfig(L=L, r=rng.uniform(1, 4), B=2.0, T=2.5 * L, points=points)
    sched = SwitchingSchedule((0.85 * L, 0.2 * L, 0.7 * L))
    g = ipa_gradient(cfg, sched)
    fd = finite_difference_gradient(cfg, sched).grad
    rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-4)
    print(f"trial {trial}: ipa={np.round(g, 6)} fd={np.round(fd, 6)} max rel err {np.nanmax(rel):.1e}")
