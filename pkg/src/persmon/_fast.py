"""Compiled segment loop for fixed switching schedules.

Mirrors :meth:`persmon.hybrid_sim.Engine.run` for unit speed and constant
inflow rates, which is all the optimizer needs. The pure-Python engine stays
the reference implementation; the two are checked against each other in the
tests.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

EV_EMPTY, EV_CROSS, EV_SWITCH, EV_REFLECT = 0, 1, 3, 4


@nb.njit(cache=True)
def _first_root(c, b, a):
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
    t1 = q / a
    if 0 < t1 < best:
        best = t1
    if q != 0:
        t2 = c / q
        if 0 < t2 < best:
            best = t2
    return best


@nb.njit(cache=True)
def _log(ev, n_ev, t, kind, index, boundary, seg):
    ev[n_ev, 0] = t
    ev[n_ev, 1] = kind
    ev[n_ev, 2] = index
    ev[n_ev, 3] = boundary
    ev[n_ev, 4] = seg
    return n_ev + 1


@nb.njit(cache=True)
def _turns(s, u, j, thetas, L, tol, t, ev, n_ev, seg):
    N = thetas.shape[0]
    while j < N and abs(thetas[j] - s) <= tol:
        s = thetas[j]
        u = -u
        j += 1
        n_ev = _log(ev, n_ev, t, EV_SWITCH, j, 0.0, seg)
    if u < 0 and s <= tol:
        s = 0.0
        u = -u
        n_ev = _log(ev, n_ev, t, EV_REFLECT, -1, 0.0, seg)
    elif u > 0 and s >= L - tol:
        s = L
        u = -u
        n_ev = _log(ev, n_ev, t, EV_REFLECT, -1, L, seg)
    return s, u, j, n_ev


@nb.njit(cache=True)
def run_kernel(alpha, A, offsets, crit_sorted, B, r, L, T, thetas, R_init,
               tol_t, tol_x, snap, seg_f, seg_M, seg_reg, seg_dw, ev, tang):
    """Returns ``(K, n_events, n_tangential, integral, t, s, R)``; ``K < 0`` means
    the output buffers were too small."""
    M = alpha.shape[0]
    cap_seg = seg_f.shape[0]
    cap_ev = ev.shape[0]
    R = R_init.copy()
    t = 0.0
    s = 0.0
    u = 1.0
    j = 0
    n_ev = 0
    n_tang = 0
    K = 0
    integral = 0.0
    s, u, j, n_ev = _turns(s, u, j, thetas, L, tol_x, t, ev, n_ev, 0)
    rate0 = np.empty(M)
    slope = np.empty(M)
    region = np.empty(M, dtype=np.int8)
    dwell = np.zeros(M, dtype=np.bool_)
    drain = np.empty(M, dtype=np.int64)
    roots = np.empty(M)
    reach = r + 4 * tol_x
    N = thetas.shape[0]
    ncs = crit_sorted.shape[0]
    while t < T - tol_t:
        if K >= cap_seg or n_ev + 5 * M + 8 >= cap_ev:
            return -1, n_ev, n_tang, integral, t, s, R
        lo = np.searchsorted(alpha, s - reach, side="left")
        hi = np.searchsorted(alpha, s + reach, side="right")
        # modes and rates
        for i in range(M):
            rate0[i] = A[i]
            slope[i] = 0.0
            dwell[i] = False
            region[i] = 5 if i < lo else 0
        n_drain = 0
        for i in range(lo, hi):
            d = s - alpha[i]
            code = 0
            for b in range(5):
                rel = d - offsets[i, b]
                if u >= 0:
                    if rel >= -tol_x:
                        code += 1
                elif rel > tol_x:
                    code += 1
            region[i] = code
            falling = code == 2 or code == 3
            dw = falling and R[i] <= 0.0
            dwell[i] = dw
            if dw:
                rate0[i] = 0.0
                slope[i] = 0.0
                continue
            left = code == 1 or code == 2
            right = code == 3 or code == 4
            if left or right:
                p = max(0.0, 1.0 - abs(d) / r)
                dpds = (1.0 if left else -1.0) / r
                rate0[i] = A[i] - B * p
                slope[i] = -B * dpds * u
            if falling and R[i] > 0:
                drain[n_drain] = i
                roots[n_drain] = _first_root(R[i], rate0[i], 0.5 * slope[i])
                n_drain += 1
        # candidate event times
        dt_h = T - t
        if u == 0:
            dist = math.inf
        else:
            if u > 0:
                best = L - s
                k = np.searchsorted(crit_sorted, s + tol_x, side="right")
                if k < ncs:
                    best = min(best, crit_sorted[k] - s)
            else:
                best = s
                k = np.searchsorted(crit_sorted, s - tol_x, side="left") - 1
                if k >= 0:
                    best = min(best, s - crit_sorted[k])
            if j < N:
                dd = (thetas[j] - s) * (1.0 if u > 0 else -1.0)
                if dd > tol_x:
                    best = min(best, dd)
            dist = max(best, 0.0)
        dt_pos = dist / abs(u) if u != 0 else math.inf
        dt_q = math.inf
        for q in range(n_drain):
            if roots[q] < dt_q:
                dt_q = roots[q]
        dt = min(dt_h, dt_pos, dt_q)
        # record and integrate
        seg_f[K, 0] = t
        seg_f[K, 1] = t + dt
        seg_f[K, 2] = s
        seg_f[K, 3] = u
        acc = 0.0
        for i in range(M):
            seg_M[0, K, i] = R[i]
            seg_M[1, K, i] = rate0[i]
            seg_M[2, K, i] = slope[i]
            seg_reg[K, i] = region[i]
            seg_dw[K, i] = dwell[i]
            acc += R[i] * dt + 0.5 * rate0[i] * dt * dt + slope[i] * dt * dt * dt / 6.0
            R[i] = R[i] + rate0[i] * dt + 0.5 * slope[i] * dt * dt
        integral += acc
        K += 1
        t_ev = T if dt_h <= dt + tol_t else t + dt
        n_empty = 0
        for q in range(n_drain):
            i = drain[q]
            if roots[q] <= dt + tol_t or R[i] <= snap[i]:
                R[i] = 0.0
                drain[n_empty] = i
                n_empty += 1
                a = rate0[i] + slope[i] * dt
                if abs(a) < 1e-10:
                    tang[n_tang, 0] = t + dt
                    tang[n_tang, 1] = i
                    n_tang += 1
        for i in range(M):
            if R[i] < 0.0:
                R[i] = 0.0
        hit_h = dt_h <= dt + tol_t
        hit_pos = dt_pos <= dt + tol_t
        t = t_ev
        if hit_pos:
            s = s + (1.0 if u > 0 else -1.0) * dist
        else:
            s = s + u * dt
        s = min(max(s, 0.0), L)
        # drain indices are already increasing
        for q in range(n_empty):
            n_ev = _log(ev, n_ev, t, EV_EMPTY, drain[q], 0.0, K)
        if hit_pos:
            lo2 = np.searchsorted(alpha, s - r - 8 * tol_x, side="left")
            hi2 = np.searchsorted(alpha, s + r + 8 * tol_x, side="right")
            for i in range(lo2, hi2):
                for b in range(5):
                    if abs(alpha[i] + offsets[i, b] - s) <= 4 * tol_x:
                        n_ev = _log(ev, n_ev, t, EV_CROSS, i, b, K)
        if hit_h:
            break
        s, u, j, n_ev = _turns(s, u, j, thetas, L, tol_x, t, ev, n_ev, K)
    return K, n_ev, n_tang, integral, t, s, R


@nb.njit(cache=True)
def ipa_kernel(u, dt, dpds, reset, act_seg, sign_j, B):
    """Closed-form gradient accumulation; ``reset[k, i]`` zeroes row ``i`` of
    ``dR/dtheta`` before segment ``k``."""
    K, M = dpds.shape
    N = act_seg.shape[0]
    dR = np.zeros((M, N))
    grad = np.zeros(N)
    ds = np.zeros(N)
    for k in range(K):
        for i in range(M):
            if reset[k, i]:
                for j in range(N):
                    dR[i, j] = 0.0
        any_active = False
        for j in range(N):
            if act_seg[j] <= k:
                ds[j] = sign_j[j] * 2.0 * u[k]
                any_active = True
            else:
                ds[j] = 0.0
        if not any_active:
            continue
        h = dt[k]
        for i in range(M):
            c = -B * dpds[k, i]
            for j in range(N):
                rate = c * ds[j]
                grad[j] += dR[i, j] * h + 0.5 * rate * h * h
                dR[i, j] += rate * h
    return grad, dR
