"""Independent reference computations used by the tests.

Nothing here imports the package's AoI formulas; the oracles work from first
principles on the (generation, reception) pairs.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def trace_pairs(delays, waits):
    """(T_i, D_i) pairs of a delay/wait trace in exact rationals."""
    t = Fraction(0)
    out = []
    for i, y in enumerate(delays):
        d = t + Fraction(y)
        out.append((t, d))
        if i < len(waits):
            t = d + Fraction(waits[i])
    return out


def exact_area(pairs, initial_age, horizon):
    """Sawtooth area over [0, horizon] as a sum of trapezoids, exact."""
    horizon = Fraction(horizon)
    anchor = -Fraction(initial_age)
    t_prev = Fraction(0)
    area = Fraction(0)
    for gen, recv in pairs:
        if recv > horizon:
            break
        area += ((t_prev - anchor) + (recv - anchor)) * (recv - t_prev) / 2
        t_prev, anchor = recv, gen
    area += ((t_prev - anchor) + (horizon - anchor)) * (horizon - t_prev) / 2
    return area


def exact_time_avg(delays, waits, initial_age=0):
    pairs = trace_pairs(delays, waits)
    horizon = pairs[-1][1]
    return exact_area(pairs, initial_age, horizon) / horizon


def brute_riemann(pairs, initial_age, horizon, dt):
    """Left Riemann sum by explicit evaluation on every grid point."""
    gens = np.array([float(g) for g, _ in pairs])
    recvs = np.array([float(r) for _, r in pairs])
    grid = np.arange(0.0, horizon, dt)
    idx = np.searchsorted(recvs, grid, side="right") - 1
    age = np.where(idx < 0, initial_age + grid, grid - gens[np.maximum(idx, 0)])
    widths = np.minimum(grid + dt, horizon) - grid
    return float(np.sum(age * widths) / horizon)


def value_iteration(n_states, n_actions, step, reward, gamma, tol=1e-13):
    """Q* of a deterministic MDP given ``step(s, a) -> (s2, done)`` and ``reward(s, a)``."""
    q = np.zeros((n_states, n_actions))
    while True:
        new = np.empty_like(q)
        for s in range(n_states):
            for a in range(n_actions):
                s2, done = step(s, a)
                new[s, a] = reward(s, a) + (0.0 if done else gamma * q[s2].max())
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new
