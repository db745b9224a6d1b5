"""Optimal stopping of a symmetric simple random walk on a finite line.

The walk lives on grid points 0..L-1, is absorbed at both endpoints with
known payoffs, and may stop at any interior point for its stopping reward.
With no discounting the value function is the least concave majorant of the
payoff sequence, which an upper-hull scan computes exactly in one pass.
A value-iteration solver is kept alongside as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

# equality-with-slack counts as stopping, so the stopping set is closed
TIE_TOL = 1e-10


@dataclass(frozen=True)
class LineProblem:
    """Absorbing payoffs at both ends plus stopping rewards at interior points."""

    left_value: float
    right_value: float
    interior_rewards: np.ndarray

    def __post_init__(self):
        rewards = np.atleast_1d(np.asarray(self.interior_rewards, dtype=float))
        if rewards.ndim != 1 or rewards.size == 0:
            raise ValueError("interior_rewards must be a non-empty 1-D sequence")
        vals = np.concatenate(([self.left_value], rewards, [self.right_value]))
        if not np.all(np.isfinite(vals)):
            raise ValueError("all line-problem values must be finite")
        object.__setattr__(self, "interior_rewards", rewards)

    def combined(self) -> np.ndarray:
        return np.concatenate(
            ([self.left_value], self.interior_rewards, [self.right_value])
        )


@dataclass(frozen=True)
class LineSolution:
    """Value at every grid point and the interior stop/continue classification."""

    values: np.ndarray
    stop_mask: np.ndarray


@njit(cache=True)
def _upper_hull_fill(y):
    """Least concave majorant of y on integer abscissae via a monotone stack."""
    n = y.shape[0]
    hx = np.empty(n, np.int64)
    hy = np.empty(n, np.float64)
    top = 0
    hx[0] = 0
    hy[0] = y[0]
    for i in range(1, n):
        yi = y[i]
        while top >= 1:
            # drop the hull top when it sits strictly below the chord to
            # (i, yi); exactly-collinear points stay, keeping their input
            # values bitwise on straight runs
            if (hy[top] - hy[top - 1]) * (i - hx[top - 1]) < (yi - hy[top - 1]) * (
                hx[top] - hx[top - 1]
            ):
                top -= 1
            else:
                break
        top += 1
        hx[top] = i
        hy[top] = yi
    out = np.empty(n, np.float64)
    out[0] = hy[0]
    for s in range(top):
        i0 = hx[s]
        i1 = hx[s + 1]
        y0 = hy[s]
        slope = (hy[s + 1] - y0) / (i1 - i0)
        for i in range(i0 + 1, i1):
            out[i] = y0 + slope * (i - i0)
        out[i1] = hy[s + 1]
    return out


@njit(cache=True)
def _sweep_to_stationarity(full):
    """Red-black value-iteration sweeps, in place, until no entry changes.

    Starts from the stopping rewards (interior entries of `full`), which lie
    below the fixed point, so every sweep is non-decreasing and the iteration
    reaches an exact floating-point fixed point in finitely many sweeps.
    Endpoints are absorbing and never updated.
    """
    L = full.shape[0]
    even = np.ascontiguousarray(full[0::2])
    odd = np.ascontiguousarray(full[1::2])
    n_odd = (L - 1) // 2  # interior odd positions 1, 3, ..., <= L-2
    n_even = (L - 2) // 2  # interior even positions 2, 4, ..., <= L-2
    r_odd = odd[:n_odd].copy()
    r_even = even[1 : n_even + 1].copy()
    while True:
        for _ in range(64):  # unmonitored block: plain vectorizable passes
            for t in range(n_odd):
                v = 0.5 * (even[t] + even[t + 1])
                r = r_odd[t]
                odd[t] = r if r > v else v
            for s in range(n_even):
                v = 0.5 * (odd[s] + odd[s + 1])
                r = r_even[s]
                even[s + 1] = r if r > v else v
        changed = False
        for t in range(n_odd):
            v = 0.5 * (even[t] + even[t + 1])
            r = r_odd[t]
            if r > v:
                v = r
            if v != odd[t]:
                odd[t] = v
                changed = True
        for s in range(n_even):
            v = 0.5 * (odd[s] + odd[s + 1])
            r = r_even[s]
            if r > v:
                v = r
            if v != even[s + 1]:
                even[s + 1] = v
                changed = True
        if not changed:
            full[0::2] = even
            full[1::2] = odd
            return full


def least_concave_majorant(points) -> np.ndarray:
    """Pointwise-smallest concave sequence dominating `points`.

    Equals the input at both endpoints exactly; O(len) via upper-hull scan.
    """
    y = np.asarray(points, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError(f"need a 1-D sequence of length >= 2, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ValueError("all points must be finite")
    return _upper_hull_fill(y)


def solve_line(problem: LineProblem) -> LineSolution:
    """Exact line solution: majorant of [left, rewards..., right].

    Interior points where the value exceeds the reward by more than TIE_TOL
    continue; everything else (including ties) stops.
    """
    values = _upper_hull_fill(problem.combined())
    stop_mask = values[1:-1] <= problem.interior_rewards + TIE_TOL
    return LineSolution(values=values, stop_mask=stop_mask)


def value_iteration_oracle(problem: LineProblem, tol: float) -> LineSolution:
    """Independent fixed-point solver for cross-checking solve_line.

    Iterates V <- max(reward, mean of neighbours) from V0 = rewards with
    endpoints clamped.  Sweeps continue to exact floating-point stationarity
    (monotone from below, so this terminates); the final sweep change is 0,
    which satisfies any positive tol.  Stopping at the first sweep with
    change < tol instead would leave an O(tol * len^2) gap on long
    continuation runs.
    """
    if not (tol > 0):
        raise ValueError(f"tol must be positive, got {tol}")
    values = _sweep_to_stationarity(problem.combined())
    stop_mask = values[1:-1] <= problem.interior_rewards + TIE_TOL
    return LineSolution(values=values, stop_mask=stop_mask)
