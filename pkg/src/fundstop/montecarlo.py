"""Monte-Carlo validation of the solved stopping policy.

Paths replay the walk the solver assumed: stop wherever the value tensor
equals the reward (within the tie tolerance), otherwise step up or down with
probability 1/2, expanding the running extremes as new levels are hit.  The
sample mean of the collected rewards must agree with the solved initial value
to within Monte-Carlo error.  A grid-refinement study provides the
deterministic counterpart: successive halvings of the step must move the
value by no more than the reward's modulus of continuity allows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import fees
from .engine import GridSpec, StateTensor, build_reward_tensor, solve
from .stopline import TIE_TOL

_WORDS_PER_ROUND = 8  # 64 coin flips per word drawn from a path's stream
_MASK64 = (1 << 64) - 1


class PolicyValidationError(ValueError):
    """Simulation invalidated the run (too many paths hit the step cap)."""


@dataclass(frozen=True)
class McConfig:
    """Path count, base seed and the per-path step cap.

    max_steps=None means 100 * (m+n)^2 for the grid simulated on, ample for
    a walk confined to a box of width m+n.
    """

    n_paths: int
    seed: int
    max_steps: int | None = None

    def __post_init__(self):
        if not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise ValueError(f"n_paths must be a positive integer, got {self.n_paths}")
        if not isinstance(self.seed, int):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if self.max_steps is not None and (
            not isinstance(self.max_steps, int) or self.max_steps < 1
        ):
            raise ValueError(f"max_steps must be a positive integer, got {self.max_steps}")

    def resolved_max_steps(self, grid: GridSpec) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return 100 * (grid.m + grid.n) ** 2


@dataclass(frozen=True)
class PolicyStats:
    """Sample statistics of the simulated stopping rewards.

    n_reexpanded counts paths that expanded their (min, max) interval two or
    more times after first sitting in a non-continuation cell; n_crossed
    counts paths that expanded *both* extremes after that point, i.e. crossed
    the interval they had when leaving the continuation region.  Both are
    diagnostics, never asserted.
    """

    mean: float
    std_error: float
    n_paths: int
    n_exceeded: int
    n_reexpanded: int
    n_crossed: int
    rewards: np.ndarray


@njit(cache=True)
def _walk_paths(
    words,
    j,
    k,
    i,
    steps,
    exited,
    saw_up,
    saw_down,
    expansions,
    status,
    rewards_out,
    stop_flags,
    cont_flags,
    offsets_flat,
    ncols,
    reward_data,
    max_steps,
):
    """Advance each path through one block of its own random words.

    status: 0 still walking, 1 stopped, 2 hit the step cap.  Bit set in the
    current word means step down.
    """
    n_bits = words.shape[1] * 64
    for r in range(j.shape[0]):
        jj, kk, ii = j[r], k[r], i[r]
        ex = exited[r]
        t = 0
        while t < n_bits:
            cell = jj * ncols + kk
            flat = offsets_flat[cell] + ii + jj
            if stop_flags[flat]:
                rewards_out[r] = reward_data[flat]
                status[r] = 1
                break
            if steps[r] + t >= max_steps:
                rewards_out[r] = reward_data[flat]
                status[r] = 2
                break
            if not ex and not cont_flags[cell]:
                ex = True
            word = words[r, t >> 6]
            down = (word >> np.uint64(t & 63)) & np.uint64(1)
            if down:
                ii -= 1
                if ii < -jj:
                    jj += 1
                    if ex:
                        expansions[r] += 1
                        saw_down[r] = True
            else:
                ii += 1
                if ii > kk:
                    kk += 1
                    if ex:
                        expansions[r] += 1
                        saw_up[r] = True
            t += 1
        j[r], k[r], i[r] = jj, kk, ii
        exited[r] = ex
        steps[r] += t


def _cell_continuation(values: StateTensor, rewards: StateTensor) -> np.ndarray:
    grid = values.grid
    cont = np.zeros((grid.m + 1, grid.n + 1), dtype=np.bool_)
    stop_flags = values.data <= rewards.data + TIE_TOL
    for j in range(grid.m + 1):
        for k in range(grid.n + 1):
            start = values.offsets[j, k]
            cont[j, k] = not stop_flags[start : start + j + k + 1].any()
    return cont


def simulate_policy(
    values: StateTensor, rewards: StateTensor, grid: GridSpec, cfg: McConfig
) -> PolicyStats:
    """Run cfg.n_paths seeded paths under the stop-iff-value-equals-reward rule.

    Path r draws from a counter-based generator keyed by (seed, r), so each
    path's stream is independent of the path count and of batching.  Paths
    still running at the step cap stop where they stand and are counted; more
    than 0.1% of them is a validation failure.
    """
    if values.grid != grid or rewards.grid != grid:
        raise ValueError("value/reward tensors were built on a different grid")
    stop_flags = values.data <= rewards.data + TIE_TOL
    cont_flags = _cell_continuation(values, rewards).ravel()
    offsets_flat = values.offsets.ravel()
    max_steps = cfg.resolved_max_steps(grid)
    n = cfg.n_paths
    key_hi = cfg.seed & _MASK64

    streams = [np.random.Philox(key=[key_hi, r]) for r in range(n)]
    j = np.zeros(n, dtype=np.int64)
    k = np.zeros(n, dtype=np.int64)
    i = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    exited = np.zeros(n, dtype=np.bool_)
    saw_up = np.zeros(n, dtype=np.bool_)
    saw_down = np.zeros(n, dtype=np.bool_)
    expansions = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    out = np.zeros(n, dtype=np.float64)

    state = (j, k, i, steps, exited, saw_up, saw_down, expansions, status, out)
    alive = np.arange(n)
    while alive.size:
        words = np.empty((alive.size, _WORDS_PER_ROUND), dtype=np.uint64)
        for row, pid in enumerate(alive):
            words[row] = streams[pid].random_raw(_WORDS_PER_ROUND)
        local = [a[alive] for a in state]  # fancy indexing copies
        _walk_paths(
            words,
            *local,
            stop_flags,
            cont_flags,
            offsets_flat,
            grid.n + 1,
            rewards.data,
            max_steps,
        )
        for full, part in zip(state, local):
            full[alive] = part
        alive = alive[local[8] == 0]

    n_exceeded = int(np.sum(status == 2))
    if n_exceeded > 0.001 * n:
        raise PolicyValidationError(
            f"{n_exceeded} of {n} paths hit the {max_steps}-step cap"
        )
    mean = float(np.mean(out))
    std_error = float(np.std(out, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return PolicyStats(
        mean=mean,
        std_error=std_error,
        n_paths=n,
        n_exceeded=n_exceeded,
        n_reexpanded=int(np.sum(expansions >= 2)),
        n_crossed=int(np.sum(saw_up & saw_down)),
        rewards=out,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Initial-state values across step halvings plus the continuity bound checks."""

    steps: list
    values: list
    lipschitz_estimate: float
    bound_check: list

    @property
    def differences(self) -> list:
        return [abs(a - b) for a, b in zip(self.values, self.values[1:])]


def max_reward_slope(rewards: StateTensor, grid: GridSpec) -> float:
    """Largest |reward difference| / h between grid-adjacent states.

    Adjacent means one coordinate of (w_min, w, w_max) moved by one step, so
    this estimates the reward's Lipschitz constant on the truncated box.
    """
    h = grid.h
    worst = 0.0
    for j in range(grid.m + 1):
        for k in range(grid.n + 1):
            cell = rewards.cell(j, k)
            if cell.size > 1:
                worst = max(worst, float(np.max(np.abs(np.diff(cell)))) / h)
            if j < grid.m:
                deeper = rewards.cell(j + 1, k)[1:]  # same i range, lower w_min
                worst = max(worst, float(np.max(np.abs(cell - deeper))) / h)
            if k < grid.n:
                higher = rewards.cell(j, k + 1)[:-1]  # same i range, higher w_max
                worst = max(worst, float(np.max(np.abs(cell - higher))) / h)
    return worst


def convergence_study(
    params: fees.FeeParams,
    base_grid: GridSpec,
    refinements: int,
    reward_builder=None,
) -> ConvergenceReport:
    """Solve at h, h/2, ..., h/2^refinements with the truncation box held fixed.

    Halving h while doubling m and n keeps the box edges exactly on every
    grid.  Each |V(h_r) - V(h_{r+1})| is checked against
    slope * sqrt(3) * (h_r + h_{r+1}), the modulus-of-continuity bound with
    the slope measured on the finest grid.
    """
    if not isinstance(refinements, int) or refinements < 1:
        raise ValueError(f"refinements must be a positive integer, got {refinements}")
    steps, values = [], []
    finest_rewards = None
    finest_grid = None
    for r in range(refinements + 1):
        grid = GridSpec(
            h=base_grid.h / 2**r,
            m=base_grid.m * 2**r,
            n=base_grid.n * 2**r,
            w0=base_grid.w0,
            box_limit_factor=base_grid.box_limit_factor,
        )
        rewards = (
            build_reward_tensor(params, grid)
            if reward_builder is None
            else reward_builder(grid)
        )
        tensor, _ = solve(rewards, grid)
        steps.append(grid.h)
        values.append(tensor.initial_value())
        finest_rewards, finest_grid = rewards, grid
    slope = max_reward_slope(finest_rewards, finest_grid)
    bound_check = [
        abs(values[r] - values[r + 1]) <= slope * math.sqrt(3.0) * (steps[r] + steps[r + 1])
        for r in range(refinements)
    ]
    return ConvergenceReport(
        steps=steps, values=values, lipschitz_estimate=slope, bound_check=bound_check
    )
