"""Backward dynamic programming over (running-min, running-max) cells.

State: the walk sits i steps above the anchor w0, having gone at most j steps
below and k steps above.  Cell (j, k) holds values for all current positions
i in [-j, k].  The walk is forced to stop at the truncation box edges (j = m
or k = n), so those cells equal the reward; every interior cell reduces to a
line-stopping problem whose absorbing payoffs come from the already-solved
cells (j+1, k) and (j, k+1).  A sweep with j and k both descending therefore
fills the whole tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fees
from .stopline import LineProblem, solve_line


@dataclass(frozen=True)
class GridSpec:
    """Uniform level grid: step h, m levels below the anchor w0, n above."""

    h: float
    m: int
    n: int
    w0: float
    box_limit_factor: float = 10.0

    def __post_init__(self):
        if not (self.h > 0) or not np.isfinite(self.h):
            raise ValueError(f"h must be a positive step, got {self.h}")
        if not isinstance(self.m, int) or not isinstance(self.n, int):
            raise ValueError(f"m and n must be integers, got {self.m!r}, {self.n!r}")
        if self.m < 1 or self.n < 1:
            raise ValueError(f"m and n must be >= 1, got m={self.m}, n={self.n}")
        if not np.isfinite(self.w0):
            raise ValueError(f"w0 must be finite, got {self.w0}")
        limit = self.box_limit_factor * max(abs(self.w0), self.h)
        if self.h * max(self.m, self.n) > limit:
            raise ValueError(
                f"box half-width {self.h * max(self.m, self.n)} exceeds the sanity "
                f"limit {limit}"
            )

    @property
    def _zero_snap(self) -> float:
        # m*h accumulates at most a few ulps of rounding against w0
        return 1e-9 * max(1.0, abs(self.w0))

    def level(self, i: int) -> float:
        """Grid level w0 + i*h; rounding residue at a zero lower edge snaps to 0."""
        lvl = self.w0 + i * self.h
        return 0.0 if -self._zero_snap < lvl < 0.0 else lvl

    def low_levels(self) -> np.ndarray:
        levels = self.w0 - self.h * np.arange(self.m + 1)
        levels[(levels > -self._zero_snap) & (levels < 0.0)] = 0.0
        return levels

    def high_levels(self) -> np.ndarray:
        return self.w0 + self.h * np.arange(self.n + 1)

    def w_levels(self) -> np.ndarray:
        levels = self.w0 + self.h * np.arange(-self.m, self.n + 1)
        levels[(levels > -self._zero_snap) & (levels < 0.0)] = 0.0
        return levels


def _cell_offsets(m: int, n: int):
    sizes = np.add.outer(np.arange(m + 1), np.arange(n + 1)) + 1
    offsets = np.zeros((m + 1, n + 1), dtype=np.int64)
    offsets.ravel()[1:] = np.cumsum(sizes.ravel())[:-1]
    return offsets, int(sizes.sum())


@dataclass
class StateTensor:
    """One value per admissible (j, k, i) state, stored as ragged cells.

    cell(j, k) is a length j+k+1 view covering i = -j..k left to right.
    """

    grid: GridSpec
    data: np.ndarray
    offsets: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "StateTensor":
        offsets, total = _cell_offsets(grid.m, grid.n)
        return cls(grid=grid, data=np.zeros(total), offsets=offsets)

    def cell(self, j: int, k: int) -> np.ndarray:
        start = self.offsets[j, k]
        return self.data[start : start + j + k + 1]

    def get(self, j: int, k: int, i: int) -> float:
        if not (-j <= i <= k):
            raise IndexError(f"i={i} outside [-{j}, {k}] for cell ({j}, {k})")
        return float(self.data[self.offsets[j, k] + i + j])

    def initial_value(self) -> float:
        return self.get(0, 0, 0)

    def copy(self) -> "StateTensor":
        return StateTensor(grid=self.grid, data=self.data.copy(), offsets=self.offsets)


@dataclass
class BarrierField:
    """Per-cell smallest/largest stopping levels and the continuation flag.

    Cells where stopping is never optimal in the interior carry the
    out-of-range conventions stop_lo = w0 + (k+1)h and stop_hi = w0 - (j+1)h.
    """

    grid: GridSpec
    stop_lo: np.ndarray
    stop_hi: np.ndarray
    continuation: np.ndarray


def build_reward_tensor(params: fees.FeeParams, grid: GridSpec) -> StateTensor:
    """Evaluate the fee reward at every admissible (j, k, i) state."""
    if grid.w0 != params.w0:
        raise ValueError(f"grid anchor {grid.w0} must equal fee w0 {params.w0}")
    if grid.w0 - grid.m * grid.h < -grid._zero_snap:
        raise ValueError(
            f"lower edge w0 - m*h = {grid.w0 - grid.m * grid.h} is negative; the "
            "basis density is only defined for nonnegative levels"
        )
    cube = fees.reward_grid(params, grid.low_levels(), grid.high_levels(), grid.w_levels())
    tensor = StateTensor.zeros(grid)
    m = grid.m
    for j in range(m + 1):
        for k in range(grid.n + 1):
            tensor.cell(j, k)[:] = cube[j, k, m - j : m + k + 1]
    if not np.all(np.isfinite(tensor.data)):
        j, k, i = next(
            (j, k, i)
            for j in range(m + 1)
            for k in range(grid.n + 1)
            for i in range(-j, k + 1)
            if not np.isfinite(tensor.get(j, k, i))
        )
        state = fees.FundState(grid.level(-j), grid.level(i), grid.level(k))
        try:
            fees.reward(params, state)
        except fees.FeeModelError as exc:
            raise fees.FeeModelError(f"at (j={j}, k={k}, i={i}): {exc}") from exc
        raise fees.FeeModelError(
            f"non-finite reward at (j={j}, k={k}, i={i}), state {state}"
        )
    return tensor


def build_current_level_reward(grid: GridSpec) -> StateTensor:
    """Test reward F = current level; its value function is the level itself."""
    tensor = StateTensor.zeros(grid)
    for j in range(grid.m + 1):
        for k in range(grid.n + 1):
            tensor.cell(j, k)[:] = grid.w0 + grid.h * np.arange(-j, k + 1)
    return tensor


def build_running_max_reward(grid: GridSpec) -> StateTensor:
    """Test reward F = running maximum."""
    tensor = StateTensor.zeros(grid)
    for j in range(grid.m + 1):
        for k in range(grid.n + 1):
            tensor.cell(j, k)[:] = grid.level(k)
    return tensor


def solve(reward_tensor: StateTensor, grid: GridSpec):
    """Fill the value tensor and extract stopping barriers.

    Boundary cells (j = m or k = n) take the reward.  Interior cells are
    solved as line problems with absorbing payoffs from cells (j+1, k) and
    (j, k+1), sweeping j and k downward so both are always available; the
    fill order is otherwise immaterial.
    Returns (value tensor, barrier field).
    """
    if not np.all(np.isfinite(reward_tensor.data)):
        raise ValueError("reward tensor must be finite everywhere")
    m, n = grid.m, grid.n
    values = StateTensor.zeros(grid)
    stop_lo = np.empty((m + 1, n + 1))
    stop_hi = np.empty((m + 1, n + 1))
    continuation = np.zeros((m + 1, n + 1), dtype=bool)

    for j in range(m + 1):
        values.cell(j, n)[:] = reward_tensor.cell(j, n)
    for k in range(n + 1):
        values.cell(m, k)[:] = reward_tensor.cell(m, k)
    for j in range(m + 1):
        stop_lo[j, :] = grid.level(-j)
    for k in range(n + 1):
        stop_hi[:, k] = grid.level(k)

    for j in range(m - 1, -1, -1):
        for k in range(n - 1, -1, -1):
            rewards = reward_tensor.cell(j, k)
            sol = solve_line(
                LineProblem(
                    left_value=values.cell(j + 1, k)[0],
                    right_value=values.cell(j, k + 1)[-1],
                    interior_rewards=rewards,
                )
            )
            values.cell(j, k)[:] = sol.values[1:-1]
            hits = np.flatnonzero(sol.stop_mask)
            if hits.size:
                stop_lo[j, k] = grid.level(int(hits[0]) - j)
                stop_hi[j, k] = grid.level(int(hits[-1]) - j)
            else:
                continuation[j, k] = True
                stop_lo[j, k] = grid.level(k + 1)
                stop_hi[j, k] = grid.level(-(j + 1))

    barriers = BarrierField(
        grid=grid, stop_lo=stop_lo, stop_hi=stop_hi, continuation=continuation
    )
    return values, barriers


def _chain_indices(grid: GridSpec, offsets: np.ndarray):
    """Down/up successor index per flat state; forced-stop states map to themselves."""
    m, n = grid.m, grid.n
    total = offsets[m, n] + m + n + 1
    down = np.arange(total)
    up = np.arange(total)
    for j in range(m + 1):
        for k in range(n + 1):
            base = offsets[j, k]
            if j == m or k == n:
                continue
            for t in range(j + k + 1):
                i = t - j
                down[base + t] = (
                    offsets[j + 1, k] if i - 1 < -j else base + t - 1
                )  # new minimum enters cell (j+1, k) at its lowest point
                up[base + t] = (
                    offsets[j, k + 1] + (k + 1) + j if i + 1 > k else base + t + 1
                )  # new maximum enters cell (j, k+1) at its highest point
    return down, up


def full_chain_oracle(
    reward_tensor: StateTensor, grid: GridSpec, tol: float
) -> StateTensor:
    """Value iteration over the flat (j, k, i) Markov chain, for cross-checks.

    From an interior state the walk moves to i +/- 1 with probability 1/2,
    expanding j or k when it leaves the visited range; states with j = m or
    k = n are absorbing at the reward.  Iterates max(F, mean of successors)
    from V0 = F to exact floating-point stationarity (monotone from below),
    so any positive tol is met.  Refuses grids beyond m, n <= 6.
    """
    if grid.m > 6 or grid.n > 6:
        raise ValueError(f"chain oracle is for m, n <= 6, got m={grid.m}, n={grid.n}")
    if not (tol > 0):
        raise ValueError(f"tol must be positive, got {tol}")
    down, up = _chain_indices(grid, reward_tensor.offsets)
    rewards = reward_tensor.data
    values = rewards.copy()
    while True:
        nxt = np.maximum(rewards, 0.5 * (values[down] + values[up]))
        if np.array_equal(nxt, values):
            return StateTensor(grid=grid, data=values, offsets=reward_tensor.offsets)
        values = nxt


def _snap(label: str, value: float, origin: float, h: float, tol: float = 1e-9) -> int:
    steps = round((value - origin) / h)
    if abs(origin + steps * h - value) > tol:
        raise ValueError(
            f"{label}={value} is not on the grid (step {h} from {origin})"
        )
    return int(steps)


def query(values: StateTensor, state: fees.FundState, grid: GridSpec) -> float:
    """Value at an on-grid state; raises naming the offending coordinate."""
    j = -_snap("w_min", state.w_min, grid.w0, grid.h)
    i = _snap("w", state.w, grid.w0, grid.h)
    k = _snap("w_max", state.w_max, grid.w0, grid.h)
    if not (0 <= j <= grid.m):
        raise ValueError(f"w_min={state.w_min} outside the grid box")
    if not (0 <= k <= grid.n):
        raise ValueError(f"w_max={state.w_max} outside the grid box")
    if not (-j <= i <= k):
        raise ValueError(f"w={state.w} outside [w_min, w_max]")
    return values.get(j, k, i)
