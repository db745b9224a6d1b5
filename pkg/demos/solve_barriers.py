"""Solve the stopping problem and map out the continuation region and barriers.

The state is (levels below start j, levels above start k, current position);
each (j, k) cell is a line-stopping problem solved by least concave majorant.
The continuation region is the set of cells where stopping is never optimal
in the interior; outside it, stop_lo/stop_hi bracket the optimal stopping
levels.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fundstop import FeeParams, GridSpec, ProfileSpec, build_reward_tensor, solve

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

params = FeeParams(
    alpha=0.2,
    beta=0.02,
    p=0.3,
    w0=1.0,
    profile=ProfileSpec(family="sqrt_capped", cap=3.0, normalize_at_w0=True),
    utility="log",
)
grid = GridSpec(h=0.025, m=40, n=40, w0=1.0)

print(f"solving on h={grid.h}, box [{grid.level(-grid.m)}, {grid.level(grid.n)}] ...")
rewards = build_reward_tensor(params, grid)
values, barriers = solve(rewards, grid)
print(f"value at the start state: {values.initial_value():.8f}")
print(f"reward if stopped immediately: {rewards.get(0, 0, 0):.8f}")

cont = barriers.continuation
print(f"continuation cells: {int(cont.sum())} of {cont.size}")

# how far can the extremes drift before stopping becomes optimal somewhere?
edge_j = max(j for j in range(grid.m + 1) if cont[j, 0])
edge_k = max(k for k in range(grid.n + 1) if cont[0, k])
print(f"pure drawdown: continuation while the minimum stays above {grid.level(-edge_j):.3f}")
print(f"pure run-up:   continuation while the maximum stays below {grid.level(edge_k):.3f}")

lows = np.array([grid.level(-j) for j in range(grid.m + 1)])
highs = np.array([grid.level(k) for k in range(grid.n + 1)])

fig, axes = plt.subplots(1, 3, figsize=(15, 4.2))
axes[0].pcolormesh(highs, lows, cont, cmap="Greys", shading="nearest")
axes[0].set_xlabel("running max")
axes[0].set_ylabel("running min")
axes[0].set_title("continuation region (dark)")

masked_lo = np.where(cont, np.nan, barriers.stop_lo)
masked_hi = np.where(cont, np.nan, barriers.stop_hi)
for ax, field, label in ((axes[1], masked_lo, "smallest stopping level"),
                         (axes[2], masked_hi, "largest stopping level")):
    pcm = ax.pcolormesh(highs, lows, field, shading="nearest")
    fig.colorbar(pcm, ax=ax)
    ax.set_xlabel("running max")
    ax.set_ylabel("running min")
    ax.set_title(label)

fig.tight_layout()
fig.savefig(OUT / "barriers.png", dpi=130)
print(f"wrote {OUT / 'barriers.png'}")
