"""How the stopping reward looks as a function of (running min, level, running max).

Builds the worked fee configuration (20% performance fee over basis levels,
2% management fee on AUM, 30% retained on drawdowns, sqrt profile capped at 3
and normalized so the mass at w0=1 is 1, log utility) and plots reward slices:
S-shaped in the current level, falling in the running minimum, rising gently
in the running maximum.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fundstop import FeeParams, FundState, ProfileSpec, aum, management_fee, performance_fee, reward, reward_many

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

print("fee model at a few states (w_min, w, w_max):")
for state in (FundState(1.0, 1.0, 1.0), FundState(0.8, 0.8, 1.2), FundState(0.9, 1.2, 1.2)):
    print(
        f"  {state.w_min:4.2f} {state.w:4.2f} {state.w_max:4.2f}   "
        f"AUM={aum(params, state):.6f}  MF={management_fee(params, state):.6f}  "
        f"PF={performance_fee(params, state):.6f}  U(MF+PF)={reward(params, state):.6f}"
    )

fig, axes = plt.subplots(1, 2, figsize=(11, 4))

# slices over the current level for several running minima, max pinned at 2
for w_min in (0.2, 0.4, 0.6, 0.8, 1.0):
    ws = np.linspace(w_min, 2.0, 300)
    axes[0].plot(ws, reward_many(params, w_min, ws, 2.0), label=f"min={w_min:.1f}")
axes[0].set_xlabel("current level")
axes[0].set_ylabel("stopping reward")
axes[0].set_title("running max pinned at 2.0")
axes[0].legend(fontsize=8)

# slices for several running maxima, min pinned at 0.2
for w_max in (1.0, 1.25, 1.5, 1.75, 2.0):
    ws = np.linspace(0.2, w_max, 300)
    axes[1].plot(ws, reward_many(params, 0.2, ws, w_max), label=f"max={w_max:.2f}")
axes[1].set_xlabel("current level")
axes[1].set_title("running min pinned at 0.2")
axes[1].legend(fontsize=8)

fig.tight_layout()
fig.savefig(OUT / "fee_surfaces.png", dpi=130)
print(f"\nwrote {OUT / 'fee_surfaces.png'}")
print("note the S shape in the current level: convex near the minimum, concave above")
