"""Grid-refinement study: halve the step, keep the box, watch the value settle.

The random-walk value differs from the continuous-time value by at most the
reward's modulus of continuity evaluated at h*sqrt(3), so successive
refinements must move the start value by no more than
slope * sqrt(3) * (h + h/2), and in practice the differences shrink by about
half per halving.
"""

import math

from fundstop import FeeParams, GridSpec, ProfileSpec, convergence_study

params = FeeParams(
    alpha=0.2,
    beta=0.02,
    p=0.3,
    w0=1.0,
    profile=ProfileSpec(family="sqrt_capped", cap=3.0, normalize_at_w0=True),
    utility="log",
)
base = GridSpec(h=0.05, m=16, n=16, w0=1.0)

print(f"box [{base.level(-base.m):g}, {base.level(base.n):g}], refining h three times ...")
report = convergence_study(params, base, refinements=3)

print(f"measured reward slope on the finest grid: {report.lipschitz_estimate:.3f}\n")
print(f"{'h':>10} {'value':>14} {'|diff|':>12} {'bound':>12} {'ratio':>7}")
prev_diff = None
for r, (h, v) in enumerate(zip(report.steps, report.values)):
    if r == 0:
        print(f"{h:>10.5f} {v:>14.8f} {'':>12} {'':>12}")
        continue
    diff = report.differences[r - 1]
    bound = report.lipschitz_estimate * math.sqrt(3) * (report.steps[r - 1] + h)
    ratio = f"{diff / prev_diff:.2f}" if prev_diff else ""
    print(f"{h:>10.5f} {v:>14.8f} {diff:>12.2e} {bound:>12.2e} {ratio:>7}")
    prev_diff = diff

print(f"\nall within bound: {all(report.bound_check)}")
