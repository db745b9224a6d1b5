"""Investor-flow fee model.

Assets enter the fund at 'basis' levels distributed along a density phi, a
retained fraction p of above-current-level assets stays in when the level
falls, and the initial assets sit as a point mass at the start-of-year level
w0.  Management fees are charged on total assets under management,
performance fees on gains over basis levels.  The manager's stopping reward
is a utility of (management fee + performance fee) and depends on the fund
level path only through (running min, current level, running max).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

PROFILE_FAMILIES = ("sqrt_capped", "constant", "power")
UTILITIES = ("log", "power", "identity")


class FeeModelError(ValueError):
    """Inputs outside the fee model's domain (bad state, bad utility argument)."""


@dataclass(frozen=True)
class ProfileSpec:
    """Density of basis levels, phi(x) = scale * shape(x).

    Families: sqrt_capped -> sqrt(min(x, cap)); constant -> 1;
    power -> x**exponent (exponent >= 0 keeps phi continuous at 0).
    With normalize_at_w0 set, the scale is recomputed at FeeParams
    construction so the cumulative mass at w0 equals 1.
    """

    family: str = "sqrt_capped"
    cap: float | None = 3.0
    exponent: float | None = None
    normalize_at_w0: bool = False
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in PROFILE_FAMILIES:
            raise ValueError(
                f"profile family must be one of {PROFILE_FAMILIES}, got {self.family!r}"
            )
        if self.family == "sqrt_capped":
            if self.cap is None or not (self.cap > 0):
                raise ValueError(f"sqrt_capped needs cap > 0, got {self.cap}")
        if self.family == "power":
            if self.exponent is None or self.exponent < 0:
                raise ValueError(
                    f"power profile needs exponent >= 0, got {self.exponent}"
                )
        if not (self.scale > 0) or not math.isfinite(self.scale):
            raise ValueError(f"profile scale must be positive, got {self.scale}")


def _check_levels(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        bad = x[~(np.isfinite(x) & (x >= 0))].ravel()[0]
        raise FeeModelError(f"basis level must be finite and >= 0, got {bad}")
    return x


def _scalar_like(x, out):
    return float(out) if np.ndim(x) == 0 else out


def phi(spec: ProfileSpec, x):
    """Basis-level density at level x (scalar or array)."""
    xa = _check_levels(x)
    if spec.family == "sqrt_capped":
        out = spec.scale * np.sqrt(np.minimum(xa, spec.cap))
    elif spec.family == "constant":
        out = spec.scale * np.ones_like(xa)
    else:
        out = spec.scale * xa**spec.exponent
    return _scalar_like(x, out)


def big_phi(spec: ProfileSpec, x):
    """Cumulative basis mass below level x: integral of phi from 0 to x.

    Closed form per family, piecewise across the cap for sqrt_capped.
    """
    xa = _check_levels(x)
    if spec.family == "sqrt_capped":
        k = spec.cap
        below = (2.0 / 3.0) * np.minimum(xa, k) ** 1.5
        above = math.sqrt(k) * np.maximum(xa - k, 0.0)
        out = spec.scale * (below + above)
    elif spec.family == "constant":
        out = spec.scale * xa
    else:
        g = spec.exponent
        out = spec.scale * xa ** (g + 1.0) / (g + 1.0)
    return _scalar_like(x, out)


def _level_moment(spec: ProfileSpec, x):
    """Integral of u * phi(u) from 0 to x, closed form (gain-integral helper)."""
    xa = np.asarray(x, dtype=float)
    if spec.family == "sqrt_capped":
        k = spec.cap
        below = 0.4 * np.minimum(xa, k) ** 2.5
        above = math.sqrt(k) * 0.5 * np.maximum(xa * xa - k * k, 0.0)
        return spec.scale * (below + above)
    if spec.family == "constant":
        return spec.scale * 0.5 * xa * xa
    g = spec.exponent
    return spec.scale * xa ** (g + 2.0) / (g + 2.0)


@dataclass(frozen=True)
class FeeParams:
    """Fee-schedule constants plus the manager's utility.

    alpha: performance-fee rate in [0, 1); beta: management-fee rate in
    [0, 1); p: fraction of above-level assets retained on drawdowns, in
    [0, 1]; w0: start-of-year fund level > 0.  utility is one of
    UTILITIES; eta is the CRRA exponent, required (and != 1) for "power".
    """

    alpha: float
    beta: float
    p: float
    w0: float
    profile: ProfileSpec = ProfileSpec()
    utility: str = "log"
    eta: float | None = None

    def __post_init__(self):
        for name, lo_ok, hi_ok in (
            ("alpha", self.alpha >= 0, self.alpha < 1),
            ("beta", self.beta >= 0, self.beta < 1),
        ):
            if not (lo_ok and hi_ok):
                raise ValueError(f"{name} must be in [0, 1), got {getattr(self, name)}")
        if not (0 <= self.p <= 1):
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not (self.w0 > 0) or not math.isfinite(self.w0):
            raise ValueError(f"w0 must be a positive level, got {self.w0}")
        if self.utility not in UTILITIES:
            raise ValueError(f"utility must be one of {UTILITIES}, got {self.utility!r}")
        if self.utility == "power":
            if self.eta is None or self.eta == 1:
                raise ValueError(f"power utility needs eta != 1, got {self.eta}")
        elif self.eta is not None:
            raise ValueError(f"eta only applies to power utility, got eta={self.eta}")
        if self.profile.normalize_at_w0:
            raw = big_phi(replace(self.profile, scale=1.0), self.w0)
            if raw <= 0:
                raise ValueError(f"cannot normalize: cumulative mass at w0 is {raw}")
            object.__setattr__(self, "profile", replace(self.profile, scale=1.0 / raw))
        if self.utility == "log" and (self.beta == 0 or self.p == 0):
            # log needs MF + PF > 0 at every admissible state; the only uniform
            # guarantee is MF >= beta * p * big_phi(w0) > 0.
            raise FeeModelError(
                "log utility requires beta > 0 and p > 0 so that total fees "
                f"stay positive at every state (beta={self.beta}, p={self.p})"
            )


@dataclass(frozen=True)
class FundState:
    """Running minimum, current value and running maximum of the fund level."""

    w_min: float
    w: float
    w_max: float

    def __post_init__(self):
        vals = (self.w_min, self.w, self.w_max)
        if not all(math.isfinite(v) for v in vals):
            raise FeeModelError(f"state must be finite, got {vals}")
        if self.w_min < 0:
            raise FeeModelError(f"w_min must be >= 0, got {self.w_min}")
        if not (self.w_min <= self.w <= self.w_max):
            raise FeeModelError(
                f"need w_min <= w <= w_max, got ({self.w_min}, {self.w}, {self.w_max})"
            )


def _check_state(params: FeeParams, s: FundState):
    if not (s.w_min <= params.w0 <= s.w_max):
        raise FeeModelError(
            f"w0={params.w0} must lie in [w_min, w_max] = [{s.w_min}, {s.w_max}]"
        )


def aum(params: FeeParams, s: FundState) -> float:
    """Total assets under management at state s.

    (1-p)*Phi(w) + p*(Phi(w_max) - Phi(w_min)) + p*Phi(w0); at least
    p*Phi(w0) at every admissible state.
    """
    _check_state(params, s)
    prof, p = params.profile, params.p
    return float(
        (1.0 - p) * big_phi(prof, s.w)
        + p * (big_phi(prof, s.w_max) - big_phi(prof, s.w_min))
        + p * big_phi(prof, params.w0)
    )


def management_fee(params: FeeParams, s: FundState) -> float:
    return params.beta * aum(params, s)


def performance_fee(params: FeeParams, s: FundState) -> float:
    """alpha * [ gains over basis levels in (w_min, w) + gain on the w0 atom ].

    The continuous part integrates (w - x) phi(x) over [w_min, w] in closed
    form; the atom at w0 has mass p*Phi(w0) + (1-p)*Phi(w_min) and pays on
    (w - w0)+.
    """
    _check_state(params, s)
    prof = params.profile
    gain = (
        s.w * (big_phi(prof, s.w) - big_phi(prof, s.w_min))
        - (_level_moment(prof, s.w) - _level_moment(prof, s.w_min))
    )
    gain = max(gain, 0.0)  # exact value is >= 0; guards cancellation at w ~ w_min
    atom = params.p * big_phi(prof, params.w0) + (1.0 - params.p) * big_phi(
        prof, s.w_min
    )
    return params.alpha * (gain + max(s.w - params.w0, 0.0) * atom)


def _apply_utility(params: FeeParams, fee):
    fee = np.asarray(fee, dtype=float)
    if params.utility == "identity":
        return fee
    if params.utility == "log":
        if np.any(fee <= 0):
            bad = float(fee[fee <= 0].ravel()[0]) if fee.ndim else float(fee)
            raise FeeModelError(f"log utility needs positive total fee, got {bad}")
        return np.log(fee)
    eta = params.eta
    if eta > 1 and np.any(fee <= 0):
        bad = float(fee[fee <= 0].ravel()[0]) if fee.ndim else float(fee)
        raise FeeModelError(f"power utility with eta={eta} needs positive fee, got {bad}")
    return (fee ** (1.0 - eta) - 1.0) / (1.0 - eta)


def reward(params: FeeParams, s: FundState) -> float:
    """Stopping reward U(management fee + performance fee) at state s."""
    fee = management_fee(params, s) + performance_fee(params, s)
    return float(_apply_utility(params, fee))


def reward_many(params: FeeParams, w_min, w, w_max):
    """Vectorized reward over broadcastable level arrays, validating each state."""
    w_min, w, w_max = np.broadcast_arrays(
        _check_levels(w_min), _check_levels(w), _check_levels(w_max)
    )
    if np.any(w_min > w) or np.any(w > w_max):
        raise FeeModelError("need w_min <= w <= w_max elementwise")
    if np.any(w_min > params.w0) or np.any(w_max < params.w0):
        raise FeeModelError(f"w0={params.w0} must lie in [w_min, w_max] elementwise")
    prof, p = params.profile, params.p
    phi0 = big_phi(prof, params.w0)
    lo, hi, cur = big_phi(prof, w_min), big_phi(prof, w_max), big_phi(prof, w)
    total = params.beta * ((1.0 - p) * cur + p * (hi - lo) + p * phi0)
    gain = np.maximum(
        w * (cur - lo) - (_level_moment(prof, w) - _level_moment(prof, w_min)), 0.0
    )
    atom = p * phi0 + (1.0 - p) * lo
    total = total + params.alpha * (gain + np.maximum(w - params.w0, 0.0) * atom)
    return _apply_utility(params, total)


def reward_grid(params: FeeParams, w_min_levels, w_max_levels, w_levels):
    """Reward over the full cross product, shape (n_min, n_max, n_current).

    Fast path for tensor construction: no admissibility filtering, so
    entries with w outside [w_min, w_max] may be meaningless or NaN.  The
    caller selects the admissible region.
    """
    prof, p = params.profile, params.p
    lo = np.asarray(w_min_levels, dtype=float)
    hi = np.asarray(w_max_levels, dtype=float)
    w = np.asarray(w_levels, dtype=float)
    phi0 = big_phi(prof, params.w0)
    phi_lo, mom_lo = big_phi(prof, lo), _level_moment(prof, lo)
    phi_hi = big_phi(prof, hi)
    phi_w, mom_w = big_phi(prof, w), _level_moment(prof, w)
    over = np.maximum(w - params.w0, 0.0)
    # terms split by axis: (min, current) couple through the gain integral and
    # the atom; the running max enters additively through the AUM only
    gain = np.maximum(
        w[None, :] * (phi_w[None, :] - phi_lo[:, None])
        - (mom_w[None, :] - mom_lo[:, None]),
        0.0,
    )
    atom = p * phi0 + (1.0 - p) * phi_lo
    fee_mc = (
        params.beta * ((1.0 - p) * phi_w[None, :] - p * phi_lo[:, None] + p * phi0)
        + params.alpha * (gain + over[None, :] * atom[:, None])
    )
    fee = fee_mc[:, None, :] + (params.beta * p) * phi_hi[None, :, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if params.utility == "identity":
            return fee
        if params.utility == "log":
            return np.log(fee)
        eta = params.eta
        return (fee ** (1.0 - eta) - 1.0) / (1.0 - eta)
