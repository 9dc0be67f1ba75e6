"""Smooth dyadic cutoff functions.

All cutoffs derive from a single even bump ``beta0`` built by gluing the
classical smooth step x -> exp(-1/x) over a transition zone.  The difference
``beta(s) = beta0(s) - beta0(2s)`` tiles the punctured line: summing
``beta(s / 2**j)`` over dyadic scales telescopes to 1 for every s != 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BumpSpec",
    "DEFAULT_BUMP",
    "smoothstep",
    "beta0",
    "beta",
    "beta_tilde",
    "amplitude_a",
    "dyadic_partition_sum",
]


_KINDS = ("beta0", "beta", "beta_tilde")


@dataclass(frozen=True)
class BumpSpec:
    """Parameters of the glued-bump construction.

    kind: which member of the family evaluate() returns; the free functions
        below ignore it and name the member explicitly.
    glue_width: width of the transition zone, in (0, 1).  beta0 equals 1 on
        [-1, 1] and 0 outside [-(1 + glue_width), 1 + glue_width], so any
        admissible width keeps beta0 supported in [-2, 2].
    smooth_order: highest derivative order probed by finite-difference
        smoothness checks.  Advisory only (the glue is infinitely smooth);
        capped at 6 because higher-order centered differences drown in
        cancellation noise at double precision.
    """

    kind: str = "beta0"
    glue_width: float = 0.75
    smooth_order: int = 4

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if not (0.0 < self.glue_width < 1.0):
            raise ValueError(f"glue_width must lie in (0, 1), got {self.glue_width}")
        if not (1 <= int(self.smooth_order) <= 6):
            raise ValueError(f"smooth_order must lie in 1..6, got {self.smooth_order}")

    def evaluate(self, s):
        fn = {"beta0": beta0, "beta": beta, "beta_tilde": beta_tilde}[self.kind]
        return fn(s, self)


DEFAULT_BUMP = BumpSpec()


def smoothstep(x):
    """Infinitely smooth monotone step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    lo = x <= 0.0
    hi = x >= 1.0
    mid = ~(lo | hi)
    out = np.zeros_like(x)
    out[hi] = 1.0
    if np.any(mid):
        xm = x[mid]
        # exp(-1/x) / (exp(-1/x) + exp(-1/(1-x))) == 1 / (1 + exp(1/x - 1/(1-x)))
        # Overflow near x -> 0 gives inf and the correct limit 0; keep quiet.
        with np.errstate(over="ignore"):
            out[mid] = 1.0 / (1.0 + np.exp(1.0 / xm - 1.0 / (1.0 - xm)))
    if out.ndim == 0:
        return float(out)
    return out


def beta0(s, spec: BumpSpec = DEFAULT_BUMP):
    """Even bump: 1 on [-1, 1], glued down to 0 across [1, 1 + glue_width]."""
    s = np.asarray(s, dtype=float)
    g = spec.glue_width
    return smoothstep((1.0 + g - np.abs(s)) / g)


def beta(s, spec: BumpSpec = DEFAULT_BUMP):
    """Dyadic annulus cutoff, supported in 1/2 <= |s| <= 2."""
    return beta0(s, spec) - beta0(2.0 * np.asarray(s, dtype=float), spec)


def beta_tilde(s, spec: BumpSpec = DEFAULT_BUMP):
    """Fattened annulus cutoff: 1 on supp beta, supported in 1/4 <= |s| <= 4."""
    s = np.asarray(s, dtype=float)
    return beta0(0.5 * s, spec) - beta0(4.0 * s, spec)


def amplitude_a(t, spec: BumpSpec = DEFAULT_BUMP):
    """Odd amplitude beta(t)/t, supported in 1/2 <= |t| <= 2.

    Returns 0 for |t| < 1/4 without dividing, so callers may evaluate on
    grids that cross the origin.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    live = np.abs(t) >= 0.25
    if np.any(live):
        tl = t[live]
        out[live] = beta(tl, spec) / tl
    if out.ndim == 0:
        return float(out)
    return out


def dyadic_partition_sum(s, j_min: int, j_max: int, spec: BumpSpec = DEFAULT_BUMP):
    """Sum of beta(s / 2**j) for j_min <= j <= j_max.

    Telescopes to beta0(s / 2**j_max) - beta0(2 s / 2**j_min); equals 1
    exactly once the window covers every scale with 2**-j |s| in [1/2, 2].
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr == 0.0):
        raise ValueError("dyadic partition is undefined at s = 0")
    if j_max < j_min:
        raise ValueError("empty scale window")
    total = np.zeros_like(s_arr)
    for j in range(j_min, j_max + 1):
        total = total + beta(s_arr / 2.0**j, spec)
    if total.ndim == 0:
        return float(total)
    return total
