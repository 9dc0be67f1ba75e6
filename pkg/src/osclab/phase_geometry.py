"""Closed-form critical-point geometry of the cubic phase.

The phase ``t -> -t*xi - t**2*eta + t**3*w`` drives every oscillatory
integral in this package.  Its critical points come from a quadratic, so the
whole branch geometry (roots, branch phase values, their mixed derivatives,
and three determinant/curvature identities) is available in closed form.
Each closed form ships with an independent finite-difference oracle built on
``fd_oracle_derivative`` so the identities can be verified numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Callable, Sequence

import numpy as np

from . import _dd

__all__ = [
    "PhasePoint",
    "Branch",
    "CriticalData",
    "NoRealRootsError",
    "DegenerateRootsError",
    "phase",
    "phase_derivs",
    "discriminant",
    "critical_points",
    "branch_root",
    "phi_branch",
    "phi_branch_grad",
    "hessian_det",
    "nikodym_det",
    "exceptional_curvature",
    "fd_oracle_derivative",
    "hessian_det_fd",
    "nikodym_det_fd",
    "flat_hessian_check",
    "hessian_det_fd_batch",
    "nikodym_det_fd_batch",
    "flat_hessian_check_batch",
    "exceptional_curvature_fd",
    "AmplitudeClassSpec",
    "MembershipReport",
    "amplitude_class_check",
    "sample_phase_points",
]


class NoRealRootsError(ValueError):
    """The critical-point discriminant is negative: no real critical points."""


class DegenerateRootsError(ValueError):
    """The discriminant vanishes: the two critical points coalesce."""


@dataclass(frozen=True)
class PhasePoint:
    """Parameter triple (w, xi, eta) of one cubic phase."""

    w: float
    xi: float
    eta: float

    def __post_init__(self):
        for name in ("w", "xi", "eta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")


class Branch(Enum):
    """Which critical point: PLUS takes the + square root, MINUS the -."""

    PLUS = 1
    MINUS = -1

    @property
    def sign(self) -> int:
        return self.value


@dataclass(frozen=True)
class CriticalData:
    """Discriminant and both critical points of one phase."""

    delta: float
    t_plus: float
    t_minus: float

    def root(self, b: Branch) -> float:
        return self.t_plus if b is Branch.PLUS else self.t_minus


def phase(t, p: PhasePoint):
    """Cubic phase value; `t` may be a scalar or array."""
    t = np.asarray(t, dtype=float)
    out = -t * p.xi - t**2 * p.eta + t**3 * p.w
    if out.ndim == 0:
        return float(out)
    return out


def phase_derivs(t, p: PhasePoint):
    """First three t-derivatives; all higher ones vanish identically."""
    t = np.asarray(t, dtype=float)
    d1 = -p.xi - 2.0 * t * p.eta + 3.0 * t**2 * p.w
    d2 = -2.0 * p.eta + 6.0 * t * p.w
    d3 = 6.0 * p.w * np.ones_like(t)
    if d1.ndim == 0:
        return float(d1), float(d2), float(d3)
    return d1, d2, d3


def discriminant(p: PhasePoint) -> float:
    return p.eta**2 + 3.0 * p.w * p.xi


def critical_points(p: PhasePoint) -> CriticalData:
    """Both roots of the phase derivative.

    Raises NoRealRootsError when the discriminant is negative and ValueError
    for w = 0 (the derivative degenerates to a linear function).
    """
    if p.w == 0.0:
        raise ValueError("critical points undefined at w = 0")
    delta = discriminant(p)
    if delta < 0.0:
        raise NoRealRootsError(f"discriminant {delta} < 0 at {p}")
    root = math.sqrt(delta)
    t_a = (p.eta + root) / (3.0 * p.w)
    t_b = (p.eta - root) / (3.0 * p.w)
    return CriticalData(delta=delta, t_plus=t_a, t_minus=t_b)


def branch_root(p: PhasePoint, b: Branch) -> float:
    return critical_points(p).root(b)


def phi_branch(p: PhasePoint, b: Branch) -> float:
    """Phase evaluated at its own critical point."""
    return phase(branch_root(p, b), p)


def phi_branch_grad(p: PhasePoint, b: Branch) -> tuple:
    """Gradient of the branch phase in (xi, eta, w): (-t, -t**2, t**3).

    The envelope case delta = 0 is rejected: there the branch value stays
    defined but its derivatives blow up.
    """
    crit = critical_points(p)
    if crit.delta == 0.0:
        raise DegenerateRootsError(f"coalescing critical points at {p}")
    t = crit.root(b)
    return (-t, -t * t, t**3)


def hessian_det(p: PhasePoint, b: Branch) -> float:
    """det of the 2x2 matrix of w-derivatives of the frequency Hessian.

    Closed form -(9/4) t_b**4 / delta**2; strictly negative whenever the
    branch root is nonzero, which is the hyperbolic nondegeneracy hypothesis
    of the oscillatory-integral theory.
    """
    crit = critical_points(p)
    if crit.delta <= 0.0:
        raise DegenerateRootsError(f"needs delta > 0, got {crit.delta}")
    t = crit.root(b)
    return -2.25 * t**4 / crit.delta**2


def nikodym_det(p: PhasePoint, b: Branch) -> float:
    """det of the 3x3 matrix of w-derivative jets of the Hessian entries.

    Closed form -(3**7/2**4) xi t_b**8 / delta**5; nonvanishing away from
    xi = 0, which is the non-compression hypothesis of the cited local
    smoothing theorem.
    """
    crit = critical_points(p)
    if crit.delta <= 0.0:
        raise DegenerateRootsError(f"needs delta > 0, got {crit.delta}")
    t = crit.root(b)
    return -(3.0**7 / 2.0**4) * p.xi * t**8 / crit.delta**5


def exceptional_curvature(s: float, w_scaled: float) -> float:
    """Second s-derivative of s -> d/dw branch phase at (w_scaled; 0, s).

    Closed form (16/9) s / w_scaled**3, odd in s.
    """
    if w_scaled <= 0.0:
        raise ValueError(f"w_scaled must be positive, got {w_scaled}")
    return (16.0 / 9.0) * s / w_scaled**3


# ---------------------------------------------------------------------------
# Finite-difference oracles


# offsets and weights of centered stencils, one per derivative order;
# each has O(h**2) truncation error for smooth functions
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def _fd_once(f: Callable, x, alpha: Sequence[int], h, domain=None, dtype=np.float64):
    axes = [_STENCILS[a] for a in alpha]
    total = dtype(0.0)
    scale = dtype(1.0)
    for a, step in zip(alpha, h):
        scale = scale * step**a
    # The stencil weights sum to zero (every axis has derivative order >= 1
    # on at least one factor), so shifting f by its center value is exact
    # and keeps the summands at O(h) instead of O(f), which matters for the
    # determinant oracles whose entry errors get amplified by cancellation.
    center = dtype(f(x))
    for combo in product(*(range(len(ax[0])) for ax in axes)):
        pt = [x[i] + dtype(axes[i][0][combo[i]]) * h[i] for i in range(len(x))]
        weight = dtype(1.0)
        for i in range(len(x)):
            weight = weight * dtype(axes[i][1][combo[i]])
        if weight == 0.0:
            continue
        if domain is not None and not domain(pt):
            raise ValueError(f"finite-difference stencil leaves the domain at {pt}")
        total = total + weight * (dtype(f(pt)) - center)
    return total / scale


def _resolve_dtype(dtype):
    """Map the oracle dtype option to (constructor, context manager).

    "exact" selects arbitrary-precision arithmetic (30 significant digits),
    which removes the evaluation noise floor entirely so the Richardson
    modes are limited by truncation alone.
    """
    if dtype == "exact":
        import mpmath as mp
        return mp.mpf, mp.workdps(30)

    import contextlib
    return dtype, contextlib.nullcontext()


def fd_oracle_derivative(f: Callable, x, alpha, h, levels: int = 0, domain=None,
                         dtype=np.float64) -> float:
    """Central-difference mixed partial derivative of a scalar field.

    f takes a point (sequence of floats, or a bare float for 1-D fields);
    alpha is the multi-index (one order per axis, total order at most 4);
    h is the base step, scalar or per-axis.  levels > 0 applies Richardson
    extrapolation on h, h/2, ... (each level cancels the next even error
    term).  An optional domain predicate rejects stencils that leave the
    caller's region of validity.  dtype selects the stencil arithmetic:
    numpy.longdouble (extended precision) moves the noise floor three
    digits below float64, and the string "exact" switches to 30-digit
    arbitrary precision, leaving truncation as the only error.  The
    determinant oracles need the headroom: their entry cancellation eats
    about three digits on top of the usual step-size noise.
    """
    dtype, ctx = _resolve_dtype(dtype)
    if np.isscalar(x):
        x = [dtype(x)]
        func = lambda pt: f(pt[0])
    else:
        x = [dtype(v) for v in x]
        func = f
    if np.isscalar(alpha):
        alpha = (int(alpha),)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != len(x):
        raise ValueError("alpha length must match point dimension")
    if any(a < 0 for a in alpha) or sum(alpha) > 4 or sum(alpha) == 0:
        raise ValueError(f"total derivative order must lie in 1..4, got {alpha}")
    if not (0 <= int(levels) <= 3):
        raise ValueError("levels must lie in 0..3")
    with ctx:
        if np.isscalar(h):
            h = [dtype(h)] * len(x)
        else:
            h = [dtype(v) for v in h]
        return float(_fd_richardson(func, x, alpha, h, levels, domain, dtype))


def _fd_richardson(func, x, alpha, h, levels, domain, dtype):
    """Extrapolated stencil value in working dtype (no float rounding)."""
    estimates = []
    for lev in range(levels + 1):
        hl = [v / dtype(2.0) ** lev for v in h]
        estimates.append(_fd_once(func, x, alpha, hl, domain=domain, dtype=dtype))
    # Richardson triangle: error expansion is in even powers of h
    for lev in range(1, levels + 1):
        factor = dtype(4.0) ** lev
        estimates = [
            (factor * estimates[i + 1] - estimates[i]) / (factor - 1.0)
            for i in range(len(estimates) - 1)
        ]
    return estimates[0]


def _phi_branch_raw(w, xi, eta, sign: float):
    """Branch phase in whatever scalar dtype the arguments carry.

    The oracles feed this longdouble or arbitrary-precision points; the
    closed forms keep using the float64 path through PhasePoint.  The
    ``** 0.5`` root works for every scalar type involved (0.5 is exact).
    """
    delta = eta * eta + 3.0 * w * xi
    if not delta > 0.0:
        raise NoRealRootsError(f"stencil point left the real-root region (delta={delta})")
    t = (eta + sign * delta ** 0.5) / (3.0 * w)
    return ((t * w - eta) * t - xi) * t


def _branch_phase_field(b: Branch) -> Callable:
    def field(pt):
        return _phi_branch_raw(pt[0], pt[1], pt[2], float(b.sign))
    return field


def _fd_steps(p: PhasePoint, base: float, frac: float = 1.0 / 32.0) -> tuple:
    """Scale-aware steps: shrink near the discriminant's zero set.

    A step of size h moves delta by about 3w*h (xi axis), 2|eta|*h (eta
    axis) or 3|xi|*h (w axis); keeping that displacement below frac*delta
    per axis keeps the stencil inside the branch's domain of analyticity
    and keeps the high derivatives, which grow like negative powers of
    delta, from dominating the truncation error.
    """
    delta = discriminant(p)
    cap = delta * frac
    h_w = min(base, cap / max(3.0 * abs(p.xi), 1e-3))
    h_xi = min(base, cap / max(3.0 * abs(p.w), 1e-3))
    h_eta = min(base, cap / max(2.0 * abs(p.eta), 1e-3))
    return h_w, h_xi, h_eta


def hessian_det_fd(p: PhasePoint, b: Branch, base_step: float = 1e-2,
                   levels: int = 1, dtype="dd", step_frac=None) -> float:
    """Oracle for hessian_det: 2x2 determinant of mixed finite differences.

    Entries are third-order mixed derivatives (one w, two frequency) of the
    branch phase, each computed by one central-difference stencil.  The
    determinant cancels the leading product of the entries (the frequency
    Hessian is rank one), so entry errors get amplified by up to three
    digits; compensated high-precision stencils keep the default mode well
    inside 1e-3 relative over the sampled classes, and levels=2 turns on a
    second extrapolation level for the 1e-6 mode.  dtype "dd" is the
    vectorized fast path; "exact" (30-digit scalar) and numpy float types
    follow the generic reference path.
    """
    if dtype == "dd":
        return float(hessian_det_fd_batch(
            [p], [b], base_step=base_step, levels=levels, step_frac=step_frac)[0])
    frac = _default_frac(levels, 1.0 / 64.0, 1.0 / 64.0, step_frac)
    h3 = _fd_steps(p, base_step, frac=frac)
    field = _branch_phase_field(b)
    dt, ctx = _resolve_dtype(dtype)
    with ctx:
        x = [dt(p.w), dt(p.xi), dt(p.eta)]
        h = [dt(v) for v in h3]
        m_xx = _fd_richardson(field, x, (1, 2, 0), h, levels, None, dt)
        m_xy = _fd_richardson(field, x, (1, 1, 1), h, levels, None, dt)
        m_yy = _fd_richardson(field, x, (1, 0, 2), h, levels, None, dt)
        return float(m_xx * m_yy - m_xy * m_xy)


def nikodym_det_fd(p: PhasePoint, b: Branch, base_step: float = 1e-2,
                   levels: int = 1, dtype="dd", step_frac=None) -> float:
    """Oracle for nikodym_det via nested central differences.

    The inner pass differentiates the branch phase twice in frequency; the
    outer pass takes first, second and third w-derivatives of each entry.
    Nesting keeps every single stencil at order <= 3 while reaching total
    order five, and the inner results stay in working precision so the
    outer stencil is not poisoned by premature rounding.
    """
    if dtype == "dd":
        return float(nikodym_det_fd_batch(
            [p], [b], base_step=base_step, levels=levels, step_frac=step_frac)[0])
    sign = float(b.sign)
    frac = _default_frac(levels, 1.0 / 128.0, 1.0 / 256.0, step_frac)
    h_w, h_xi, h_eta = _fd_steps(p, base_step, frac=frac)
    dt, ctx = _resolve_dtype(dtype)
    with ctx:
        x_freq = [dt(p.xi), dt(p.eta)]
        h_freq = [dt(h_xi), dt(h_eta)]

        def entry(alpha):
            def g(w_pt):
                field = lambda q: _phi_branch_raw(w_pt[0], q[0], q[1], sign)
                return _fd_richardson(field, x_freq, alpha, h_freq, levels, None, dt)
            return g

        entries = [entry(a) for a in ((2, 0), (1, 1), (0, 2))]
        rows = []
        for order in (1, 2, 3):
            rows.append([
                float(_fd_richardson(g, [dt(p.w)], (order,), [dt(h_w)], levels, None, dt))
                for g in entries
            ])
    return float(np.linalg.det(np.array(rows)))


def flat_hessian_check(p: PhasePoint, b: Branch, base_step: float = 1e-2,
                       levels: int = 1, dtype="dd", step_frac=None) -> float:
    """Finite-difference determinant of the pure frequency Hessian.

    The branch phase has an identically degenerate frequency Hessian, so
    this should return zero up to stencil noise (the acceptance bound is
    1e-6 absolute).
    """
    crit = critical_points(p)
    if crit.delta <= 0.0:
        raise DegenerateRootsError(f"needs delta > 0, got {crit.delta}")
    if dtype == "dd":
        return float(flat_hessian_check_batch(
            [p], [b], base_step=base_step, levels=levels, step_frac=step_frac)[0])
    frac = _default_frac(levels, 1.0 / 128.0, 1.0 / 128.0, step_frac)
    _, h_xi, h_eta = _fd_steps(p, base_step, frac=frac)
    sign = float(b.sign)
    field = lambda q: _phi_branch_raw(p.w, q[0], q[1], sign)
    dt, ctx = _resolve_dtype(dtype)
    with ctx:
        x = [dt(p.xi), dt(p.eta)]
        h = [dt(h_xi), dt(h_eta)]
        d_xx = _fd_richardson(field, x, (2, 0), h, levels, None, dt)
        d_xy = _fd_richardson(field, x, (1, 1), h, levels, None, dt)
        d_yy = _fd_richardson(field, x, (0, 2), h, levels, None, dt)
        return float(d_xx * d_yy - d_xy * d_xy)


# ---------------------------------------------------------------------------
# Double-double fast path for the determinant oracles.
#
# The scalar dtype path above is the readable reference; this one computes
# the same stencils vectorized in compensated (hi, lo) float64 pairs, which
# carries ~31 digits at numpy speed.  The identity acceptance run covers
# 10^3 points in both tolerance modes inside a tight time budget, which the
# scalar arbitrary-precision path cannot meet.

def _phi_branch_dd(wv, xiv, etav, sign: float):
    delta = _dd.add(_dd.mul(etav, etav), _dd.mul_f64(_dd.mul(wv, xiv), 3.0))
    if not np.all(delta[0] > 0.0):
        raise NoRealRootsError("stencil point left the real-root region")
    root = _dd.sqrt(delta)
    t = _dd.div(_dd.add(etav, _dd.mul_f64(root, sign)), _dd.mul_f64(wv, 3.0))
    inner = _dd.sub(_dd.mul(t, wv), etav)
    return _dd.mul(_dd.sub(_dd.mul(inner, t), xiv), t)


def _axis_plan(alpha: tuple, levels: int):
    """Concatenated stencil nodes for one multi-index over extrapolation levels.

    Offsets come out pre-scaled by 2**-level, so every entry is an exact
    power-of-two multiple of the base step and node coordinates stay exact.
    """
    offs, wgts, slices = [], [], []
    start = 0
    axes = [_STENCILS[a] for a in alpha]
    for lev in range(levels + 1):
        sc = 0.5 ** lev
        for combo in product(*(range(len(ax[0])) for ax in axes)):
            weight = 1.0
            node = []
            for i, ax in enumerate(axes):
                node.append(ax[0][combo[i]] * sc)
                weight *= ax[1][combo[i]]
            if weight == 0.0:
                continue
            offs.append(node)
            wgts.append(weight)
        slices.append(slice(start, len(offs)))
        start = len(offs)
    return np.array(offs), np.array(wgts), slices


_PLAN_CACHE: dict = {}


def _plan(alpha: tuple, levels: int):
    key = (alpha, levels)
    if key not in _PLAN_CACHE:
        _PLAN_CACHE[key] = _axis_plan(alpha, levels)
    return _PLAN_CACHE[key]


def _dd_weighted(phi, sl: slice, wgts) -> tuple:
    acc = None
    for k in range(sl.start, sl.stop):
        term = _dd.mul_f64((phi[0][..., k], phi[1][..., k]), wgts[k])
        acc = term if acc is None else _dd.add(acc, term)
    return acc


def _dd_scale(alpha: tuple, h: tuple, lev: int) -> tuple:
    scale = _dd.from_f64(0.5 ** (lev * sum(alpha)))
    for a, step in zip(alpha, h):
        for _ in range(a):
            scale = _dd.mul_f64(scale, step)
    return scale


def _dd_richardson(ests: list) -> tuple:
    k = 1
    while len(ests) > 1:
        f = 4.0 ** k
        ests = [
            _dd.div(_dd.sub(_dd.mul_f64(ests[i + 1], f), ests[i]),
                    _dd.from_f64(f - 1.0))
            for i in range(len(ests) - 1)
        ]
        k += 1
    return ests[0]


def _fd_steps_arr(W, XI, ETA, base: float, frac: float):
    """Vectorized _fd_steps over coordinate arrays."""
    delta = ETA * ETA + 3.0 * W * XI
    cap = delta * frac
    h_w = np.minimum(base, cap / np.maximum(3.0 * np.abs(XI), 1e-3))
    h_xi = np.minimum(base, cap / np.maximum(3.0 * np.abs(W), 1e-3))
    h_eta = np.minimum(base, cap / np.maximum(2.0 * np.abs(ETA), 1e-3))
    return h_w, h_xi, h_eta


def _fd_alpha_dd(x: tuple, sign, alpha: tuple, h: tuple, levels: int) -> tuple:
    """One extrapolated mixed derivative of the branch phase, in dd.

    x and h hold per-point coordinate and step arrays of shape (P,); the
    stencil nodes ride a trailing axis so the whole batch evaluates in a
    handful of vectorized passes.  Returns a dd pair of shape (P,).
    """
    offs, wgts, slices = _plan(alpha, levels)
    coords = [
        _dd._two_sum(x[i][:, None], offs[None, :, i] * h[i][:, None])
        for i in range(3)
    ]
    phi = _phi_branch_dd(*coords, sign)
    ests = [
        _dd.div(_dd_weighted(phi, sl, wgts), _dd_scale(alpha, h, lev))
        for lev, sl in enumerate(slices)
    ]
    return _dd_richardson(ests)


def _freq_entries_dd(w_samples: tuple, XI, ETA, sign, h_freq: tuple,
                     levels: int) -> list:
    """Frequency-Hessian entries at a dd array of w values, vectorized.

    w_samples is a dd pair of shape (P, M); XI, ETA and the steps are (P,).
    Returns [m_xx, m_xy, m_yy] as dd arrays of shape (P, M).
    """
    out = []
    wv = (w_samples[0][..., None], w_samples[1][..., None])
    for alpha in ((2, 0), (1, 1), (0, 2)):
        offs, wgts, slices = _plan(alpha, levels)
        xiv = _dd._two_sum(XI[:, None, None], offs[None, None, :, 0] * h_freq[0][:, None, None])
        etav = _dd._two_sum(ETA[:, None, None], offs[None, None, :, 1] * h_freq[1][:, None, None])
        phi = _phi_branch_dd(wv, xiv, etav, sign)
        ests = [
            _dd.div(_dd_weighted(phi, sl, wgts),
                    _dd_scale(alpha, tuple(v[:, None] for v in h_freq), lev))
            for lev, sl in enumerate(slices)
        ]
        out.append(_dd_richardson(ests))
    return out


def _coord_arrays(points, branches):
    W = np.array([p.w for p in points])
    XI = np.array([p.xi for p in points])
    ETA = np.array([p.eta for p in points])
    SIGN = np.array([float(b.sign) for b in branches])
    return W, XI, ETA, SIGN


def _default_frac(levels: int, refined: float, plain: float, given) -> float:
    if given is not None:
        return given
    return refined if levels >= 2 else plain


def hessian_det_fd_batch(points, branches, base_step: float = 1e-2,
                         levels: int = 1, step_frac=None) -> np.ndarray:
    """Vectorized hessian_det_fd over matched sequences of points/branches."""
    W, XI, ETA, SIGN = _coord_arrays(points, branches)
    frac = _default_frac(levels, 1.0 / 64.0, 1.0 / 64.0, step_frac)
    h3 = _fd_steps_arr(W, XI, ETA, base_step, frac)
    x = (W, XI, ETA)
    sign = SIGN[:, None]
    m_xx = _fd_alpha_dd(x, sign, (1, 2, 0), h3, levels)
    m_xy = _fd_alpha_dd(x, sign, (1, 1, 1), h3, levels)
    m_yy = _fd_alpha_dd(x, sign, (1, 0, 2), h3, levels)
    det = _dd.sub(_dd.mul(m_xx, m_yy), _dd.sqr(m_xy))
    return _dd.to_f64(det)


def nikodym_det_fd_batch(points, branches, base_step: float = 1e-2,
                         levels: int = 1, step_frac=None) -> np.ndarray:
    """Vectorized nikodym_det_fd over matched sequences of points/branches.

    The default step fraction is mode-dependent: the plain mode needs the
    smaller steps to push the order-two inner truncation below its target,
    while the extrapolated mode prefers the larger ones.
    """
    W, XI, ETA, SIGN = _coord_arrays(points, branches)
    frac = _default_frac(levels, 1.0 / 128.0, 1.0 / 256.0, step_frac)
    h_w, h_xi, h_eta = _fd_steps_arr(W, XI, ETA, base_step, frac)
    sign = SIGN[:, None, None]
    rows = np.empty((len(W), 3, 3))
    for oi, order in enumerate((1, 2, 3)):
        offs, wgts, slices = _plan((order,), levels)
        w_samples = _dd._two_sum(W[:, None], offs[None, :, 0] * h_w[:, None])
        entries = _freq_entries_dd(w_samples, XI, ETA, sign, (h_xi, h_eta), levels)
        for ei, ent in enumerate(entries):
            ests = [
                _dd.div(_dd_weighted(ent, sl, wgts),
                        _dd_scale((order,), (h_w,), lev))
                for lev, sl in enumerate(slices)
            ]
            rows[:, oi, ei] = _dd.to_f64(_dd_richardson(ests))
    return np.linalg.det(rows)


def flat_hessian_check_batch(points, branches, base_step: float = 1e-2,
                             levels: int = 1, step_frac=None) -> np.ndarray:
    """Vectorized flat_hessian_check over matched sequences."""
    W, XI, ETA, SIGN = _coord_arrays(points, branches)
    frac = _default_frac(levels, 1.0 / 128.0, 1.0 / 128.0, step_frac)
    _, h_xi, h_eta = _fd_steps_arr(W, XI, ETA, base_step, frac)
    w_samples = _dd.from_f64(W[:, None])
    sign = SIGN[:, None, None]
    m_xx, m_xy, m_yy = _freq_entries_dd(w_samples, XI, ETA, sign, (h_xi, h_eta), levels)
    det = _dd.sub(_dd.mul(m_xx, m_yy), _dd.sqr(m_xy))
    return _dd.to_f64(det)[:, 0]




def exceptional_curvature_fd(s: float, w_scaled: float, h: float = 1e-4,
                             levels: int = 0) -> float:
    """Oracle for exceptional_curvature: second central difference in s of
    the w-derivative of the branch phase along the line xi = 0.

    The branch follows the sign of s (the surviving root there is 2s/3w).
    The differentiated field is cubic in s, so the stencil is exact up to
    rounding; extrapolation levels only pay off together with a larger h
    (the Richardson mode uses h = 3e-3).
    """
    if w_scaled <= 0.0:
        raise ValueError(f"w_scaled must be positive, got {w_scaled}")

    def g(u):
        b = Branch.PLUS if u > 0 else Branch.MINUS
        return phi_branch_grad(PhasePoint(w=w_scaled, xi=0.0, eta=u), b)[2]

    return fd_oracle_derivative(g, s, (2,), h, levels=levels)


# ---------------------------------------------------------------------------
# Amplitude class support predicates


@dataclass(frozen=True)
class AmplitudeClassSpec:
    """Support conditions of one amplitude class.

    class_kind: 'A_pm' (base stationary class), 'N_pm' (frequency bounded
    below), 'E_pm' (frequency pinned near zero), or 'B' (two-sided
    discriminant bound).  Derivative-size conditions carry unquantified
    constants and are deliberately not part of the predicate.
    """

    class_kind: str
    tau: float = 1.0
    sigma: float = 1.0
    c_star: float = 8.0
    branch: Branch = Branch.PLUS

    _KINDS = ("A_pm", "N_pm", "E_pm", "B")

    def __post_init__(self):
        if self.class_kind not in self._KINDS:
            raise ValueError(f"class_kind must be one of {self._KINDS}")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if not (0.0 < self.sigma <= 1.0):
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")
        if self.c_star < 4.0:
            raise ValueError(f"c_star must be >= 4, got {self.c_star}")


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    flags: dict
    reason: str | None = None


def _base_flags(p: PhasePoint, tau: float, c_star: float, b: Branch) -> dict:
    flags = {
        "xi_bounded": abs(p.xi) <= c_star,
        "eta_bounded": abs(p.eta) <= c_star,
        "w_in_range": tau <= p.w <= c_star,
        "delta_at_least_tau": discriminant(p) >= tau,
    }
    if flags["delta_at_least_tau"] and p.w != 0.0:
        t = critical_points(p).root(b)
        flags["root_in_band"] = 0.25 <= t <= 4.0
    else:
        flags["root_in_band"] = False
    return flags


def amplitude_class_check(spec: AmplitudeClassSpec, p: PhasePoint) -> MembershipReport:
    """Support-membership test for the amplitude classes.

    Only support conditions are checked; the classes' derivative bounds
    involve constants the source theory leaves unquantified.
    """
    kind = spec.class_kind
    if kind == "A_pm":
        flags = _base_flags(p, spec.tau, spec.c_star, spec.branch)
    elif kind == "N_pm":
        flags = _base_flags(p, spec.tau, spec.c_star, spec.branch)
        flags["xi_above_sigma"] = abs(p.xi) >= spec.sigma
    elif kind == "E_pm":
        flags = _base_flags(p, 1.0 / spec.c_star, spec.c_star, spec.branch)
        flags["xi_below_sigma"] = abs(p.xi) <= spec.sigma
    else:  # B
        flags = {
            "xi_bounded": abs(p.xi) <= spec.c_star,
            "eta_bounded": abs(p.eta) <= spec.c_star,
            "w_in_range": spec.tau <= p.w <= spec.c_star,
            "abs_delta_at_least_tau": abs(discriminant(p)) >= spec.tau,
        }
        if spec.tau < 1.0 / spec.c_star:
            flags["xi_above_inv_c_star"] = abs(p.xi) > 1.0 / spec.c_star
    member = all(flags.values())
    reason = None if member else ", ".join(k for k, ok in flags.items() if not ok)
    return MembershipReport(member=member, flags=flags, reason=reason)


# ---------------------------------------------------------------------------
# Random sampling of well-conditioned phase points


def sample_phase_points(rng: np.random.Generator, count: int,
                        delta_range=(0.1, 50.0), root_band=(0.25, 4.0),
                        w_range=(0.5, 8.0), xi_min: float = 0.0,
                        freq_bound: float | None = 8.0,
                        positive_root: bool = False):
    """Draw (PhasePoint, Branch) pairs with prescribed conditioning.

    Points are built constructively: draw w, the branch root t_b and the
    discriminant, then solve for (xi, eta).  The construction reproduces
    the requested discriminant exactly, so samples sit at controlled
    distance from the degenerate set.  freq_bound keeps |xi|, |eta| inside
    the bounded frequency box where the identities' source hypotheses live
    (unbounded coefficients make finite differencing hopelessly
    ill-conditioned); xi_min > 0 redraws samples whose xi lands near the
    zero set of the 3x3 determinant identity.
    """
    out = []
    while len(out) < count:
        w = rng.uniform(*w_range)
        b = Branch.PLUS if rng.uniform() < 0.5 else Branch.MINUS
        lo, hi = root_band
        mag = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        t_b = mag if (positive_root or rng.uniform() < 0.5) else -mag
        d_lo, d_hi = delta_range
        delta = math.exp(rng.uniform(math.log(d_lo), math.log(d_hi)))
        eta = 3.0 * w * t_b - b.sign * math.sqrt(delta)
        xi = 3.0 * w * t_b**2 - 2.0 * eta * t_b
        if abs(xi) < xi_min:
            continue
        if freq_bound is not None and (abs(xi) > freq_bound or abs(eta) > freq_bound):
            continue
        out.append((PhasePoint(w=w, xi=xi, eta=eta), b))
    return out
