"""Oscillatory integral evaluation for the cubic-phase multiplier family.

The central object is m(n; w, xi, eta) = integral of a(t) exp(i 2^n phi(t)),
taken over the support of the odd amplitude a.  Two independent evaluation
routes are provided: a composite fixed-order rule whose resolution tracks the
oscillation count (the production path), and an adaptive bisection rule used
as a reference oracle.  Keeping the routes separate lets tests cross-validate
one against the other instead of trusting a single code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .bumps import DEFAULT_BUMP, BumpSpec, amplitude_a, beta, beta0
from .phase_geometry import Branch, PhasePoint, critical_points, phase, phase_derivs

__all__ = [
    "QuadratureConfig",
    "QuadratureResult",
    "QuadratureToleranceError",
    "MultiplierQuery",
    "multiplier_m",
    "multiplier_reference",
    "multiplier_localized",
    "stationary_phase_approx",
    "root_isolated_multiplier",
    "quadrature_refine",
    "sublevel_measure",
]


_GL12 = np.polynomial.legendre.leggauss(12)
_GL16 = np.polynomial.legendre.leggauss(16)
_GL24 = np.polynomial.legendre.leggauss(24)

# Oscillation count above which a stationary-free integral is routed to the
# collocation path; below it, brute-force resolution is cheap enough.
_LEVIN_SWITCH_CYCLES = 50_000.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Resolution and budget knobs shared by the multiplier evaluators.

    nodes_per_wavelength: minimum sampling density of the starting grid.
        Eight nodes per oscillation gives the 16-point panels roughly two
        wavelengths each, which lands near 1e-10 relative accuracy before
        any escalation.
    panel_cap: hard ceiling on panels per call; exceeding it while the
        error estimate is still above tolerance raises, carrying the best
        value computed so far.
    chunk_nodes: evaluation batch size, bounds peak memory.
    """

    nodes_per_wavelength: float = 8.0
    min_panels: int = 16
    panel_cap: int = 1 << 25
    chunk_nodes: int = 1 << 20

    def __post_init__(self):
        if self.nodes_per_wavelength <= 0 or self.min_panels < 1:
            raise ValueError("resolution parameters must be positive")
        if self.panel_cap < 2 * self.min_panels:
            raise ValueError("panel_cap too small for even one refinement")


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    abs_error_estimate: float
    subdivisions: int

    def __post_init__(self):
        if not math.isfinite(self.abs_error_estimate) or self.abs_error_estimate < 0:
            raise ValueError("abs_error_estimate must be finite and nonnegative")
        if self.subdivisions < 0:
            raise ValueError("subdivisions must be nonnegative")


class QuadratureToleranceError(RuntimeError):
    """Tolerance not reached within the panel budget.

    The best available result is attached so callers may degrade gracefully
    instead of losing the computation.
    """

    def __init__(self, message: str, result: QuadratureResult):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class MultiplierQuery:
    """One localized multiplier evaluation request.

    n is the dyadic oscillation scale (frequency 2**n).  k1/k2 select
    dyadic cutoffs in xi/eta; each may independently be a sharp annulus
    cutoff (default) or a "<= k" ball cutoff via the *_leq flag.  ell and
    kappa select the two discriminant localizations; they are mutually
    exclusive and both require k2 because the discriminant window is
    calibrated against the eta scale.
    """

    n: int
    w: float
    xi: float
    eta: float
    k1: Optional[int] = None
    k2: Optional[int] = None
    k1_leq: bool = False
    k2_leq: bool = False
    ell: Optional[int] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"n must be a nonnegative integer, got {self.n}")
        if self.ell is not None and self.kappa is not None:
            raise ValueError("at most one of ell, kappa may be set")
        if self.k1_leq and self.k1 is None:
            raise ValueError("k1_leq set without k1")
        if self.k2_leq and self.k2 is None:
            raise ValueError("k2_leq set without k2")
        if (self.ell is not None or self.kappa is not None) and self.k2 is None:
            raise ValueError("discriminant localization requires k2")


def _support_intervals(spec: BumpSpec) -> Tuple[Tuple[float, float], ...]:
    # a(t) = beta(t)/t lives where beta does: 1/2 < |t| < 1 + glue_width.
    hi = 1.0 + spec.glue_width
    return ((-hi, -0.5), (0.5, hi))


def _max_abs_dphi(w: float, xi: float, eta: float, lo: float, hi: float) -> float:
    """sup of |phi'| over [lo, hi]; phi' is quadratic so check the vertex."""
    d1 = lambda t: abs(-xi - 2.0 * t * eta + 3.0 * t * t * w)
    best = max(d1(lo), d1(hi))
    if w != 0.0:
        vertex = eta / (3.0 * w)
        if lo < vertex < hi:
            best = max(best, d1(vertex))
    return best


def _cycles(n: int, w: float, xi: float, eta: float, lo: float, hi: float) -> float:
    return 2.0**n * _max_abs_dphi(w, xi, eta, lo, hi) * (hi - lo) / (2.0 * math.pi)


def _composite_gl(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    panels: int,
    chunk_nodes: int,
) -> complex:
    nodes, weights = _GL16
    h = (hi - lo) / panels
    per = max(1, chunk_nodes // nodes.size)
    total = 0.0 + 0.0j
    for start in range(0, panels, per):
        stop = min(start + per, panels)
        mid = lo + h * (np.arange(start, stop) + 0.5)
        t = mid[:, None] + (0.5 * h) * nodes[None, :]
        total += (0.5 * h) * complex(np.sum(f(t) * weights[None, :]))
    return total


def _phase_integrand(
    n: int, p: PhasePoint, amplitude: Callable[[np.ndarray], np.ndarray]
) -> Callable[[np.ndarray], np.ndarray]:
    scale = 2.0**n

    def f(t: np.ndarray) -> np.ndarray:
        return amplitude(t) * np.exp(1j * scale * phase(t, p))

    return f


def _cheb_diff(n_nodes: int):
    """Chebyshev-Lobatto nodes on [-1, 1] with the differentiation matrix."""
    m = n_nodes - 1
    j = np.arange(n_nodes)
    x = np.cos(np.pi * j / m)
    c = np.ones(n_nodes)
    c[0] = c[-1] = 2.0
    c = c * (-1.0) ** j
    gap = x[:, None] - x[None, :] + np.eye(n_nodes)
    d = (c[:, None] / c[None, :]) / gap
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return x, d


_CHEB17 = _cheb_diff(17)


def _interior_roots(w: float, xi: float, eta: float, lo: float, hi: float) -> list:
    """Zeros of phi' inside [lo, hi], sorted."""
    roots = []
    if w != 0.0:
        delta = eta * eta + 3.0 * w * xi
        if delta > 0.0:
            r = math.sqrt(delta)
            roots = [(eta + r) / (3.0 * w), (eta - r) / (3.0 * w)]
        elif delta == 0.0:
            roots = [eta / (3.0 * w)]
    elif eta != 0.0:
        roots = [-xi / (2.0 * eta)]
    return sorted(t for t in roots if lo <= t <= hi)


def _window_halfwidth(n: int, w: float, eta: float, t_s: float, budget: float = 2000.0) -> float:
    """Halfwidth around a stationary point holding ~budget oscillations.

    Sized from the local quadratic (or, when phi'' degenerates, cubic)
    growth of the phase, so the windowed piece stays cheap to brute-force
    no matter how large 2^n sup|phi'| is globally.
    """
    scale = 2.0**n
    ddphi = abs(-2.0 * eta + 6.0 * w * t_s)
    cands = []
    if ddphi > 0.0:
        cands.append(math.sqrt(math.pi * budget / (scale * ddphi)))
    if w != 0.0:
        cands.append((math.pi * budget / (3.0 * scale * abs(w))) ** (1.0 / 3.0))
    return min(cands) if cands else math.inf


def _span_jobs(
    n: int, w: float, xi: float, eta: float, lo: float, hi: float
) -> list:
    """Partition one support component into (lo, hi, method) pieces.

    Cheap spans go to the composite rule whole.  Expensive stationary-free
    spans go to collocation whole.  Otherwise the span is cut at sharp
    points bracketing each zero of phi' (integral additivity makes the cut
    exact); the narrow stationary windows are brute-forced and the
    oscillatory-but-monotone remainder is collocated.
    """
    if _cycles(n, w, xi, eta, lo, hi) <= _LEVIN_SWITCH_CYCLES:
        return [(lo, hi, "composite")]
    roots = _interior_roots(w, xi, eta, lo, hi)
    if not roots:
        return [(lo, hi, "levin")]
    windows = []
    for t_s in roots:
        hw = _window_halfwidth(n, w, eta, t_s)
        windows.append((max(lo, t_s - hw), min(hi, t_s + hw)))
    merged = [windows[0]]
    for a, b in windows[1:]:
        if a <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    jobs = []
    cursor = lo
    for a, b in merged:
        if a > cursor:
            jobs.append((cursor, a, None))
        jobs.append((a, b, "composite"))
        cursor = b
    if cursor < hi:
        jobs.append((cursor, hi, None))
    resolved = []
    for a, b, kind in jobs:
        if kind is None:
            heavy = _cycles(n, w, xi, eta, a, b) > _LEVIN_SWITCH_CYCLES
            kind = "levin" if heavy else "composite"
        if b > a:
            resolved.append((a, b, kind))
    return resolved


def _levin_value(
    n: int,
    p: PhasePoint,
    amp: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    panels: int,
) -> complex:
    """Collocation evaluation of the oscillatory integral on [lo, hi].

    On each panel, solving p' + i 2^n phi' p = a by Chebyshev collocation
    turns the integral into boundary evaluations of p e^{i 2^n phi}, so the
    cost follows the smoothness of the amplitude rather than the number of
    oscillations.  Valid only when phi' never vanishes on the interval; the
    huge diagonal i 2^n phi' then keeps the systems well conditioned.
    """
    x, d = _CHEB17
    scale = 2.0**n
    width = (hi - lo) / panels
    half = 0.5 * width
    mid = lo + width * (np.arange(panels) + 0.5)
    t = mid[:, None] + half * x[None, :]  # (panels, nodes), hi edge first
    dphi = -p.xi - 2.0 * t * p.eta + 3.0 * t * t * p.w
    systems = d[None, :, :] / half + 1j * scale * dphi[:, :, None] * np.eye(x.size)[None, :, :]
    sol = np.linalg.solve(systems, amp(t).astype(complex)[:, :, None])[:, :, 0]
    edge_phase = np.exp(1j * scale * phase(t[:, (0, -1)], p))
    per_panel = sol[:, 0] * edge_phase[:, 0] - sol[:, -1] * edge_phase[:, -1]
    return complex(per_panel.sum())


def multiplier_m(
    n: int,
    w: float,
    xi: float,
    eta: float,
    tol: float = 1e-10,
    amplitude: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    intervals: Optional[Sequence[Tuple[float, float]]] = None,
    bump: BumpSpec = DEFAULT_BUMP,
    config: QuadratureConfig = DEFAULT_CONFIG,
    method: str = "auto",
) -> QuadratureResult:
    """Evaluate the multiplier with doubling resolution until convergence.

    Each support component escalates independently: the value is recomputed
    on a 2x finer grid until two successive grids agree within its share of
    `tol` (absolute, with a 1.4x safety factor on the observed gap).

    method: "composite" forces the fixed-order rule, whose starting panel
    count tracks the oscillation estimate 2^n sup|phi'| length / 2pi, over
    each component whole.  "levin" forces the collocation path, which is
    only valid when phi' has no zero inside the components.  "auto"
    (default) brute-forces cheap spans, collocates expensive
    stationary-free spans, and for expensive spans containing zeros of
    phi' cuts out narrow windows around the zeros to brute-force while
    collocating the rest.  The `amplitude` hook replaces a(t); tests use
    it to force zero or to window the integrand around one stationary
    point.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "composite", "levin"):
        raise ValueError(f"unknown method {method!r}")
    p = PhasePoint(w, xi, eta)
    amp = amplitude if amplitude is not None else (lambda t: amplitude_a(t, bump))
    f = _phase_integrand(n, p, amp)
    spans = tuple(intervals) if intervals is not None else _support_intervals(bump)
    spans = tuple((lo, hi) for lo, hi in spans if hi > lo)
    if not spans:
        return QuadratureResult(0.0 + 0.0j, 0.0, 0)

    jobs = []
    for lo, hi in spans:
        if method == "auto":
            jobs.extend(_span_jobs(n, w, xi, eta, lo, hi))
        elif method == "levin":
            if _interior_roots(w, xi, eta, lo, hi):
                raise ValueError("levin method requires phi' nonzero on the interval")
            jobs.append((lo, hi, "levin"))
        else:
            jobs.append((lo, hi, "composite"))

    total = 0.0 + 0.0j
    err_total = 0.0
    subdivisions = 0
    failure: Optional[QuadratureToleranceError] = None
    job_tol = tol / len(jobs)
    for lo, hi, kind in jobs:
        if kind == "levin":
            eval_at = lambda c, lo=lo, hi=hi: _levin_value(n, p, amp, lo, hi, c)
            start, cap = 8, 1 << 14
        else:
            cycles = _cycles(n, w, xi, eta, lo, hi)
            guard = math.ceil(cycles * config.nodes_per_wavelength / _GL16[0].size)
            eval_at = lambda c, lo=lo, hi=hi: _composite_gl(f, lo, hi, c, config.chunk_nodes)
            start, cap = max(config.min_panels, guard), config.panel_cap // len(jobs)
        try:
            value, err, used = _escalate(eval_at, start, cap, job_tol)
        except QuadratureToleranceError as exc:
            value = exc.result.value
            err = exc.result.abs_error_estimate
            used = exc.result.subdivisions
            failure = exc
        total += value
        err_total += err
        subdivisions += used
    if failure is not None:
        raise QuadratureToleranceError(
            str(failure), QuadratureResult(total, err_total, subdivisions)
        )
    return QuadratureResult(total, err_total, subdivisions)


def _escalate(
    eval_at: Callable[[int], complex], start: int, cap: int, tol: float
) -> Tuple[complex, float, int]:
    """Double resolution until two successive evaluations agree within tol."""
    panels = min(start, max(1, cap // 2))
    value = eval_at(panels)
    while True:
        doubled = 2 * panels
        refined = eval_at(doubled)
        err = 1.4 * abs(refined - value)
        if err < tol:
            return refined, err, doubled
        if 2 * doubled > cap:
            raise QuadratureToleranceError(
                f"error estimate {err:.3e} above tol {tol:.3e} at {doubled} panels",
                QuadratureResult(refined, err, doubled),
            )
        panels, value = doubled, refined


def quadrature_refine(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    tol: float,
    initial_panels: int = 8,
    panel_cap: int = 500_000,
    noise_scale: float = 0.0,
) -> QuadratureResult:
    """Adaptive bisection with nested 12/24-point panels.

    Per-panel error is the gap between the two rules; panels above their
    share of the tolerance split in vectorized rounds until the summed
    estimate drops below `tol`.  Tolerances below what the arithmetic can
    certify are met at the rounding floor instead: refinement stops once
    every panel's gap is at noise scale (or when splitting stops paying),
    and the returned estimate reports the floor actually achieved.
    `noise_scale` is the caller's relative evaluation noise of f beyond
    plain rounding; for e^{i K phi} integrands the argument rounding
    eps K sup|phi| dominates, and only the caller knows K.  Serves as the
    reference oracle for the composite path, so it deliberately shares no
    machinery with it.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not hi > lo:
        raise ValueError("empty interval")
    initial_panels = max(1, int(initial_panels))

    n12, w12 = _GL12
    n24, w24 = _GL24
    eps = np.finfo(float).eps

    def rules(left: np.ndarray, width: np.ndarray):
        mid = left + 0.5 * width
        half = 0.5 * width
        t24 = mid[:, None] + half[:, None] * n24[None, :]
        f24 = f(t24)
        v24 = half * np.sum(f24 * w24[None, :], axis=1)
        t12 = mid[:, None] + half[:, None] * n12[None, :]
        v12 = half * np.sum(f(t12) * w12[None, :], axis=1)
        # Noise scale of the panel sums; gaps at this size carry no
        # information, so they are treated as converged.
        floor = (24.0 * eps + noise_scale) * width * np.max(np.abs(f24), axis=1)
        return v24, np.abs(v24 - v12), floor

    width0 = (hi - lo) / initial_panels
    left = lo + width0 * np.arange(initial_panels)
    width = np.full(initial_panels, width0)
    vals, errs, floors = rules(left, width)

    while float(errs.sum()) >= tol:
        split = errs > np.maximum(tol / (2.0 * left.size), 4.0 * floors)
        if not np.any(split):
            break  # everything left is evaluation noise
        if left.size + np.count_nonzero(split) > panel_cap:
            order = np.argsort(left)
            best = QuadratureResult(
                complex(vals[order].sum()), float(errs.sum()), int(left.size)
            )
            raise QuadratureToleranceError(
                f"refinement cap {panel_cap} hit with error {errs.sum():.3e}", best
            )
        keep = ~split
        half_w = 0.5 * width[split]
        child_l = np.concatenate([left[split], left[split] + half_w])
        child_w = np.concatenate([half_w, half_w])
        child_v, child_e, child_f = rules(child_l, child_w)
        left = np.concatenate([left[keep], child_l])
        width = np.concatenate([width[keep], child_w])
        vals = np.concatenate([vals[keep], child_v])
        errs = np.concatenate([errs[keep], child_e])
        floors = np.concatenate([floors[keep], child_f])

    order = np.argsort(left)
    return QuadratureResult(
        complex(vals[order].sum()), float(errs.sum()), int(left.size)
    )


def multiplier_reference(
    n: int,
    w: float,
    xi: float,
    eta: float,
    tol: float = 1e-13,
    initial_panels: int = 4096,
    amplitude: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    bump: BumpSpec = DEFAULT_BUMP,
) -> QuadratureResult:
    """Reference value of the multiplier via the adaptive oracle."""
    p = PhasePoint(w, xi, eta)
    amp = amplitude if amplitude is not None else (lambda t: amplitude_a(t, bump))
    f = _phase_integrand(n, p, amp)
    spans = _support_intervals(bump)
    value = 0.0 + 0.0j
    err = 0.0
    subdivisions = 0
    for lo, hi in spans:
        r = quadrature_refine(
            f, lo, hi, tol / len(spans),
            initial_panels=initial_panels,
            noise_scale=_phase_noise(n, p, lo, hi),
        )
        value += r.value
        err += r.abs_error_estimate
        subdivisions += r.subdivisions
    return QuadratureResult(value, err, subdivisions)


def _phase_noise(n: int, p: PhasePoint, lo: float, hi: float) -> float:
    """Relative evaluation noise of e^{i 2^n phi}: argument rounding."""
    t = np.linspace(lo, hi, 129)
    return float(np.finfo(float).eps * 2.0**n * np.max(np.abs(phase(t, p))))


def _cutoff_factor(q: MultiplierQuery, bump: BumpSpec) -> float:
    factor = 1.0
    if q.k1 is not None:
        fn = beta0 if q.k1_leq else beta
        factor *= float(fn(2.0 ** (-q.k1) * q.xi, bump))
    if q.k2 is not None:
        fn = beta0 if q.k2_leq else beta
        factor *= float(fn(2.0 ** (-q.k2) * q.eta, bump))
    if q.ell is not None or q.kappa is not None:
        delta = q.eta**2 + 3.0 * q.w * q.xi
        if q.ell is not None:
            factor *= float(beta(2.0 ** (2 * q.ell - 2 * q.k2) * delta, bump))
        else:
            shift = 2 * math.floor(q.n * q.kappa) - 2 * q.k2
            factor *= float(beta0(2.0**shift * delta, bump))
    return factor


def multiplier_localized(
    q: MultiplierQuery,
    tol: float = 1e-10,
    bump: BumpSpec = DEFAULT_BUMP,
    config: QuadratureConfig = DEFAULT_CONFIG,
) -> QuadratureResult:
    """Localized multiplier: scalar cutoff factors times the base integral.

    Every cutoff is independent of the integration variable, so a vanishing
    factor short-circuits the quadrature entirely.
    """
    factor = _cutoff_factor(q, bump)
    if factor == 0.0:
        return QuadratureResult(0.0 + 0.0j, 0.0, 0)
    base = multiplier_m(q.n, q.w, q.xi, q.eta, tol=tol, bump=bump, config=config)
    return QuadratureResult(
        factor * base.value,
        abs(factor) * base.abs_error_estimate,
        base.subdivisions,
    )


def stationary_phase_approx(n: int, p: PhasePoint, b: Branch) -> complex:
    """Leading-order stationary-phase value at the branch root.

    a(t_b) sqrt(2 pi / (2^n |phi''|)) exp(i (2^n phi(t_b) + sign(phi'') pi/4)).
    Raises when the phase has no real critical points or when the root falls
    outside the amplitude support (no stationary contribution to predict).
    """
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    crit = critical_points(p)  # raises NoRealRootsError when delta <= 0
    t_b = crit.root(b)
    amp = amplitude_a(t_b)
    if amp == 0.0:
        raise ValueError(
            f"stationary point t={t_b:.6g} lies outside the amplitude support"
        )
    _, d2, _ = phase_derivs(t_b, p)
    scale = 2.0**n
    modulus = amp * math.sqrt(2.0 * math.pi / (scale * abs(d2)))
    angle = scale * phase(t_b, p) + math.copysign(math.pi / 4.0, d2)
    return modulus * complex(math.cos(angle), math.sin(angle))


def root_isolated_multiplier(
    n: int,
    p: PhasePoint,
    b: Branch,
    tol: float = 1e-13,
    window: str = "separation",
    c_star: float = 8.0,
    initial_panels: int = 256,
    bump: BumpSpec = DEFAULT_BUMP,
) -> QuadratureResult:
    """Multiplier restricted to a smooth window around one stationary point.

    window="separation" scales the cutoff to the root gap, so the other
    critical point never enters the support regardless of parameters.
    window="curvature" uses the discriminant-calibrated width
    c_star**2 (t - t_b) / (2 sqrt(delta)); it matches the analytical
    normalization but only isolates while 1.75 * 2 sqrt(delta) / c_star**2
    stays below the separation, so the scaled variant is the default.
    """
    crit = critical_points(p)
    t_b = crit.root(b)
    if amplitude_a(t_b, bump) == 0.0:
        raise ValueError(
            f"stationary point t={t_b:.6g} lies outside the amplitude support"
        )
    sep = abs(crit.t_plus - crit.t_minus)
    if window == "separation":
        inv_width = 4.0 / sep
    elif window == "curvature":
        inv_width = c_star**2 / (2.0 * math.sqrt(crit.delta))
        other = crit.t_minus if b is Branch.PLUS else crit.t_plus
        if 1.75 / inv_width >= abs(other - t_b):
            raise ValueError("curvature window too wide to isolate the root")
    else:
        raise ValueError(f"unknown window kind {window!r}")

    def amp(t: np.ndarray) -> np.ndarray:
        return amplitude_a(t, bump) * beta0(inv_width * (t - t_b), bump)

    # Window support, clipped to the amplitude component containing t_b.
    hw = 1.75 / inv_width
    comp_lo, comp_hi = (0.5, 1.0 + bump.glue_width) if t_b > 0 else (-1.0 - bump.glue_width, -0.5)
    lo = max(t_b - hw, comp_lo)
    hi = min(t_b + hw, comp_hi)
    f = _phase_integrand(n, p, amp)
    cycles = _cycles(n, p.w, p.xi, p.eta, lo, hi)
    start = max(initial_panels, math.ceil(cycles / 4.0))
    return quadrature_refine(
        f, lo, hi, tol, initial_panels=start, noise_scale=_phase_noise(n, p, lo, hi)
    )


def sublevel_measure(
    mu: Sequence[float],
    sigma: float,
    samples: int = 10_000_000,
    chunk: int = 1 << 22,
) -> float:
    """Measure of {t in (-1,1) : |1 - mu1 t - mu2 t^2 - mu3 t^3| < sigma}.

    Deterministic stratified midpoint sampling: the estimate is exact up to
    one grid step per boundary crossing, so the error is O(1/samples) for
    polynomial data.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if samples < 1:
        raise ValueError("samples must be positive")
    m1, m2, m3 = (float(c) for c in mu)
    step = 2.0 / samples
    count = 0
    for start in range(0, samples, chunk):
        stop = min(start + chunk, samples)
        t = -1.0 + step * (np.arange(start, stop) + 0.5)
        g = 1.0 - ((m3 * t + m2) * t + m1) * t
        count += int(np.count_nonzero(np.abs(g) < sigma))
    return count * step
