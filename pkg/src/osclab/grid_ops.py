"""Periodic grid calculus for the oscillatory multiplier operators.

Fields live on an N x N periodic box [0, L)^2 sampled at x_i = i*h with
h = L/N; the first index is the first spatial variable.  The forward
transform carries the cell weight h^2, so it approximates the continuum
Fourier integral and every continuum multiplier formula applies verbatim
at the grid frequencies 2 pi k / L.

Space-side operators (parabola averages, modulated Hilbert pieces) are
discrete t-quadratures with bilinear interpolation off-grid; they are
evaluated through an exact circulant reduction, so the cost per operator
is one FFT pair regardless of the node count.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .bumps import BumpSpec, DEFAULT_BUMP, amplitude_a, beta, beta0, beta_tilde
from .phase_geometry import Branch
from .quadrature import (
    DEFAULT_CONFIG,
    MultiplierQuery,
    QuadratureConfig,
    QuadratureToleranceError,
    multiplier_m,
)

__all__ = [
    "GridField",
    "grid_frequencies",
    "transform_forward",
    "transform_inverse",
    "field_norm2",
    "gaussian_field",
    "wave_field",
    "write_field",
    "read_field",
    "export_slice_csv",
    "DyadicIndex",
    "lp_project",
    "apply_multiplier_operator",
    "kernel_of",
    "kernel_l1",
    "localized_kernel_l1",
    "low_band_kernel_max",
    "modulation_weight",
    "difference_weight",
    "parabola_convolve",
    "parabolic_maximal",
    "rescaling_check",
    "propagator_slice",
]


# ---------------------------------------------------------------------------
# fields and transforms


@dataclass
class GridField:
    """Complex samples on the periodic box [0, L)^2.

    data[i, j] is the value at (i*h, j*h); N must be a power of two so
    that dyadic coordinate dilations map the lattice onto itself.
    """

    data: np.ndarray
    box: float

    def __post_init__(self):
        # always copy: fields are value-semantic, never views of caller arrays
        arr = np.array(self.data, dtype=np.complex128, order="C")
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"data must be square 2-D, got shape {arr.shape}")
        n = arr.shape[0]
        if n <= 0 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two, got {n}")
        if not (self.box > 0.0) or not math.isfinite(self.box):
            raise ValueError(f"box length must be positive, got {self.box}")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValueError("field data must be finite")
        object.__setattr__(self, "data", arr)

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def spacing(self) -> float:
        return self.box / self.data.shape[0]

    def copy(self) -> "GridField":
        return GridField(self.data.copy(), self.box)


def grid_frequencies(n: int, box: float) -> np.ndarray:
    """Angular frequencies 2 pi k / L in FFT bin order."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=box / n)


def transform_forward(f: GridField) -> np.ndarray:
    """Spectrum on the FFT-ordered frequency grid (cell-weighted Riemann sum)."""
    h = f.spacing
    return (h * h) * np.fft.fft2(f.data)


def transform_inverse(spectrum: np.ndarray, box: float) -> GridField:
    n = spectrum.shape[0]
    h = box / n
    return GridField(np.fft.ifft2(spectrum) / (h * h), box)


def field_norm2(f: GridField) -> float:
    """Weighted l2 norm h * sqrt(sum |f|^2), the discrete L2 norm."""
    return f.spacing * float(np.linalg.norm(f.data))


def _coords(n: int, box: float) -> np.ndarray:
    return (box / n) * np.arange(n)


def gaussian_field(n: int, box: float, sigma: float, center=None,
                   wave=(0.0, 0.0)) -> GridField:
    """Gaussian bump, optionally modulated by a plane wave.

    Periodization error is the caller's business; keep sigma <= box/16 so
    the tails at the seam sit below double rounding.
    """
    if center is None:
        center = (box / 2.0, box / 2.0)
    x = _coords(n, box)
    dx = x - center[0]
    dy = x - center[1]
    env = np.exp(-(dx[:, None] ** 2 + dy[None, :] ** 2) / (2.0 * sigma**2))
    mod = np.exp(1j * (wave[0] * x[:, None] + wave[1] * x[None, :]))
    return GridField(env * mod, box)


def wave_field(n: int, box: float, bin1: int, bin2: int) -> GridField:
    """Pure plane wave sitting exactly on the frequency bins (bin1, bin2)."""
    x = _coords(n, box)
    xi = 2.0 * np.pi * bin1 / box
    eta = 2.0 * np.pi * bin2 / box
    return GridField(np.exp(1j * xi * x)[:, None] * np.exp(1j * eta * x)[None, :], box)


_MAGIC = b"OPLB"


def write_field(path, f: GridField) -> None:
    """Binary dump: magic "OPLB", u32 N, f64 L, then N^2 complex doubles row-major."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", f.size))
        fh.write(struct.pack("<d", f.box))
        fh.write(np.ascontiguousarray(f.data, dtype="<c16").tobytes())


def read_field(path) -> GridField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_MAGIC!r}")
        (n,) = struct.unpack("<I", fh.read(4))
        (box,) = struct.unpack("<d", fh.read(8))
        payload = fh.read(16 * n * n)
        if len(payload) != 16 * n * n:
            raise ValueError("truncated field payload")
        data = np.frombuffer(payload, dtype="<c16").reshape(n, n)
    return GridField(data.astype(np.complex128), box)


def export_slice_csv(path, f: GridField, axis: int, index: int) -> None:
    """One grid line as CSV rows (coordinate, real, imag)."""
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    line = f.data[:, index] if axis == 1 else f.data[index, :]
    x = _coords(f.size, f.box)
    with open(path, "w") as fh:
        fh.write("coordinate,real,imag\n")
        for xi, val in zip(x, line):
            fh.write(f"{float(xi)!r},{float(val.real)!r},{float(val.imag)!r}\n")


# ---------------------------------------------------------------------------
# dyadic bookkeeping


@dataclass(frozen=True)
class DyadicIndex:
    """Scale bookkeeping for one localized piece.

    j is the modulation block (v in [8^j, 8^(j+1)] when v is given), ell
    the spatial-truncation offset, n the oscillation scale tied to ell by
    n = 3*ell in the rescaled frame, k1/k2 the frequency annuli.
    """

    j: int
    ell: int
    n: int
    k1: int = 0
    k2: int = 0
    v: Optional[float] = None

    def __post_init__(self):
        for name in ("j", "ell", "n", "k1", "k2"):
            val = getattr(self, name)
            if int(val) != val:
                raise ValueError(f"{name} must be an integer, got {val}")
        if self.ell < 0:
            raise ValueError(f"ell must be nonnegative, got {self.ell}")
        if self.n < 0:
            raise ValueError(f"n must be nonnegative, got {self.n}")
        if self.v is not None:
            lo, hi = 8.0**self.j, 8.0 ** (self.j + 1)
            if not (lo <= self.v <= hi):
                raise ValueError(
                    f"v={self.v} outside the modulation block [{lo}, {hi}] of j={self.j}"
                )

    @classmethod
    def from_scales(cls, j: int, ell: int, k1: int = 0, k2: int = 0,
                    v: Optional[float] = None) -> "DyadicIndex":
        return cls(j=j, ell=ell, n=3 * ell, k1=k1, k2=k2, v=v)

    @property
    def w(self) -> Optional[float]:
        # rescaled modulation 8^{-j} v in [1, 8]
        return None if self.v is None else self.v * 8.0 ** (-self.j)


# ---------------------------------------------------------------------------
# Littlewood-Paley projections

_CUTOFFS = {"sharp": beta, "leq": beta0, "tilde": beta_tilde}


def _outer_radius(m: int, mode: str, spec: BumpSpec) -> float:
    base = (1.0 + spec.glue_width) * 2.0**m
    return 2.0 * base if mode == "tilde" else base


def lp_project(f: GridField, axis: int, m: int, mode: str = "sharp",
               spec: BumpSpec = DEFAULT_BUMP) -> GridField:
    """Dyadic frequency cutoff at scale 2^m along one variable.

    axis 1 filters in the first frequency, axis 2 in the second.  mode
    picks the cutoff shape: "sharp" is the annulus bump, "leq" the ball
    bump, "tilde" the fattened annulus that equals 1 on the sharp one.
    """
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")
    if mode not in _CUTOFFS:
        raise ValueError(f"mode must be one of {sorted(_CUTOFFS)}, got {mode!r}")
    nyquist = math.pi * f.size / f.box
    outer = _outer_radius(m, mode, spec)
    if outer > nyquist * (1.0 + 1e-12):
        raise ValueError(
            f"cutoff at scale m={m} reaches |freq|={outer:.6g}, beyond the "
            f"grid Nyquist {nyquist:.6g}"
        )
    freqs = grid_frequencies(f.size, f.box)
    factor = _CUTOFFS[mode](2.0 ** (-m) * freqs, spec)
    spec_hat = transform_forward(f)
    if axis == 1:
        spec_hat = spec_hat * factor[:, None]
    else:
        spec_hat = spec_hat * factor[None, :]
    return transform_inverse(spec_hat, f.box)


# ---------------------------------------------------------------------------
# multiplier sampling on the frequency lattice


def _cutoff_field(q: MultiplierQuery, xi: np.ndarray, eta: np.ndarray,
                  spec: BumpSpec) -> np.ndarray:
    """Vectorized twin of quadrature._cutoff_factor on broadcastable grids."""
    factor = np.ones(np.broadcast(xi, eta).shape)
    if q.k1 is not None:
        fn = beta0 if q.k1_leq else beta
        factor = factor * fn(2.0 ** (-q.k1) * xi, spec)
    if q.k2 is not None:
        fn = beta0 if q.k2_leq else beta
        factor = factor * fn(2.0 ** (-q.k2) * eta, spec)
    if q.ell is not None or q.kappa is not None:
        delta = eta**2 + 3.0 * q.w * xi
        if q.ell is not None:
            factor = factor * beta(2.0 ** (2 * q.ell - 2 * q.k2) * delta, spec)
        else:
            shift = 2 * math.floor(q.n * q.kappa) - 2 * q.k2
            factor = factor * beta0(2.0**shift * delta, spec)
    return factor


_GL16 = np.polynomial.legendre.leggauss(16)


def _panel_rule(lo: float, hi: float, panels: int):
    x, w = _GL16
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (hi - lo) / panels
    nodes = (mid[:, None] + half * x[None, :]).ravel()
    wts = np.tile(half * w, panels)
    return nodes, wts


def _amplitude_nodes(n: int, w: float, xi_max: float, eta_max: float,
                     spec: BumpSpec, nodes_per_cycle: float):
    """Gauss nodes over supp a sized to the worst-case oscillation rate."""
    outer = 1.0 + spec.glue_width
    rate = 2.0**n * (xi_max + 2.0 * outer * eta_max + 3.0 * outer**2 * abs(w))
    cycles = rate * (outer - 0.5) / (2.0 * math.pi)
    panels = max(8, math.ceil(cycles * nodes_per_cycle / 16.0))
    nodes_pos, wts_pos = _panel_rule(0.5, outer, panels)
    nodes = np.concatenate([-nodes_pos[::-1], nodes_pos])
    wts = np.concatenate([wts_pos[::-1], wts_pos])
    return nodes, wts


def _tensor_multiplier(n: int, w: float, xi_vals: np.ndarray, eta_vals: np.ndarray,
                       spec: BumpSpec, nodes_per_cycle: float = 6.0,
                       block: int = 2048) -> np.ndarray:
    """Base multiplier on the tensor grid xi_vals x eta_vals.

    Separable structure: exp(i 2^n phi) factors into the t^3 coefficient
    and rank-one exponentials in xi and eta, so the whole rectangle costs
    one blocked matrix product instead of a quadrature per frequency.
    """
    xi_max = float(np.max(np.abs(xi_vals))) if xi_vals.size else 0.0
    eta_max = float(np.max(np.abs(eta_vals))) if eta_vals.size else 0.0
    t, wt = _amplitude_nodes(n, w, xi_max, eta_max, spec, nodes_per_cycle)
    scale = 2.0**n
    coef = wt * amplitude_a(t, spec) * np.exp(1j * scale * w * t**3)
    out = np.zeros((xi_vals.size, eta_vals.size), dtype=np.complex128)
    for start in range(0, t.size, block):
        tb = t[start : start + block]
        cb = coef[start : start + block]
        e1 = np.exp(-1j * scale * np.outer(xi_vals, tb))
        e2 = np.exp(-1j * scale * np.outer(tb * tb, eta_vals))
        out += (e1 * cb[None, :]) @ e2
    return out


def _base_spectrum(q: MultiplierQuery, n_grid: int, box: float,
                   spec: BumpSpec, config: QuadratureConfig,
                   sampler: Optional[Callable], tol: float,
                   live: np.ndarray, pointwise_cap: int,
                   nodes_per_cycle: float) -> np.ndarray:
    """Base multiplier values at the live frequency bins (cutoffs excluded).

    The base integrand has odd real amplitude, so m(xi, -eta) = -conj
    m(xi, eta); only the eta >= 0 half is ever computed.  A sampler
    override is evaluated on the full live set with no symmetry assumed.
    """
    freqs = grid_frequencies(n_grid, box)
    vals = np.zeros((n_grid, n_grid), dtype=np.complex128)
    if sampler is not None:
        idx = np.argwhere(live)
        if idx.size:
            vals[live] = np.asarray(
                sampler(q.n, q.w, freqs[idx[:, 0]], freqs[idx[:, 1]]),
                dtype=np.complex128,
            )
        return vals

    half = n_grid // 2
    live_half = live[:, : half + 1]
    count = int(np.count_nonzero(live_half))
    if count == 0:
        return vals
    if count <= pointwise_cap:
        for i, b in np.argwhere(live_half):
            xi = freqs[i]
            eta = freqs[b]
            try:
                res = multiplier_m(q.n, q.w, xi, eta, tol=tol, bump=spec,
                                   config=config)
            except QuadratureToleranceError as exc:
                raise QuadratureToleranceError(
                    f"multiplier quadrature failed at frequency "
                    f"(xi={xi:.6g}, eta={eta:.6g}): {exc}",
                    exc.result,
                ) from exc
            vals[i, b] = res.value
    else:
        rows = np.where(live_half.any(axis=1))[0]
        cols = np.where(live_half.any(axis=0))[0]
        rect = _tensor_multiplier(q.n, q.w, freqs[rows], freqs[cols], spec,
                                  nodes_per_cycle=nodes_per_cycle)
        vals[np.ix_(rows, cols)] = rect
    # mirror the strictly negative eta bins; the unpaired Nyquist column
    # (bin n/2) was computed directly above
    src = vals[:, 1:half]
    vals[:, half + 1 :] = -np.conj(src[:, ::-1])
    return vals


def apply_multiplier_operator(f: GridField, q: MultiplierQuery, tol: float = 1e-10,
                              spec: BumpSpec = DEFAULT_BUMP,
                              config: QuadratureConfig = DEFAULT_CONFIG,
                              sampler: Optional[Callable] = None,
                              pointwise_cap: int = 2048,
                              nodes_per_cycle: float = 6.0) -> GridField:
    """Apply the localized multiplier as a Fourier operator on the grid.

    The query's own (xi, eta) slot is ignored; the grid supplies the
    frequencies.  Cutoff factors are evaluated first and only surviving
    bins are sampled: adaptively per bin while the live set is small,
    through the separable tensor rule beyond pointwise_cap.  Unlocalized
    queries are legal and simply pay for the full lattice.  A quadrature
    tolerance failure propagates with the offending frequency attached.
    """
    freqs = grid_frequencies(f.size, f.box)
    factor = _cutoff_field(q, freqs[:, None], freqs[None, :], spec)
    live = factor != 0.0
    vals = _base_spectrum(q, f.size, f.box, spec, config, sampler, tol, live,
                          pointwise_cap, nodes_per_cycle)
    out_spec = transform_forward(f) * (factor * vals)
    return transform_inverse(out_spec, f.box)


def kernel_of(q: MultiplierQuery, shape: Tuple[int, float], tol: float = 1e-10,
              spec: BumpSpec = DEFAULT_BUMP,
              config: QuadratureConfig = DEFAULT_CONFIG,
              sampler: Optional[Callable] = None,
              nodes_per_cycle: float = 6.0) -> Tuple[GridField, float]:
    """Convolution kernel of the localized multiplier on an (N, L) grid.

    Returns the kernel field and its cell-weighted discrete L1 norm.  The
    box must be chosen by the caller: the kernel of scale n spreads over
    |x| ~ 2^n * 2, and a box that clips it folds the tails back in.
    """
    n_grid, box = shape
    n_grid = int(n_grid)
    freqs = grid_frequencies(n_grid, box)
    factor = _cutoff_field(q, freqs[:, None], freqs[None, :], spec)
    live = factor != 0.0
    vals = _base_spectrum(q, n_grid, box, spec, config, sampler, tol, live,
                          pointwise_cap=0, nodes_per_cycle=nodes_per_cycle)
    h = box / n_grid
    kernel = np.fft.ifft2(factor * vals) / (h * h)
    field = GridField(kernel, box)
    return field, (h * h) * float(np.sum(np.abs(kernel)))


def localized_kernel_l1(n: int, w: float, ell_values: Sequence[int],
                        shape: Tuple[int, float], k1: int = 0, k2: int = 0,
                        include_closure: bool = True,
                        spec: BumpSpec = DEFAULT_BUMP,
                        nodes_per_cycle: float = 6.0) -> list:
    """Discrete L1 norms of the discriminant-band kernels at one scale n.

    Computes the base multiplier once on the live annulus rectangle, then
    applies each band factor beta(2^(2l-2k2) Delta) and, when requested,
    the closing ball piece at l = floor(n/3).  Returns the L1 values in
    the order given (closure appended last).
    """
    n_grid, box = shape
    n_grid = int(n_grid)
    h = box / n_grid
    freqs = grid_frequencies(n_grid, box)
    base_q = MultiplierQuery(n=n, w=w, xi=0.0, eta=0.0, k1=k1, k2=k2)
    annulus = _cutoff_field(base_q, freqs[:, None], freqs[None, :], spec)
    live = annulus != 0.0
    vals = _base_spectrum(base_q, n_grid, box, spec, DEFAULT_CONFIG, None, 0.0,
                          live, pointwise_cap=0, nodes_per_cycle=nodes_per_cycle)
    delta = (freqs[None, :] ** 2 + 3.0 * w * freqs[:, None])
    out = []
    pieces = [(ell, False) for ell in ell_values]
    if include_closure:
        pieces.append((n // 3, True))
    for ell, ball in pieces:
        fn = beta0 if ball else beta
        band = fn(2.0 ** (2 * ell - 2 * k2) * delta, spec)
        kernel = np.fft.ifft2(annulus * band * vals) / (h * h)
        out.append((h * h) * float(np.sum(np.abs(kernel))))
    return out


# ---------------------------------------------------------------------------
# exact kernel reductions

_PROFILE_STEP = 0.004
_PROFILE_UMAX = 96.0


@lru_cache(maxsize=8)
def _time_profile(kind: str, spec: BumpSpec, tail: float = 1e-9):
    """Cosine transform of a cutoff, tabulated for interpolation.

    Returns (u grid, values, radius): the inverse Fourier transform of the
    even cutoff at unit scale, with radius the point past which |profile|
    stays below tail * max.
    """
    fn = {"beta": beta, "beta0": beta0}[kind]
    outer = 1.0 + spec.glue_width
    lo = 0.0 if kind == "beta0" else 0.25
    s, wt = _panel_rule(lo, outer, 256)
    vals_s = fn(s, spec) * wt
    u = np.arange(0.0, _PROFILE_UMAX + _PROFILE_STEP, _PROFILE_STEP)
    prof = (np.cos(np.outer(u, s)) @ vals_s) / math.pi
    peak = float(np.max(np.abs(prof)))
    above = np.where(np.abs(prof) >= tail * peak)[0]
    radius = float(u[above[-1]]) if above.size else 0.0
    return u, prof, radius


def _profile_at(table, x: np.ndarray) -> np.ndarray:
    # uniform-grid linear interpolation; np.interp would binary-search
    u, prof, _ = table
    ax = np.abs(x)
    pos = ax * (1.0 / _PROFILE_STEP)
    k = np.minimum(pos.astype(np.int64), prof.size - 2)
    frac = pos - k
    out = prof[k] * (1.0 - frac) + prof[k + 1] * frac
    return np.where(ax >= u[-1], 0.0, out)


def kernel_l1(n: int, k1: int = 0, k2: int = 0, w: float = 1.0,
              spec: BumpSpec = DEFAULT_BUMP, tau_step: float = 0.005,
              s_half: float = 64.0, s_step: float = 0.25,
              nodes_per_cycle: float = 8.0) -> float:
    """Discrete L1 norm of the scale-n kernel, in the sheared frame.

    Writing the kernel through the time profiles B of the annulus cutoffs
    and substituting x = 2^n tau, y = 2^n tau^2 + 2^{-k2} s, t = tau -
    2^{-n-k1} r turns the L1 norm into the integral of |V(tau, s)| with

        V = int a(tau - 2^{-n-k1} r) B(r)
                B(s + 2^{k2-k1+1} tau r - 2^{k2-2k1-n} r^2)
                exp(i(-3 2^{-k1} w tau^2 r + 3 2^{-n-2k1} w tau r^2
                      - 2^{-2n-3k1} w r^3)) dr,

    where every prefactor cancels against the Jacobian.  All variables are
    unit scale and n enters only through 2^{-n} corrections, so the
    uniform-in-n size of the norm is measured without synthesizing the
    2^n-wide kernel itself.  The integrand is even under (tau, s, r) ->
    -(tau, s, r) up to conjugation, so only tau > 0 is integrated.
    """
    table = _time_profile("beta", spec)
    radius = table[2]
    eps = 2.0 ** (-n - k1)
    sh1 = 2.0 ** (k2 - k1 + 1)
    sh2 = 2.0 ** (k2 - 2 * k1 - n)
    c1 = 3.0 * 2.0 ** (-k1) * w
    c2 = 3.0 * 2.0 ** (-n - 2 * k1) * w
    c3 = 2.0 ** (-2 * n - 3 * k1) * w

    outer = 1.0 + spec.glue_width
    pad = eps * radius
    tau = np.arange(max(0.5 - pad, 0.0), outer + pad + tau_step, tau_step)
    s = np.arange(-s_half, s_half + s_step, s_step)

    total = 0.0
    for tv in tau:
        # r contributes only where tau - eps*r lands in supp a; each branch
        # gets its own panel rule sized to the local oscillation rate
        pieces = []
        for lo_a, hi_a in ((0.5, outer), (-outer, -0.5)):
            r_hi = min(radius, (tv - lo_a) / eps)
            r_lo = max(-radius, (tv - hi_a) / eps)
            if r_hi <= r_lo:
                continue
            rate = (c1 * tv * tv + 2.0 * c2 * abs(tv) * radius
                    + 3.0 * c3 * radius**2)
            cycles = rate * (r_hi - r_lo) / (2.0 * math.pi)
            panels = max(math.ceil((r_hi - r_lo) / 4.0),
                         math.ceil(cycles * nodes_per_cycle / 16.0))
            pieces.append(_panel_rule(r_lo, r_hi, panels))
        if not pieces:
            continue
        r = np.concatenate([p[0] for p in pieces])
        rw = np.concatenate([p[1] for p in pieces])
        r2 = r * r
        amp = amplitude_a(tv - eps * r, spec)
        phase = np.exp(1j * (-c1 * tv * tv * r + c2 * tv * r2 - c3 * r2 * r))
        cr = _profile_at(table, r) * rw * amp * phase
        arg = s[:, None] + (sh1 * tv) * r[None, :] - sh2 * r2[None, :]
        v_row = _profile_at(table, arg) @ cr
        total += float(np.sum(np.abs(v_row)))
    # tau > 0 carries half the mass by the conjugation symmetry
    return 2.0 * total * tau_step * s_step


def _fft_convolve_full(a: np.ndarray, taps: np.ndarray, tap_cache: dict) -> np.ndarray:
    """Linear convolution through zero-padded FFTs, taps transform memoized."""
    full = a.size + taps.size - 1
    size = 1 << (full - 1).bit_length()
    ft = tap_cache.get(size)
    if ft is None:
        ft = np.fft.fft(taps, size)
        tap_cache[size] = ft
    return np.fft.ifft(np.fft.fft(a, size) * ft)[:full]


def low_band_kernel_max(ell: int, w: float = 1.0, c1: int = 12, c2: int = 0,
                        spec: BumpSpec = DEFAULT_BUMP,
                        nodes_per_cycle: float = 6.0, dy: float = 0.25,
                        chunk_arg: float = 0.05, tail: float = 1e-5,
                        x_window: float = 8.0) -> float:
    """Max of the low-frequency kernel at truncation scale ell (n = 3 ell).

    The multiplier is the base integral under ball cutoffs beta0(2^-c1 xi)
    beta0(2^-c2 eta); its kernel in the t-representation is

        kappa(X, Y) = int a(t) e^{i 2^n w t^3} 2^{-c1} B0(2^{-c1}(X - 2^n t))
                      2^{-c2} B0(2^{-c2}(Y - 2^n t^2)) dt,

    with B0 the time profile of the ball cutoff.  The kernel is
    accumulated on a lattice adapted to its own extent, since any fixed
    box either clips or aliases it.  The X lattice covers the ridge
    |X -+ 2^n t| <= x_window * 2^c1; outside it both profile factors are
    deep in their tails, so the lattice max is the kernel max.  The Y
    axis is processed in bands so memory stays flat; within a band, t is
    cut into chunks over which the slow X-profile is frozen at the chunk
    midpoint (argument drift <= chunk_arg), while the fast Y-profile is
    applied exactly: Gauss node coefficients are linearly binned onto a
    refined Y-grid and convolved with the sampled profile, which equals
    evaluating the piecewise-linear interpolant of the profile at the
    true displacements.
    """
    n = 3 * ell
    table = _time_profile("beta0", spec, tail=tail)
    radius = table[2]
    scale = 2.0**n
    outer = 1.0 + spec.glue_width
    pre = 2.0 ** (-c1) * 2.0 ** (-c2)

    dx = 2.0 ** (c1 - 3)
    reach = x_window * 2.0**c1
    neg = (-scale * outer - reach, -scale * 0.5 + reach)
    pos = (scale * 0.5 - reach, scale * outer + reach)
    if pos[0] <= neg[1] + dx:
        x_parts = [np.arange(neg[0], pos[1] + dx, dx)]
    else:
        x_parts = [np.arange(*neg, dx), np.arange(pos[0], pos[1] + dx, dx)]
    x_grid = np.concatenate(x_parts)

    width_y = radius * 2.0**c2
    fine = dy / 4.0
    ntap = int(math.ceil(width_y / fine)) + 1
    taps = _profile_at(table, 2.0 ** (-c2) * fine * np.arange(-ntap, ntap + 1))

    y_lo = scale * 0.25 - width_y - 2.0
    y_hi = scale * outer**2 + width_y + 2.0
    band_cells = 8192

    chunk_t = chunk_arg * 2.0**c1 / scale
    rate = 3.0 * scale * abs(w) * outer**2
    tap_cache: dict = {}
    best = 0.0
    y0 = y_lo
    while y0 < y_hi:
        y1 = min(y0 + band_cells * dy, y_hi)
        cells = int(round((y1 - y0) / dy)) + 1
        acc = np.zeros((x_grid.size, cells), dtype=np.complex128)
        # |t| range feeding this band through the Y profile
        t_lo = max(math.sqrt(max((y0 - width_y) / scale, 0.0)), 0.5)
        t_hi = min(math.sqrt(max((y1 + width_y) / scale, 0.0)), outer)
        if t_hi > t_lo:
            edges = np.arange(t_lo, t_hi + chunk_t, chunk_t)
            edges[-1] = t_hi
            for a_edge, b_edge in zip(edges[:-1], edges[1:]):
                if b_edge <= a_edge:
                    continue
                cycles = rate * (b_edge - a_edge) / (2.0 * math.pi)
                panels = max(1, math.ceil(cycles * nodes_per_cycle / 16.0))
                t_pos, wt = _panel_rule(a_edge, b_edge, panels)
                y_val = scale * t_pos * t_pos
                # fine window covering this chunk's reach, anchored at y0
                i_lo = math.floor((float(y_val.min()) - width_y - y0) / fine) - 1
                i_hi = math.ceil((float(y_val.max()) + width_y - y0) / fine) + 1
                m_fine = i_hi - i_lo + 1
                pos = (y_val - y0) / fine - i_lo
                cell = np.floor(pos).astype(np.int64)
                frac = pos - cell
                cols = np.arange(cells)
                rel = 4 * cols - i_lo + ntap
                ok = (rel >= 0) & (rel < m_fine + 2 * ntap)
                for sign in (1.0, -1.0):
                    t = sign * t_pos
                    coef = wt * pre * amplitude_a(t, spec) * np.exp(
                        1j * scale * w * t**3
                    )
                    fine_img = np.zeros(m_fine, dtype=np.complex128)
                    for shift, part in ((0, coef * (1.0 - frac)), (1, coef * frac)):
                        np.add.at(fine_img, cell + shift, part)
                    conv = _fft_convolve_full(fine_img, taps, tap_cache)
                    row = np.zeros(cells, dtype=np.complex128)
                    row[ok] = conv[rel[ok]]
                    prof_x = _profile_at(
                        table,
                        (x_grid - scale * sign * 0.5 * (a_edge + b_edge))
                        * 2.0 ** (-c1),
                    )
                    live_cols = np.where(prof_x != 0.0)[0]
                    if live_cols.size:
                        acc[live_cols, :] += np.outer(prof_x[live_cols], row)
        if acc.size:
            best = max(best, float(np.max(np.abs(acc))))
        y0 = y1
    return best


# ---------------------------------------------------------------------------
# parabola quadratures


def _circulant_apply(data: np.ndarray, h1: float, h2: float,
                     off1: np.ndarray, off2: np.ndarray,
                     weights: np.ndarray) -> np.ndarray:
    """Sum of weighted bilinear shifts, reduced to one circular convolution.

    Each node asks for data(x - off1, y - off2) with bilinear interpolation;
    splitting every node into its four corner cells and accumulating the
    corner weights on the lattice gives a stencil image whose circular
    convolution with the field reproduces the node sum exactly.
    """
    n = data.shape[0]
    a1 = np.floor(off1 / h1)
    a2 = np.floor(off2 / h2)
    f1 = off1 / h1 - a1
    f2 = off2 / h2 - a2
    i1 = a1.astype(np.int64) % n
    i2 = a2.astype(np.int64) % n
    stencil = np.zeros(n * n, dtype=np.complex128)
    for d1, d2, wcorner in (
        (0, 0, (1.0 - f1) * (1.0 - f2)),
        (1, 0, f1 * (1.0 - f2)),
        (0, 1, (1.0 - f1) * f2),
        (1, 1, f1 * f2),
    ):
        flat = ((i1 + d1) % n) * n + ((i2 + d2) % n)
        cw = weights * wcorner
        stencil += np.bincount(flat, weights=cw.real, minlength=n * n)
        if np.iscomplexobj(cw):
            stencil += 1j * np.bincount(flat, weights=cw.imag, minlength=n * n)
    stencil = stencil.reshape(n, n)
    return np.fft.ifft2(np.fft.fft2(data) * np.fft.fft2(stencil))


def parabola_convolve(f: GridField, weight: np.ndarray, scale: float,
                      spec: BumpSpec = DEFAULT_BUMP) -> GridField:
    """Discrete quadrature of integral f(x - t, y - t^2) q(t) dt.

    weight holds q sampled at t_k = scale * u_k on the uniform reference
    grid u_k over [-(1+glue), 1+glue]; the sum weights each sample by the
    node spacing.  Off-grid points are bilinear; offsets wrap around the
    periodic box by construction, which is accepted and documented.
    """
    weight = np.asarray(weight)
    if weight.ndim != 1 or weight.size < 2:
        raise ValueError("weight must be a 1-D profile with at least two samples")
    outer = 1.0 + spec.glue_width
    u = np.linspace(-outer, outer, weight.size)
    t = scale * u
    dt = scale * (u[1] - u[0])
    h = f.spacing
    out = _circulant_apply(f.data, h, h, t, t * t, weight * dt)
    return GridField(out, f.box)


def modulation_weight(v: float, m: int, nodes: int = 2048,
                      spec: BumpSpec = DEFAULT_BUMP) -> np.ndarray:
    """Sampled profile of the modulated single-scale piece.

    q(t) = e^{i v t^3} beta(2^{-m} t) / t on the reference grid, for use
    with parabola_convolve(..., scale=2^m).  Sized by the caller: the
    sampling must resolve v * (1.75 * 2^m)^3 radians of modulation.
    """
    outer = 1.0 + spec.glue_width
    u = np.linspace(-outer, outer, nodes)
    t = 2.0**m * u
    prof = 2.0 ** (-m) * amplitude_a(u, spec)
    return prof * np.exp(1j * v * t**3)


def difference_weight(v: float, j: int, nodes: int = 2048,
                      spec: BumpSpec = DEFAULT_BUMP) -> np.ndarray:
    """Sampled profile of the compensated low-scale piece.

    q(t) = (e^{i v t^3} - 1) beta0(2^j t) / t with scale = 2^{-j}; the
    subtraction removes the 1/t singularity, so the profile is smooth and
    bounded near t = 0 (q ~ i v t^2).
    """
    outer = 1.0 + spec.glue_width
    u = np.linspace(-outer, outer, nodes)
    t = 2.0 ** (-j) * u
    ball = beta0(u, spec)
    z = v * t**3
    small = np.abs(z) < 1e-5
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (np.exp(1j * z) - 1.0) / t
    frac = np.where(small, 1j * v * t * t * (1.0 + 0.5j * z), frac)
    return ball * frac


def parabolic_maximal(f: GridField, radii: Sequence[float]) -> GridField:
    """Pointwise max over radii of parabola averages of |f|.

    Each radius r contributes the midpoint quadrature of
    (1/2r) int_{-r}^{r} |f|(x - t, y - t^2) dt with step <= min(h/2, r/8);
    the node weights sum to exactly 2r so constants average to themselves.
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii):
        raise ValueError("radii must be a nonempty collection of positive reals")
    mag = np.abs(f.data).astype(np.complex128)
    h = f.spacing
    out = np.full(f.data.shape, -np.inf)
    for r in radii:
        count = max(16, int(math.ceil(2.0 * r / min(0.5 * h, r / 8.0))))
        step = 2.0 * r / count
        t = -r + step * (np.arange(count) + 0.5)
        weights = np.full(count, step / (2.0 * r))
        avg = _circulant_apply(mag, h, h, t, t * t, weights).real
        out = np.maximum(out, avg)
    return GridField(out, f.box)


# ---------------------------------------------------------------------------
# rescaling identity


def _aniso_project(data: np.ndarray, h1: float, h2: float, axis: int, m: int,
                   spec: BumpSpec) -> np.ndarray:
    n = data.shape[0]
    box = n * (h1 if axis == 1 else h2)
    nyquist = math.pi * n / box
    outer = _outer_radius(m, "sharp", spec)
    if outer > nyquist * (1.0 + 1e-12):
        raise ValueError(
            f"projection scale m={m} unresolvable: outer radius {outer:.6g} "
            f"exceeds Nyquist {nyquist:.6g}"
        )
    freqs = 2.0 * np.pi * np.fft.fftfreq(n, d=box / n)
    factor = beta(2.0 ** (-m) * freqs, spec)
    spec_hat = np.fft.fft2(data)
    if axis == 1:
        spec_hat *= factor[:, None]
    else:
        spec_hat *= factor[None, :]
    return np.fft.ifft2(spec_hat)


def rescaling_check(f: GridField, j: int, ell: int, k1: int, k2: int, v: float,
                    spec: BumpSpec = DEFAULT_BUMP, nodes: int = 4096) -> float:
    """Max relative discrepancy of the anisotropic rescaling identity.

    Left side: the modulated piece at scale ell - j composed with the
    shifted projections, on f's own grid.  Right side: the field is
    reinterpreted on the stretched box (2^{2l+j} L, 2^{l+2j} L), where the
    same array samples f(2^{-2l-j} x, 2^{-l-2j} y) exactly; there the
    rescaled operator at oscillation scale 3*ell with modulation 8^{-j} v
    is applied under projections at the base scales (k1, k2), and the
    outputs are compared index by index.  Each side derives masks, node
    offsets, and weights from its own frame parameters, so the returned
    discrepancy measures whether the two frames' scale algebra agrees;
    the dyadic change of variables is exact on the lattice, hence any
    discrepancy beyond rounding indicates a frame bug, not quadrature
    error.
    """
    if not (8.0**j <= v <= 8.0 ** (j + 1)):
        raise ValueError(f"v={v} outside the modulation block of j={j}")
    a1 = 2 * ell + j
    a2 = ell + 2 * j
    if a1 < 0 or a2 < 0:
        raise ValueError(f"dilation exponents ({a1}, {a2}) must be nonnegative")
    h = f.spacing
    outer = 1.0 + spec.glue_width

    # shared reference nodes: the rescaling preserves the total modulation,
    # so one cycle count serves both frames
    m = ell - j
    cycles = abs(v) * (outer * 2.0**m) ** 3 / (2.0 * math.pi)
    count = max(nodes, int(math.ceil(16.0 * cycles)))
    u = np.linspace(-outer, outer, count)
    du = u[1] - u[0]

    left = _aniso_project(f.data, h, h, 1, k1 + 2 * ell + j, spec)
    left = _aniso_project(left, h, h, 2, k2 + ell + 2 * j, spec)
    t = 2.0**m * u
    wl = amplitude_a(u, spec) * np.exp(1j * v * t**3) * du
    left = _circulant_apply(left, h, h, t, t * t, wl)

    h1 = 2.0**a1 * h
    h2 = 2.0**a2 * h
    right = _aniso_project(f.data, h1, h2, 1, k1, spec)
    right = _aniso_project(right, h1, h2, 2, k2, spec)
    scale_n = 2.0 ** (3 * ell)
    w_mod = v * 8.0 ** (-j)
    wr = amplitude_a(u, spec) * np.exp(1j * scale_n * w_mod * u**3) * du
    right = _circulant_apply(right, h1, h2, scale_n * u, scale_n * u * u, wr)

    ref = float(np.max(np.abs(left)))
    if ref == 0.0:
        return 0.0
    return float(np.max(np.abs(left - right))) / ref


# ---------------------------------------------------------------------------
# propagator slice


def propagator_slice(f: GridField, b: Branch, amp: np.ndarray, lam: float,
                     w: float) -> GridField:
    """Fixed-height slice of the branch-phase propagator.

    Multiplies the spectrum by exp(i lam phi_b(w/lam; xi, eta)) * amp and
    inverts; amp is sampled on f's FFT-ordered frequency lattice.  The
    branch phase is the cubic phase at its own critical point, which
    requires a positive discriminant everywhere amp is nonzero.
    """
    if amp.shape != f.data.shape:
        raise ValueError(f"amp shape {amp.shape} does not match grid {f.data.shape}")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    wp = w / lam
    if wp <= 0:
        raise ValueError(f"rescaled slice height w/lam must be positive, got {wp}")
    freqs = grid_frequencies(f.size, f.box)
    xi = freqs[:, None]
    eta = freqs[None, :]
    live = amp != 0.0
    delta = eta**2 + 3.0 * wp * xi
    bad = live & (delta <= 0.0)
    if np.any(bad):
        i, bcol = np.argwhere(bad)[0]
        raise ValueError(
            f"discriminant <= 0 on amp support at frequency "
            f"(xi={freqs[i]:.6g}, eta={freqs[bcol]:.6g})"
        )
    sign = 1.0 if b is Branch.PLUS else -1.0
    factor = np.zeros_like(amp, dtype=np.complex128)
    if np.any(live):
        root = (eta + sign * np.sqrt(np.where(live, delta, 1.0))) / (3.0 * wp)
        phase = -root * xi - root**2 * eta + wp * root**3
        factor[live] = np.exp(1j * lam * phase[live]) * amp[live]
    return transform_inverse(transform_forward(f) * factor, f.box)
