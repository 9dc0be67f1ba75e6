"""Batch front end: subcommand dispatch, run configuration, CSV and SVG artifacts.

Subcommands
-----------
verify-identities   closed-form identity suite against finite-difference oracles
eval-multiplier     one multiplier value at a chosen frequency point
apply-operator      apply a localized multiplier to a stored grid field
decay-fit           power-law fit of a (scale, value) series read from CSV
verify              lemma-style verification reports (``--lemma <name>``)
sublevel            cubic sublevel-set measure sweep over sigma
maximal-experiment  grid norms of the modulated maximal pieces
dump-bumps          sample the cutoff functions onto a CSV table

Exit codes: 0 on PASS/success, 1 on FAIL, 2 on usage errors (bad flags,
bad parameter values, unreadable inputs).

Config files
------------
Line-oriented ``key = value`` with ``[section]`` headers; ``#`` starts a
comment.  Sections and keys:

    [tolerances]   identity_rel, identity_refined, flat, quadrature (all > 0)
    [grid]         n (power of two), box
    [constants]    c1, c2, c_star, kappa   (c1 = 2*c2 + 12)
    [run]          seed, output_dir

Command-line flags override file values.  The effective configuration is
hashed into every CSV so artifacts can be traced to the run that made them.

CSV files start with a header row, followed by ``#``-prefixed metadata
lines (config hash, seed), then data rows.  Floats are written with
``repr`` so identical configurations produce byte-identical files.

Plots are a deliberately small SVG subset: ``rect``, ``line``, ``circle``,
``text`` and nothing else, no external references, so the files render
anywhere and diff cleanly.
"""

import argparse
import hashlib
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .bumps import amplitude_a, beta, beta0, beta_tilde, smoothstep
from .decay import (
    DecayFit,
    domination_report,
    fit_decay,
    maximal_cl_experiment,
    verify_nonstationary,
    verify_vdc,
)
from .grid_ops import (
    GridField,
    apply_multiplier_operator,
    field_norm2,
    gaussian_field,
    read_field,
    write_field,
)
from .phase_geometry import (
    exceptional_curvature,
    exceptional_curvature_fd,
    flat_hessian_check_batch,
    hessian_det,
    hessian_det_fd_batch,
    nikodym_det,
    nikodym_det_fd_batch,
    sample_phase_points,
)
from .quadrature import (
    MultiplierQuery,
    QuadratureToleranceError,
    multiplier_localized,
    multiplier_m,
    sublevel_measure,
)

__all__ = [
    "RunConfig",
    "DEFAULT_TOLERANCES",
    "parse_config_file",
    "config_hash",
    "emit_plot",
    "dispatch",
    "main",
]

DEFAULT_TOLERANCES: Dict[str, float] = {
    "identity_rel": 1e-3,
    "identity_refined": 1e-6,
    "flat": 1e-6,
    "quadrature": 1e-10,
}


@dataclass(frozen=True)
class RunConfig:
    """Effective run configuration shared by every subcommand."""

    tolerances: Mapping[str, float]
    grid: Tuple[int, float]
    constants: Tuple[int, int, float, float]
    seed: int
    output_dir: Path

    def __post_init__(self):
        c1, c2 = int(self.constants[0]), int(self.constants[1])
        if c1 != 2 * c2 + 12:
            raise ValueError(f"constants must satisfy C1 = 2*C2 + 12, got ({c1}, {c2})")
        n = int(self.grid[0])
        if n <= 0 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two, got {n}")
        if not (float(self.grid[1]) > 0):
            raise ValueError("grid box must be positive")
        for name, tol in self.tolerances.items():
            if not (float(tol) > 0):
                raise ValueError(f"tolerance {name!r} must be positive, got {tol}")
        object.__setattr__(self, "tolerances", dict(self.tolerances))
        object.__setattr__(self, "grid", (n, float(self.grid[1])))
        object.__setattr__(
            self,
            "constants",
            (c1, c2, float(self.constants[2]), float(self.constants[3])),
        )
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "output_dir", Path(self.output_dir))


def _default_config() -> RunConfig:
    out = os.environ.get("OSC_OUTPUT_DIR", ".")
    return RunConfig(
        tolerances=dict(DEFAULT_TOLERANCES),
        grid=(512, 64.0),
        constants=(12, 0, 8.0, 0.05),
        seed=20240817,
        output_dir=Path(out),
    )


def parse_config_file(path) -> Dict[str, Dict[str, str]]:
    """Parse the documented key=value format into {section: {key: value}}."""
    sections: Dict[str, Dict[str, str]] = {}
    current: Optional[str] = None
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in ("tolerances", "grid", "constants", "run"):
                raise ValueError(f"{path}:{lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        if current is None:
            raise ValueError(f"{path}:{lineno}: key outside any [section]")
        key, value = (part.strip() for part in line.split("=", 1))
        sections[current][key.lower()] = value
    return sections


def _config_from_args(args) -> RunConfig:
    base = _default_config()
    tolerances = dict(base.tolerances)
    grid = base.grid
    constants = base.constants
    seed = base.seed
    output_dir = base.output_dir

    if getattr(args, "config", None):
        sections = parse_config_file(args.config)
        for key, value in sections.get("tolerances", {}).items():
            tolerances[key] = float(value)
        g = sections.get("grid", {})
        grid = (int(g.get("n", grid[0])), float(g.get("box", grid[1])))
        c = sections.get("constants", {})
        constants = (
            int(c.get("c1", constants[0])),
            int(c.get("c2", constants[1])),
            float(c.get("c_star", constants[2])),
            float(c.get("kappa", constants[3])),
        )
        run = sections.get("run", {})
        seed = int(run.get("seed", seed))
        output_dir = Path(run.get("output_dir", output_dir))

    for item in getattr(args, "tol", None) or []:
        if "=" not in item:
            raise ValueError(f"--tol expects name=value, got {item!r}")
        name, value = item.split("=", 1)
        tolerances[name.strip()] = float(value)
    if getattr(args, "grid", None):
        n_str, box_str = _split_pair(args.grid, "--grid")
        grid = (int(n_str), float(box_str))
    if getattr(args, "constants", None):
        parts = [p.strip() for p in args.constants.split(",")]
        if len(parts) != 4:
            raise ValueError("--constants expects C1,C2,C_star,kappa")
        constants = (int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]))
    if getattr(args, "seed", None) is not None:
        seed = int(args.seed)
    if getattr(args, "output_dir", None):
        output_dir = Path(args.output_dir)

    return RunConfig(tolerances, grid, constants, seed, output_dir)


def _split_pair(text: str, flag: str) -> Tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"{flag} expects two comma-separated values, got {text!r}")
    return parts[0], parts[1]


def config_hash(cfg: RunConfig) -> str:
    """Deterministic 12-hex digest of the effective configuration."""
    lines = [f"tolerances.{k}={float(v)!r}" for k, v in sorted(cfg.tolerances.items())]
    lines.append(f"grid={cfg.grid[0]},{cfg.grid[1]!r}")
    c1, c2, c_star, kappa = cfg.constants
    lines.append(f"constants={c1},{c2},{c_star!r},{kappa!r}")
    lines.append(f"seed={cfg.seed}")
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    return digest[:12]


# ---------------------------------------------------------------------------
# artifact writers


def _fmt_cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows, cfg: RunConfig,
               extra_meta: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.append(f"# config {config_hash(cfg)}")
    lines.append(f"# seed {cfg.seed}")
    for meta in extra_meta:
        lines.append(f"# {meta}")
    for row in rows:
        lines.append(",".join(_fmt_cell(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_series_csv(path) -> list:
    """Read (scale, value) pairs from a CSV, skipping metadata and header."""
    pairs = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) < 2:
            raise ValueError(f"need at least two columns, got {raw!r}")
        try:
            pairs.append((float(cells[0]), float(cells[1])))
        except ValueError:
            if pairs:
                raise ValueError(f"non-numeric row after data started: {raw!r}")
            continue  # header row
    if not pairs:
        raise ValueError(f"no data rows found in {path}")
    return pairs


# ---------------------------------------------------------------------------
# SVG emission

_SVG_W, _SVG_H = 640, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 72, 24, 24, 56


def _axis_ticks(lo: float, hi: float, log: bool) -> list:
    if log:
        decades = range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1)
        ticks = [(float(d), f"1e{d}") for d in decades]
        if len(ticks) >= 2:
            return ticks
    return [(t, f"{10.0**t:.2g}" if log else f"{t:.3g}")
            for t in np.linspace(lo, hi, 4)]


def emit_plot(series, style: str = "loglog", path=None) -> Path:
    """Write a (scale, value) series as a self-contained SVG scatter plot.

    In the default log-log style, nonpositive values are dropped and, when
    at least four positive points remain, the least-squares power law is
    drawn with its slope annotated.  The annotation repeats DecayFit's
    slope exactly, so plots can be checked against fit records.
    """
    if style not in ("loglog", "linear"):
        raise ValueError(f"unknown plot style {style!r}")
    if path is None:
        raise ValueError("emit_plot needs an output path")
    pts = [(float(s), float(v)) for s, v in series]
    if not pts:
        raise ValueError("series is empty")

    fit: Optional[DecayFit] = None
    if style == "loglog":
        pts = [(s, v) for s, v in pts if s > 0 and v > 0]
        if not pts:
            raise ValueError("log-log plot needs positive points")
        if len(pts) >= 4:
            fit = fit_decay(pts)
        xs = [math.log10(s) for s, _ in pts]
        ys = [math.log10(v) for _, v in pts]
    else:
        xs = [s for s, _ in pts]
        ys = [v for _, v in pts]

    def _padded(vals):
        lo, hi = min(vals), max(vals)
        pad = 0.06 * (hi - lo) if hi > lo else 0.5
        return lo - pad, hi + pad

    x_lo, x_hi = _padded(xs)
    y_lo, y_hi = _padded(ys)
    plot_w = _SVG_W - _MARGIN_L - _MARGIN_R
    plot_h = _SVG_H - _MARGIN_T - _MARGIN_B

    def px(x: float) -> float:
        return _MARGIN_L + plot_w * (x - x_lo) / (x_hi - x_lo)

    def py(y: float) -> float:
        return _MARGIN_T + plot_h * (y_hi - y) / (y_hi - y_lo)

    log = style == "loglog"
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black"/>',
    ]
    for tx, label in _axis_ticks(x_lo, x_hi, log):
        x = px(tx)
        parts.append(f'<line x1="{x:.2f}" y1="{_MARGIN_T}" x2="{x:.2f}" '
                     f'y2="{_MARGIN_T + plot_h}" stroke="#dddddd"/>')
        parts.append(f'<text x="{x:.2f}" y="{_MARGIN_T + plot_h + 18}" '
                     f'font-family="monospace" font-size="12" '
                     f'text-anchor="middle">{label}</text>')
    for ty, label in _axis_ticks(y_lo, y_hi, log):
        y = py(ty)
        parts.append(f'<line x1="{_MARGIN_L}" y1="{y:.2f}" '
                     f'x2="{_MARGIN_L + plot_w}" y2="{y:.2f}" stroke="#dddddd"/>')
        parts.append(f'<text x="{_MARGIN_L - 6}" y="{y + 4:.2f}" '
                     f'font-family="monospace" font-size="12" '
                     f'text-anchor="end">{label}</text>')
    if fit is not None:
        # DecayFit lives in log2 coordinates; rescale to the log10 axes
        c = math.log10(2.0)
        y1 = fit.slope * x_lo + fit.intercept * c
        y2 = fit.slope * x_hi + fit.intercept * c
        parts.append(f'<line x1="{px(x_lo):.2f}" y1="{py(y1):.2f}" '
                     f'x2="{px(x_hi):.2f}" y2="{py(y2):.2f}" '
                     f'stroke="#d62728" stroke-dasharray="6,4"/>')
        parts.append(f'<text x="{_SVG_W - _MARGIN_R - 6}" y="{_MARGIN_T + 16}" '
                     f'font-family="monospace" font-size="13" '
                     f'text-anchor="end">slope = {fit.slope:.6g}</text>')
    for x, y in zip(xs, ys):
        parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4" '
                     f'fill="#1f77b4"/>')
    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_SVG_H - 14}" '
                 f'font-family="monospace" font-size="13" '
                 f'text-anchor="middle">scale</text>')
    parts.append(f'<text x="18" y="{_MARGIN_T + plot_h / 2:.2f}" '
                 f'font-family="monospace" font-size="13" text-anchor="middle" '
                 f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.2f})">'
                 f'value</text>')
    parts.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path


# ---------------------------------------------------------------------------
# subcommands


def _out_path(cfg: RunConfig, override, default_name: str) -> Path:
    return Path(override) if override else cfg.output_dir / default_name


def _cmd_verify_identities(args, cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    pairs = sample_phase_points(rng, args.samples, xi_min=0.05)
    points = [p for p, _ in pairs]
    branches = [b for _, b in pairs]
    closed_h = np.array([hessian_det(p, b) for p, b in pairs])
    closed_n = np.array([nikodym_det(p, b) for p, b in pairs])
    rel_h = np.abs(hessian_det_fd_batch(points, branches, levels=1) - closed_h) / np.abs(closed_h)
    rel_h_fine = np.abs(hessian_det_fd_batch(points, branches, levels=2) - closed_h) / np.abs(closed_h)
    rel_n = np.abs(nikodym_det_fd_batch(points, branches, levels=1) - closed_n) / np.abs(closed_n)
    rel_n_fine = np.abs(nikodym_det_fd_batch(points, branches, levels=2) - closed_n) / np.abs(closed_n)
    flat = np.abs(flat_hessian_check_batch(points, branches))

    # curvature check on an independent (s, w) draw per sample
    s_vals = rng.uniform(0.2, 4.0, args.samples) * rng.choice([-1.0, 1.0], args.samples)
    w_vals = rng.uniform(0.5, 8.0, args.samples)
    rel_c = np.empty(args.samples)
    for i, (s, w) in enumerate(zip(s_vals, w_vals)):
        ref = exceptional_curvature(s, w)
        rel_c[i] = abs(exceptional_curvature_fd(s, w) - ref) / abs(ref)

    header = ["w", "xi", "eta", "branch", "hessian_rel", "hessian_rel_refined",
              "nikodym_rel", "nikodym_rel_refined", "flat_abs", "curvature_rel"]
    rows = [
        (p.w, p.xi, p.eta, "+" if b.sign > 0 else "-",
         rel_h[i], rel_h_fine[i], rel_n[i], rel_n_fine[i], flat[i], rel_c[i])
        for i, (p, b) in enumerate(pairs)
    ]
    csv_path = _write_csv(_out_path(cfg, args.csv, "identities.csv"),
                          header, rows, cfg,
                          extra_meta=[f"samples {args.samples}"])

    tol = cfg.tolerances
    checks = [
        ("hessian_det", float(np.max(rel_h)), tol["identity_rel"]),
        ("hessian_det_refined", float(np.max(rel_h_fine)), tol["identity_refined"]),
        ("nikodym_det", float(np.max(rel_n)), tol["identity_rel"]),
        ("nikodym_det_refined", float(np.max(rel_n_fine)), tol["identity_refined"]),
        ("exceptional_curvature", float(np.max(rel_c)), tol["identity_rel"]),
        ("flat_hessian", float(np.max(flat)), tol["flat"]),
    ]
    all_ok = True
    for name, worst, bound in checks:
        verdict = "PASS" if worst < bound else "FAIL"
        all_ok = all_ok and worst < bound
        print(f"IDENTITY {name} max_err={worst:.3e} tol={bound:.0e} {verdict}")
    print(f"wrote {csv_path}")
    return 0 if all_ok else 1


def _multiplier_query_from_args(args) -> Optional[MultiplierQuery]:
    localized = any(
        getattr(args, name, None) is not None
        for name in ("k1", "k2", "ell", "kappa")
    ) or args.k1_leq or args.k2_leq
    if not localized:
        return None
    return MultiplierQuery(
        n=args.n, w=args.w, xi=args.xi, eta=args.eta,
        k1=args.k1, k2=args.k2, k1_leq=args.k1_leq, k2_leq=args.k2_leq,
        ell=args.ell, kappa=args.kappa,
    )


def _cmd_eval_multiplier(args, cfg: RunConfig) -> int:
    tol = cfg.tolerances["quadrature"]
    q = _multiplier_query_from_args(args)
    if q is None:
        res = multiplier_m(args.n, args.w, args.xi, args.eta, tol=tol)
    else:
        res = multiplier_localized(q, tol=tol)
    header = ["n", "w", "xi", "eta", "k1", "k2", "ell", "kappa",
              "real", "imag", "abs", "err_estimate"]
    row = (args.n, args.w, args.xi, args.eta,
           "" if args.k1 is None else args.k1,
           "" if args.k2 is None else args.k2,
           "" if args.ell is None else args.ell,
           "" if args.kappa is None else args.kappa,
           res.value.real, res.value.imag, abs(res.value),
           res.abs_error_estimate)
    csv_path = _write_csv(_out_path(cfg, args.csv, "multiplier.csv"),
                          header, [row], cfg)
    print(f"m = {res.value.real!r} + {res.value.imag!r}j  "
          f"|m| = {abs(res.value):.6e}  err <= {res.abs_error_estimate:.2e}")
    print(f"wrote {csv_path}")
    return 0


def _cmd_apply_operator(args, cfg: RunConfig) -> int:
    f = read_field(args.input)
    q = _multiplier_query_from_args(args)
    if q is None:
        q = MultiplierQuery(n=args.n, w=args.w, xi=0.0, eta=0.0)
    out = apply_multiplier_operator(f, q, tol=cfg.tolerances["quadrature"])
    write_field(args.output, out)
    print(f"input  L2 = {field_norm2(f):.6e}")
    print(f"output L2 = {field_norm2(out):.6e}")
    print(f"wrote {args.output}")
    return 0


def _cmd_decay_fit(args, cfg: RunConfig) -> int:
    series = read_series_csv(args.input)
    fit = fit_decay([(s, v) for s, v in series if v > 0])
    print(f"FIT slope={fit.slope:.6f} intercept={fit.intercept:.6f} "
          f"r2={fit.r_squared:.6f} points={len(series)}")
    if args.plot:
        print(f"wrote {emit_plot(series, 'loglog', args.plot)}")
    return 0


def _parse_set_value(text: str):
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "," in text:
        return tuple(_parse_set_value(part) for part in text.split(","))
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _collect_params(args) -> dict:
    params = {}
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = _parse_set_value(value.strip())
    return params


def _cmd_verify(args, cfg: RunConfig) -> int:
    params = _collect_params(args)
    if args.lemma == "nonstationary":
        c1, c2 = cfg.constants[0], cfg.constants[1]
        k1 = params.pop("k1", 9)
        k2 = params.pop("k2", 0)
        report = verify_nonstationary(k1, k2, C1=c1, C2=c2, **params)
        series = report.series
    elif args.lemma == "domination":
        n, box = cfg.grid
        f = gaussian_field(n, box, params.pop("sigma", box / 16.0))
        f = GridField(np.abs(f.data), box)
        report = domination_report(f, **params)
        series = [(1.0, report.max_ratio), (2.0, report.refined_ratio)]
    else:
        report = verify_vdc(args.lemma, **params)
        series = report.series
    csv_path = _write_csv(
        _out_path(cfg, args.csv, f"verify_{args.lemma}.csv"),
        ["scale", "value"], series, cfg,
        extra_meta=[f"lemma {args.lemma}"],
    )
    print(report.summary())
    print(f"wrote {csv_path}")
    if args.plot:
        print(f"wrote {emit_plot(series, 'loglog', args.plot)}")
    return 0 if report.passed else 1


def _parse_sweep(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"--sigma-sweep expects lo:hi[:points], got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    num = int(parts[2]) if len(parts) == 3 else 5
    if not (0 < lo < hi) or num < 2:
        raise ValueError(f"bad sweep range {text!r}")
    return np.geomspace(lo, hi, num)


def _cmd_sublevel(args, cfg: RunConfig) -> int:
    mu = tuple(float(p) for p in args.mu.split(","))
    if len(mu) != 3:
        raise ValueError(f"--mu expects three comma-separated reals, got {args.mu!r}")
    sigmas = _parse_sweep(args.sigma_sweep)
    series = [(float(s), sublevel_measure(mu, float(s), samples=args.samples))
              for s in sigmas]
    csv_path = _write_csv(_out_path(cfg, args.csv, "sublevel.csv"),
                          ["sigma", "measure"], series, cfg,
                          extra_meta=[f"mu {args.mu}", f"samples {args.samples}"])
    positive = [(s, v) for s, v in series if v > 0]
    if len(positive) >= 4:
        fit = fit_decay(positive)
        print(f"SUBLEVEL mu=({args.mu}) slope={fit.slope:.4f} r2={fit.r_squared:.4f}")
    else:
        print(f"SUBLEVEL mu=({args.mu}) too few positive measures to fit")
    print(f"wrote {csv_path}")
    if args.plot:
        print(f"wrote {emit_plot(series, 'loglog', args.plot)}")
    return 0


def _cmd_maximal_experiment(args, cfg: RunConfig) -> int:
    if args.input:
        f = read_field(args.input)
        f = GridField(np.abs(f.data), f.box)
    else:
        n, box = cfg.grid
        f = gaussian_field(n, box, args.sigma)
        f = GridField(np.abs(f.data), box)
    ell_values = tuple(int(e) for e in args.ell_values.split(","))
    j_window = tuple(int(j) for j in args.j_window.split(","))
    series, fit = maximal_cl_experiment(
        f, ell_values=ell_values, j_window=j_window,
        v_points=args.v_points, p=args.p,
    )
    csv_path = _write_csv(_out_path(cfg, args.csv, "maximal_cl.csv"),
                          ["scale", "norm"], series, cfg,
                          extra_meta=[f"ell {args.ell_values}",
                                      f"j {args.j_window}",
                                      f"v_points {args.v_points}"])
    if fit is None:
        print("CL series degenerate: no positive norms to fit")
    else:
        print(f"CL slope={fit.slope:.4f} r2={fit.r_squared:.4f} "
              f"(exploratory, recorded)")
    print(f"wrote {csv_path}")
    if args.plot:
        print(f"wrote {emit_plot(series, 'loglog', args.plot)}")
    return 0


def _cmd_dump_bumps(args, cfg: RunConfig) -> int:
    lo_str, hi_str = args.range.split(":")
    lo, hi = float(lo_str), float(hi_str)
    if not (lo < hi) or args.points < 2:
        raise ValueError(f"bad sample range {args.range!r}")
    ts = np.linspace(lo, hi, args.points)
    rows = [
        (t, smoothstep(t), beta0(t), beta(t), beta_tilde(t), amplitude_a(t))
        for t in ts
    ]
    csv_path = _write_csv(_out_path(cfg, args.csv, "bumps.csv"),
                          ["t", "smoothstep", "beta0", "beta", "beta_tilde",
                           "amplitude"],
                          rows, cfg, extra_meta=[f"range {args.range}"])
    print(f"wrote {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# parser and dispatch


def _add_common(sub):
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--output-dir", help="artifact directory "
                     "(default $OSC_OUTPUT_DIR or .)")
    sub.add_argument("--seed", type=int, help="RNG seed override")
    sub.add_argument("--grid", help="grid as N,box")
    sub.add_argument("--constants", help="C1,C2,C_star,kappa")
    sub.add_argument("--tol", action="append", metavar="NAME=VALUE",
                     help="tolerance override, repeatable")


def _add_csv(sub):
    sub.add_argument("--csv", help="CSV output path override")


def _add_multiplier_point(sub):
    sub.add_argument("--n", type=int, required=True, help="dyadic scale exponent")
    sub.add_argument("--w", type=float, default=1.0)
    sub.add_argument("--xi", type=float, default=0.0)
    sub.add_argument("--eta", type=float, default=0.0)
    sub.add_argument("--k1", type=int, default=None)
    sub.add_argument("--k2", type=int, default=None)
    sub.add_argument("--k1-leq", action="store_true")
    sub.add_argument("--k2-leq", action="store_true")
    sub.add_argument("--ell", type=int, default=None)
    sub.add_argument("--kappa", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="osclab",
        description="oscillatory-multiplier laboratory batch front end",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("verify-identities",
                          help="closed forms against finite-difference oracles")
    _add_common(sub)
    _add_csv(sub)
    sub.add_argument("--samples", type=int, default=1000)
    sub.set_defaults(func=_cmd_verify_identities)

    sub = subs.add_parser("eval-multiplier", help="one multiplier value")
    _add_common(sub)
    _add_csv(sub)
    _add_multiplier_point(sub)
    sub.set_defaults(func=_cmd_eval_multiplier)

    sub = subs.add_parser("apply-operator",
                          help="apply a multiplier to a stored field")
    _add_common(sub)
    _add_multiplier_point(sub)
    sub.add_argument("--input", required=True, help="binary field file")
    sub.add_argument("--output", required=True, help="binary field file")
    sub.set_defaults(func=_cmd_apply_operator)

    sub = subs.add_parser("decay-fit", help="fit a stored (scale, value) series")
    _add_common(sub)
    sub.add_argument("--input", required=True, help="two-column CSV")
    sub.add_argument("--plot", help="SVG output path")
    sub.set_defaults(func=_cmd_decay_fit)

    sub = subs.add_parser("verify", help="lemma verification reports")
    _add_common(sub)
    _add_csv(sub)
    sub.add_argument("--lemma", required=True,
                     choices=["vdc1", "vdc2_i", "vdc2_ii", "mult_dec_ell",
                              "nonstationary", "domination"])
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="parameter override passed to the verifier, repeatable")
    sub.add_argument("--plot", help="SVG output path")
    sub.set_defaults(func=_cmd_verify)

    sub = subs.add_parser("sublevel", help="cubic sublevel measure sweep")
    _add_common(sub)
    _add_csv(sub)
    sub.add_argument("--mu", required=True, help="three reals: a,b,c")
    sub.add_argument("--sigma-sweep", required=True, help="lo:hi[:points]")
    sub.add_argument("--samples", type=int, default=2_000_000)
    sub.add_argument("--plot", help="SVG output path")
    sub.set_defaults(func=_cmd_sublevel)

    sub = subs.add_parser("maximal-experiment",
                          help="modulated maximal-piece grid norms")
    _add_common(sub)
    _add_csv(sub)
    sub.add_argument("--input", help="binary field file (default: Gaussian)")
    sub.add_argument("--sigma", type=float, default=3.0,
                     help="Gaussian width when no input field is given")
    sub.add_argument("--ell-values", default="1,2,3,4")
    sub.add_argument("--j-window", default="0")
    sub.add_argument("--v-points", type=int, default=9)
    sub.add_argument("--p", type=float, default=2.0)
    sub.add_argument("--plot", help="SVG output path")
    sub.set_defaults(func=_cmd_maximal_experiment)

    sub = subs.add_parser("dump-bumps", help="sample the cutoff functions")
    _add_common(sub)
    _add_csv(sub)
    sub.add_argument("--points", type=int, default=2048)
    sub.add_argument("--range", default="-2.5:2.5", help="lo:hi")
    sub.set_defaults(func=_cmd_dump_bumps)

    return parser


def dispatch(argv=None) -> int:
    """Parse argv and run one subcommand; returns the process exit code.

    0 on PASS/success, 1 on FAIL or a quadrature tolerance failure, 2 on
    usage errors, including bad parameter values rejected by the library.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return int(exc.code or 0)
    try:
        cfg = _config_from_args(args)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args, cfg)
    except QuadratureToleranceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
