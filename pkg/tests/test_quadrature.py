"""Multiplier quadrature: trivial identities, cross-validated oracles, scaling."""

import math

import numpy as np
import pytest

from osclab.bumps import beta
from osclab.phase_geometry import Branch, NoRealRootsError, PhasePoint
from osclab.quadrature import (
    MultiplierQuery,
    QuadratureConfig,
    QuadratureToleranceError,
    multiplier_localized,
    multiplier_m,
    multiplier_reference,
    quadrature_refine,
    root_isolated_multiplier,
    stationary_phase_approx,
    sublevel_measure,
)

RNG_SEED = 20240817


def _fit_slope(x, y):
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def test_query_validation():
    with pytest.raises(ValueError):
        MultiplierQuery(n=-1, w=1.0, xi=0.0, eta=0.0)
    with pytest.raises(ValueError):
        MultiplierQuery(n=4, w=1.0, xi=0.0, eta=0.0, k2=0, ell=1, kappa=0.5)
    with pytest.raises(ValueError):
        MultiplierQuery(n=4, w=1.0, xi=0.0, eta=0.0, k1_leq=True)
    with pytest.raises(ValueError):
        MultiplierQuery(n=4, w=1.0, xi=0.0, eta=0.0, k2_leq=True)
    with pytest.raises(ValueError):
        MultiplierQuery(n=4, w=1.0, xi=0.0, eta=0.0, ell=1)
    MultiplierQuery(n=4, w=1.0, xi=0.0, eta=0.0, k2=0, kappa=0.5)


def test_evaluator_validation():
    with pytest.raises(ValueError):
        multiplier_m(-1, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        multiplier_m(3, 1.0, 0.0, 0.0, tol=0.0)
    with pytest.raises(ValueError):
        multiplier_m(3, 1.0, 0.0, 0.0, method="simpson")
    with pytest.raises(ValueError):
        quadrature_refine(lambda t: t, 0.0, 1.0, tol=-1.0)
    with pytest.raises(ValueError):
        quadrature_refine(lambda t: t, 1.0, 1.0, tol=1e-6)


def test_zero_amplitude_hook():
    r = multiplier_m(6, 1.0, 1.0, 1.0, amplitude=lambda t: np.zeros_like(t))
    assert r.value == 0.0
    assert r.abs_error_estimate == 0.0


def test_conjugate_reflection_symmetry():
    # substituting t -> -t flips eta and conjugates; the odd amplitude
    # contributes the sign
    r1 = multiplier_m(6, 1.0, 1.0, 1.0)
    r2 = multiplier_m(6, 1.0, 1.0, -1.0)
    assert abs(r1.value + np.conj(r2.value)) < 1e-9
    rng = np.random.default_rng(RNG_SEED)
    for _ in range(4):
        n = int(rng.integers(0, 9))
        w = float(rng.uniform(0.5, 2.0))
        xi = float(rng.uniform(-3.0, 3.0))
        eta = float(rng.uniform(-3.0, 3.0))
        a = multiplier_m(n, w, xi, eta)
        b = multiplier_m(n, w, xi, -eta)
        assert abs(a.value + np.conj(b.value)) < 1e-9


def test_spot_value_against_refine_oracle():
    main = multiplier_m(10, 1.0, 3.0, 0.0)
    oracle = multiplier_reference(10, 1.0, 3.0, 0.0, tol=1e-13, initial_panels=4096)
    assert abs(main.value - oracle.value) < 1e-9
    assert main.abs_error_estimate < 1e-10
    assert 0 < main.subdivisions
    assert 0 < oracle.subdivisions


def test_random_queries_against_refine_oracle():
    rng = np.random.default_rng(RNG_SEED + 1)
    for _ in range(100):
        n = int(rng.integers(0, 15))
        w = float(rng.uniform(0.5, 2.0))
        xi = float(rng.uniform(-4.0, 4.0))
        eta = float(rng.uniform(-4.0, 4.0))
        main = multiplier_m(n, w, xi, eta)
        oracle = multiplier_reference(n, w, xi, eta, tol=1e-13)
        assert abs(main.value - oracle.value) < 1e-9, (n, w, xi, eta)


def test_levin_matches_composite_when_stationary_free():
    # large |eta| with generic xi: no critical point inside the support
    a = multiplier_m(8, 1.0, 1.0, 2.0**8, method="composite", tol=1e-10)
    b = multiplier_m(8, 1.0, 1.0, 2.0**8, method="levin", tol=1e-12)
    assert abs(a.value - b.value) < 1e-10


def test_levin_rejects_interior_stationary_point():
    # xi = 3w - 2eta plants a critical point at t = 1
    with pytest.raises(ValueError):
        multiplier_m(8, 1.0, 3.0 - 2.0 * 2.0**8, 2.0**8, method="levin")


def test_auto_split_matches_composite_at_stationary_config():
    eta = 2.0**8
    xi = 3.0 - 2.0 * eta
    a = multiplier_m(8, 1.0, xi, eta, method="auto", tol=1e-11)
    b = multiplier_m(8, 1.0, xi, eta, method="composite", tol=1e-11)
    assert abs(a.value - b.value) < 1e-10
    # the split route must be doing far less brute-force work
    assert a.subdivisions < b.subdivisions


def test_localized_cutoff_short_circuits():
    # 2^0 * 8 lies outside the annulus cutoff support
    q = MultiplierQuery(n=10, w=1.0, xi=8.0, eta=1.0, k1=0, k2=0)
    r = multiplier_localized(q)
    assert r.value == 0.0
    assert r.subdivisions == 0


def test_localized_discriminant_window():
    # delta = eta^2 + 3 w xi = 4; ell = k2 scales it by 2^0, and beta(4) = 0
    q = MultiplierQuery(n=6, w=1.0, xi=1.0, eta=1.0, k2=0, ell=0)
    assert multiplier_localized(q).value == 0.0
    # shift ell so the window sees delta/16 = 0.25, still outside supp beta
    q = MultiplierQuery(n=6, w=1.0, xi=1.0, eta=1.0, k2=1, ell=0)
    assert multiplier_localized(q).value == 0.0


def test_localized_is_cutoff_times_base():
    base = multiplier_m(10, 1.0, 1.0, 1.0)
    q = MultiplierQuery(n=10, w=1.0, xi=1.0, eta=1.0, k1=0, k2=0)
    r = multiplier_localized(q)
    want = float(beta(1.0)) ** 2 * base.value
    assert abs(r.value - want) <= 1e-12 + 1e-9 * abs(want)
    # fractional cutoff value
    q = MultiplierQuery(n=10, w=1.0, xi=1.2, eta=1.0, k1=0, k2=0, k2_leq=True)
    r = multiplier_localized(q)
    base = multiplier_m(10, 1.0, 1.2, 1.0)
    want = float(beta(1.2)) * base.value  # beta0(1.0) = 1
    assert abs(r.value - want) <= 1e-12 + 1e-9 * abs(want)


def test_stationary_phase_modulus_spot():
    p = PhasePoint(1.0, 3.0, 0.0)
    got = abs(stationary_phase_approx(12, p, Branch.PLUS))
    want = math.sqrt(2.0 * math.pi) * 2.0**-6 / math.sqrt(6.0)
    assert got == pytest.approx(want, rel=1e-12)


def test_stationary_phase_error_cases():
    with pytest.raises(NoRealRootsError):
        stationary_phase_approx(8, PhasePoint(1.0, -3.0, 0.0), Branch.PLUS)
    # roots 3.0 and 0.3: the plus root sits outside the amplitude support
    p = PhasePoint(1.0, -2.7, 4.95)
    with pytest.raises(ValueError):
        stationary_phase_approx(8, p, Branch.PLUS)
    with pytest.raises(ValueError):
        root_isolated_multiplier(8, p, Branch.PLUS)


def test_stationary_phase_against_isolated_quadrature():
    p = PhasePoint(1.0, 3.0, 0.0)
    sp = stationary_phase_approx(12, p, Branch.PLUS)
    iso = root_isolated_multiplier(12, p, Branch.PLUS, tol=1e-13)
    assert abs(sp - iso.value) / abs(iso.value) < 1e-2


def test_stationary_phase_convergence_slope():
    # leading-order error should shrink like 2^-n; require slope <= -0.8
    p = PhasePoint(2.0, -4.32, 5.4)  # roots 0.6 and 1.2, delta = 3.24
    ns = range(8, 19)
    errs = []
    for n in ns:
        sp = stationary_phase_approx(n, p, Branch.PLUS)
        iso = root_isolated_multiplier(n, p, Branch.PLUS, tol=1e-12)
        errs.append(abs(sp - iso.value) / abs(iso.value))
    slope = _fit_slope(list(ns), np.log2(errs))
    assert slope <= -0.8, (slope, errs)


def test_isolation_window_kinds():
    p = PhasePoint(1.0, 3.0, 0.0)
    sep = root_isolated_multiplier(14, p, Branch.PLUS, tol=1e-13)
    curv = root_isolated_multiplier(14, p, Branch.PLUS, tol=1e-13, window="curvature")
    # both windows capture the same stationary lobe; tails are smooth-cutoff
    # small at this frequency
    assert abs(sep.value - curv.value) / abs(sep.value) < 1e-4
    with pytest.raises(ValueError):
        root_isolated_multiplier(14, p, Branch.PLUS, window="boxcar")


def test_quadrature_refine_trivials():
    one = quadrature_refine(lambda t: np.ones_like(t), 0.0, 1.0, 1e-12)
    assert one.value == pytest.approx(1.0, abs=1e-12)
    circle = quadrature_refine(lambda t: np.exp(1j * t), 0.0, 2.0 * math.pi, 1e-12)
    assert abs(circle.value) < 1e-12


def test_cubic_exponential_cross_rule():
    # same integral through the two independent rules
    f = lambda t: np.exp(1j * 2.0**10 * t**3)
    fine = quadrature_refine(f, 0.5, 2.0, 1e-10)
    other = multiplier_m(
        10, 1.0, 0.0, 0.0, tol=1e-10, amplitude=lambda t: np.ones_like(t),
        intervals=[(0.5, 2.0)], method="composite",
    )
    assert abs(fine.value - other.value) < 1e-9


def test_tolerance_failure_carries_best_value():
    cfg = QuadratureConfig(panel_cap=64)
    with pytest.raises(QuadratureToleranceError) as info:
        multiplier_m(12, 1.0, 3.0, 0.0, tol=1e-16, config=cfg, method="composite")
    best = info.value.result
    assert best.subdivisions <= 64
    assert math.isfinite(best.abs_error_estimate)
    # at such a starved budget the estimate must admit the value is rough
    assert best.abs_error_estimate > 1e-16

    with pytest.raises(QuadratureToleranceError):
        quadrature_refine(lambda t: np.exp(1j * 2.0**14 * t**3), 0.5, 2.0, 1e-12,
                          initial_panels=4, panel_cap=32)


def test_sublevel_trivial_cases():
    assert sublevel_measure((0.0, 0.0, 0.0), 0.5, samples=10**6) == 0.0
    got = sublevel_measure((0.0, 0.0, 1.0), 1e-3, samples=10**7)
    want = 1.0 - (1.0 - 1e-3) ** (1.0 / 3.0)
    assert got == pytest.approx(want, abs=5e-7)
    got = sublevel_measure((3.0, -3.0, 1.0), 1e-3, samples=10**7)
    assert got == pytest.approx(0.1, abs=5e-7)
    with pytest.raises(ValueError):
        sublevel_measure((0.0, 0.0, 1.0), 0.0)


def test_sublevel_cube_root_scaling_smoke():
    sigmas = [1e-5, 1e-4, 1e-3]
    vals = [sublevel_measure((3.0, -3.0, 1.0), s, samples=2 * 10**6) for s in sigmas]
    slope = _fit_slope(np.log10(sigmas), np.log10(vals))
    assert slope == pytest.approx(1.0 / 3.0, abs=0.02)


def test_sublevel_determinism():
    a = sublevel_measure((3.0, -3.0, 1.0), 1e-4, samples=10**6)
    b = sublevel_measure((3.0, -3.0, 1.0), 1e-4, samples=10**6)
    assert a == b
