import math

import numpy as np
import pytest

from osclab import _dd
from osclab.phase_geometry import (
    AmplitudeClassSpec,
    Branch,
    DegenerateRootsError,
    NoRealRootsError,
    PhasePoint,
    amplitude_class_check,
    branch_root,
    critical_points,
    discriminant,
    exceptional_curvature,
    exceptional_curvature_fd,
    fd_oracle_derivative,
    flat_hessian_check,
    flat_hessian_check_batch,
    hessian_det,
    hessian_det_fd,
    hessian_det_fd_batch,
    nikodym_det,
    nikodym_det_fd,
    nikodym_det_fd_batch,
    phase,
    phase_derivs,
    phi_branch,
    phi_branch_grad,
    sample_phase_points,
)

RNG_SEED = 20240816


def _sample(n, **kw):
    rng = np.random.default_rng(RNG_SEED)
    return sample_phase_points(rng, n, xi_min=kw.pop("xi_min", 0.05), **kw)


# ---------------------------------------------------------------------------
# closed-form geometry


def test_spot_values_exact():
    p = PhasePoint(w=1.0, xi=3.0, eta=0.0)
    assert hessian_det(p, Branch.PLUS) == pytest.approx(-1.0 / 36.0, rel=1e-12)
    assert nikodym_det(p, Branch.PLUS) == pytest.approx(-1.0 / 144.0, rel=1e-12)
    assert exceptional_curvature(1.0, 1.0) == pytest.approx(16.0 / 9.0, rel=1e-12)


def test_criticality_and_vieta():
    for p, b in _sample(200):
        crit = critical_points(p)
        for t in (crit.t_plus, crit.t_minus):
            d1, _, _ = phase_derivs(t, p)
            assert abs(d1) < 1e-9 * max(1.0, abs(p.xi) + abs(p.eta) + abs(p.w))
        assert 3.0 * p.w * crit.t_plus * crit.t_minus == pytest.approx(-p.xi, rel=1e-9, abs=1e-9)
        assert 3.0 * p.w * (crit.t_plus + crit.t_minus) == pytest.approx(2.0 * p.eta, rel=1e-9, abs=1e-9)


def test_second_derivative_at_roots():
    for p, b in _sample(100):
        crit = critical_points(p)
        root_delta = math.sqrt(crit.delta)
        _, d2_plus, _ = phase_derivs(crit.t_plus, p)
        _, d2_minus, _ = phase_derivs(crit.t_minus, p)
        assert d2_plus == pytest.approx(2.0 * root_delta, rel=1e-8)
        assert d2_minus == pytest.approx(-2.0 * root_delta, rel=1e-8)


def test_branch_phase_and_gradient():
    for p, b in _sample(100):
        t = branch_root(p, b)
        assert phi_branch(p, b) == pytest.approx(phase(t, p), rel=1e-12, abs=1e-12)
        g = phi_branch_grad(p, b)
        assert g[0] == pytest.approx(-t, rel=1e-10, abs=1e-12)
        assert g[1] == pytest.approx(-t * t, rel=1e-10, abs=1e-12)
        assert g[2] == pytest.approx(t**3, rel=1e-10, abs=1e-12)


def test_degenerate_inputs_raise():
    with pytest.raises(ValueError):
        critical_points(PhasePoint(w=0.0, xi=1.0, eta=1.0))
    with pytest.raises(NoRealRootsError):
        critical_points(PhasePoint(w=1.0, xi=-10.0, eta=1.0))
    with pytest.raises(DegenerateRootsError):
        phi_branch_grad(PhasePoint(w=1.0, xi=0.0, eta=0.0), Branch.PLUS)
    with pytest.raises(ValueError):
        PhasePoint(w=float("nan"), xi=0.0, eta=0.0)


def test_hessian_sign_definite():
    # hyperbolicity: the mixed determinant is negative at every sampled point
    for p, b in _sample(300):
        assert hessian_det(p, b) < 0.0


# ---------------------------------------------------------------------------
# generic finite-difference oracle


def test_fd_oracle_polynomial_exactness():
    f = lambda v: v[0] ** 2 * v[1] ** 2
    # Exact up to rounding: the centered stencils are error-free on this
    # monomial, but the 1/h**4 division amplifies float64 noise to ~1e-8.
    got = fd_oracle_derivative(f, [1.3, -0.7], (2, 2), 1e-2)
    assert got == pytest.approx(4.0, rel=1e-6)
    g = lambda u: u**3
    assert fd_oracle_derivative(g, 2.0, 2, 1e-3) == pytest.approx(12.0, rel=1e-6)


def test_fd_oracle_validation():
    f = lambda v: v[0]
    with pytest.raises(ValueError):
        fd_oracle_derivative(f, [1.0], (5,), 1e-3)
    with pytest.raises(ValueError):
        fd_oracle_derivative(f, [1.0], (0,), 1e-3)
    with pytest.raises(ValueError):
        fd_oracle_derivative(f, [1.0], (2, 1), 1e-3)
    with pytest.raises(ValueError):
        fd_oracle_derivative(f, [1.0], (1,), 1e-3, levels=4)


def test_fd_oracle_domain_predicate():
    f = lambda v: math.sqrt(v[0])
    ok = fd_oracle_derivative(f, [1.0], (1,), 1e-3, domain=lambda v: v[0] > 0)
    assert ok == pytest.approx(0.5, rel=1e-6)
    with pytest.raises(ValueError):
        fd_oracle_derivative(f, [1e-9], (1,), 1e-3, domain=lambda v: v[0] > 0)


def test_fd_oracle_richardson_improves():
    f = lambda u: math.sin(u)
    plain = fd_oracle_derivative(f, 1.0, 2, 1e-2, levels=0)
    rich = fd_oracle_derivative(f, 1.0, 2, 1e-2, levels=2)
    truth = -math.sin(1.0)
    assert abs(rich - truth) < abs(plain - truth) / 100.0


# ---------------------------------------------------------------------------
# compensated (double-double) arithmetic underpinning the fast oracles


def test_dd_ops_against_mpmath():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 50
    rng = np.random.default_rng(3)
    n = 300
    a = rng.uniform(-10, 10, n)
    b = rng.uniform(-10, 10, n)
    al = rng.uniform(-1, 1, n) * np.abs(a) * 2.0**-53
    bl = rng.uniform(-1, 1, n) * np.abs(b) * 2.0**-53
    x, y = (a, al), (b, bl)

    cases = {
        "add": (_dd.add(x, y), lambda u, v: u + v),
        "sub": (_dd.sub(x, y), lambda u, v: u - v),
        "mul": (_dd.mul(x, y), lambda u, v: u * v),
        "div": (_dd.div(x, y), lambda u, v: u / v),
    }
    for name, (got, op) in cases.items():
        for i in range(n):
            ref = op(mp.mpf(float(a[i])) + mp.mpf(float(al[i])),
                     mp.mpf(float(b[i])) + mp.mpf(float(bl[i])))
            err = abs((mp.mpf(float(got[0][i])) + mp.mpf(float(got[1][i]))) - ref)
            assert err <= abs(ref) * mp.mpf("1e-30"), name

    pos = (np.abs(a) + 1e-6, al)
    got = _dd.sqrt(pos)
    for i in range(n):
        ref = mp.sqrt(mp.mpf(float(pos[0][i])) + mp.mpf(float(pos[1][i])))
        err = abs((mp.mpf(float(got[0][i])) + mp.mpf(float(got[1][i]))) - ref)
        assert err <= abs(ref) * mp.mpf("1e-30")


def test_dd_fast_path_matches_exact_reference():
    for p, b in _sample(5):
        fast = hessian_det_fd(p, b, levels=2, dtype="dd")
        slow = hessian_det_fd(p, b, levels=2, dtype="exact")
        assert fast == pytest.approx(slow, rel=1e-10)
        fast = nikodym_det_fd(p, b, levels=2, dtype="dd")
        slow = nikodym_det_fd(p, b, levels=2, dtype="exact")
        assert fast == pytest.approx(slow, rel=1e-8)
        fast = flat_hessian_check(p, b, dtype="dd")
        slow = flat_hessian_check(p, b, dtype="exact")
        assert fast == pytest.approx(slow, abs=1e-12)


# ---------------------------------------------------------------------------
# oracle agreement (trimmed copy of the acceptance sweep)


def test_identities_against_oracles_sampled():
    pb = _sample(100)
    points = [p for p, _ in pb]
    branches = [b for _, b in pb]
    closed_h = np.array([hessian_det(p, b) for p, b in pb])
    closed_n = np.array([nikodym_det(p, b) for p, b in pb])

    rel = np.abs(hessian_det_fd_batch(points, branches, levels=1) - closed_h) / np.abs(closed_h)
    assert np.max(rel) < 1e-3
    rel = np.abs(hessian_det_fd_batch(points, branches, levels=2) - closed_h) / np.abs(closed_h)
    assert np.max(rel) < 1e-6
    rel = np.abs(nikodym_det_fd_batch(points, branches, levels=1) - closed_n) / np.abs(closed_n)
    assert np.max(rel) < 1e-3
    rel = np.abs(nikodym_det_fd_batch(points, branches, levels=2) - closed_n) / np.abs(closed_n)
    assert np.max(rel) < 1e-6
    assert np.max(np.abs(flat_hessian_check_batch(points, branches))) < 1e-6


def test_exceptional_curvature_oracle():
    rng = np.random.default_rng(5)
    for _ in range(50):
        s = rng.uniform(0.2, 4.0) * (1 if rng.uniform() < 0.5 else -1)
        w = rng.uniform(0.5, 8.0)
        ref = exceptional_curvature(s, w)
        assert exceptional_curvature_fd(s, w) == pytest.approx(ref, rel=1e-3)
        assert exceptional_curvature_fd(s, w, h=3e-3, levels=2) == pytest.approx(ref, rel=1e-6)
    with pytest.raises(ValueError):
        exceptional_curvature_fd(1.0, 0.0)


# ---------------------------------------------------------------------------
# amplitude classes and the sampler


def test_class_membership_base():
    spec = AmplitudeClassSpec(class_kind="A_pm", tau=0.5)
    inside = PhasePoint(w=1.0, xi=3.0, eta=0.0)  # root 1, delta 9
    assert amplitude_class_check(spec, inside).member
    report = amplitude_class_check(spec, PhasePoint(w=1.0, xi=9.0, eta=0.0))
    assert not report.member
    assert "xi_bounded" in report.reason
    # discriminant below tau
    report = amplitude_class_check(
        AmplitudeClassSpec(class_kind="A_pm", tau=1.0),
        PhasePoint(w=1.0, xi=0.2, eta=0.1))
    assert not report.member


def test_class_membership_variants():
    p = PhasePoint(w=1.0, xi=3.0, eta=0.0)
    assert amplitude_class_check(
        AmplitudeClassSpec(class_kind="N_pm", tau=0.5, sigma=1.0), p).member
    assert not amplitude_class_check(
        AmplitudeClassSpec(class_kind="E_pm", sigma=0.5), p).member  # xi too big
    assert amplitude_class_check(
        AmplitudeClassSpec(class_kind="B", tau=0.5), p).member
    # two-sided discriminant bound accepts delta < 0 as well
    neg = PhasePoint(w=1.0, xi=-1.0, eta=1.0)  # delta = -2
    assert amplitude_class_check(
        AmplitudeClassSpec(class_kind="B", tau=0.5), neg).member
    # small tau adds the xi exclusion
    small_xi = PhasePoint(w=1.0, xi=0.05, eta=1.5)
    rep = amplitude_class_check(AmplitudeClassSpec(class_kind="B", tau=0.01), small_xi)
    assert not rep.member and "xi_above_inv_c_star" in rep.reason


def test_class_spec_validation():
    with pytest.raises(ValueError):
        AmplitudeClassSpec(class_kind="bogus")
    with pytest.raises(ValueError):
        AmplitudeClassSpec(class_kind="A_pm", tau=0.0)
    with pytest.raises(ValueError):
        AmplitudeClassSpec(class_kind="A_pm", c_star=2.0)


def test_sampler_contract():
    rng = np.random.default_rng(9)
    pb = sample_phase_points(rng, 400, xi_min=0.05)
    for p, b in pb:
        d = discriminant(p)
        assert 0.1 * (1 - 1e-9) <= d <= 50.0 * (1 + 1e-9)
        t = branch_root(p, b)
        assert 0.25 * (1 - 1e-9) <= abs(t) <= 4.0 * (1 + 1e-9)
        assert 0.5 <= p.w <= 8.0
        assert abs(p.xi) <= 8.0 and abs(p.eta) <= 8.0
        assert abs(p.xi) >= 0.05
    # reproducibility
    again = sample_phase_points(np.random.default_rng(9), 400, xi_min=0.05)
    assert [(p.w, p.xi, p.eta, b) for p, b in pb] == [(p.w, p.xi, p.eta, b) for p, b in again]


def test_sampler_positive_root():
    rng = np.random.default_rng(2)
    for p, b in sample_phase_points(rng, 50, positive_root=True):
        assert branch_root(p, b) > 0.0
