"""One test per acceptance criterion; the terminal summary lists PASS/FAIL for each."""
import math
import time

import numpy as np
from hypothesis import given, settings, strategies as st

from obata_robin import flows, jets, odes, spectral
from obata_robin.geometry import (COMPLEMENT, CORE, ObataFunction, make_model_domain, model_boundary_spectrum,
                                  numeric_second_fundamental, robin_ball, transnormal_residual)

THETAS = [math.pi / 6, math.pi / 4, math.pi / 3]
THETAS_NEG = [0.6 * math.pi, 3 * math.pi / 4, 5 * math.pi / 6]


def test_criterion_1():
    start = time.perf_counter()
    cases = [(n, math.pi / 2 - th, spectral.ROBIN, 1 / math.tan(th)) for n in (2, 3, 4, 5) for th in THETAS]
    results = spectral.first_eigenvalue_scans(cases, 3)
    elapsed = time.perf_counter() - start
    worst = max(abs(res.xi - n) for (n, *_), res in zip(cases, results))
    print(f"robin rigidity: max |xi - n| = {worst:.2e}, sweep {elapsed:.2f} s")
    assert worst <= 1e-6
    assert elapsed < 10.0


def test_criterion_2():
    for n in (2, 3, 4, 5):
        d = spectral.first_eigenvalue_scan(n, math.pi / 2, spectral.DIRICHLET, 3)
        m = spectral.first_eigenvalue_scan(n, math.pi / 2, spectral.NEUMANN, 3)
        assert abs(d.xi - n) <= 1e-6
        assert abs(m.xi - n) <= 1e-6
        assert m.ell == 1


def test_criterion_3():
    for n in (2, 3, 4):
        f = ObataFunction.axial(n)
        for th in THETAS:
            d = make_model_domain(n, n - 1, th)
            for p in d.sample_boundary(np.random.default_rng(n), 3):
                tr = flows.normalized_gradient_flow(f, p, d)
                assert tr.terminal_event == flows.INTERIOR_MAX
                assert abs(tr.terminal_time - (math.pi / 2 - th)) <= 1e-6
    f3 = ObataFunction.axial(3)
    eps = 1e-7
    v = np.array([0.6, 0.8, 0.0, 0.0])
    for th in THETAS_NEG:
        start = math.cos(eps) * f3.c + math.sin(eps) * v
        tr = flows.normalized_gradient_flow(f3, start, robin_ball(3, th), direction="backward")
        assert tr.terminal_event == flows.BOUNDARY_HIT
        assert abs(tr.terminal_time + eps - (1.5 * math.pi - th)) <= 1e-6
        model = odes.warped_model_build(1 / math.tan(th), n=3)
        p = model.sample_boundary(np.random.default_rng(0), 1, "lower")[0]
        tr = flows.normalized_gradient_flow(model.f, p, model)
        assert tr.terminal_event == flows.BOUNDARY_HIT
        assert abs(tr.terminal_time - (2 * math.pi - 2 * th)) <= 1e-6


def test_criterion_4():
    rng = np.random.default_rng(2024)
    for n in (2, 3, 4):
        f = ObataFunction(rng.standard_normal(n + 1))
        y = rng.standard_normal((10, n + 1))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        for tr in flows.integrate_flows(f, y, None, 1e-3):
            assert flows.conservation_defect(tr, f) <= 1e-10
    for n in (2, 3, 4):
        f = ObataFunction.axial(n, 1.4)
        for m in range(n):
            for th in THETAS:
                for side in (COMPLEMENT, CORE):
                    d = make_model_domain(n, m, th, side)
                    pts = d.sample_boundary(np.random.default_rng(m), 100)
                    assert max(transnormal_residual(d, f, d.robin_coefficient, p) for p in pts) <= 1e-10


def test_criterion_5():
    for n in (2, 3, 4):
        for m in range(n):
            for th in THETAS:
                d = make_model_domain(n, m, th)
                expected = model_boundary_spectrum(n, m, d.robin_coefficient)
                pts = d.sample_boundary(np.random.default_rng(n + m), 100)
                assert all(numeric_second_fundamental(d, p).matches(expected, 1e-4) for p in pts)
    for a in (0.5, 1.0, 2.0):
        w = math.sqrt(1 + a * a)
        s = np.linspace(-0.95, 0.95, 401) * math.pi / (2 * w)
        for mu in (-0.8 * a, 0.0, 0.5 * a, 0.9 * a):
            assert odes.curvature_ode_residual(odes.CurvatureFamily(a, mu), a, s) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(lam0=st.floats(-20.0, 20.0).filter(lambda x: abs(x) > 1e-6))
def _neumann_property(lam0):
    eps = 1e-3
    fwd = odes.neumann_curvature_flow(math.sqrt(2), lam0, math.pi / 2 - eps)
    bwd = odes.neumann_curvature_flow(math.sqrt(2), lam0, -(math.pi / 2 - eps))
    assert fwd.monotone and bwd.monotone
    assert not (fwd.bounded and bwd.bounded)


def test_criterion_6():
    eps = 1e-3
    for lam0 in range(-10, 11):
        fwd = odes.neumann_curvature_flow(math.sqrt(2), float(lam0), math.pi / 2 - eps)
        bwd = odes.neumann_curvature_flow(math.sqrt(2), float(lam0), -(math.pi / 2 - eps))
        assert fwd.monotone and bwd.monotone
        assert (fwd.bounded and bwd.bounded) == (lam0 == 0)
    _neumann_property()


def test_criterion_7():
    for th in THETAS_NEG:
        a = 1 / math.tan(th)
        prof = odes.phi_radial_solve(a)
        assert prof.equation_residual() <= 1e-6
        assert prof.fd_equation_residual() <= 1e-6
        assert abs(prof.phi[-1] - (math.pi - th)) <= 1e-8
        up = odes.phi_radial_solve(a, initial_slope_scale=1 + 1e-6)
        down = odes.phi_radial_solve(a, initial_slope_scale=1 - 1e-6)
        assert np.max(np.abs(up.phi - down.phi)) <= 1e-5


def test_criterion_8():
    for model in (jets.CAP_COMPLEMENT, jets.CAP_CORE, jets.HEMISPHERE):
        assert jets.jet_vs_exact(model, K=8, exact=True) == 0
    for N in (16, 32):
        grid = jets.jet_extend(jets.clifford_grid_data(0.7, 1.0, N, 0.0, 6), 6)
        assert max(jets.jet_constraint_residual(grid)) <= 1e-10
    A = jets.jet_extend(jets.model_data(jets.CAP_COMPLEMENT, exact=True), 8)
    B = jets.jet_extend(jets.model_data(jets.CAP_CORE, exact=True), 8)
    assert jets.jets_match(A, B, 8)
    for th in THETAS:
        A = jets.jet_extend(jets.model_data(jets.CAP_COMPLEMENT, th), 8)
        assert jets.jets_match(A, jets.jet_extend(jets.model_data(jets.CAP_CORE, th), 8), 8)
        C = jets.jet_extend(jets.model_data(jets.CAP_CORE, th + 0.05), 8)
        assert not jets.jets_match(A, C, 8)


def test_criterion_9():
    for n in (2, 3, 4, 5):
        for R in (math.pi / 4, math.pi / 2):
            for prof in (spectral.RadialProfile.cosine(), spectral.RadialProfile.r_squared()):
                assert spectral.reilly_identity_check(n, R, prof)[2] <= 1e-6


def test_criterion_10():
    # quantitative fingerprints of the model classifications
    f2 = ObataFunction.axial(2)
    for th in THETAS:
        d0 = make_model_domain(2, 0, th)
        c0 = flows.closed_boundary_curve(d0, f2, [math.cos(th), math.sin(th), 0.0])
        assert abs(c0.length - 2 * math.pi * c0.maxima * math.sin(th)) <= 1e-6
        d1 = make_model_domain(2, 1, th)
        c1 = flows.closed_boundary_curve(d1, f2, [math.cos(th), 0.0, math.sin(th)])
        assert abs(c1.length - 2 * math.pi * math.cos(th)) <= 1e-6
    for th in THETAS_NEG:
        a = 1 / math.tan(th)
        m = odes.warped_model_build(a)
        assert max(map(abs, m.robin_residuals())) <= 1e-10
        assert abs(m.crossing_time - (2 * math.pi - 2 * th)) <= 1e-12
    for alpha in (0.0, 0.3, -0.7):
        prof = odes.integrate_metric_warp(alpha, 0.9 * (math.pi / 2 - alpha), 1e-3)
        assert prof.closed_form_error() <= 1e-8
    for n in (2, 3, 4):
        for th in THETAS:
            h = spectral.cap_hypotheses(n, th)
            assert h["h_margin"] >= 0 and h["H_margin"] >= -1e-12
