import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obata_robin.errors import ClusteringError, NotOnBoundaryError, ParameterError
from obata_robin.geometry import (COMPLEMENT, CORE, ModelDomain, ObataFunction, RobinParameter,
                                  SecondFundamentalSpectrum, boundary_gradient, boundary_identity_residuals,
                                  cluster_eigenvalues, contains, make_model_domain, model_boundary_spectrum,
                                  numeric_second_fundamental, outward_normal, robin_residual,
                                  transnormal_residual)

THETAS = [math.pi / 6, math.pi / 4, math.pi / 3]
GRID = [(n, m, th) for n in (2, 3, 4) for m in range(n) for th in THETAS]


def test_robin_parameter_roundtrip():
    p = RobinParameter.from_theta(math.pi / 3)
    assert abs(p.a - 1 / math.sqrt(3)) < 1e-12
    q = RobinParameter.from_a(-1.0)
    assert abs(q.theta - 3 * math.pi / 4) < 1e-12
    with pytest.raises(ParameterError):
        RobinParameter.from_a(0.0)


def test_obata_function_identity():
    f = ObataFunction(np.array([0.3, -1.2, 0.5, 2.0]))
    rng = np.random.default_rng(1)
    y = rng.standard_normal((50, 4))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    g = f.gradient(y)
    assert np.max(np.abs(np.sum(g * g, 1) + f.value(y) ** 2 - f.L ** 2)) < 1e-12
    assert ObataFunction.from_dict(f.to_dict()).L == pytest.approx(f.L, abs=0)


def test_domain_case_split_examples():
    core = make_model_domain(3, 2, math.pi / 4, CORE)
    assert contains(core, [1, 0, 0, 0]) and not contains(core, [0, 0, 0, 1])
    cap0 = make_model_domain(2, 0, math.pi / 3, CORE)
    assert contains(cap0, [1, 0, 0]) and not contains(cap0, [0.4, math.sqrt(1 - 0.16), 0])
    mid = make_model_domain(3, 1, math.pi / 4, CORE)
    assert contains(mid, [1, 0, 0, 0])
    for th in THETAS:
        top = make_model_domain(3, 2, th, COMPLEMENT)
        assert contains(top, [0, 0, 0, 1])
        assert contains(make_model_domain(3, 2, th, CORE), [1, 0, 0, 0])
        p = [math.cos(th), 0, 0, math.sin(th)]
        assert contains(top, p) and contains(make_model_domain(3, 2, th, CORE), p)


@pytest.mark.parametrize("kwargs", [dict(n=1, m=0, theta=0.5), dict(n=3, m=3, theta=0.5),
                                    dict(n=3, m=1, theta=2.0), dict(n=3, m=1, theta=0.5, side="other")])
def test_domain_rejects_bad_parameters(kwargs):
    with pytest.raises(ParameterError):
        make_model_domain(**kwargs)


def test_contains_dimension_mismatch():
    with pytest.raises(ParameterError):
        contains(make_model_domain(3, 1, 0.5), [1, 0, 0])


def test_outward_normal_example():
    th = 0.7
    p = np.array([math.cos(th), 0.0, math.sin(th)])
    lower = make_model_domain(2, 1, th, CORE)  # {y3 <= sin(theta)}
    assert np.allclose(outward_normal(lower, p), [-math.sin(th), 0, math.cos(th)], atol=1e-14)
    assert np.allclose(outward_normal(make_model_domain(2, 1, th, COMPLEMENT), p),
                       [math.sin(th), 0, -math.cos(th)], atol=1e-14)
    with pytest.raises(NotOnBoundaryError):
        outward_normal(lower, [0, 0, 1.0])


def test_outward_normal_points_out_m0():
    d = make_model_domain(3, 0, 0.5, CORE)
    p = d.sample_boundary(np.random.default_rng(3), 1)[0]
    nu = outward_normal(d, p)
    q = math.cos(1e-4) * p + math.sin(1e-4) * nu
    assert not d.contains(q)
    assert d.contains(math.cos(1e-4) * p - math.sin(1e-4) * nu)


@pytest.mark.parametrize("n,m,th", GRID)
def test_robin_condition_and_transnormal(n, m, th):
    f = ObataFunction.axial(n, 1.7)
    for side in (COMPLEMENT, CORE):
        d = make_model_domain(n, m, th, side)
        a = d.robin_coefficient
        pts = d.sample_boundary(np.random.default_rng(n * 10 + m), 50)
        assert max(abs(robin_residual(d, f, a, p)) for p in pts) <= 1e-10
        assert max(transnormal_residual(d, f, a, p) for p in pts) <= 1e-10
        p = pts[0]
        assert robin_residual(d, f, a + 1, p) == pytest.approx(f.value(p), abs=1e-12)


def test_focal_values():
    th = math.pi / 5
    d = make_model_domain(3, 1, th)
    f = ObataFunction.axial(3)
    # focal points of f on T^1: the y3-y4 circle is aligned with the axis
    p = np.array([math.cos(th), 0, 0, math.sin(th)])
    assert np.linalg.norm(boundary_gradient(d, f, p)) < 1e-12
    assert f.value(p) == pytest.approx(1 / math.sqrt(1 + d.robin_coefficient ** 2), abs=1e-12)


def test_model_spectrum_examples():
    assert model_boundary_spectrum(4, 1, 1.0).entries == ((-1.0, 2), (1.0, 1))
    assert model_boundary_spectrum(5, 4, 2.0).entries == ((0.5, 4),)
    assert model_boundary_spectrum(5, 0, 2.0).entries == ((-2.0, 4),)
    with pytest.raises(ParameterError):
        model_boundary_spectrum(3, 1, -1.0)


@pytest.mark.parametrize("n,m,th", GRID)
def test_numeric_curvature_matches_model(n, m, th):
    d = make_model_domain(n, m, th)
    expected = model_boundary_spectrum(n, m, d.robin_coefficient)
    pts = d.sample_boundary(np.random.default_rng(7), 100)
    for p in pts:
        assert numeric_second_fundamental(d, p).matches(expected, 1e-4)


def test_numeric_curvature_preconditions():
    d = make_model_domain(3, 1, 0.5)
    p = d.sample_boundary(np.random.default_rng(0), 1)[0]
    with pytest.raises(ParameterError):
        numeric_second_fundamental(d, p, step=1e-1)
    with pytest.raises(NotOnBoundaryError):
        numeric_second_fundamental(d, [1.0, 0, 0, 0])


def test_equator_limit_is_totally_geodesic():
    # the cap boundary {y_{n+1} = sin(theta)} tends to the equator as theta -> 0
    th = 1e-3
    d = make_model_domain(3, 2, th)
    spec = numeric_second_fundamental(d, d.sample_boundary(np.random.default_rng(0), 1)[0])
    assert len(spec.entries) == 1 and spec.entries[0][1] == 2
    assert abs(spec.entries[0][0]) < 2e-3


def test_clustering_ambiguity():
    with pytest.raises(ClusteringError):
        cluster_eigenvalues([0.0, 5e-4])
    assert cluster_eigenvalues([1.0, 1.0 + 1e-6, 3.0]).entries[0][1] == 2


@pytest.mark.parametrize("n,m,th", [g for g in GRID if g[1] < g[0] - 1])
def test_boundary_identities(n, m, th):
    d = make_model_domain(n, m, th)
    a = d.robin_coefficient
    f = ObataFunction.axial(n)
    for p in d.sample_boundary(np.random.default_rng(5), 5):
        r1, r2 = boundary_identity_residuals(d, f, a, p)
        assert r1 <= 1e-4 and r2 <= 1e-4
    p = d.sample_boundary(np.random.default_rng(6), 1)[0]
    gb = np.linalg.norm(boundary_gradient(d, f, p))
    r1, _ = boundary_identity_residuals(d, f, -a, p)
    assert r1 == pytest.approx(2 * a * gb, rel=1e-4)


def test_boundary_identities_cap():
    d = make_model_domain(3, 2, 0.6)
    p = d.sample_boundary(np.random.default_rng(2), 1)[0]
    r1, r2 = boundary_identity_residuals(d, ObataFunction.axial(3), d.robin_coefficient, p)
    assert r1 <= 1e-8 and r2 <= 1e-4


def test_serialization_roundtrip():
    d = make_model_domain(4, 2, 0.9, CORE)
    e = ModelDomain.from_dict(d.to_dict())
    assert (e.n, e.m, e.theta, e.side) == (4, 2, 0.9, CORE)
    assert np.array_equal(e.rotation, d.rotation)


def test_spectrum_multiplicities_sum():
    s = SecondFundamentalSpectrum(((-1.0, 2), (1.0, 1)))
    assert s.dimension == 3
    assert s.negated().entries == ((-1.0, 1), (1.0, 2))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 5), data=st.data(), th=st.floats(0.05, math.pi / 2 - 0.05),
       angle=st.floats(0, 2 * math.pi), seed=st.integers(0, 2 ** 16))
def test_property_rotated_domains_keep_robin(n, data, th, angle, seed):
    m = data.draw(st.integers(0, n - 1))
    Q = np.eye(n + 1)
    Q[0, 0] = Q[1, 1] = math.cos(angle)
    Q[0, 1], Q[1, 0] = -math.sin(angle), math.sin(angle)
    f = ObataFunction.axial(n, 2.0)
    for side in (COMPLEMENT, CORE):
        d = make_model_domain(n, m, th, side, Q)
        for p in d.sample_boundary(np.random.default_rng(seed), 5):
            assert abs(robin_residual(d, f, d.robin_coefficient, p)) <= 1e-10
            assert transnormal_residual(d, f, d.robin_coefficient, p) <= 1e-10
