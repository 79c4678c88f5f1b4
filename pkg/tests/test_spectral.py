import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from obata_robin import spectral
from obata_robin.errors import ParameterError
from obata_robin.spectral import DIRICHLET, NEUMANN, ROBIN, SturmLiouvilleProblem

THETAS = [math.pi / 6, math.pi / 4, math.pi / 3]


@pytest.fixture(scope="module")
def robin_scans():
    cases = [(n, math.pi / 2 - th, ROBIN, 1 / math.tan(th)) for n in (2, 3, 4, 5) for th in THETAS]
    return cases, spectral.first_eigenvalue_scans(cases, 3)


def test_problem_validation():
    with pytest.raises(ParameterError):
        SturmLiouvilleProblem(1, 1.0)
    with pytest.raises(ParameterError):
        SturmLiouvilleProblem(3, 4.0, 0, DIRICHLET)
    with pytest.raises(ParameterError):
        SturmLiouvilleProblem(3, 1.0, 0, ROBIN, 0.0)
    with pytest.raises(ParameterError):
        SturmLiouvilleProblem.robin_cap(3, 2.0)
    p = SturmLiouvilleProblem(4, 1.0, 2, NEUMANN)
    assert p.k == 2 * 4
    assert SturmLiouvilleProblem.from_dict(p.to_dict()) == p


def test_frobenius_series_l0():
    c = spectral.frobenius_coefficients(3, 0, 3.0)
    assert c[0] == 1.0 and c[1] == pytest.approx(-3.0 / (2 * 3))


def test_robin_cap_rigidity(robin_scans):
    cases, results = robin_scans
    for (n, R, _, a), res in zip(cases, results):
        assert abs(res.xi - n) <= 1e-6
        assert res.ell == 0
        assert res.bc_residual <= 1e-8 and res.ode_residual <= 1e-7


def test_robin_eigenfunction_is_cosine():
    res = spectral.smallest_eigenvalue(SturmLiouvilleProblem.robin_cap(3, math.pi / 4))
    r = res.r
    assert np.max(np.abs(res.u - np.cos(r))) <= 1e-8
    assert max(abs(u) for _, u in res.u_samples) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_hemisphere_dirichlet_and_neumann(n):
    d = spectral.first_eigenvalue_scan(n, math.pi / 2, DIRICHLET, 3)
    assert abs(d.xi - n) <= 1e-6 and d.ell == 0
    m = spectral.first_eigenvalue_scan(n, math.pi / 2, NEUMANN, 3)
    assert abs(m.xi - n) <= 1e-6 and m.ell == 1
    assert np.max(np.abs(m.u - np.sin(m.r))) <= 1e-8


def test_neumann_radial_mode_is_larger():
    res = spectral.smallest_eigenvalue(SturmLiouvilleProblem(3, math.pi / 2, 0, NEUMANN))
    assert res.xi > 3 + 1.0
    assert res.xi == pytest.approx(2 * (3 + 1), abs=1e-8)


def test_step_halving_regression():
    p = SturmLiouvilleProblem.robin_cap(4, math.pi / 3)
    a = spectral.smallest_eigenvalue(p, max_step=0.02).xi
    b = spectral.smallest_eigenvalue(p, max_step=0.01).xi
    assert abs(a - b) <= 1e-8


@pytest.mark.parametrize("n,th", [(2, math.pi / 4), (3, math.pi / 6), (5, math.pi / 3)])
def test_robin_monotone_in_a(n, th):
    a = 1 / math.tan(th)
    base = SturmLiouvilleProblem.robin_cap(n, th)
    lo = SturmLiouvilleProblem.robin_cap(n, th, a=a - 0.1)
    hi = SturmLiouvilleProblem.robin_cap(n, th, a=a + 0.1)
    xi = spectral.smallest_eigenvalues([lo, base, hi])
    assert xi[0] < xi[1] < xi[2]


def test_eigen_boundary_identity():
    th = math.pi / 4
    res = spectral.smallest_eigenvalue(SturmLiouvilleProblem.robin_cap(3, th))
    assert spectral.eigen_boundary_identity(res, 1.0, 3, math.pi / 2 - th) <= 1e-6
    exact = spectral.robin_energy_defect(spectral.RadialProfile.cosine(), 3, math.pi / 2 - th, 1.0)
    assert exact <= 1e-9
    dres = spectral.smallest_eigenvalue(SturmLiouvilleProblem(3, math.pi / 2, 0, DIRICHLET))
    with pytest.raises(ParameterError):
        spectral.eigen_boundary_identity(dres, 1.0, 3, math.pi / 2)


@pytest.mark.parametrize("n", [2, 3, 5])
@pytest.mark.parametrize("R", [math.pi / 4, math.pi / 2])
def test_reilly_identity(n, R):
    for prof in (spectral.RadialProfile.cosine(), spectral.RadialProfile.r_squared()):
        lhs, rhs, defect = spectral.reilly_identity_check(n, R, prof)
        assert defect <= 1e-6
    assert spectral.reilly_identity_check(n, R, spectral.RadialProfile.constant()) == (0.0, 0.0, 0.0)


def test_reilly_rejects_singular_profile():
    bad = spectral.RadialProfile(lambda r: 1 / np.asarray(r), lambda r: -1 / np.asarray(r) ** 2,
                                 lambda r: 2 / np.asarray(r) ** 3)
    with pytest.raises(ParameterError):
        spectral.reilly_identity_check(3, 1.0, bad)


def test_cap_hypotheses_hold():
    for n in (2, 3, 4):
        for th in THETAS:
            h = spectral.cap_hypotheses(n, th)
            assert all(v >= -1e-12 for v in h.values() if isinstance(v, float))


def test_result_serialization():
    res = spectral.smallest_eigenvalue(SturmLiouvilleProblem.robin_cap(2, math.pi / 4))
    d = res.to_dict()
    assert d["problem"]["bc"] == ROBIN and len(d["u_samples"]) == len(res.r)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(2, 6), th=st.floats(0.15, math.pi / 2 - 0.15))
def test_property_robin_equality_case(n, th):
    res = spectral.first_eigenvalue_scan(n, math.pi / 2 - th, ROBIN, 2, 1 / math.tan(th))
    assert abs(res.xi - n) <= 1e-6 and res.ell == 0
