"""Named numerical checks grouped by command.

Every runner returns ``(checks, data)``: a list of :class:`Check` and a
JSON-friendly dict with the measured quantities.  Tolerances are looked up
by check name in a dict that callers may override.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import flows, jets, odes, spectral
from .errors import ParameterError
from .geometry import (COMPLEMENT, boundary_gradient, ObataFunction, boundary_identity_residuals, make_model_domain,
                       model_boundary_spectrum, numeric_second_fundamental, robin_ball, robin_residual,
                       transnormal_residual)


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "pass": self.passed}


DEFAULT_TOLERANCES = {
    "eigen.xi_minus_n": 1e-6,
    "eigen.bc_residual": 1e-8,
    "eigen.ode_residual": 1e-7,
    "eigen.boundary_identity": 1e-6,
    "flow.conservation": 1e-10,
    "flow.geodesic": 1e-6,
    "flow.value_fit": 1e-6,
    "flow.cap_hit_time": 1e-6,
    "flow.ball_hit_time": 1e-6,
    "flow.warped_crossing_time": 1e-6,
    "boundary.robin": 1e-10,
    "boundary.transnormal": 1e-10,
    "boundary.spectrum": 1e-4,
    "boundary.identity": 1e-4,
    "boundary.flow_fit": 1e-6,
    "phi.equation": 1e-6,
    "phi.plateau": 1e-8,
    "phi.twin_solve": 1e-5,
    "phi.uniqueness_identity": 1e-5,
    "jet.exact_error": 1e-12,
    "jet.constraint": 1e-10,
    "reilly.defect": 1e-6,
}


def _leq(name: str, value: float, tol: dict) -> Check:
    t = tol[name]
    return Check(name, float(value), t, bool(value <= t))


def _count(name: str, failures: int) -> Check:
    """Checks that count violations; they pass only at zero."""
    return Check(name, float(failures), 0.0, failures == 0)


def merged_tolerances(overrides: dict | None = None) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in (overrides or {}).items():
        if k not in tol:
            raise ParameterError(f"unknown tolerance {k!r}")
        if not v > 0:
            raise ParameterError(f"tolerance {k!r} must be positive")
        tol[k] = float(v)
    return tol


# eigen ---------------------------------------------------------------------

def run_eigen(n: int, bc: str, theta: float | None = None, a: float | None = None, R: float | None = None,
              ell_max: int = 3, tol: dict | None = None):
    tol = merged_tolerances(tol)
    rigid = False
    if bc == spectral.ROBIN:
        if theta is None or not 0.0 < theta < math.pi / 2:
            raise ParameterError("the Robin cap needs theta in (0, pi/2), i.e. a > 0")
        a = 1.0 / math.tan(theta) if a is None else a
        cap = math.pi / 2 - theta
        R = cap if R is None else R
        rigid = abs(R - cap) < 1e-15 and abs(a - 1.0 / math.tan(theta)) < 1e-12
    else:
        R = math.pi / 2 if R is None else R
        rigid = abs(R - math.pi / 2) < 1e-15
        a = None
    res = spectral.first_eigenvalue_scan(n, R, bc, ell_max, a)
    checks = [
        _leq("eigen.bc_residual", res.bc_residual, tol),
        _leq("eigen.ode_residual", res.ode_residual, tol),
    ]
    if rigid:
        checks.insert(0, _leq("eigen.xi_minus_n", abs(res.xi - n), tol))
        if bc == spectral.ROBIN:
            checks.append(_leq("eigen.boundary_identity", spectral.eigen_boundary_identity(res, a, n, R), tol))
    data = {"n": n, "bc": bc, "R": R, "a": a, "theta": theta, "xi": res.xi, "ell": res.ell, "scan": res.scan}
    return checks, data


# flows ---------------------------------------------------------------------

def _random_inside(domain, rng, size, f, positive=True):
    out = []
    dim = domain.n + 1
    while len(out) < size:
        y = rng.standard_normal((4 * size, dim))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        ok = (domain.inside(y) > 1e-6) & ((y @ f.c > 1e-6) if positive else (y @ f.c < -1e-6))
        ok &= np.linalg.norm(f.gradient(y), axis=1) > 1e-4
        out.extend(y[ok])
    return np.asarray(out[:size])


def run_flow(n: int, m: int, theta: float, dt: float = 1e-3, starts: int = 100, seed: int = 0,
             L: float = 1.0, tol: dict | None = None):
    """Interior flows that must avoid the boundary for theta < pi/2; ball and warped models for theta > pi/2."""
    tol = merged_tolerances(tol)
    rng = np.random.default_rng(seed)
    f = ObataFunction.axial(n, L)
    checks, data = [], {"n": n, "m": m, "theta": theta, "a": 1.0 / math.tan(theta), "dt": dt, "seed": seed}
    if 0.0 < theta < math.pi / 2:
        domain = make_model_domain(n, m, theta, COMPLEMENT)
        pts = _random_inside(domain, rng, starts, f)
        traces = flows.integrate_flows(f, pts, domain, dt)
        events = [t.terminal_event for t in traces]
        checks.append(_count("flow.interior_boundary_hits", sum(e == flows.BOUNDARY_HIT for e in events)))
        checks.append(_count("flow.interior_not_max", sum(e != flows.INTERIOR_MAX for e in events)))
        checks.append(_leq("flow.conservation", max(flows.conservation_defect(t, f) for t in traces), tol))
        geo = [flows.geodesic_defect(t) for t in traces if len(t) >= 4]
        checks.append(_leq("flow.geodesic", max(geo) if geo else 0.0, tol))
        checks.append(_leq("flow.value_fit", max(flows.value_fit_residual(t, L) for t in traces), tol))
        data["events"] = events
        data["terminal_times"] = [t.terminal_time for t in traces]
        if m == n - 1:
            start = domain.sample_boundary(rng, 1)[0]
            tr = flows.normalized_gradient_flow(f, start, domain, dt)
            err = abs(tr.terminal_time - (math.pi / 2 - theta)) if tr.terminal_event == flows.INTERIOR_MAX else math.inf
            checks.append(_leq("flow.cap_hit_time", err, tol))
            data["cap_hit_time"] = tr.terminal_time
    elif math.pi / 2 < theta < math.pi:
        a = 1.0 / math.tan(theta)
        ball = robin_ball(n, theta)
        eps = 1e-7
        v = rng.standard_normal(n + 1)
        v[-1] = 0.0
        v /= np.linalg.norm(v)
        north = f.c / L
        start = math.cos(eps) * north + math.sin(eps) * v
        tr = flows.normalized_gradient_flow(f, start, ball, dt, direction="backward")
        hit = tr.terminal_time + eps if tr.terminal_event == flows.BOUNDARY_HIT else math.inf
        checks.append(_leq("flow.ball_hit_time", abs(hit - (1.5 * math.pi - theta)), tol))
        model = odes.warped_model_build(a, n=n, L=L)
        s0 = model.sample_boundary(rng, 1, "lower")[0]
        tw = flows.normalized_gradient_flow(f, s0, model, dt)
        cross = tw.terminal_time if tw.terminal_event == flows.BOUNDARY_HIT else math.inf
        checks.append(_leq("flow.warped_crossing_time", abs(cross - (2 * math.pi - 2 * theta)), tol))
        checks.append(_leq("flow.conservation", max(flows.conservation_defect(t, f) for t in (tr, tw)), tol))
        data.update(ball_hit_time=hit, warped_crossing_time=cross)
    else:
        raise ParameterError("theta must lie in (0, pi/2) or (pi/2, pi)")
    return checks, data


# boundary ------------------------------------------------------------------

def run_boundary(n: int, m: int, theta: float, samples: int = 100, seed: int = 0, L: float = 1.0,
                 dt: float = 1e-3, tol: dict | None = None):
    tol = merged_tolerances(tol)
    rng = np.random.default_rng(seed)
    domain = make_model_domain(n, m, theta, COMPLEMENT)
    a = domain.robin_coefficient
    f = ObataFunction.axial(n, L)
    pts = domain.sample_boundary(rng, samples)
    expected = model_boundary_spectrum(n, m, a)
    robin = max(robin_residual(domain, f, a, p) for p in pts)
    trans = max(transnormal_residual(domain, f, a, p) for p in pts)
    spec_err, ident, mismatches = 0.0, 0.0, 0
    for p in pts:
        spec = numeric_second_fundamental(domain, p)
        if not spec.matches(expected, tol["boundary.spectrum"]):
            mismatches += 1
        if [k for _, k in spec.entries] != [k for _, k in expected.entries]:
            spec_err = math.inf
        else:
            for (v, _), (w, _) in zip(spec.entries, expected.entries):
                spec_err = max(spec_err, abs(v - w))
        ident = max(ident, *boundary_identity_residuals(domain, f, a, p))
    checks = [
        _leq("boundary.robin", robin, tol),
        _leq("boundary.transnormal", trans, tol),
        _count("boundary.spectrum_mismatches", mismatches),
        _leq("boundary.spectrum", spec_err, tol),
        _leq("boundary.identity", ident, tol),
    ]
    data = {"n": n, "m": m, "theta": theta, "a": a, "samples": samples, "seed": seed,
            "spectrum": [list(e) for e in expected.entries]}
    if m < n - 1:
        fits = []
        for p in pts[:3]:
            if np.linalg.norm(boundary_gradient(domain, f, p)) > 1e-3:
                fits.append(flows.boundary_flow(domain, f, a, p, dt).defects.fit)
        checks.append(_leq("boundary.flow_fit", max(fits) if fits else 0.0, tol))
    return checks, data


# phi -----------------------------------------------------------------------

def run_phi(theta: float, h: float = 1e-3, rho_max: float = 2.0, tol: dict | None = None):
    tol = merged_tolerances(tol)
    if not math.pi / 2 < theta < math.pi:
        raise ParameterError("the graph equation needs theta in (pi/2, pi), i.e. a < 0")
    a = 1.0 / math.tan(theta)
    prof = odes.phi_radial_solve(a, rho_max=rho_max, h=h)
    up = odes.phi_radial_solve(a, rho_max=rho_max, h=h, initial_slope_scale=1 + 1e-6)
    down = odes.phi_radial_solve(a, rho_max=rho_max, h=h, initial_slope_scale=1 - 1e-6)
    twin = float(np.max(np.abs(up.phi - down.phi)))
    shifted = odes.shifted_profile(prof, 0.3)
    checks = [
        _leq("phi.equation", max(prof.equation_residual(), prof.fd_equation_residual()), tol),
        _leq("phi.plateau", abs(float(prof.phi[-1]) - (math.pi - theta)), tol),
        _count("phi.not_monotone", 0 if prof.is_monotone() else 1),
        _leq("phi.twin_solve", twin, tol),
        _leq("phi.uniqueness_identity", odes.uniqueness_identity_residual(prof, shifted), tol),
    ]
    data = {"theta": theta, "a": a, "h": h, "rho_plateau": prof.rho_plateau, "plateau": float(prof.phi[-1])}
    return checks, data


# jets ----------------------------------------------------------------------

def run_jet(theta: float, L: float = 1.0, K: int = 8, exact: bool = True, tol: dict | None = None):
    tol = merged_tolerances(tol)
    if not 0.0 < theta < math.pi / 2:
        raise ParameterError("jet models need theta in (0, pi/2)")
    checks, data = [], {"theta": theta, "L": L, "K": K, "exact": exact}
    for model in (jets.CAP_COMPLEMENT, jets.CAP_CORE, jets.HEMISPHERE):
        err = float(jets.jet_vs_exact(model, theta, L, K, exact=exact))
        checks.append(_leq(f"jet.exact_error.{model}", err, {f"jet.exact_error.{model}": tol["jet.exact_error"]}))
        data[model] = err
    A = jets.jet_extend(jets.model_data(jets.CAP_COMPLEMENT, theta, L, exact, K), K)
    B = jets.jet_extend(jets.model_data(jets.CAP_CORE, theta, L, exact, K), K)
    checks.append(_count("jet.cap_core_mismatch", 0 if jets.jets_match(A, B, K) else 1))
    # the angle only enters numerically, so this control runs in floating point
    Af = jets.jet_extend(jets.model_data(jets.CAP_COMPLEMENT, theta, L, False, K), K)
    C = jets.jet_extend(jets.model_data(jets.CAP_CORE, theta + 0.1, L, False, K), K)
    checks.append(_count("jet.shifted_theta_accepted", 1 if jets.jets_match(Af, C, K) else 0))
    grid = jets.jet_extend(jets.clifford_grid_data(theta, L, 16, 0.0, K), min(K, 6))
    checks.append(_leq("jet.constraint", max(jets.jet_constraint_residual(grid)), tol))
    data["cap_jet"] = A.to_dict()
    return checks, data


# reilly --------------------------------------------------------------------

def run_reilly(n: int, R: float, tol: dict | None = None):
    tol = merged_tolerances(tol)
    checks, data = [], {"n": n, "R": R}
    for name, prof in (("cos", spectral.RadialProfile.cosine()), ("r_squared", spectral.RadialProfile.r_squared())):
        lhs, rhs, defect = spectral.reilly_identity_check(n, R, prof)
        checks.append(Check(f"reilly.defect.{name}", defect, tol["reilly.defect"], defect <= tol["reilly.defect"]))
        data[name] = {"lhs": lhs, "rhs": rhs}
    return checks, data


# verify-all ----------------------------------------------------------------

PROFILES = {
    "quick": {"eigen_n": [3], "flow_starts": 20, "flow_dt": 1e-2, "boundary_samples": 10,
              "phi_h": 2e-3, "jet_K": 6, "thetas": [math.pi / 4]},
    "full": {"eigen_n": [2, 3, 4, 5], "flow_starts": 100, "flow_dt": 1e-3, "boundary_samples": 100,
             "phi_h": 1e-3, "jet_K": 8, "thetas": [math.pi / 6, math.pi / 4, math.pi / 3]},
}


def run_all(profile: str = "quick", seed: int = 0, tol: dict | None = None):
    if profile not in PROFILES:
        raise ParameterError(f"unknown profile {profile!r}")
    P = PROFILES[profile]
    checks, data = [], {"profile": profile, "seed": seed}

    def add(prefix, result):
        cs, d = result
        for c in cs:
            c.name = f"{prefix}:{c.name}"
        checks.extend(cs)
        data[prefix] = d

    for n in P["eigen_n"]:
        for th in P["thetas"]:
            add(f"eigen robin n={n} theta={th:.6f}", run_eigen(n, spectral.ROBIN, theta=th, tol=tol))
        add(f"eigen dirichlet n={n}", run_eigen(n, spectral.DIRICHLET, tol=tol))
        add(f"eigen neumann n={n}", run_eigen(n, spectral.NEUMANN, tol=tol))
    for th in P["thetas"]:
        for m in (0, 1, 2):
            add(f"flow n=3 m={m} theta={th:.6f}",
                run_flow(3, m, th, P["flow_dt"], P["flow_starts"], seed, tol=tol))
        add(f"flow n=3 theta={math.pi - th:.6f}", run_flow(3, 0, math.pi - th, P["flow_dt"], 1, seed, tol=tol))
        for m in (0, 1, 2):
            add(f"boundary n=3 m={m} theta={th:.6f}", run_boundary(3, m, th, P["boundary_samples"], seed, tol=tol))
        add(f"phi theta={math.pi - th:.6f}", run_phi(math.pi - th, P["phi_h"], tol=tol))
        add(f"jet theta={th:.6f}", run_jet(th, 1.0, P["jet_K"], True, tol=tol))
    for R in (math.pi / 4, math.pi / 2):
        add(f"reilly n=3 R={R:.6f}", run_reilly(3, R, tol=tol))
    return checks, data


RUNNERS = {"eigen": run_eigen, "flow": run_flow, "boundary": run_boundary, "phi": run_phi,
           "jet": run_jet, "reilly": run_reilly}
