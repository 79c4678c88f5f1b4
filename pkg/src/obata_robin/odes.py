"""Scalar ODE kernels: flow values, warping factors, curvature families,
the Neumann curvature equation and the radial graph equation for phi.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from ._numerics import rk4_step
from .errors import ParameterError, SingularFamilyError, SolverError
from .geometry import BOUNDARY_TOL, ObataFunction, SphereDomain

# flow value and warp -------------------------------------------------------

def flow_value(alpha: float, t, L: float):
    return L * np.sin(alpha + np.asarray(t))


def metric_warp(alpha: float, t):
    """cos^2(alpha + t) / cos^2(alpha): the warp with w(0) = 1."""
    c0 = math.cos(alpha)
    if abs(c0) < 1e-14:
        raise ParameterError("alpha = +-pi/2 has no normalized warp")
    return np.cos(alpha + np.asarray(t)) ** 2 / (c0 * c0)


@dataclass
class WarpProfile:
    alpha: float
    t: np.ndarray
    w: np.ndarray

    def closed_form_error(self) -> float:
        return float(np.max(np.abs(self.w - metric_warp(self.alpha, self.t))))

    def ode_residual(self, L: float = 1.0) -> float:
        """Pointwise 0.5 f' w' + f w with the exact derivative of the samples' closed form."""
        return metric_ode_residual(self.alpha, self.t, self.w, L)


def metric_ode_residual(alpha: float, t, w, L: float = 1.0, dw=None) -> float:
    t = np.asarray(t)
    w = np.asarray(w)
    if dw is None:
        c0 = math.cos(alpha)
        dw = -np.sin(2.0 * (alpha + t)) / (c0 * c0)
    f = L * np.sin(alpha + t)
    df = L * np.cos(alpha + t)
    return float(np.max(np.abs(0.5 * df * dw + f * w)))


def integrate_metric_warp(alpha: float, t_end: float, dt: float = 1e-3) -> WarpProfile:
    """RK4 for w' = -2 tan(alpha + t) w from w(0) = 1 (stops short of the collapse)."""
    if math.cos(alpha) == 0.0:
        raise ParameterError("alpha = +-pi/2 has no normalized warp")
    steps = max(1, int(round(abs(t_end) / dt)))
    h = t_end / steps
    state = np.array([0.0, 1.0])

    def rhs(u):
        return np.array([1.0, -2.0 * math.tan(alpha + u[0]) * u[1]])

    out = [state]
    for _ in range(steps):
        state = rk4_step(rhs, state, h)
        out.append(state)
    arr = np.asarray(out)
    return WarpProfile(alpha, arr[:, 0], arr[:, 1])


# curvature families ---------------------------------------------------------

MOBIUS = "mobius"
CONSTANT = "constant_minus_a"


@dataclass(frozen=True)
class CurvatureFamily:
    a: float
    mu: float = 0.0
    branch: str = MOBIUS

    def __post_init__(self):
        if self.branch not in (MOBIUS, CONSTANT):
            raise ParameterError(f"unknown branch {self.branch!r}")
        if self.a == 0.0:
            raise ParameterError("a must be nonzero")

    @property
    def omega(self) -> float:
        return math.sqrt(1.0 + self.a * self.a)

    def min_denominator(self, s: float) -> float:
        """min |a - mu cos(omega s')| over s' between 0 and s."""
        w = self.omega
        lo, hi = sorted((0.0, w * s))
        ends = [math.cos(lo), math.cos(hi)]
        cmin, cmax = min(ends), max(ends)
        k = math.ceil(lo / math.pi)
        while k * math.pi <= hi:
            c = 1.0 if k % 2 == 0 else -1.0
            cmin, cmax = min(cmin, c), max(cmax, c)
            k += 1
        if self.mu == 0.0:
            return abs(self.a)
        root = self.a / self.mu
        if cmin <= root <= cmax:
            return 0.0
        return min(abs(self.a - self.mu * cmin), abs(self.a - self.mu * cmax))

    def value(self, s):
        s = np.asarray(s, dtype=float)
        if self.branch == CONSTANT:
            return np.full_like(s, -self.a)
        c = np.cos(self.omega * s)
        return (self.a * self.mu * c + 1.0) / (self.a - self.mu * c)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.branch == CONSTANT:
            return np.zeros_like(s)
        w = self.omega
        c = np.cos(w * s)
        return -w * np.sin(w * s) * self.mu * (1.0 + self.a ** 2) / (self.a - self.mu * c) ** 2

    def to_dict(self) -> dict:
        return {"a": self.a, "mu": self.mu, "branch": self.branch}


def curvature_closed_form(family: CurvatureFamily, s: float) -> float:
    if family.branch == MOBIUS:
        smax = float(np.max(np.abs(s)))
        if family.min_denominator(smax) < 1e-10:
            raise SingularFamilyError(f"a - mu cos(omega s) vanishes on [0, {smax}]")
    return family.value(s)


def curvature_ode_residual(lam, a: float, s_grid) -> float:
    """max |omega cos(omega s) lam' + sin(omega s)(lam + a)(a lam - 1)| on the grid.

    ``lam`` may be a :class:`CurvatureFamily`, a callable returning values
    (differentiated numerically) or an array of samples on ``s_grid``.
    """
    s = np.asarray(s_grid, dtype=float)
    w = math.sqrt(1.0 + a * a)
    if np.any(np.abs(np.cos(w * s)) < 1e-12):
        raise ParameterError("grid touches a zero of cos(omega s)")
    if isinstance(lam, CurvatureFamily):
        if lam.branch == MOBIUS and lam.min_denominator(float(np.max(np.abs(s)))) < 1e-10:
            raise SingularFamilyError("family is singular on the grid")
        vals, dvals = lam.value(s), lam.derivative(s)
    elif callable(lam):
        vals = np.asarray(lam(s), dtype=float)
        h = 1e-5
        dvals = (np.asarray(lam(s + h)) - np.asarray(lam(s - h))) / (2 * h)
    else:
        vals = np.asarray(lam, dtype=float)
        dvals = np.gradient(vals, s, edge_order=2)
    res = w * np.cos(w * s) * dvals + np.sin(w * s) * (vals + a) * (a * vals - 1.0)
    return float(np.max(np.abs(res)))


# Neumann curvature equation -------------------------------------------------

BLOWUP = 1e6


@dataclass
class NeumannCurvatureResult:
    s: np.ndarray
    lam: np.ndarray
    product: np.ndarray  # lam(s) cos(s)
    monotone: bool
    blowup_s: float | None

    @property
    def bounded(self) -> bool:
        return self.blowup_s is None and float(np.max(np.abs(self.lam))) < BLOWUP


def neumann_product_exact(L: float, lambda0: float, s):
    """Closed form of lam(s) cos(s) for the Neumann curvature equation."""
    K = math.sqrt(L * L - 1.0)
    s = np.asarray(s, dtype=float)
    return lambda0 / (1.0 - lambda0 * np.tan(s) / K)


def neumann_curvature_flow(L: float, lambda0: float, s_end: float, samples: int = 2001) -> NeumannCurvatureResult:
    """Integrate K cos(s) lam' - K sin(s) lam = lam^2, K = sqrt(L^2 - 1), from s = 0."""
    if L <= 1.0:
        raise ParameterError("need L > 1")
    if not abs(s_end) < math.pi / 2:
        raise ParameterError("need |s_end| < pi/2")
    K = math.sqrt(L * L - 1.0)

    def rhs(s, y):
        lam = y[0]
        return [(lam * lam + K * math.sin(s) * lam) / (K * math.cos(s))]

    def escape(s, y):
        return abs(y[0]) - BLOWUP

    escape.terminal = True
    grid = np.linspace(0.0, s_end, samples)
    sol = solve_ivp(rhs, (0.0, s_end), [lambda0], method="DOP853", t_eval=grid, events=escape,
                    rtol=1e-12, atol=1e-14)
    if sol.status == -1:
        raise SolverError(sol.message)
    s = sol.t
    lam = sol.y[0]
    blow = float(sol.t_events[0][0]) if len(sol.t_events[0]) else None
    prod = lam * np.cos(s)
    direction = 1.0 if s_end >= 0 else -1.0
    steps = np.diff(prod) * direction
    scale = np.maximum(1.0, np.abs(prod[1:]))
    monotone = bool(np.all(steps >= -1e-10 * scale))
    return NeumannCurvatureResult(s, lam, prod, monotone, blow)


# radial graph equation for phi ----------------------------------------------

FLAT_DISK = "flat_disk"
ROUND_CAP = "round_cap"


def phi_plateau(a: float) -> float:
    """The root of tan(phi) = -1/a in (0, pi/2), found by bracketing."""
    if a >= 0:
        raise ParameterError("the graph equation needs a < 0")
    return brentq(lambda p: math.cos(p) + a * math.sin(p), 0.0, math.pi / 2, xtol=1e-15, rtol=1e-15)


def phi_slope(a: float, phi):
    """dphi/drho = cos(phi) sqrt(cos^2 phi - a^2 sin^2 phi) / (|a| sin phi)."""
    phi = np.asarray(phi, dtype=float)
    D = np.cos(phi) ** 2 - a * a * np.sin(phi) ** 2
    return np.cos(phi) * np.sqrt(np.maximum(D, 0.0)) / (abs(a) * np.sin(phi))


def graph_equation_residual(a: float, phi, dphi):
    """cos phi / sqrt(1 + phi'^2 / cos^2 phi) + a sin phi."""
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi)
    return c / np.sqrt(1.0 + (np.asarray(dphi) / c) ** 2) + a * np.sin(phi)


def _central_slope(y, x):
    """Fourth-order centered differences on a uniform grid (second order at the two ends)."""
    d = np.gradient(y, x, edge_order=2)
    h = x[1] - x[0]
    if len(y) >= 5 and np.allclose(np.diff(x), h, rtol=1e-9, atol=0.0):
        d[2:-2] = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    return d


@dataclass
class PhiProfile:
    a: float
    base: str
    rho: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    rho_plateau: float | None
    h: float = field(default=0.0)
    rho_start: float = 0.0

    @property
    def plateau(self) -> float:
        return math.pi - math.atan2(1.0, self.a)

    def interior_mask(self, phi_floor: float = 1e-3) -> np.ndarray:
        return (self.phi > phi_floor) & (self.rho > 0)

    def equation_residual(self, phi_floor: float = 1e-3) -> float:
        m = self.interior_mask(phi_floor)
        return float(np.max(np.abs(graph_equation_residual(self.a, self.phi[m], self.dphi[m]))))

    def fd_equation_residual(self, rho_floor: float = 0.1, margin: int = 3) -> float:
        """Same residual with a centered-difference slope, away from the two ends."""
        d = _central_slope(self.phi, self.rho)
        m = self.rho - self.rho_start >= rho_floor
        if self.rho_plateau is not None:
            m &= self.rho < self.rho_plateau - margin * self.h
        m[:margin] = False
        m[-margin:] = False
        return float(np.max(np.abs(graph_equation_residual(self.a, self.phi[m], d[m]))))

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.phi) >= 0.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rho", "phi", "residual"])
        res = np.zeros_like(self.phi)
        m = self.interior_mask()
        res[m] = graph_equation_residual(self.a, self.phi[m], self.dphi[m])
        for r, p, e in zip(self.rho, self.phi, res):
            w.writerow([repr(float(r)), repr(float(p)), repr(float(e))])
        return buf.getvalue()


def phi_radial_solve(a: float, base: str = FLAT_DISK, rho_max: float = 2.0, h: float = 1e-3,
                     initial_slope_scale: float = 1.0) -> PhiProfile:
    """March the radial graph equation inward from phi = 0 at rho = 0.

    Near the boundary the slope is singular like 1/phi, so the first phase
    integrates q = phi^2.  Near the plateau the slope vanishes like
    sqrt(phi* - phi), so the second phase integrates w = sqrt(phi* - phi),
    which reaches zero at a finite rho; from there phi stays at phi*.
    ``initial_slope_scale`` rescales the state after the first step.
    """
    if a >= 0:
        raise ParameterError("the graph equation needs a < 0")
    if base not in (FLAT_DISK, ROUND_CAP):
        raise ParameterError(f"unknown base {base!r}")
    if base == ROUND_CAP and rho_max > math.pi:
        raise ParameterError("a round cap has radius below pi")
    if h <= 0 or rho_max <= 0:
        raise ParameterError("need positive h and rho_max")
    star = math.pi - math.atan2(1.0, a)
    A = abs(a)
    wfac = 1.0 + a * a

    def radicand(phi):
        D = math.cos(phi) ** 2 - a * a * math.sin(phi) ** 2
        if D < -1e-12:
            raise SolverError(f"radicand {D:.3e} is negative at phi = {phi:.6f}")
        return max(D, 0.0)

    def q_rhs(q):
        phi = math.sqrt(max(q[0], 0.0))
        ratio = 1.0 if phi < 1e-8 else phi / math.sin(phi)
        return np.array([2.0 * ratio * math.cos(phi) * math.sqrt(radicand(phi)) / A])

    def w_rhs(w):
        u = w[0] * w[0]
        phi = star - u
        sinc = 1.0 if u < 1e-8 else math.sin(u) / u
        rad = wfac * math.sin(star + phi) * sinc
        return np.array([-math.cos(phi) * math.sqrt(max(rad, 0.0)) / (2.0 * A * math.sin(phi))])

    n_steps = int(math.floor(rho_max / h + 1e-9))
    rho = np.arange(n_steps + 1) * h
    phi = np.zeros(n_steps + 1)
    rho_plateau = None
    q = np.array([0.0])
    k = 0
    while k < n_steps:
        q_new = rk4_step(q_rhs, q, h)
        if k == 0:
            q_new = q_new * initial_slope_scale
        k += 1
        q = q_new
        phi[k] = math.sqrt(q[0])
        if phi[k] > 0.5 * star:
            break
    w = np.array([math.sqrt(star - phi[k])])
    while k < n_steps and rho_plateau is None:
        w_new = rk4_step(w_rhs, w, h)
        if w_new[0] <= 0.0:
            base_w = w
            tau = brentq(lambda s: rk4_step(w_rhs, base_w, s)[0], 0.0, h, xtol=1e-15)
            rho_plateau = rho[k] + tau
            phi[k + 1:] = star
            break
        k += 1
        w = w_new
        phi[k] = star - w[0] ** 2
    dphi = np.where(phi >= star, 0.0, phi_slope(a, np.where(phi > 0, phi, 1.0)))
    dphi[phi == 0.0] = math.inf
    return PhiProfile(a, base, rho, phi, dphi, rho_plateau, h)


def phi_inverse_quadrature(a: float, phi: float) -> float:
    """rho at which the radial solution reaches ``phi``: integral of 1/slope."""
    from scipy.integrate import quad

    star = math.pi - math.atan2(1.0, a)
    if not 0.0 <= phi <= star:
        raise ParameterError("phi outside [0, plateau]")

    def g(psi):
        # 1/slope times sqrt(star - psi); smooth on [0, star]
        if star - psi < 1e-12:
            return abs(a) * math.sin(star) / (math.cos(star) * math.sqrt((1 + a * a) * math.sin(2 * star)))
        D = math.cos(psi) ** 2 - a * a * math.sin(psi) ** 2
        return abs(a) * math.sin(psi) * math.sqrt(star - psi) / (math.cos(psi) * math.sqrt(D))

    if phi == star:
        val, _ = quad(g, 0.0, star, weight="alg", wvar=(0.0, -0.5), epsabs=1e-13, epsrel=1e-13)
        return val
    val, _ = quad(lambda p: g(p) / math.sqrt(star - p), 0.0, phi, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def uniqueness_identity_residual(phi_plus: PhiProfile, phi_minus: PhiProfile, rho_floor: float = 0.1,
                              margin: int = 3) -> float:
    """Residual of grad(p - m) . grad(p + m) = Q(p) - Q(m), Q(x) = cos^4 x (1/(a^2 sin^2 x) - 1/cos^2 x).

    Gradients are centered differences on the shared grid.  Points closer
    than ``rho_floor`` to either profile's boundary (where phi ~ sqrt(rho)
    defeats the difference quotient) or within ``margin`` cells of a plateau
    junction are left out.
    """
    if phi_plus.rho.shape != phi_minus.rho.shape or not np.allclose(phi_plus.rho, phi_minus.rho):
        raise ParameterError("profiles must share a grid")
    a = phi_plus.a
    rho = phi_plus.rho
    p, m = phi_plus.phi, phi_minus.phi
    dp = _central_slope(p, rho)
    dm = _central_slope(m, rho)
    mask = (rho - phi_plus.rho_start >= rho_floor) & (rho - phi_minus.rho_start >= rho_floor)
    mask &= (p > 0) & (m > 0)
    h = rho[1] - rho[0]
    for prof in (phi_plus, phi_minus):
        if prof.rho_plateau is not None:
            mask &= np.abs(rho - prof.rho_plateau) > margin * h
    mask[:margin] = False
    mask[-margin:] = False
    if not mask.any():
        raise ParameterError("no admissible interior points")

    def Q(x):
        return np.cos(x) ** 4 * (1.0 / (a * a * np.sin(x) ** 2) - 1.0 / np.cos(x) ** 2)

    p, m, dp, dm = p[mask], m[mask], dp[mask], dm[mask]
    lhs = (dp - dm) * (dp + dm)
    rhs = Q(p) - Q(m)
    return float(np.max(np.abs(lhs - rhs)))


def shifted_profile(profile: PhiProfile, shift: float) -> PhiProfile:
    """The same solution with its boundary moved to rho = shift (phi = 0 before)."""
    k = int(round(shift / profile.h))
    phi = np.concatenate([np.zeros(k), profile.phi[: len(profile.phi) - k]])
    dphi = np.concatenate([np.full(k, math.inf), profile.dphi[: len(profile.dphi) - k]])
    rp = None if profile.rho_plateau is None else profile.rho_plateau + k * profile.h
    return PhiProfile(profile.a, profile.base, profile.rho.copy(), phi, dphi, rp, profile.h,
                      profile.rho_start + k * profile.h)


# warped model for a < 0 ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class WarpedModel(SphereDomain):
    """Band s_minus <= s <= s_plus, s = arcsin(y_{n+1}), in S^n.

    This is ds^2 + cos^2(s) g_round with f = L sin(s).
    """

    n: int
    a: float
    s_minus: float
    s_plus: float
    L: float = 1.0

    @property
    def f(self) -> ObataFunction:
        return ObataFunction.axial(self.n, self.L)

    def warp(self, s):
        return np.cos(np.asarray(s)) ** 2

    def inside(self, y):
        z = np.asarray(y)[..., -1]
        return np.minimum(math.sin(self.s_plus) - z, z - math.sin(self.s_minus))

    def inside_gradient(self, y):
        y = np.asarray(y, dtype=float)
        z = y[..., -1]
        upper = (math.sin(self.s_plus) - z) <= (z - math.sin(self.s_minus))
        g = np.zeros_like(y)
        g[..., -1] = np.where(upper, -1.0, 1.0)
        return g

    def robin_residuals(self) -> tuple[float, float]:
        return warped_robin_residuals(self.a, self.s_minus, self.s_plus, self.L)

    def sample_boundary(self, rng: np.random.Generator, size: int, component: str = "lower") -> np.ndarray:
        s = self.s_minus if component == "lower" else self.s_plus
        v = rng.standard_normal((size, self.n))
        v = math.cos(s) * v / np.linalg.norm(v, axis=1, keepdims=True)
        return np.hstack([v, np.full((size, 1), math.sin(s))])

    @property
    def crossing_time(self) -> float:
        return self.s_plus - self.s_minus


def warped_robin_residuals(a: float, s_minus: float, s_plus: float, L: float = 1.0) -> tuple[float, float]:
    """df/dnu + a f at the two ends, outward normals -d/ds and +d/ds."""
    lower = -L * math.cos(s_minus) + a * L * math.sin(s_minus)
    upper = L * math.cos(s_plus) + a * L * math.sin(s_plus)
    return lower, upper


def warped_model_build(a: float, base_metric_tag: str = "round", s_interval=None, n: int = 3,
                       L: float = 1.0) -> WarpedModel:
    if a >= 0:
        raise ParameterError("the warped model is the a < 0 case")
    if base_metric_tag != "round":
        raise ParameterError("only the round base metric is embedded")
    theta = math.atan2(1.0, a)
    if s_interval is None:
        s_interval = (theta - math.pi, math.pi - theta)
    s_minus, s_plus = map(float, s_interval)
    if not -math.pi / 2 < s_minus < s_plus < math.pi / 2:
        raise ParameterError("s_interval must be an increasing pair inside (-pi/2, pi/2)")
    lower, upper = warped_robin_residuals(a, s_minus, s_plus, L)
    if max(abs(lower), abs(upper)) > BOUNDARY_TOL:
        raise ParameterError(f"Robin residuals at the ends are ({lower:.3e}, {upper:.3e})")
    return WarpedModel(n, a, s_minus, s_plus, L)
