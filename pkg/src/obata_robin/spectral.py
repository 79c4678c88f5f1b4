"""Radial eigenproblems on geodesic caps of the round sphere.

A separated eigenfunction u(r) Y(omega) of degree ell satisfies

    u'' + (n-1) cot(r) u' - k u / sin(r)^2 + xi u = 0,   k = ell (ell + n - 2),

on 0 < r < R.  The smallest xi with the requested boundary condition at r = R
is found by shooting from a Frobenius start near r = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from .errors import BracketError, ParameterError, SolverError

EPS = 1e-6
DIRICHLET = "dirichlet"
NEUMANN = "neumann"
ROBIN = "robin"

# Laurent/Taylor coefficients of cot r (times r) and 1/sin^2 r (times r^2) in powers of r^2
_COT = (1.0, -1.0 / 3.0, -1.0 / 45.0, -2.0 / 945.0)
_CSC2 = (1.0, 1.0 / 3.0, 1.0 / 15.0, 2.0 / 189.0)


@dataclass(frozen=True)
class SturmLiouvilleProblem:
    n: int
    R: float
    ell: int = 0
    bc: str = ROBIN
    a: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("n must be at least 2")
        if not 0.0 < self.R < math.pi:
            raise ParameterError("R must lie in (0, pi)")
        if self.ell < 0:
            raise ParameterError("ell must be nonnegative")
        if self.bc not in (DIRICHLET, NEUMANN, ROBIN):
            raise ParameterError(f"unknown boundary condition {self.bc!r}")
        if self.bc == ROBIN and (self.a is None or self.a == 0.0):
            raise ParameterError("a Robin problem needs a nonzero a")

    @property
    def k(self) -> int:
        return self.ell * (self.ell + self.n - 2)

    @classmethod
    def robin_cap(cls, n: int, theta: float, ell: int = 0, a: float | None = None):
        """Cap of radius pi/2 - theta with a = cot(theta) unless ``a`` is given."""
        if not 0.0 < theta < math.pi / 2:
            raise ParameterError("theta must lie in (0, pi/2)")
        return cls(n, math.pi / 2 - theta, ell, ROBIN, 1.0 / math.tan(theta) if a is None else a)

    def to_dict(self) -> dict:
        return {"n": self.n, "R": self.R, "ell": self.ell, "bc": self.bc, "a": self.a}

    @classmethod
    def from_dict(cls, d: dict):
        return cls(int(d["n"]), float(d["R"]), int(d.get("ell", 0)), d.get("bc", ROBIN), d.get("a"))


def frobenius_coefficients(n: int, ell: int, xi: float, terms: int = 3) -> list[float]:
    """Coefficients c_j of u = r^ell sum_j c_j r^{2j}, c_0 = 1."""
    k = ell * (ell + n - 2)
    coef = [1.0]
    for J in range(1, terms):
        acc = xi * coef[J - 1]
        for i in range(1, J + 1):
            if i < len(_COT):
                acc += (n - 1) * _COT[i] * (ell + 2 * (J - i)) * coef[J - i]
                acc -= k * _CSC2[i] * coef[J - i]
        coef.append(-acc / (2 * J * (2 * ell + 2 * J + n - 2)))
    return coef


_BC_CODE = {DIRICHLET: 0, NEUMANN: 1, ROBIN: 2}


def _regular_parts(r):
    """cot(r)/r - 1/r^2 and 1/sin(r)^2 - 1/r^2, by series where the direct forms cancel."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    small = r < 1e-2
    safe = np.where(small, 1.0, r)
    g1 = np.where(small, -1.0 / 3.0 - r2 * (1.0 / 45.0 + r2 * (2.0 / 945.0 + r2 / 4725.0)),
                  1.0 / (safe * np.tan(safe)) - 1.0 / (safe * safe))
    g2 = np.where(small, 1.0 / 3.0 + r2 * (1.0 / 15.0 + r2 * (2.0 / 189.0 + r2 / 675.0)),
                  1.0 / np.sin(safe) ** 2 - 1.0 / (safe * safe))
    return g1, g2


def _shoot(xi, n, ell, R, a, code, dense=False, max_step=np.inf, rtol=1e-12):
    """Integrate v = u / r^ell for every parameter row at once.

    Rows are mapped to the common interval t in [0, 1] by r = eps + (R - eps) t,
    so problems with different radii share one adaptive solve.  Returns the
    solver output and the boundary residual (divided by R^ell) per row.
    """
    xi, n, ell, R, a, code = (np.atleast_1d(np.asarray(x, dtype=float)).ravel()
                              for x in np.broadcast_arrays(xi, n, ell, R, a, code))
    k = ell * (ell + n - 2)
    span = R - EPS
    c = frobenius_coefficients(n, ell, xi)
    v0 = sum(cj * EPS ** (2 * j) for j, cj in enumerate(c))
    dv0 = sum(2 * j * cj * EPS ** (2 * j - 1) for j, cj in enumerate(c))
    m = xi.size

    def rhs(t, y):
        r = EPS + span * t
        v, dv = y[:m], y[m:]
        g1, g2 = _regular_parts(r)
        q = (n - 1) * ell * g1 - k * g2
        d2 = -(2.0 * ell / r + (n - 1) / np.tan(r)) * dv - (q + xi) * v
        return np.concatenate([span * dv, span * d2])

    sol = solve_ivp(rhs, (0.0, 1.0), np.concatenate([v0 * np.ones(m), dv0 * np.ones(m)]), method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=dense, max_step=max_step)
    if sol.status != 0:
        raise SolverError(sol.message)
    v, dv = sol.y[:m, -1], sol.y[m:, -1]
    du = dv + ell * v / R
    F = np.select([code == 0, code == 1], [v, du], du + a * v)
    return sol, F


def _problem_args(problems):
    return tuple(np.array(col, dtype=float) for col in zip(*[
        (p.n, p.ell, p.R, p.a if p.a is not None else 0.0, _BC_CODE[p.bc]) for p in problems]))


def bc_function(problem: SturmLiouvilleProblem, max_step=np.inf) -> Callable:
    """xi -> boundary residual of the shooting solution (divided by R^ell)."""
    args = _problem_args([problem])

    def F(xi):
        return _shoot(xi, *args, max_step=max_step)[1].reshape(np.shape(xi))

    return F


def _find_brackets(problems, lo, hi, points, max_step):
    """First sign change of the boundary residual on a uniform grid, per problem."""
    P = len(problems)
    n, ell, R, a, code = _problem_args(problems)
    grid = np.linspace(lo, hi, points, axis=-1)  # (P, points)
    rep = lambda x: np.repeat(x, points)
    _, F = _shoot(grid.ravel(), rep(n), rep(ell), rep(R), rep(a), rep(code), max_step=max_step)
    F = F.reshape(P, points)
    out = []
    for i in range(P):
        found = None
        for j in range(points - 1):
            if F[i, j] == 0.0:
                found = (grid[i, j], grid[i, j])
                break
            if F[i, j] * F[i, j + 1] < 0.0:
                found = (grid[i, j], grid[i, j + 1])
                break
        out.append(found)
    return out


def smallest_eigenvalues(problems, scan_points: int = 48, max_step: float = np.inf,
                         expand: int = 4) -> np.ndarray:
    """Smallest eigenvalue of each problem, all solved together.

    Each problem's residual is scanned on [0.1, 4n + 4k]; where no sign change
    shows up the window moves to [hi, 2 hi] (at most ``expand`` times).  The
    brackets are then refined together by an elementwise bracketing root finder.
    """
    from scipy.optimize.elementwise import find_root

    problems = list(problems)
    P = len(problems)
    lo = np.full(P, 0.1)
    hi = np.array([4.0 * p.n + 4.0 * p.k for p in problems])
    left = np.full(P, np.nan)
    right = np.full(P, np.nan)
    todo = np.arange(P)
    for _ in range(expand + 1):
        found = _find_brackets([problems[i] for i in todo], lo[todo], hi[todo], scan_points, max_step)
        keep = []
        for i, br in zip(todo, found):
            if br is None:
                keep.append(i)
            else:
                left[i], right[i] = br
        todo = np.array(keep, dtype=int)
        if todo.size == 0:
            break
        lo[todo], hi[todo] = hi[todo], 2.0 * hi[todo]
    if todo.size:
        bad = problems[int(todo[0])]
        raise BracketError(f"no sign change of the boundary residual for {bad} up to xi = {hi[todo[0]]}")
    xi = left.copy()
    open_ = left < right
    if open_.any():
        args = tuple(x[open_] for x in _problem_args(problems))
        res = find_root(lambda x, *ar: _shoot(x, *ar, max_step=max_step)[1].reshape(np.shape(x)),
                        (left[open_], right[open_]), args=args,
                        tolerances=dict(xatol=1e-13, xrtol=1e-15, fatol=0.0, frtol=0.0))
        if not np.all(res.success):
            raise SolverError("bracketed root refinement did not converge")
        xi[open_] = res.x
    return xi


def smallest_eigenvalue(problem: SturmLiouvilleProblem, scan_points: int = 48, max_step: float = np.inf,
                        expand: int = 4, samples: int = 401) -> EigenResult:
    """Smallest xi with a sign change of the boundary residual above 0.1.

    For Neumann problems this skips the constant mode at xi = 0.
    """
    xi = float(smallest_eigenvalues([problem], scan_points, max_step, expand)[0])
    return _package(problem, xi, max_step, samples)


@dataclass
class RadialProfile:
    f: Callable
    df: Callable
    d2f: Callable
    name: str = "custom"

    @classmethod
    def cosine(cls):
        return cls(np.cos, lambda r: -np.sin(r), lambda r: -np.cos(r), "cos")

    @classmethod
    def r_squared(cls):
        return cls(lambda r: np.asarray(r) ** 2, lambda r: 2.0 * np.asarray(r),
                   lambda r: np.full_like(np.asarray(r, dtype=float), 2.0), "r^2")

    @classmethod
    def constant(cls, value: float = 1.0):
        z = lambda r: np.zeros_like(np.asarray(r, dtype=float))
        return cls(lambda r: np.full_like(np.asarray(r, dtype=float), value), z, z, "const")

    @classmethod
    def from_samples(cls, r, values):
        """Cubic spline through samples, clamped flat at r = 0 (a smooth radial function)."""
        sp = CubicSpline(r, values, bc_type=((1, 0.0), "not-a-knot"))
        return cls(sp, sp.derivative(1), sp.derivative(2), "samples")


@dataclass
class EigenResult:
    xi: float
    ell: int
    problem: SturmLiouvilleProblem
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    bc_residual: float
    ode_residual: float
    scale: float = field(repr=False, default=1.0)
    _dense: Callable | None = field(repr=False, default=None)
    scan: list | None = None  # smallest eigenvalue per degree, when produced by a scan

    @property
    def u_samples(self):
        return list(zip(self.r.tolist(), self.u.tolist()))

    def evaluate(self, r):
        """Normalized (u, u') at radii r, using the series below the shooting start."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        v = np.empty_like(r)
        dv = np.empty_like(r)
        small = r < EPS
        if np.any(~small):
            y = self._dense(r[~small])
            v[~small], dv[~small] = y[0], y[1]
        if np.any(small):
            c = frobenius_coefficients(self.problem.n, self.ell, self.xi)
            rs = r[small]
            v[small] = sum(cj * rs ** (2 * j) for j, cj in enumerate(c))
            dv[small] = sum(2 * j * cj * rs ** (2 * j - 1) for j, cj in enumerate(c) if j > 0)
        ell = self.ell
        lead = r ** ell
        u = self.scale * lead * v
        du = self.scale * (lead * dv + (ell * r ** (ell - 1) * v if ell > 0 else 0.0))
        return u, du

    def profile(self) -> RadialProfile:
        n, k, xi = self.problem.n, self.problem.k, self.xi

        def f(r):
            return self.evaluate(r)[0]

        def df(r):
            return self.evaluate(r)[1]

        def d2f(r):
            u, du = self.evaluate(r)
            r = np.asarray(r, dtype=float)
            return -(n - 1) / np.tan(r) * du + (k / np.sin(r) ** 2 - xi) * u

        return RadialProfile(f, df, d2f, f"eigen(l={self.ell})")

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "ell": self.ell,
            "problem": self.problem.to_dict(),
            "bc_residual": self.bc_residual,
            "ode_residual": self.ode_residual,
            "scan": self.scan,
            "u_samples": [[float(r), float(u)] for r, u in zip(self.r, self.u)],
        }


def _package(problem, xi, max_step=np.inf, samples=401):
    sol, _ = _shoot(xi, *_problem_args([problem]), dense=True, max_step=max_step)
    span = problem.R - EPS

    def dense(r):
        return sol.sol((np.asarray(r) - EPS) / span)

    res = EigenResult(xi, problem.ell, problem, np.empty(0), np.empty(0), np.empty(0), 0.0, 0.0, 1.0, dense)
    r = np.linspace(EPS, problem.R, samples)
    u, _ = res.evaluate(r)
    res.scale = 1.0 / float(np.max(np.abs(u)))
    res.r = r
    res.u, res.du = res.evaluate(r)
    uR, duR = res.u[-1], res.du[-1]
    bc = {DIRICHLET: uR, NEUMANN: duR}.get(problem.bc, duR + (problem.a or 0.0) * uR)
    res.bc_residual = abs(float(bc))
    res.ode_residual = ode_residual(res)
    return res


def ode_residual(result: EigenResult, degree: int = 80) -> float:
    """Sup of the sin^2-weighted radial equation with u'' from a Chebyshev fit of u'.

    Multiplying through by sin^2 r keeps every term bounded at the pole.
    """
    p = result.problem
    lo, hi = EPS, p.R
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    _, du_nodes = result.evaluate(nodes)
    x = (2.0 * nodes - (lo + hi)) / (hi - lo)
    coef = C.chebfit(x, du_nodes, degree)
    dcoef = C.chebder(coef) * 2.0 / (hi - lo)
    r = np.linspace(lo, hi, 2001)
    u, du = result.evaluate(r)
    d2u = C.chebval((2.0 * r - (lo + hi)) / (hi - lo), dcoef)
    s = np.sin(r)
    res = s * s * d2u + (p.n - 1) * s * np.cos(r) * du - p.k * u + result.xi * s * s * u
    return float(np.max(np.abs(res)))


def first_eigenvalue_scan(n: int, R: float, bc: str, ell_max: int, a: float | None = None,
                          max_step: float = np.inf) -> EigenResult:
    """Minimum over degrees 0..ell_max of the smallest eigenvalue (ties go to the lower degree)."""
    return first_eigenvalue_scans([(n, R, bc, a)], ell_max, max_step)[0]


def first_eigenvalue_scans(cases, ell_max: int, max_step: float = np.inf) -> list[EigenResult]:
    """Batch form of :func:`first_eigenvalue_scan` over (n, R, bc, a) tuples."""
    if ell_max < 1:
        raise ParameterError("ell_max must be at least 1")
    problems = [SturmLiouvilleProblem(n, R, ell, bc, a) for (n, R, bc, a) in cases for ell in range(ell_max + 1)]
    xi = smallest_eigenvalues(problems, max_step=max_step).reshape(len(cases), ell_max + 1)
    out = []
    for i in range(len(cases)):
        j = int(np.argmin(xi[i] + 1e-12 * np.arange(ell_max + 1)))
        res = _package(problems[i * (ell_max + 1) + j], float(xi[i, j]), max_step)
        res.scan = xi[i].tolist()
        out.append(res)
    return out


def reilly_identity_check(n: int, R: float, profile: RadialProfile) -> tuple[float, float, float]:
    """Both sides of the Reilly formula for a radial function on the cap of radius R.

    The common factor vol(S^{n-1}) is dropped from both sides.
    """
    if not 0.0 < R < math.pi:
        raise ParameterError("R must lie in (0, pi)")
    f0 = float(np.asarray(profile.f(np.array([0.0])))[0])
    if not math.isfinite(f0):
        raise ParameterError("profile is singular at r = 0")

    def integrand(r):
        if r == 0.0:
            return 0.0
        d1 = float(profile.df(np.array([r]))[0])
        d2 = float(profile.d2f(np.array([r]))[0])
        t = (n - 1) * d1 / math.tan(r)
        lap = d2 + t
        hess2 = d2 * d2 + (n - 1) * (d1 / math.tan(r)) ** 2
        return (lap * lap - hess2 - (n - 1) * d1 * d1) * math.sin(r) ** (n - 1)

    lhs, _ = quad(integrand, 0.0, R, epsabs=1e-12, epsrel=1e-10, limit=200)
    dR = float(profile.df(np.array([R]))[0])
    rhs = math.sin(R) ** (n - 1) * (n - 1) / math.tan(R) * dR * dR
    defect = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
    return lhs, rhs, defect


def robin_energy_defect(profile: RadialProfile, n: int, R: float, a: float, ell: int = 0) -> float:
    """|int (n u^2 - |grad u|^2) - a * boundary int u^2| / max(1, |boundary int u^2|).

    Angular factors of the mode are common to every term and dropped.
    """
    k = ell * (ell + n - 2)

    def integrand(r):
        if r == 0.0:
            return 0.0
        u = float(profile.f(np.array([r]))[0])
        du = float(profile.df(np.array([r]))[0])
        return (n * u * u - du * du - k * u * u / math.sin(r) ** 2) * math.sin(r) ** (n - 1)

    vol, _ = quad(integrand, 0.0, R, epsabs=1e-13, epsrel=1e-12, limit=200)
    uR = float(profile.f(np.array([R]))[0])
    bdry = uR * uR * math.sin(R) ** (n - 1)
    return abs(vol - a * bdry) / max(1.0, abs(bdry))


def eigen_boundary_identity(result: EigenResult, a: float, n: int, R: float) -> float:
    if result.problem.bc != ROBIN:
        raise ParameterError("the boundary identity is for Robin eigenfunctions")
    if abs(result.xi - n) > 1e-6:
        raise ParameterError(f"eigenvalue {result.xi} is not within 1e-6 of n = {n}")
    return robin_energy_defect(result.profile(), n, R, a, result.ell)


def cap_hypotheses(n: int, theta: float) -> dict:
    """Margins of h >= -2a g and H >= (n-1)/a on the Robin cap of radius pi/2 - theta."""
    a = 1.0 / math.tan(theta)
    R = math.pi / 2 - theta
    h = 1.0 / math.tan(R)
    H = (n - 1) * h
    return {"a": a, "h": h, "h_margin": h + 2.0 * a, "H": H, "H_margin": H - (n - 1) / a}
