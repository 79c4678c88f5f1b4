"""Boundary Taylor jets of a metric and a solution of  Hess f + phi(f) g = 0.

In a collar  g = dr^2 + gbar(r)  with r the distance to the boundary,

    gbar(r) = sum_k r^k gbar_k,    f = sum_k r^k fbar_k,

and the whole jet is fixed by (gbar_0, fbar_0, fbar_1) once fbar_1 != 0.
The recursion is written once and runs on two representations:

* ``homogeneous``: every tensor is a scalar multiple of one reference metric
  and every function is constant.  Scalars may be floats or sympy
  expressions (for exact arithmetic in sin(theta), cos(theta)).
* ``grid``: fields sampled on a periodic grid over [0, 2pi)^d; spatial
  derivatives are spectral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .errors import ParameterError, SolverError

HOMOGENEOUS = "homogeneous"
GRID = "grid"

SIN, COS = sp.symbols("s c", real=True)  # stand-ins for sin(theta), cos(theta)
_PYTH = SIN ** 2 + COS ** 2 - 1
SPECTRAL_FLOOR = 1e-13


# phi handles -------------------------------------------------------------

def phi_identity(order: int) -> list[Callable]:
    return [lambda x: x, lambda x: 1] + [lambda x: 0] * max(order - 1, 0)


def phi_zero(order: int) -> list[Callable]:
    return [lambda x: 0] * (order + 1)


# backends ----------------------------------------------------------------

class _HomogeneousOps:
    """Tensors and functions are plain scalars (coefficients of a reference metric)."""

    kind = HOMOGENEOUS

    def scale(self, f, g):
        return f * g

    def inv(self, g):
        return 1 / g

    def compose(self, A, B):
        return A * B

    def dd(self, f):
        return 0

    def d(self, f):
        return 0

    def christoffel_term(self, G, g, f):
        return 0

    def mixed_term(self, g, G, f):
        return 0

    def nonvanishing(self, f) -> bool:
        if isinstance(f, sp.Basic):
            return not _exact_zero(f)
        return f != 0

    def sup(self, x) -> float:
        if isinstance(x, sp.Basic):
            return 0.0 if _exact_zero(x) else float(abs(sp.N(x.subs({SIN: 0.6, COS: 0.8}))))
        return float(abs(x))


def _spectral_derivative(field_, axis: int):
    """d/dx_axis of a periodic field on [0, 2pi); exactly zero for constant fields."""
    if np.all(field_ == field_.flat[0]):
        return np.zeros_like(field_)
    N = field_.shape[axis]
    k = np.fft.fftfreq(N, d=1.0 / N)
    if N % 2 == 0:
        k[N // 2] = 0.0
    shape = [1] * field_.ndim
    shape[axis] = N
    spec = np.fft.fft(field_, axis=axis)
    # modes at roundoff level carry no signal and get amplified by the recursion
    spec[np.abs(spec) <= SPECTRAL_FLOOR * np.max(np.abs(spec))] = 0.0
    spec = spec * (1j * k.reshape(shape))
    return np.real(np.fft.ifft(spec, axis=axis))


class _GridOps:
    """Functions are arrays of shape grid; tensors have two trailing (d, d) axes."""

    kind = GRID

    def __init__(self, dim: int):
        self.dim = dim

    def scale(self, f, g):
        return np.asarray(f)[..., None, None] * g

    def inv(self, g):
        return np.linalg.inv(g)

    def compose(self, A, B):
        return A @ B

    def d(self, f):
        f = np.asarray(f, dtype=float)
        return np.stack([_spectral_derivative(f, ax) for ax in range(self.dim)], axis=-1)

    def dd(self, f):
        df = self.d(f)
        return np.stack([self.d(df[..., a]) for a in range(self.dim)], axis=-2)

    def dg(self, g):
        """dg[..., c, a, b] = d_c g_ab."""
        return np.stack([_spectral_derivative(g, ax) for ax in range(self.dim)], axis=-3)

    def lam(self, g):
        """Lambda_{ab d}(g) = d_a g_bd + d_b g_ad - d_d g_ab."""
        D = self.dg(g)
        return (np.einsum("...abd->...abd", D)
                + np.einsum("...bad->...abd", D)
                - np.einsum("...dab->...abd", D))

    def christoffel_term(self, G, g, f):
        """G^{dc} Lambda_{abc}(g) d_d f."""
        return np.einsum("...dc,...abc,...d->...ab", G, self.lam(g), self.d(f))

    def mixed_term(self, g, G, f):
        """g_{ad} G^{bd} d_b f."""
        return np.einsum("...ad,...bd,...b->...a", g, G, self.d(f))

    def nonvanishing(self, f) -> bool:
        return bool(np.all(np.asarray(f) != 0))

    def sup(self, x) -> float:
        return float(np.max(np.abs(x))) if np.size(x) else 0.0


def _exact_zero(expr) -> bool:
    expr = sp.together(sp.sympify(expr))
    num, _ = sp.fraction(expr)
    num = sp.expand(num)
    if num == 0:
        return True
    return sp.expand(sp.rem(sp.Poly(num, SIN), sp.Poly(_PYTH, SIN)).as_expr()) == 0


@dataclass
class BoundaryData:
    backend: str
    g0: object
    f0: object
    f1: object
    phi: Sequence[Callable] = field(default_factory=lambda: phi_identity(16))
    reference: object = "g_round"  # homogeneous only: what g0 multiplies

    def __post_init__(self):
        if self.backend == HOMOGENEOUS:
            self.ops = _HomogeneousOps()
            g0 = self.g0
            if not isinstance(g0, sp.Basic) and not g0 > 0:
                raise ParameterError("g0 scale must be positive")
        elif self.backend == GRID:
            g0 = np.asarray(self.g0, dtype=float)
            f0 = np.asarray(self.f0, dtype=float)
            if g0.shape[:-2] != f0.shape or g0.shape[-1] != g0.shape[-2] or g0.shape[-1] != f0.ndim:
                raise ParameterError("grid shapes: f (N1..Nd), g (N1..Nd, d, d)")
            if not np.all(np.linalg.eigvalsh(0.5 * (g0 + np.swapaxes(g0, -1, -2))) > 0):
                raise ParameterError("g0 must be positive definite at every sample")
            self.g0, self.f0, self.f1 = g0, f0, np.asarray(self.f1, dtype=float)
            self.ops = _GridOps(f0.ndim)
        else:
            raise ParameterError(f"unknown backend {self.backend!r}")
        if not self.ops.nonvanishing(self.f1):
            raise ParameterError("Neumann data f1 must be nonzero at every sample")


@dataclass
class BoundaryJet:
    backend: str
    K: int
    g_coeffs: list
    f_coeffs: list
    Ginv_coeffs: list
    F_coeffs: list
    data: BoundaryData = field(repr=False)

    def to_dict(self) -> dict:
        def enc(x):
            if isinstance(x, sp.Basic):
                return format_exact(x)
            if isinstance(x, np.ndarray):
                return x.tolist()
            return float(x)

        return {
            "backend": self.backend,
            "K": self.K,
            "g_coeffs": [enc(x) for x in self.g_coeffs],
            "f_coeffs": [enc(x) for x in self.f_coeffs],
        }


def _series_mul(a: list, b: list, order: int):
    """Cauchy product truncated at ``order`` (lists of coefficients, entries may be arrays)."""
    out = []
    for k in range(order + 1):
        acc = 0
        for i in range(k + 1):
            if i < len(a) and k - i < len(b):
                acc = acc + a[i] * b[k - i]
        out.append(acc)
    return out


def _compose_phi(phi, fc: list, k: int):
    """Coefficient of r^k in phi(sum_j fc_j r^j), using derivative handles at fc_0."""
    if k == 0:
        return phi[0](fc[0])
    delta = [0] + list(fc[1: k + 1])
    power = [1]
    total = 0
    for m in range(1, k + 1):
        power = _series_mul(power, delta, k)
        if m >= len(phi):
            raise ParameterError(f"phi needs derivative handles up to order {k}")
        dm = phi[m](fc[0])
        if isinstance(dm, (int, float)) and dm == 0:
            continue
        total = total + dm * power[k] / math.factorial(m)
    return total


def jet_extend(data: BoundaryData, K: int) -> BoundaryJet:
    """Taylor coefficients of (gbar, f) up to order K (f up to K + 1)."""
    if K < 0:
        raise ParameterError("K must be nonnegative")
    ops = data.ops
    f = [data.f0, data.f1]
    g = [data.g0]
    G = [ops.inv(data.g0)]
    F = [_compose_phi(data.phi, f, 0)]
    f.append(-F[0] / 2)
    for k in range(K):
        # group (ii): solve for gbar_{k+1}
        acc = ops.dd(f[k])
        for j in range(1, k + 1):
            acc = acc + ops.scale(j * (k + 2 - j) * f[k + 2 - j], g[j]) / 2
        if ops.kind == GRID:
            for i in range(k + 1):
                for j in range(k - i + 1):
                    acc = acc - ops.christoffel_term(G[i], g[j], f[k - i - j]) / 2
        for i in range(k + 1):
            acc = acc + ops.scale(F[i], g[k - i])
        g.append(ops.scale(-2 / ((k + 1) * f[1]), acc))
        # inverse metric series
        s = ops.compose(g[1], G[k])
        for j in range(2, k + 2):
            s = s + ops.compose(g[j], G[k + 1 - j])
        G.append(-ops.compose(G[0], s))
        # group (i): next value coefficients
        F.append(_compose_phi(data.phi, f, k + 1))
        f.append(-F[k + 1] / ((k + 3) * (k + 2)))
    return BoundaryJet(data.backend, K, g, f[: K + 2], G, F, data)


def jet_constraint_residual(jet: BoundaryJet) -> list[float]:
    """Sup norms of the mixed-direction constraint for k = 0..K-1."""
    ops = jet.data.ops
    if len(jet.g_coeffs) < jet.K + 1 or len(jet.f_coeffs) < jet.K + 1:
        raise ParameterError("incomplete jet")
    out = []
    for k in range(jet.K):
        if ops.kind == HOMOGENEOUS:
            out.append(0.0)
            continue
        acc = (k + 1) * ops.d(jet.f_coeffs[k + 1])
        for i in range(k + 1):
            for j in range(k - i + 1):
                acc = acc - (i + 1) * ops.mixed_term(jet.g_coeffs[i + 1], jet.Ginv_coeffs[j],
                                                     jet.f_coeffs[k - i - j]) / 2
        out.append(ops.sup(acc))
    return out


def _same_representation(A: BoundaryJet, B: BoundaryJet):
    if A.backend != B.backend:
        raise ParameterError("jets use different backends")
    if A.backend == HOMOGENEOUS and A.data.reference != B.data.reference:
        raise ParameterError("homogeneous jets use different reference metrics")
    if A.backend == GRID and np.shape(A.g_coeffs[0]) != np.shape(B.g_coeffs[0]):
        raise ParameterError("grid jets live on different grids")


def _diff_small(x, tol) -> bool:
    if isinstance(x, sp.Basic):
        return _exact_zero(x)
    return float(np.max(np.abs(x))) <= tol


def jets_match(A: BoundaryJet, B: BoundaryJet, K: int, tol: float = 1e-12) -> bool:
    """Whether B is A seen from the other side: coefficients agree up to (-1)^k."""
    _same_representation(A, B)
    if min(A.K, B.K) < K:
        raise ParameterError("jets are shorter than the requested order")
    for k in range(K + 1):
        sign = -1 if k % 2 else 1
        if not _diff_small(B.g_coeffs[k] - sign * A.g_coeffs[k], tol):
            return False
        if not _diff_small(B.f_coeffs[k] - sign * A.f_coeffs[k], tol):
            return False
    return True


def first_mismatch(A: BoundaryJet, B: BoundaryJet, K: int, tol: float = 1e-12):
    """Lowest order at which jets_match fails, or None."""
    for k in range(K + 1):
        sign = -1 if k % 2 else 1
        if not (_diff_small(B.g_coeffs[k] - sign * A.g_coeffs[k], tol)
                and _diff_small(B.f_coeffs[k] - sign * A.f_coeffs[k], tol)):
            return k
    return None


# model data and closed-form oracles ---------------------------------------

CAP_COMPLEMENT = "cap_complement"
CAP_CORE = "cap_core"
HEMISPHERE = "hemisphere"


def _exact_number(x):
    return sp.nsimplify(x, rational=True) if isinstance(x, float) else sp.sympify(x)


def _trig(theta, exact: bool):
    if exact:
        return SIN, COS
    return math.sin(theta), math.cos(theta)


def model_data(model: str, theta: float = 0.0, L=1, exact: bool = False, K: int = 16) -> BoundaryData:
    """Collar data of f = L y_{n+1} at the boundary sphere {y_{n+1} = sin(theta)}.

    ``cap_complement`` looks into {y_{n+1} >= sin(theta)}, ``cap_core`` into
    {y_{n+1} <= sin(theta)}; ``hemisphere`` is theta = 0.
    """
    if model == HEMISPHERE:
        s, c = (sp.Integer(0), sp.Integer(1)) if exact else (0.0, 1.0)
        side = 1
    elif model in (CAP_COMPLEMENT, CAP_CORE):
        s, c = _trig(theta, exact)
        side = 1 if model == CAP_COMPLEMENT else -1
    else:
        raise ParameterError(f"unknown model {model!r}")
    L = _exact_number(L) if exact else float(L)
    return BoundaryData(HOMOGENEOUS, c * c, L * s, side * L * c, phi_identity(K + 2))


def exact_coefficients(model: str, theta: float, L, K: int, exact: bool = False):
    """Taylor coefficients of cos^2(theta + side r) and L sin(theta + side r)."""
    if model == HEMISPHERE:
        s, c = (sp.Integer(0), sp.Integer(1)) if exact else (0.0, 1.0)
        side = 1
    else:
        s, c = _trig(theta, exact)
        side = 1 if model == CAP_COMPLEMENT else -1
    L = _exact_number(L) if exact else float(L)
    cos2 = [c * c - s * s, -2 * s * c, -(c * c - s * s), 2 * s * c]  # cos(2 theta + k pi/2)
    sin1 = [s, c, -s, -c]  # sin(theta + k pi/2)
    g = [c * c]
    for k in range(1, K + 1):
        g.append(cos2[k % 4] * (2 * side) ** k / 2 / math.factorial(k))
    f = [L * sin1[k % 4] * side ** k / math.factorial(k) for k in range(K + 2)]
    return g, f


def jet_vs_exact(model: str, theta: float = 0.0, L=1, K: int = 8, exact: bool = False):
    """Largest coefficient error of the recursion against the closed-form expansion.

    Each error is measured relative to the larger of the exact coefficient and
    its natural size (2^k / k! for the metric, |L| / k! for f), so that
    coefficients vanishing at special angles do not divide by roundoff.  In
    exact mode the result is 0 when every difference vanishes identically on
    the circle s^2 + c^2 = 1.
    """
    if not 0 <= K <= 12:
        raise ParameterError("K must lie in [0, 12]")
    jet = jet_extend(model_data(model, theta, L, exact, K), K)
    g_ex, f_ex = exact_coefficients(model, theta, L, K, exact)
    pairs = list(zip(jet.g_coeffs[: K + 1], g_ex)) + list(zip(jet.f_coeffs[: K + 1], f_ex))
    if exact:
        bad = [(a, b) for a, b in pairs if not _exact_zero(a - b)]
        if not bad:
            return 0
        val = {SIN: math.sin(theta), COS: math.cos(theta)}
        return max(abs(float(sp.N((a - b).subs(val)))) for a, b in bad)
    sizes = [2.0 ** k / math.factorial(k) for k in range(K + 1)]
    sizes += [max(abs(float(L)), 1e-300) / math.factorial(k) for k in range(K + 1)]
    worst = 0.0
    for (a, b), size in zip(pairs, sizes):
        worst = max(worst, abs(a - b) / max(abs(b), size))
    return worst


def format_exact(expr) -> str:
    """Render a coefficient as a sum of (p/q) s^i c^j terms, using s^2 = 1 - c^2."""
    expr = sp.cancel(sp.together(sp.sympify(expr)))
    num, den = sp.fraction(expr)
    num = sp.expand(sp.rem(sp.Poly(sp.expand(num), SIN), sp.Poly(_PYTH, SIN)).as_expr())
    den = sp.expand(den)
    if den.is_number:
        num, den = sp.expand(num / den), sp.Integer(1)
    terms = []
    for monom, coeff in sp.Poly(num, SIN, COS).terms():
        i, j = monom
        factor = f"({coeff})"
        if i:
            factor += f"*s^{i}" if i > 1 else "*s"
        if j:
            factor += f"*c^{j}" if j > 1 else "*c"
        terms.append(factor)
    body = " + ".join(terms) if terms else "0"
    return body if den == 1 else f"[{body}] / ({den})"


def energy_shadow(jet: BoundaryJet, L) -> list:
    """Coefficients of (f')^2 + f^2 - L^2 through order K - 1 (homogeneous jets)."""
    if jet.backend != HOMOGENEOUS:
        raise ParameterError("energy shadow is computed for homogeneous jets")
    K = jet.K
    f = jet.f_coeffs
    df = [(k + 1) * f[k + 1] for k in range(K)]
    sq = _series_mul(df, df, K - 1)
    f2 = _series_mul(f, f, K - 1)
    out = [sq[k] + f2[k] for k in range(K)]
    if K:
        out[0] = out[0] - L * L
    return out


# grid test geometry -----------------------------------------------------

def clifford_grid_data(theta: float, L: float = 1.0, N: int = 32, warp: float = 0.0,
                       K: int = 16) -> BoundaryData:
    """Torus T^1(theta) in S^3 with f = L y_4, sampled on an N x N periodic grid.

    Coordinates are (u, w) with v = w + warp sin(w), so warp != 0 gives a
    nonconstant metric.  The grid is offset by half a cell so that the
    Neumann data L cos(theta) sin(v) never vanishes at a sample.
    """
    x = (np.arange(N) + 0.5) * 2 * np.pi / N
    U, W = np.meshgrid(x, x, indexing="ij")
    V = W + warp * np.sin(W)
    dv = 1.0 + warp * np.cos(W)
    g0 = np.zeros((N, N, 2, 2))
    g0[..., 0, 0] = math.cos(theta) ** 2
    g0[..., 1, 1] = math.sin(theta) ** 2 * dv ** 2
    f0 = L * math.sin(theta) * np.sin(V)
    f1 = L * math.cos(theta) * np.sin(V)
    return BoundaryData(GRID, g0, f0, f1, phi_identity(K + 2))


def clifford_exact(theta: float, L: float, N: int, warp: float, K: int):
    """Closed-form coefficients for :func:`clifford_grid_data`."""
    x = (np.arange(N) + 0.5) * 2 * np.pi / N
    U, W = np.meshgrid(x, x, indexing="ij")
    V = W + warp * np.sin(W)
    dv2 = (1.0 + warp * np.cos(W)) ** 2
    g, f = [], []
    for k in range(K + 1):
        c2 = math.cos(2 * theta + k * math.pi / 2) * 2 ** k / 2 / math.factorial(k)
        gk = np.zeros((N, N, 2, 2))
        if k == 0:
            gk[..., 0, 0] = math.cos(theta) ** 2
            gk[..., 1, 1] = math.sin(theta) ** 2 * dv2
        else:
            gk[..., 0, 0] = c2
            gk[..., 1, 1] = -c2 * dv2
        g.append(gk)
    for k in range(K + 2):
        f.append(L * math.sin(theta + k * math.pi / 2) / math.factorial(k) * np.sin(V))
    return g, f


def corrupt(jet: BoundaryJet, order: int, amount: float) -> BoundaryJet:
    """Copy of a grid jet with a smooth bump added to gbar_order (negative control)."""
    if jet.backend != GRID:
        raise ParameterError("corruption is defined for grid jets")
    g = [np.array(x, copy=True) for x in jet.g_coeffs]
    N = g[order].shape[0]
    x = (np.arange(N) + 0.5) * 2 * np.pi / N
    U, W = np.meshgrid(x, x, indexing="ij")
    # the w-w entry pairs with the w-derivative of f in the constraint
    g[order][..., 1, 1] += amount * np.cos(W)
    return BoundaryJet(jet.backend, jet.K, g, list(jet.f_coeffs), list(jet.Ginv_coeffs), list(jet.F_coeffs),
                       jet.data)
