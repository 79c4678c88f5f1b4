"""Model domains on the unit sphere and their boundary oracles.

Points are plain numpy vectors in R^{n+1}.  A domain knows how to test
membership, produce outward normals and (for the Clifford-torus family)
retract nearby points back onto its boundary.  The Obata function is always
linear, ``f(y) = <c, y>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._numerics import richardson_central
from .errors import ClusteringError, NotOnBoundaryError, ParameterError

BOUNDARY_TOL = 1e-10
SPHERE_TOL = 1e-12
FD_STEP = 1e-4
CLUSTER_TOL = 1e-4

COMPLEMENT = "complement"
CORE = "core"


def as_sphere_point(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ParameterError("a sphere point is a 1-d vector")
    if n is not None and y.shape[0] != n + 1:
        raise ParameterError(f"expected a point in R^{n + 1}, got length {y.shape[0]}")
    if abs(np.linalg.norm(y) - 1.0) > SPHERE_TOL:
        raise ParameterError(f"point is off the unit sphere by {abs(np.linalg.norm(y) - 1.0):.3e}")
    return y


@dataclass(frozen=True)
class RobinParameter:
    a: float
    theta: float

    def __post_init__(self):
        if self.a == 0.0:
            raise ParameterError("Robin coefficient must be nonzero")
        if not (0.0 < self.theta < math.pi) or abs(self.theta - math.pi / 2) < 1e-15:
            raise ParameterError("theta must lie in (0, pi/2) or (pi/2, pi)")
        if abs(self.a - 1.0 / math.tan(self.theta)) > 1e-12 * max(1.0, abs(self.a)):
            raise ParameterError("a and cot(theta) disagree")

    @classmethod
    def from_theta(cls, theta: float) -> "RobinParameter":
        return cls(1.0 / math.tan(theta), theta)

    @classmethod
    def from_a(cls, a: float) -> "RobinParameter":
        theta = math.atan2(1.0, a)  # arccot with range (0, pi)
        return cls(a, theta)


@dataclass(frozen=True)
class ObataFunction:
    """Linear function f(y) = <c, y> restricted to the round sphere."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or not np.any(c):
            raise ParameterError("c must be a nonzero vector")
        object.__setattr__(self, "c", c)

    @classmethod
    def axial(cls, n: int, L: float = 1.0) -> "ObataFunction":
        c = np.zeros(n + 1)
        c[-1] = L
        return cls(c)

    @property
    def L(self) -> float:
        return float(np.linalg.norm(self.c))

    @property
    def n(self) -> int:
        return self.c.shape[0] - 1

    def value(self, y):
        return np.asarray(y) @ self.c

    def gradient(self, y):
        y = np.asarray(y, dtype=float)
        f = y @ self.c
        return self.c - np.asarray(f)[..., None] * y

    def to_dict(self) -> dict:
        return {"c": [float(x) for x in self.c]}

    @classmethod
    def from_dict(cls, data: dict) -> "ObataFunction":
        return cls(np.asarray(data["c"], dtype=float))


@dataclass(frozen=True)
class SecondFundamentalSpectrum:
    entries: tuple  # ((value, multiplicity), ...) sorted by value

    @property
    def dimension(self) -> int:
        return sum(mult for _, mult in self.entries)

    def multiplicities(self) -> dict:
        return {float(v): int(k) for v, k in self.entries}

    def matches(self, other: "SecondFundamentalSpectrum", tol: float) -> bool:
        if len(self.entries) != len(other.entries):
            return False
        return all(
            k1 == k2 and abs(v1 - v2) <= tol
            for (v1, k1), (v2, k2) in zip(self.entries, other.entries)
        )

    def negated(self) -> "SecondFundamentalSpectrum":
        return SecondFundamentalSpectrum(tuple(sorted((-v, k) for v, k in self.entries)))


def cluster_eigenvalues(values: Sequence[float], tol: float = CLUSTER_TOL) -> SecondFundamentalSpectrum:
    """Group sorted eigenvalues into clusters of width ``tol``.

    Distinct clusters must be separated by at least ``10 * tol`` (relative to
    the eigenvalue scale); anything in between is reported as ambiguous.
    """
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        return SecondFundamentalSpectrum(())
    scale = max(1.0, float(np.max(np.abs(vals))))
    groups = [[vals[0]]]
    for v in vals[1:]:
        gap = v - groups[-1][-1]
        if gap <= tol * scale:
            groups[-1].append(v)
        elif gap < 10.0 * tol * scale:
            raise ClusteringError(f"eigenvalue gap {gap:.3e} is within 10x the clustering tolerance")
        else:
            groups.append([v])
    return SecondFundamentalSpectrum(tuple((float(np.mean(g)), len(g)) for g in groups))


class SphereDomain:
    """Closed region of S^n described by ``inside(y) >= 0``."""

    n: int

    def inside(self, y):
        raise NotImplementedError

    def inside_gradient(self, y):
        raise NotImplementedError

    def contains(self, p) -> bool:
        p = as_sphere_point(p, self.n)
        return bool(self.inside(p) >= -BOUNDARY_TOL)

    def on_boundary(self, p, tol: float = BOUNDARY_TOL) -> bool:
        return bool(abs(self.inside(np.asarray(p, dtype=float))) <= tol)

    def _require_boundary(self, p) -> np.ndarray:
        p = as_sphere_point(p, self.n)
        if not self.on_boundary(p):
            raise NotOnBoundaryError(f"defining residual {self.inside(p):.3e} exceeds {BOUNDARY_TOL}")
        return p

    def normal_field(self, y) -> np.ndarray:
        """Outward unit normal of the level set of ``inside`` through ``y``."""
        g = -self.inside_gradient(y)
        g = g - (g @ y) * y
        return g / np.linalg.norm(g)

    def outward_normal(self, p) -> np.ndarray:
        p = self._require_boundary(p)
        return self.normal_field(p)


def _check_rotation(rotation, n: int) -> np.ndarray:
    if rotation is None:
        return np.eye(n + 1)
    Q = np.asarray(rotation, dtype=float)
    if Q.shape != (n + 1, n + 1):
        raise ParameterError("rotation has the wrong shape")
    if not np.allclose(Q.T @ Q, np.eye(n + 1), atol=1e-12):
        raise ParameterError("rotation is not orthogonal")
    e = np.zeros(n + 1)
    e[-1] = 1.0
    if not np.allclose(Q @ e, e, atol=1e-12):
        raise ParameterError("rotation must fix the y_{n+1}-axis")
    return Q


@dataclass(frozen=True, eq=False)
class ModelDomain(SphereDomain):
    """The region D^m(theta) (side='core') or its complement in S^n.

    The canonical region is rotated by ``rotation`` (an orthogonal matrix
    fixing the last axis): a point y belongs to the domain iff Q^T y belongs
    to the canonical one.
    """

    n: int
    m: int
    theta: float
    side: str = COMPLEMENT
    rotation: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("n must be at least 2")
        if not 0 <= self.m <= self.n - 1:
            raise ParameterError(f"m must lie in [0, {self.n - 1}]")
        if not 0.0 < self.theta < math.pi / 2:
            raise ParameterError("theta must lie in (0, pi/2)")
        if self.side not in (COMPLEMENT, CORE):
            raise ParameterError(f"unknown side {self.side!r}")
        object.__setattr__(self, "rotation", _check_rotation(self.rotation, self.n))

    # canonical coordinates -------------------------------------------------
    def _canon(self, y):
        return np.asarray(y, dtype=float) @ self.rotation

    def _world(self, z):
        return np.asarray(z) @ self.rotation.T

    @property
    def robin_coefficient(self) -> float:
        """The a for which f = L y_{n+1} satisfies the Robin condition."""
        a = 1.0 / math.tan(self.theta)
        return a if self.side == COMPLEMENT else -a

    def defining_residual(self, y):
        """Canonical defining function; the core D^m is where it is <= 0."""
        z = self._canon(y)
        s, c = math.sin(self.theta), math.cos(self.theta)
        if self.m == 0:
            return c - z[..., 0]
        if self.m == self.n - 1:
            return z[..., -1] - s
        return np.sum(z[..., self.m + 1:] ** 2, axis=-1) - s * s

    def _defining_gradient(self, y):
        z = self._canon(y)
        g = np.zeros_like(z)
        if self.m == 0:
            g[..., 0] = -1.0
        elif self.m == self.n - 1:
            g[..., -1] = 1.0
        else:
            g[..., self.m + 1:] = 2.0 * z[..., self.m + 1:]
        return self._world(g)

    def inside(self, y):
        r = self.defining_residual(y)
        return r if self.side == COMPLEMENT else -r

    def inside_gradient(self, y):
        g = self._defining_gradient(y)
        return g if self.side == COMPLEMENT else -g

    # boundary T^m(theta) ---------------------------------------------------
    def retract(self, q) -> np.ndarray:
        """Map a point near T^m(theta) to the nearest boundary point."""
        z = self._canon(q)
        z = z / np.linalg.norm(z)
        s, c = math.sin(self.theta), math.cos(self.theta)
        z = z.copy()
        if self.m == 0:
            z[0] = c
        else:
            z[: self.m + 1] *= c / np.linalg.norm(z[: self.m + 1])
        if self.m == self.n - 1:
            z[-1] = s
        else:
            z[self.m + 1:] *= s / np.linalg.norm(z[self.m + 1:])
        return self._world(z)

    def sample_boundary(self, rng: np.random.Generator, size: int) -> np.ndarray:
        s, c = math.sin(self.theta), math.cos(self.theta)
        z = np.empty((size, self.n + 1))
        if self.m == 0:
            z[:, 0] = c
        else:
            u = rng.standard_normal((size, self.m + 1))
            z[:, : self.m + 1] = c * u / np.linalg.norm(u, axis=1, keepdims=True)
        if self.m == self.n - 1:
            z[:, -1] = s
        else:
            v = rng.standard_normal((size, self.n - self.m))
            z[:, self.m + 1:] = s * v / np.linalg.norm(v, axis=1, keepdims=True)
        return self._world(z)

    def tangent_frame(self, p) -> np.ndarray:
        """Rows form an orthonormal basis of the tangent space of T^m at p."""
        nu = self.normal_field(p)
        basis = np.linalg.svd(np.vstack([p, nu]))[2]
        return basis[2:]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "theta": self.theta,
            "side": self.side,
            "rotation": self.rotation.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelDomain":
        return cls(int(data["n"]), int(data["m"]), float(data["theta"]), data.get("side", COMPLEMENT),
                   data.get("rotation"))


@dataclass(frozen=True, eq=False)
class GeodesicBall(SphereDomain):
    """Closed geodesic ball of the given radius around the north pole."""

    n: int
    radius: float

    def __post_init__(self):
        if self.n < 2 or not 0.0 < self.radius < math.pi:
            raise ParameterError("need n >= 2 and radius in (0, pi)")

    def inside(self, y):
        return np.asarray(y)[..., -1] - math.cos(self.radius)

    def inside_gradient(self, y):
        g = np.zeros_like(np.asarray(y, dtype=float))
        g[..., -1] = 1.0
        return g

    def retract(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float) / np.linalg.norm(q)
        r = math.sin(self.radius)
        out = q.copy()
        out[:-1] *= r / np.linalg.norm(q[:-1])
        out[-1] = math.cos(self.radius)
        return out


def robin_ball(n: int, theta: float) -> GeodesicBall:
    """Geodesic ball of radius 3pi/2 - theta, the a = cot(theta) < 0 model."""
    if not math.pi / 2 < theta < math.pi:
        raise ParameterError("the negative-a ball needs theta in (pi/2, pi)")
    return GeodesicBall(n, 1.5 * math.pi - theta)


# operations ---------------------------------------------------------------

def make_model_domain(n: int, m: int, theta: float, side: str = COMPLEMENT, rotation=None) -> ModelDomain:
    return ModelDomain(n, m, theta, side, rotation)


def contains(domain: SphereDomain, p) -> bool:
    return domain.contains(p)


def outward_normal(domain: SphereDomain, p) -> np.ndarray:
    return domain.outward_normal(p)


def robin_residual(domain: SphereDomain, f: ObataFunction, a: float, p) -> float:
    """df/dnu + a f at a boundary point, with the exact sphere gradient."""
    p = domain._require_boundary(p)
    nu = domain.normal_field(p)
    return float(f.gradient(p) @ nu + a * f.value(p))


def boundary_gradient(domain: SphereDomain, f: ObataFunction, p) -> np.ndarray:
    """Gradient of f restricted to the level set of ``inside`` through p."""
    nu = domain.normal_field(p)
    g = f.gradient(p)
    return g - (g @ nu) * nu


def transnormal_residual(domain: SphereDomain, f: ObataFunction, a: float, p) -> float:
    """|grad_bar f|^2 + (1 + a^2) f^2 - L^2 at a boundary point."""
    p = domain._require_boundary(p)
    g = boundary_gradient(domain, f, p)
    return float(g @ g + (1.0 + a * a) * f.value(p) ** 2 - f.L ** 2)


def model_boundary_spectrum(n: int, m: int, a: float) -> SecondFundamentalSpectrum:
    if a <= 0:
        raise ParameterError("the closed-form spectrum is stated for a > 0")
    if not 0 <= m <= n - 1:
        raise ParameterError(f"m must lie in [0, {n - 1}]")
    entries = [(-a, n - 1 - m), (1.0 / a, m)]
    return SecondFundamentalSpectrum(tuple(sorted((v, k) for v, k in entries if k > 0)))


def _shape_and_hessian(domain: ModelDomain, p, step: float, c=None):
    E = domain.tangent_frame(p)

    def normal_at(q):
        return domain.normal_field(domain.retract(q))

    def grad_bar_at(q):
        q = domain.retract(q)
        nu = domain.normal_field(q)
        g = c - (c @ q) * q
        return g - (g @ nu) * nu

    k = E.shape[0]
    shape = np.empty((k, k))
    hess = np.empty((k, k)) if c is not None else None
    for i, e in enumerate(E):
        dnu = richardson_central(lambda t: normal_at(p + t * e), step)
        shape[i] = E @ dnu
        if c is not None:
            dg = richardson_central(lambda t: grad_bar_at(p + t * e), step)
            hess[i] = E @ dg
    shape = 0.5 * (shape + shape.T)
    if hess is not None:
        hess = 0.5 * (hess + hess.T)
    return E, shape, hess


def numeric_second_fundamental(domain: ModelDomain, p, step: float = FD_STEP,
                               tol: float = CLUSTER_TOL) -> SecondFundamentalSpectrum:
    """Finite-difference shape operator <D_{e_i} nu, e_j> of the boundary at p."""
    if not 1e-6 <= step <= 1e-2:
        raise ParameterError("step must lie in [1e-6, 1e-2]")
    p = domain._require_boundary(p)
    _, shape, _ = _shape_and_hessian(domain, p, step)
    return cluster_eigenvalues(np.linalg.eigvalsh(shape), tol)


def boundary_identity_residuals(domain: ModelDomain, f: ObataFunction, a: float, p,
                                step: float = FD_STEP) -> tuple[float, float]:
    """Residuals of -a f_i = h_ij f_j and f_;ij - a f h_ij + f g_ij = 0 at p."""
    p = domain._require_boundary(p)
    E, shape, hess = _shape_and_hessian(domain, p, step, c=f.c)
    grad = E @ boundary_gradient(domain, f, p)
    r1 = float(np.linalg.norm(shape @ grad + a * grad))
    fp = float(f.value(p))
    tensor = hess - a * fp * shape + fp * np.eye(E.shape[0])
    r2 = float(np.linalg.norm(tensor, 2))
    return r1, r2
