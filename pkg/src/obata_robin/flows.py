"""Normalized gradient flows of linear functions on the sphere.

The integrator is classical RK4 with reprojection onto the sphere after each
step.  Several trajectories can be advanced together; event handling
(boundary crossing, arrival at a critical point, sign change of f) is done
per trajectory.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from ._numerics import normalize_rows, rk4_step
from .errors import CriticalStartError, ParameterError
from .geometry import BOUNDARY_TOL, ModelDomain, ObataFunction, SphereDomain, boundary_gradient

INTERIOR_MAX = "interior_max"
INTERIOR_MIN = "interior_min"
BOUNDARY_HIT = "boundary_hit"
TIME_EXHAUSTED = "time_exhausted"
ZERO_LEVEL = "zero_level"

CRITICAL_GRAD = 1e-6
START_GRAD = 1e-8


@dataclass
class FlowDefects:
    conservation: float
    geodesic: float | None
    renorm: float
    fit: float | None = None


@dataclass
class FlowTrace:
    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    terminal_event: str
    terminal_time: float
    defects: FlowDefects
    dt: float = 0.0

    def samples(self):
        return [(float(t), y.copy(), float(v)) for t, y, v in zip(self.t, self.y, self.f)]

    def __len__(self):
        return len(self.t)

    def summary(self) -> dict:
        d = self.defects
        return {
            "terminal_event": self.terminal_event,
            "terminal_time": self.terminal_time,
            "defects": {
                "conservation": d.conservation,
                "geodesic": d.geodesic,
                "renorm": d.renorm,
                "fit": d.fit,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO() if stream is None else stream
        dim = self.y.shape[1]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"y{i + 1}" for i in range(dim)] + ["f"])
        for t, y, v in zip(self.t, self.y, self.f):
            writer.writerow([repr(float(t))] + [repr(float(x)) for x in y] + [repr(float(v))])
        return buf.getvalue() if stream is None else ""


def _angle(p, q) -> float:
    """Great-circle distance between unit vectors, stable for close points."""
    return 2.0 * math.asin(min(1.0, 0.5 * float(np.linalg.norm(p - q))))


def gradient_field(f: ObataFunction, direction: str = "forward") -> Callable:
    sign = 1.0 if direction == "forward" else -1.0

    def X(y):
        g = f.gradient(normalize_rows(y))
        return sign * g / np.linalg.norm(g, axis=-1, keepdims=True)

    return X


def rotated_gradient_field(f: ObataFunction, angle: float = math.pi / 4) -> Callable:
    """Unit gradient rotated by ``angle`` inside the tangent plane of S^2."""
    if f.n != 2:
        raise ParameterError("the rotated field is defined on S^2 only")
    ca, sa = math.cos(angle), math.sin(angle)

    def X(y):
        y = normalize_rows(y)
        g = f.gradient(y)
        g = g / np.linalg.norm(g, axis=-1, keepdims=True)
        return ca * g + sa * np.cross(y, g)

    return X


def _trace_from(times, ys, f, event, t_end, dt, renorm):
    ys = np.asarray(ys)
    vals = ys @ f.c
    grads = f.gradient(ys)
    cons = float(np.max(np.abs(np.sum(grads * grads, axis=-1) + vals ** 2 - f.L ** 2)))
    trace = FlowTrace(np.asarray(times), ys, vals, event, float(t_end), FlowDefects(cons, None, renorm), dt)
    try:
        trace.defects.geodesic = geodesic_defect(trace)
    except ParameterError:
        pass
    return trace


def integrate_flows(f: ObataFunction, starts, domain: SphereDomain | None = None, dt: float = 1e-3,
                    t_max: float = 2 * math.pi, direction: str = "forward", field: Callable | None = None,
                    reproject: bool = True, stop_at_zero: bool = False) -> list[FlowTrace]:
    """Integrate many starts at once; see :func:`normalized_gradient_flow`."""
    if not 0.0 < dt <= 1e-2:
        raise ParameterError("dt must lie in (0, 1e-2]")
    if direction not in ("forward", "backward"):
        raise ParameterError(f"unknown direction {direction!r}")
    Y = np.atleast_2d(np.asarray(starts, dtype=float)).copy()
    if Y.shape[1] != f.c.shape[0]:
        raise ParameterError("start dimension does not match f")
    grad_norm = np.linalg.norm(f.gradient(Y), axis=1)
    if np.any(grad_norm <= START_GRAD):
        raise CriticalStartError("start point is critical for f")
    if domain is not None and np.any(domain.inside(Y) < -BOUNDARY_TOL):
        raise ParameterError("start point lies outside the domain")

    X = field if field is not None else gradient_field(f, direction)
    target = (1.0 if direction == "forward" else -1.0) * f.c / f.L
    target_event = INTERIOR_MAX if direction == "forward" else INTERIOR_MIN
    target_ok = domain is None or domain.inside(target) >= -BOUNDARY_TOL

    B = Y.shape[0]
    hist_t = [0.0]
    hist_y = [Y.copy()]
    active = np.ones(B, dtype=bool)
    stop_index = np.zeros(B, dtype=int)
    ends: list = [None] * B
    renorm = np.zeros(B)

    def finish(i, event, t_end, y_end, k):
        active[i] = False
        stop_index[i] = k
        ends[i] = (event, t_end, y_end)

    def step_to(i, tau):
        y = rk4_step(X, Y[i], tau)
        return y / np.linalg.norm(y) if reproject else y

    if target_ok:
        for i in range(B):
            d = _angle(Y[i] / np.linalg.norm(Y[i]), target)
            if d <= dt:
                finish(i, target_event, d, target.copy(), 1)

    t = 0.0
    k = 0
    while active.any():
        if t >= t_max - 1e-15:
            for i in np.flatnonzero(active):
                finish(i, TIME_EXHAUSTED, t, None, k + 1)
            break
        h = min(dt, t_max - t)
        Yn = rk4_step(X, Y, h)
        norms = np.linalg.norm(Yn, axis=1)
        renorm = np.where(active, np.maximum(renorm, np.abs(norms - 1.0)), renorm)
        if reproject:
            Yn = Yn / norms[:, None]
        idx = np.flatnonzero(active)
        if domain is not None:
            outside = domain.inside(Yn[idx]) < 0.0
        else:
            outside = np.zeros(idx.size, dtype=bool)
        if stop_at_zero:
            crossed = (Y[idx] @ f.c) * (Yn[idx] @ f.c) <= 0.0
        else:
            crossed = np.zeros(idx.size, dtype=bool)
        for j, i in enumerate(idx):
            hit_b = outside[j]
            hit_z = crossed[j]
            if not (hit_b or hit_z):
                continue
            tau_b = tau_z = math.inf
            if hit_b:
                g = lambda s: float(domain.inside(step_to(i, s)))
                tau_b = 0.0 if g(0.0) <= 0.0 else brentq(g, 0.0, h, xtol=1e-14)
            if hit_z:
                g = lambda s: float(step_to(i, s) @ f.c)
                g0 = g(0.0)
                tau_z = 0.0 if g0 == 0.0 else brentq(g, 0.0, h, xtol=1e-14)
            if tau_z <= tau_b:
                finish(i, ZERO_LEVEL, t + tau_z, step_to(i, tau_z), k + 1)
            else:
                finish(i, BOUNDARY_HIT, t + tau_b, step_to(i, tau_b), k + 1)
        Y = np.where(active[:, None], Yn, Y)
        t += h
        k += 1
        hist_t.append(t)
        hist_y.append(Y.copy())
        if target_ok:
            for i in np.flatnonzero(active):
                d = _angle(Y[i] / np.linalg.norm(Y[i]), target)
                if d <= dt:
                    finish(i, target_event, t + d, target.copy(), k + 1)

    T = np.asarray(hist_t)
    H = np.stack(hist_y)
    traces = []
    for i in range(B):
        event, t_end, y_end = ends[i]
        kk = stop_index[i]
        times = list(T[:kk])
        ys = list(H[:kk, i])
        if y_end is not None and t_end > times[-1]:
            times.append(t_end)
            ys.append(y_end)
        traces.append(_trace_from(times, ys, f, event, t_end, dt, float(renorm[i])))
    return traces


def normalized_gradient_flow(f: ObataFunction, start, domain: SphereDomain | None = None, dt: float = 1e-3,
                             t_max: float = 2 * math.pi, direction: str = "forward", **kw) -> FlowTrace:
    """Follow +-grad f/|grad f| from ``start`` until an event or ``t_max``.

    Events: the pole +-c/L is reached (snapped once within one step, the
    remaining distance added to the time), the domain boundary is crossed
    (refined by root finding on the last step) or, with ``stop_at_zero``,
    f changes sign.
    """
    return integrate_flows(f, np.asarray(start, dtype=float)[None, :], domain, dt, t_max, direction, **kw)[0]


def geodesic_defect(trace: FlowTrace) -> float:
    """Largest tangential part of the discrete acceleration over uniform triples."""
    if len(trace.t) < 3:
        raise ParameterError("geodesic defect needs at least three samples")
    t, y = trace.t, trace.y
    h1 = np.diff(t)[:-1]
    h2 = np.diff(t)[1:]
    uniform = np.abs(h1 - h2) <= 1e-12 * np.maximum(1.0, np.abs(h1))
    if not uniform.any():
        raise ParameterError("no uniformly spaced sample triples")
    mid = y[1:-1][uniform]
    acc = (y[2:][uniform] - 2.0 * mid + y[:-2][uniform]) / (h1[uniform] ** 2)[:, None]
    tangential = acc - np.sum(acc * mid, axis=1, keepdims=True) * mid / np.sum(mid * mid, axis=1, keepdims=True)
    return float(np.max(np.linalg.norm(tangential, axis=1)))


def conservation_defect(trace: FlowTrace, f: ObataFunction) -> float:
    g = f.gradient(trace.y)
    v = trace.y @ f.c
    return float(np.max(np.abs(np.sum(g * g, axis=1) + v * v - f.L ** 2)))


def value_fit_residual(trace: FlowTrace, L: float) -> float:
    """Distance of f along an interior trace from L sin(alpha + t)."""
    alpha = math.asin(max(-1.0, min(1.0, trace.f[0] / L)))
    sign = 1.0 if trace.f[-1] >= trace.f[0] else -1.0
    model = L * np.sin(alpha + sign * trace.t)
    return float(np.max(np.abs(trace.f - model)))


def first_hit_classification(f: ObataFunction, a: float, domain: SphereDomain, start, dt: float = 1e-3,
                             t_max: float = 2 * math.pi) -> str:
    """Which event the flow from ``start`` meets first.

    For a > 0 the flow goes uphill from f > 0 and downhill from f < 0.  For
    a < 0 it runs toward the zero level of f and reports whether that level
    or the boundary comes first.
    """
    value = float(f.value(start))
    if value == 0.0:
        raise ParameterError("f(start) must be nonzero")
    if a > 0:
        direction = "forward" if value > 0 else "backward"
        return normalized_gradient_flow(f, start, domain, dt, t_max, direction).terminal_event
    direction = "backward" if value > 0 else "forward"
    return normalized_gradient_flow(f, start, domain, dt, t_max, direction, stop_at_zero=True).terminal_event


# flows inside the boundary T^m(theta) --------------------------------------

def _boundary_field(domain: ModelDomain, f: ObataFunction, sign: float):
    def X(q):
        p = domain.retract(q)
        g = boundary_gradient(domain, f, p)
        return sign * g / np.linalg.norm(g)

    return X


def _focal_distance(domain: ModelDomain, f: ObataFunction, p, sign: float) -> float:
    """Product-metric distance from p to the extremum of f on T^m(theta)."""
    z = p @ domain.rotation
    cc = sign * (f.c @ domain.rotation)
    m = domain.m
    cth, sth = math.cos(domain.theta), math.sin(domain.theta)
    d2 = 0.0
    if 0 < m:
        ch = cc[: m + 1]
        if np.linalg.norm(ch) > 0:
            d2 += (cth * _angle(z[: m + 1] / cth, ch / np.linalg.norm(ch))) ** 2
    if m < domain.n - 1:
        ct = cc[m + 1:]
        if np.linalg.norm(ct) > 0:
            d2 += (sth * _angle(z[m + 1:] / sth, ct / np.linalg.norm(ct))) ** 2
    return math.sqrt(d2)


def _focal_point(domain: ModelDomain, f: ObataFunction, p, sign: float):
    z = p @ domain.rotation
    cc = sign * (f.c @ domain.rotation)
    m = domain.m
    cth, sth = math.cos(domain.theta), math.sin(domain.theta)
    out = z.copy()
    if 0 < m and np.linalg.norm(cc[: m + 1]) > 0:
        out[: m + 1] = cth * cc[: m + 1] / np.linalg.norm(cc[: m + 1])
    if m < domain.n - 1 and np.linalg.norm(cc[m + 1:]) > 0:
        out[m + 1:] = sth * cc[m + 1:] / np.linalg.norm(cc[m + 1:])
    return out @ domain.rotation.T


def boundary_flow(domain: ModelDomain, f: ObataFunction, a: float, start, dt: float = 1e-3,
                  direction: str = "forward", t_max: float = 4 * math.pi) -> FlowTrace:
    """Flow of the unit tangential gradient inside T^m(theta).

    Each step is an ambient RK4 step followed by the closest-point retraction
    onto the torus.  ``interior_max``/``interior_min`` mean the trace reached
    a focal point of f on the boundary.
    """
    start = domain._require_boundary(start)
    sign = 1.0 if direction == "forward" else -1.0
    if np.linalg.norm(boundary_gradient(domain, f, start)) <= START_GRAD:
        raise CriticalStartError("start is a focal point of f on the boundary")
    X = _boundary_field(domain, f, sign)
    event = INTERIOR_MAX if sign > 0 else INTERIOR_MIN
    times, ys = [0.0], [start]
    y, t = start, 0.0
    end_event, t_end = TIME_EXHAUSTED, None
    d = _focal_distance(domain, f, y, sign)
    if d <= dt:
        end_event, t_end = event, d
    while t_end is None and t < t_max - 1e-15:
        h = min(dt, t_max - t)
        y = domain.retract(rk4_step(X, y, h))
        t += h
        times.append(t)
        ys.append(y)
        d = _focal_distance(domain, f, y, sign)
        if d <= dt:
            end_event, t_end = event, t + d
    if t_end is None:
        t_end = t
    else:
        times.append(t_end)
        ys.append(_focal_point(domain, f, y, sign))
    ys = np.asarray(ys)
    vals = ys @ f.c
    gb = np.array([boundary_gradient(domain, f, p) for p in ys])
    trans = np.abs(np.sum(gb * gb, axis=1) + (1.0 + a * a) * vals ** 2 - f.L ** 2)
    trace = FlowTrace(np.asarray(times), ys, vals, end_event, float(t_end),
                      FlowDefects(float(np.max(trans)), None, 0.0), dt)
    trace.defects.fit = boundary_fit_residual(trace, a, f.L, sign)
    return trace


def boundary_fit_residual(trace: FlowTrace, a: float, L: float, sign: float = 1.0) -> float:
    """Distance of f along a boundary trace from (L/w) sin(w s + beta), w = sqrt(1+a^2)."""
    w = math.sqrt(1.0 + a * a)
    amp = L / w
    beta = math.asin(max(-1.0, min(1.0, trace.f[0] / amp)))
    model = amp * np.sin(beta + sign * w * trace.t)
    return float(np.max(np.abs(trace.f - model)))


def boundary_period(domain: ModelDomain, f: ObataFunction, a: float, start, dt: float = 1e-3) -> float:
    """Period of f along a boundary integral curve: twice the min-to-max travel time."""
    up = boundary_flow(domain, f, a, start, dt, "forward")
    down = boundary_flow(domain, f, a, start, dt, "backward")
    if up.terminal_event != INTERIOR_MAX or down.terminal_event != INTERIOR_MIN:
        raise ParameterError("boundary flow did not reach both focal points")
    return 2.0 * (up.terminal_time + down.terminal_time)


@dataclass
class ClosedCurve:
    length: float
    maxima: int
    trace: FlowTrace = field(repr=False)


def closed_boundary_curve(domain: ModelDomain, f: ObataFunction, start, dt: float = 1e-3,
                          max_length: float = 8 * math.pi) -> ClosedCurve:
    """Walk once around a boundary curve of a domain in S^2.

    Returns the arclength until the curve returns to ``start`` and the number
    of strict local maxima of f met on the way.
    """
    if domain.n != 2:
        raise ParameterError("closed boundary curves are traced on S^2 only")
    start = domain._require_boundary(start)

    def X(q):
        p = domain.retract(q)
        return np.cross(p, domain.normal_field(p))

    tangent0 = X(start)
    ys, times = [start], [0.0]
    y, t = start, 0.0
    length = None
    while t < max_length:
        yn = domain.retract(rk4_step(X, y, dt))
        g_prev = float((y - start) @ tangent0)
        g_new = float((yn - start) @ tangent0)
        if t > 4 * dt and g_prev < 0.0 <= g_new:
            g = lambda s: float((domain.retract(rk4_step(X, y, s)) - start) @ tangent0)
            tau = brentq(g, 0.0, dt, xtol=1e-15)
            length = t + tau
            break
        y, t = yn, t + dt
        ys.append(y)
        times.append(t)
    if length is None:
        raise ParameterError("curve did not close within max_length")
    ys = np.asarray(ys)
    vals = ys @ f.c
    nxt = np.roll(vals, -1)
    prv = np.roll(vals, 1)
    maxima = int(np.sum((vals > prv) & (vals >= nxt)))
    trace = FlowTrace(np.asarray(times), ys, vals, TIME_EXHAUSTED, length, FlowDefects(0.0, None, 0.0), dt)
    return ClosedCurve(length, maxima, trace)
