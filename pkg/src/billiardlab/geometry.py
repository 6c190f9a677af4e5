"""Convex tables, Minkowski norms and the Klein-model hyperbolic table.

Every boundary is parametrized counterclockwise by arc length ``s`` in
``[0, perimeter)``.  Internally a smooth curve may use a more convenient
native parameter ``u`` (polar angle, ellipse angle, normal angle, ...);
conversions go through ``_u_of_s`` / ``_s_of_u``.

Hot paths work on plain floats; the module-level helpers (:func:`eval_curve`,
:func:`ray_exit`, ...) return numpy arrays.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError,
    GeometryError,
    ModelError,
    NoReturn,
    TangentialRay,
    VertexParam,
)

TWO_PI = 2.0 * math.pi
TANGENCY_TOL = 1e-9
ROOT_NODES = 512

# Gauss-Legendre rule for arc-length quadrature on short intervals.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_X = tuple(float(v) for v in _GL_X)
_GL_W = tuple(float(v) for v in _GL_W)


def _wrap(s: float, period: float) -> float:
    r = math.fmod(s, period)
    if r < 0.0:
        r += period
    if r >= period:
        r -= period
    return r


class BoundaryCurve:
    """Closed strictly convex planar curve, counterclockwise.

    Subclasses provide ``perimeter`` and the primitives below.  ``frame``
    returns ``(px, py, tx, ty)``; the inward normal is ``(-ty, tx)``.
    """

    kind = "abstract"
    perimeter: float

    # -- primitives -------------------------------------------------------
    def frame(self, s: float) -> tuple[float, float, float, float]:
        raise NotImplementedError

    def point(self, s: float) -> tuple[float, float]:
        px, py, _, _ = self.frame(s)
        return px, py

    def curvature(self, s: float) -> float:
        raise NotImplementedError

    def locate(self, x: float, y: float) -> float:
        """Arc-length parameter of a boundary point."""
        raise NotImplementedError

    def support(self, angle: float) -> float:
        """Support function ``max_{x in table} x . (cos a, sin a)``."""
        raise NotImplementedError

    def implicit(self, x: float, y: float) -> float:
        """Negative inside, zero on the boundary, positive outside."""
        a = np.linspace(0.0, TWO_PI, 721)[:-1]
        vals = x * np.cos(a) + y * np.sin(a) - np.array([self.support(t) for t in a])
        k = int(np.argmax(vals))
        f = lambda t: -(x * math.cos(t) + y * math.sin(t) - self.support(t))
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(f, bracket=(a[k] - 0.01, a[k], a[k] + 0.01))
        return max(float(vals[k]), -float(res.fun))

    def ray_exit(self, s0: float, dx: float, dy: float) -> float:
        raise NotImplementedError

    def arc_exit_full(self, s0, dx, dy, radius, orientation):
        """Return ``(s1, vx, vy)``: landing parameter and velocity there."""
        raise NotImplementedError

    def is_vertex(self, s: float) -> bool:
        return False

    def frames(self, s):
        """Vectorized frames: points (n,2), unit tangents (n,2), curvatures (n,)."""
        s = np.asarray(s, dtype=float)
        out = np.array([self.frame(v) for v in s]).reshape(-1, 4)
        kappa = np.array([self.curvature(v) for v in s])
        return out[:, :2], out[:, 2:], kappa

    @property
    def breakpoints(self) -> list[float]:
        """Natural label boundaries (polygon vertices); empty for smooth curves."""
        return []

    @property
    def diameter(self) -> float:
        a = np.linspace(0.0, math.pi, 181)
        return float(max(self.support(t) + self.support(t + math.pi) for t in a))

    # -- shared helpers ---------------------------------------------------
    def _check_launch(self, s0, dx, dy):
        px, py, tx, ty = self.frame(s0)
        dn = -ty * dx + tx * dy
        if abs(dn) < TANGENCY_TOL:
            raise TangentialRay(f"launch direction tangent at s={s0!r}")
        if dn < 0.0:
            raise GeometryError("direction points out of the table")
        return px, py, tx, ty

    def _check_landing(self, s1, dx, dy):
        if self.is_vertex(s1):
            return
        _, _, tx, ty = self.frame(s1)
        if abs(-ty * dx + tx * dy) < TANGENCY_TOL:
            raise TangentialRay(f"tangential landing at s={s1!r}")


class SmoothCurve(BoundaryCurve):
    """Curve given through a native periodic parameter ``u`` in ``[0, period)``.

    Ray and arc intersections are found by bracketing sign changes of a
    scalar function of ``u`` on a node set refined near the launch point,
    then ``brentq`` to machine precision.
    """

    period: float

    def _xy(self, u):
        raise NotImplementedError

    def _dxy(self, u):
        raise NotImplementedError

    def _ddxy(self, u):
        raise NotImplementedError

    def _u_of_s(self, s):
        raise NotImplementedError

    def _s_of_u(self, u):
        raise NotImplementedError

    def frame(self, s):
        u = self._u_of_s(_wrap(s, self.perimeter))
        x, y = self._xy(u)
        dx, dy = self._dxy(u)
        n = math.hypot(dx, dy)
        return x, y, dx / n, dy / n

    def curvature(self, s):
        u = self._u_of_s(_wrap(s, self.perimeter))
        dx, dy = self._dxy(u)
        ddx, ddy = self._ddxy(u)
        return (dx * ddy - dy * ddx) / math.hypot(dx, dy) ** 3

    def locate(self, x, y):
        u = self._u_of_point(x, y)
        return self._s_of_u(u)

    def _u_of_point(self, x, y):
        us = np.linspace(0.0, self.period, 1025)[:-1]
        d = [math.hypot(*np.subtract(self._xy(u), (x, y))) for u in us]
        k = int(np.argmin(d))
        u = float(us[k])
        # Newton on (gamma(u) - x) . gamma'(u) = 0
        for _ in range(30):
            gx, gy = self._xy(u)
            dx, dy = self._dxy(u)
            ddx, ddy = self._ddxy(u)
            f = (gx - x) * dx + (gy - y) * dy
            fp = dx * dx + dy * dy + (gx - x) * ddx + (gy - y) * ddy
            step = f / fp
            u -= step
            if abs(step) < 1e-16 * self.period:
                break
        return _wrap(u, self.period)

    def _nodes(self, u0):
        U = self.period
        base = [u0 + U * k / ROOT_NODES for k in range(1, ROOT_NODES)]
        near = []
        for e in range(3, 13):
            near.append(u0 + U * 10.0 ** (-e))
            near.append(u0 + U - U * 10.0 ** (-e))
        nodes = sorted(set(base + near))
        return nodes

    def _roots(self, g, u0):
        nodes = self._nodes(u0)
        vals = [g(u) for u in nodes]
        roots = []
        for a, b, fa, fb in zip(nodes, nodes[1:], vals, vals[1:]):
            if fa == 0.0:
                roots.append(a)
            elif fa * fb < 0.0:
                roots.append(brentq(g, a, b, xtol=1e-15 * self.period, rtol=8.9e-16, maxiter=200))
        return roots

    def ray_exit(self, s0, dx, dy):
        px, py, _, _ = self._check_launch(s0, dx, dy)
        u0 = self._u_of_s(_wrap(s0, self.perimeter))

        def g(u):
            x, y = self._xy(u)
            return dx * (y - py) - dy * (x - px)

        best = None
        for u in self._roots(g, u0):
            x, y = self._xy(u)
            tau = (x - px) * dx + (y - py) * dy
            if tau > 1e-12 * self.perimeter and (best is None or tau < best[0]):
                best = (tau, u)
        if best is None:
            raise GeometryError("ray does not cross the table interior")
        s1 = self._s_of_u(_wrap(best[1], self.period))
        self._check_landing(s1, dx, dy)
        return s1

    def arc_exit_full(self, s0, dx, dy, radius, orientation):
        px, py, _, _ = self._check_launch(s0, dx, dy)
        u0 = self._u_of_s(_wrap(s0, self.perimeter))
        sig = 1.0 if orientation > 0 else -1.0
        jx, jy = -dy, dx
        two_r = 2.0 * radius

        # |gamma - c|^2 - r^2 rewritten about the launch point, divided by 2r
        def g(u):
            x, y = self._xy(u)
            ex, ey = x - px, y - py
            return (ex * ex + ey * ey) / two_r - sig * (ex * jx + ey * jy)

        cands = []
        for u in self._roots(g, u0):
            x, y = self._xy(u)
            psi = _sweep(px, py, dx, dy, radius, sig, x, y)
            if psi is not None:
                cands.append((psi, u))
        if not cands:
            raise NoReturn("Larmor circle never meets the boundary again")
        psi, u = min(cands)
        s1 = self._s_of_u(_wrap(u, self.period))
        c, sn = math.cos(sig * psi), math.sin(sig * psi)
        vx, vy = c * dx - sn * dy, sn * dx + c * dy
        self._check_landing(s1, vx, vy)
        return s1, vx, vy


def _sweep(px, py, dx, dy, r, sig, x, y):
    """Angle swept along the oriented Larmor circle from the launch point to (x, y)."""
    if math.hypot(x - px, y - py) < 1e-12 * max(1.0, r):
        return None
    cx, cy = px - sig * r * dy, py + sig * r * dx
    a0 = math.atan2(py - cy, px - cx)
    a1 = math.atan2(y - cy, x - cx)
    psi = _wrap(sig * (a1 - a0), TWO_PI)
    if psi < 1e-13:
        return None
    return psi


@dataclass(eq=False)
class Circle(SmoothCurve):
    radius: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    kind = "circle"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        self.center = (float(self.center[0]), float(self.center[1]))
        self.perimeter = TWO_PI * self.radius
        self.period = TWO_PI

    def _xy(self, u):
        return self.center[0] + self.radius * math.cos(u), self.center[1] + self.radius * math.sin(u)

    def _dxy(self, u):
        return -self.radius * math.sin(u), self.radius * math.cos(u)

    def _ddxy(self, u):
        return -self.radius * math.cos(u), -self.radius * math.sin(u)

    def _u_of_s(self, s):
        return s / self.radius

    def _s_of_u(self, u):
        return _wrap(u * self.radius, self.perimeter)

    def frame(self, s):
        u = _wrap(s, self.perimeter) / self.radius
        c, sn = math.cos(u), math.sin(u)
        return self.center[0] + self.radius * c, self.center[1] + self.radius * sn, -sn, c

    def curvature(self, s):
        return 1.0 / self.radius

    def frames(self, s):
        u = np.asarray(s, dtype=float) / self.radius
        c, sn = np.cos(u), np.sin(u)
        pts = np.column_stack([self.center[0] + self.radius * c, self.center[1] + self.radius * sn])
        return pts, np.column_stack([-sn, c]), np.full(u.shape, 1.0 / self.radius)

    def _u_of_point(self, x, y):
        return _wrap(math.atan2(y - self.center[1], x - self.center[0]), TWO_PI)

    def support(self, angle):
        return self.center[0] * math.cos(angle) + self.center[1] * math.sin(angle) + self.radius

    def implicit(self, x, y):
        return math.hypot(x - self.center[0], y - self.center[1]) - self.radius

    @property
    def diameter(self):
        return 2.0 * self.radius

    def ray_exit(self, s0, dx, dy):
        px, py, _, _ = self._check_launch(s0, dx, dy)
        ox, oy = px - self.center[0], py - self.center[1]
        tau = -2.0 * (ox * dx + oy * dy) / (dx * dx + dy * dy)
        x1, y1 = ox + tau * dx, oy + tau * dy
        s1 = _wrap(self.radius * math.atan2(y1, x1), self.perimeter)
        self._check_landing(s1, dx, dy)
        return s1


@dataclass(eq=False)
class Ellipse(SmoothCurve):
    """Axis-aligned ellipse ``(x/a)^2 + (y/b)^2 = 1`` about ``center``."""

    a: float = 2.0
    b: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)
    nodes: int = 4096
    kind = "ellipse"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("semi-axes must be positive")
        self.center = (float(self.center[0]), float(self.center[1]))
        self.period = TWO_PI
        h = TWO_PI / self.nodes
        self._h = h
        cum = [0.0]
        for k in range(self.nodes):
            cum.append(cum[-1] + self._gl(k * h, (k + 1) * h))
        self._cum = cum
        self.perimeter = cum[-1]

    def _speed(self, t):
        return math.hypot(self.a * math.sin(t), self.b * math.cos(t))

    def _gl(self, t0, t1):
        m, r = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        return r * sum(w * self._speed(m + r * x) for x, w in zip(_GL_X, _GL_W))

    def _s_of_u(self, t):
        t = _wrap(t, TWO_PI)
        k = min(int(t / self._h), self.nodes - 1)
        return _wrap(self._cum[k] + self._gl(k * self._h, t), self.perimeter)

    def _u_of_s(self, s):
        k = bisect.bisect_right(self._cum, s) - 1
        k = min(max(k, 0), self.nodes - 1)
        c0, c1 = self._cum[k], self._cum[k + 1]
        t = (k + (s - c0) / (c1 - c0)) * self._h
        P = self.perimeter
        for _ in range(3):
            if k * self._h <= t <= (k + 1) * self._h:
                f = c0 + self._gl(k * self._h, t) - s
            else:
                f = self._s_of_u(t) - s
                f -= P * round(f / P)
            t -= f / self._speed(t)
        return t

    def _xy(self, t):
        return self.center[0] + self.a * math.cos(t), self.center[1] + self.b * math.sin(t)

    def _dxy(self, t):
        return -self.a * math.sin(t), self.b * math.cos(t)

    def _ddxy(self, t):
        return -self.a * math.cos(t), -self.b * math.sin(t)

    def _u_of_point(self, x, y):
        return _wrap(math.atan2((y - self.center[1]) / self.b, (x - self.center[0]) / self.a), TWO_PI)

    def support(self, angle):
        c, s = math.cos(angle), math.sin(angle)
        return self.center[0] * c + self.center[1] * s + math.hypot(self.a * c, self.b * s)

    def implicit(self, x, y):
        u, v = (x - self.center[0]) / self.a, (y - self.center[1]) / self.b
        return math.hypot(u, v) - 1.0

    @property
    def diameter(self):
        return 2.0 * max(self.a, self.b)

    def ray_exit(self, s0, dx, dy):
        px, py, _, _ = self._check_launch(s0, dx, dy)
        ox, oy = (px - self.center[0]) / self.a, (py - self.center[1]) / self.b
        ex, ey = dx / self.a, dy / self.b
        A = ex * ex + ey * ey
        B = ox * ex + oy * ey
        C = ox * ox + oy * oy - 1.0
        disc = math.sqrt(max(B * B - A * C, 0.0))
        # larger root; the launch check guarantees B < 0
        tau = (-B + disc) / A
        x1, y1 = ox + tau * ex, oy + tau * ey
        s1 = self._s_of_u(math.atan2(y1, x1))
        self._check_landing(s1, dx, dy)
        return s1

    def _s_of_u_vec(self, t):
        k = np.minimum((t / self._h).astype(int), self.nodes - 1)
        t0 = k * self._h
        m, r = 0.5 * (t0 + t), 0.5 * (t - t0)
        acc = np.zeros_like(t)
        for x, w in zip(_GL_X, _GL_W):
            tt = m + r * x
            acc += w * np.hypot(self.a * np.sin(tt), self.b * np.cos(tt))
        return np.asarray(self._cum)[k] + r * acc

    def frames(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        cum = np.asarray(self._cum)
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, self.nodes - 1)
        t = (k + (s - cum[k]) / (cum[k + 1] - cum[k])) * self._h
        for _ in range(3):
            t = np.clip(t, 0.0, TWO_PI)
            t = t - (self._s_of_u_vec(t) - s) / np.hypot(self.a * np.sin(t), self.b * np.cos(t))
        c, sn = np.cos(t), np.sin(t)
        pts = np.column_stack([self.center[0] + self.a * c, self.center[1] + self.b * sn])
        d = np.column_stack([-self.a * sn, self.b * c])
        sp = np.hypot(d[:, 0], d[:, 1])
        return pts, d / sp[:, None], self.a * self.b / sp ** 3

    def chord_invariant(self, x0, y0, dx, dy):
        """Confocal caustic parameter of the line through (x0, y0) along (dx, dy).

        Constant along every billiard orbit in the ellipse.
        """
        n = math.hypot(dx, dy)
        nx, ny = dy / n, -dx / n
        p = (x0 - self.center[0]) * nx + (y0 - self.center[1]) * ny
        return self.a ** 2 * nx * nx + self.b ** 2 * ny * ny - p * p


@dataclass(eq=False)
class SupportOval(SmoothCurve):
    """Oval with support function ``h(t) = a0 + sum a_k cos kt + b_k sin kt``.

    ``coeffs = [a0, a1, b1, a2, b2, ...]``; requires ``h + h'' > 0``.
    The native parameter is the outward normal angle.
    """

    coeffs: Sequence[float] = (1.0,)
    kind = "oval"

    def __post_init__(self):
        c = [float(v) for v in self.coeffs]
        self.coeffs = tuple(c)
        self._a0 = c[0]
        rest = c[1:] + [0.0] * (len(c[1:]) % 2)
        self._ab = [(k + 1, rest[2 * k], rest[2 * k + 1]) for k in range(len(rest) // 2)]
        self.period = TWO_PI
        ts = np.linspace(0.0, TWO_PI, 2049)
        rho = [self._rho(t) for t in ts]
        if min(rho) <= 0:
            raise ValueError("h + h'' must be positive (strict convexity)")
        self.perimeter = TWO_PI * self._a0

    def _h(self, t, d=0):
        v = self._a0 if d == 0 else 0.0
        for k, a, b in self._ab:
            ck, sk = math.cos(k * t), math.sin(k * t)
            if d == 0:
                v += a * ck + b * sk
            elif d == 1:
                v += k * (-a * sk + b * ck)
            elif d == 2:
                v += -k * k * (a * ck + b * sk)
            else:
                v += k ** 3 * (a * sk - b * ck)
        return v

    def _rho(self, t):
        return self._h(t) + self._h(t, 2)

    def _xy(self, t):
        h, hp = self._h(t), self._h(t, 1)
        c, s = math.cos(t), math.sin(t)
        return h * c - hp * s, h * s + hp * c

    def _dxy(self, t):
        r = self._rho(t)
        return -r * math.sin(t), r * math.cos(t)

    def _ddxy(self, t):
        r = self._rho(t)
        rp = self._h(t, 1) + self._h(t, 3)
        c, s = math.cos(t), math.sin(t)
        return -rp * s - r * c, rp * c - r * s

    def _s_of_u(self, t):
        t = _wrap(t, TWO_PI)
        v = self._a0 * t
        for k, a, b in self._ab:
            v += (a * math.sin(k * t) - b * (math.cos(k * t) - 1.0)) / k
        v += self._h(t, 1) - self._h(0.0, 1)
        return _wrap(v, self.perimeter)

    def _u_of_s(self, s):
        lo, hi = 0.0, TWO_PI
        t = s / self._a0
        for _ in range(60):
            f = self._s_of_u(t) - s
            if t > TWO_PI - 1e-12 and f < -0.5 * self.perimeter:
                f += self.perimeter
            if f > 0:
                hi = t
            else:
                lo = t
            step = f / self._rho(t)
            tn = t - step
            if not lo <= tn <= hi:
                tn = 0.5 * (lo + hi)
            if abs(tn - t) < 1e-16:
                t = tn
                break
            t = tn
        return t

    def _u_of_point(self, x, y):
        ts = np.linspace(0.0, TWO_PI, 1025)[:-1]
        vals = [x * math.cos(t) + y * math.sin(t) - self._h(t) for t in ts]
        t = float(ts[int(np.argmax(vals))])
        for _ in range(40):
            g = -x * math.sin(t) + y * math.cos(t) - self._h(t, 1)
            gp = -x * math.cos(t) - y * math.sin(t) - self._h(t, 2)
            step = g / gp
            t -= step
            if abs(step) < 1e-16:
                break
        return _wrap(t, TWO_PI)

    def support(self, angle):
        return self._h(angle)

    def curvature(self, s):
        return 1.0 / self._rho(self._u_of_s(_wrap(s, self.perimeter)))


@dataclass(eq=False)
class Stadium(SmoothCurve):
    """C^1 stadium: half-discs of ``radius`` joined by straight sides of ``length``.

    ``s = 0`` is the midpoint of the bottom side.
    """

    radius: float = 1.0
    length: float = 1.0
    kind = "stadium"

    def __post_init__(self):
        R, L = self.radius, self.length
        self.perimeter = 2.0 * L + TWO_PI * R
        self.period = self.perimeter
        # breakpoints of the four pieces
        self._b = (L / 2, L / 2 + math.pi * R, 1.5 * L + math.pi * R, 1.5 * L + TWO_PI * R)

    def _piece(self, u):
        u = _wrap(u, self.perimeter)
        R, L = self.radius, self.length
        b0, b1, b2, b3 = self._b
        if u < b0:
            return 0, u
        if u < b1:
            return 1, (u - b0) / R
        if u < b2:
            return 2, u - b1
        if u < b3:
            return 3, (u - b2) / R
        return 0, u - b3 - L / 2

    def _xy(self, u):
        R, L = self.radius, self.length
        k, v = self._piece(u)
        if k == 0:
            return v, -R
        if k == 1:
            return L / 2 + R * math.sin(v), -R * math.cos(v)
        if k == 2:
            return L / 2 - v, R
        return -L / 2 - R * math.sin(v), R * math.cos(v)

    def _dxy(self, u):
        k, v = self._piece(u)
        if k == 0:
            return 1.0, 0.0
        if k == 1:
            return math.cos(v), math.sin(v)
        if k == 2:
            return -1.0, 0.0
        return -math.cos(v), -math.sin(v)

    def _ddxy(self, u):
        R = self.radius
        k, v = self._piece(u)
        if k in (0, 2):
            return 0.0, 0.0
        if k == 1:
            return -math.sin(v) / R, math.cos(v) / R
        return math.sin(v) / R, -math.cos(v) / R

    def _u_of_s(self, s):
        return s

    def _s_of_u(self, u):
        return _wrap(u, self.perimeter)

    def support(self, angle):
        return 0.5 * self.length * abs(math.cos(angle)) + self.radius

    def implicit(self, x, y):
        cx = min(max(x, -self.length / 2), self.length / 2)
        return math.hypot(x - cx, y) - self.radius


class Polygon(BoundaryCurve):
    """Strictly convex polygon; vertices are reordered counterclockwise."""

    kind = "polygon"

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("need at least three 2-d vertices")
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area < 0:
            v = v[::-1]
        n = len(v)
        for i in range(n):
            a, b, c = v[i - 1], v[i], v[(i + 1) % n]
            cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if cr <= 1e-14:
                raise ValueError("vertices are not in strictly convex position")
        self.vertices = v
        self._v = [tuple(map(float, p)) for p in v]
        lengths = [math.dist(self._v[i], self._v[(i + 1) % n]) for i in range(n)]
        self._cum = [0.0]
        for L in lengths:
            self._cum.append(self._cum[-1] + L)
        self.perimeter = self._cum[-1]
        self._lengths = lengths
        self._tol = 1e-12 * self.perimeter

    def __repr__(self):
        return f"Polygon({self.vertices.tolist()!r})"

    @property
    def breakpoints(self):
        return list(self._cum[:-1])

    def is_vertex(self, s):
        s = _wrap(s, self.perimeter)
        k = bisect.bisect_right(self._cum, s) - 1
        return min(abs(s - self._cum[k]), abs(self._cum[k + 1] - s)) <= self._tol

    def side_of(self, s):
        s = _wrap(s, self.perimeter)
        return min(bisect.bisect_right(self._cum, s) - 1, len(self._v) - 1)

    def frame(self, s):
        s = _wrap(s, self.perimeter)
        k = self.side_of(s)
        if min(abs(s - self._cum[k]), abs(self._cum[k + 1] - s)) <= self._tol:
            raise VertexParam(f"s={s!r} is a polygon vertex")
        (x0, y0), (x1, y1) = self._v[k], self._v[(k + 1) % len(self._v)]
        L = self._lengths[k]
        tx, ty = (x1 - x0) / L, (y1 - y0) / L
        w = s - self._cum[k]
        return x0 + w * tx, y0 + w * ty, tx, ty

    def point(self, s):
        s = _wrap(s, self.perimeter)
        k = self.side_of(s)
        (x0, y0), (x1, y1) = self._v[k], self._v[(k + 1) % len(self._v)]
        w = (s - self._cum[k]) / self._lengths[k]
        return x0 + w * (x1 - x0), y0 + w * (y1 - y0)

    def curvature(self, s):
        self.frame(s)
        return 0.0

    def locate(self, x, y):
        best = None
        n = len(self._v)
        for k in range(n):
            (x0, y0), (x1, y1) = self._v[k], self._v[(k + 1) % n]
            L = self._lengths[k]
            w = ((x - x0) * (x1 - x0) + (y - y0) * (y1 - y0)) / L
            w = min(max(w, 0.0), L)
            d = math.hypot(x0 + w * (x1 - x0) / L - x, y0 + w * (y1 - y0) / L - y)
            if best is None or d < best[0]:
                best = (d, self._cum[k] + w)
        return _wrap(best[1], self.perimeter)

    def support(self, angle):
        c, s = math.cos(angle), math.sin(angle)
        return max(x * c + y * s for x, y in self._v)

    def implicit(self, x, y):
        n = len(self._v)
        worst = -math.inf
        for k in range(n):
            (x0, y0), (x1, y1) = self._v[k], self._v[(k + 1) % n]
            L = self._lengths[k]
            # outward signed distance to the side line
            worst = max(worst, ((x - x0) * (y1 - y0) - (y - y0) * (x1 - x0)) / L)
        return worst

    @property
    def diameter(self):
        return max(math.dist(p, q) for p in self._v for q in self._v)

    def _inward_at(self, s0, dx, dy):
        s0 = _wrap(s0, self.perimeter)
        if self.is_vertex(s0):
            # at a vertex accept any direction strictly inside the corner
            k = int(np.argmin([abs(s0 - c) for c in self._cum])) % len(self._v)
            px, py = self._v[k]
            for j in (k - 1, k):
                (x0, y0), (x1, y1) = self._v[j % len(self._v)], self._v[(j + 1) % len(self._v)]
                L = self._lengths[j % len(self._v)]
                if (-(y1 - y0) * dx + (x1 - x0) * dy) / L <= TANGENCY_TOL:
                    raise GeometryError("direction leaves the corner")
            return px, py
        px, py, tx, ty = self._check_launch(s0, dx, dy)
        return px, py

    def ray_exit(self, s0, dx, dy):
        px, py = self._inward_at(s0, dx, dy)
        n = len(self._v)
        best = None
        for k in range(n):
            (x0, y0), (x1, y1) = self._v[k], self._v[(k + 1) % n]
            ex, ey = x1 - x0, y1 - y0
            den = dx * ey - dy * ex
            if abs(den) < 1e-300:
                continue
            tau = ((x0 - px) * ey - (y0 - py) * ex) / den
            sig = ((x0 - px) * dy - (y0 - py) * dx) / den
            if tau > self._tol and -1e-12 <= sig <= 1.0 + 1e-12:
                if best is None or tau < best[0]:
                    best = (tau, k, min(max(sig, 0.0), 1.0))
        if best is None:
            raise GeometryError("ray does not cross the table interior")
        _, k, sig = best
        s1 = _wrap(self._cum[k] + sig * self._lengths[k], self.perimeter)
        self._check_landing(s1, dx, dy)
        return s1

    def arc_exit_full(self, s0, dx, dy, radius, orientation):
        px, py = self._inward_at(s0, dx, dy)
        sig = 1.0 if orientation > 0 else -1.0
        jx, jy = -dy, dx
        n = len(self._v)
        cands = []
        for k in range(n):
            (x0, y0), (x1, y1) = self._v[k], self._v[(k + 1) % n]
            ex, ey = x1 - x0, y1 - y0
            qx, qy = x0 - px, y0 - py
            A = (ex * ex + ey * ey) / (2 * radius)
            B = (qx * ex + qy * ey) / radius - sig * (ex * jx + ey * jy)
            C = (qx * qx + qy * qy) / (2 * radius) - sig * (qx * jx + qy * jy)
            disc = B * B - 4 * A * C
            if disc < 0:
                continue
            sq = math.sqrt(disc)
            for w in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
                if -1e-12 <= w <= 1 + 1e-12:
                    w = min(max(w, 0.0), 1.0)
                    x, y = x0 + w * ex, y0 + w * ey
                    psi = _sweep(px, py, dx, dy, radius, sig, x, y)
                    if psi is not None:
                        cands.append((psi, self._cum[k] + w * self._lengths[k]))
        if not cands:
            raise NoReturn("Larmor circle never meets the boundary again")
        psi, s1 = min(cands)
        s1 = _wrap(s1, self.perimeter)
        c, sn = math.cos(sig * psi), math.sin(sig * psi)
        vx, vy = c * dx - sn * dy, sn * dx + c * dy
        self._check_landing(s1, vx, vy)
        return s1, vx, vy


def regular_polygon(n, radius=1.0, phase=0.0):
    a = phase + TWO_PI * np.arange(n) / n
    return Polygon(np.column_stack([radius * np.cos(a), radius * np.sin(a)]))


def unit_square():
    return Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


# ---------------------------------------------------------------------------
# Minkowski norms


@dataclass(eq=False)
class MinkowskiNorm:
    """Positively homogeneous, possibly asymmetric norm on the plane.

    kinds: ``euclidean``; ``scaled`` (``params=(k,)``); ``p-gauge``
    (``params=(p,)``, p >= 2); ``support`` (``params`` are Fourier
    coefficients of the support function of a convex body containing the
    origin, same layout as :class:`SupportOval`).
    """

    kind: str = "euclidean"
    params: tuple = ()

    def __post_init__(self):
        self.params = tuple(float(p) for p in self.params)
        if self.kind == "scaled" and not self.params[0] > 0:
            raise ValueError("scale must be positive")
        if self.kind == "p-gauge" and not self.params[0] > 1:
            raise ValueError("p-gauge needs p > 1")
        if self.kind == "support":
            self._body = SupportOval(self.params)
            if min(self._body.support(t) for t in np.linspace(0, TWO_PI, 721)) <= 0:
                raise ValueError("origin must lie inside the body")
        if self.kind not in ("euclidean", "scaled", "p-gauge", "support"):
            raise ValueError(f"unknown norm kind {self.kind!r}")

    @property
    def symmetric(self):
        if self.kind != "support":
            return True
        return all(v == 0.0 for v in self._body.coeffs[1:][0::4] + self._body.coeffs[1:][1::4])

    def __call__(self, vx, vy=None):
        if vy is None:
            vx, vy = vx
        if self.kind == "euclidean":
            return math.hypot(vx, vy)
        if self.kind == "scaled":
            return self.params[0] * math.hypot(vx, vy)
        if self.kind == "p-gauge":
            p = self.params[0]
            m = max(abs(vx), abs(vy))
            if m == 0.0:
                return 0.0
            return m * ((abs(vx) / m) ** p + (abs(vy) / m) ** p) ** (1.0 / p)
        r = math.hypot(vx, vy)
        if r == 0.0:
            return 0.0
        return r * self._body._h(math.atan2(vy, vx))

    def grad(self, vx, vy):
        """Gradient of the norm at a nonzero vector (degree-0 homogeneous)."""
        if self.kind in ("euclidean", "scaled"):
            r = math.hypot(vx, vy)
            k = self.params[0] if self.kind == "scaled" else 1.0
            return k * vx / r, k * vy / r
        if self.kind == "p-gauge":
            p = self.params[0]
            N = self(vx, vy)
            gx = math.copysign((abs(vx) / N) ** (p - 1), vx)
            gy = math.copysign((abs(vy) / N) ** (p - 1), vy)
            return gx, gy
        t = math.atan2(vy, vx)
        h, hp = self._body._h(t), self._body._h(t, 1)
        c, s = math.cos(t), math.sin(t)
        return h * c - hp * s, h * s + hp * c


# ---------------------------------------------------------------------------
# Klein model


def klein_distance(x, y):
    """Hyperbolic distance between two points of the Klein disc."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bx, by = 1.0 - float(x @ x), 1.0 - float(y @ y)
    if bx <= 0.0 or by <= 0.0:
        raise ModelError("point on or outside the unit disc")
    # hyperboloid lift; sinh(d/2) = |X - Y|_M / 2
    X0, Y0 = 1.0 / math.sqrt(bx), 1.0 / math.sqrt(by)
    dx, dy = x * X0 - y * Y0, X0 - Y0
    q = float(dx @ dx) - dy * dy
    return 2.0 * math.asinh(math.sqrt(max(q, 0.0)) / 2.0)


def klein_distance_grad(x, y):
    """Gradients of :func:`klein_distance` with respect to ``x`` and ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = 1.0 - float(x @ y)
    B = 1.0 - float(x @ x)
    C = 1.0 - float(y @ y)
    sq = math.sqrt(B * C)
    sh = math.sinh(klein_distance(x, y))
    gy = (-x + A * y / C) / sq / sh
    gx = (-y + A * x / B) / sq / sh
    return gx, gy


@dataclass(eq=False)
class HyperbolicTable:
    """Convex table drawn in the Klein disc; chords are straight segments."""

    curve: BoundaryCurve
    model: str = "klein"

    def __post_init__(self):
        if self.model != "klein":
            raise ModelError("only the Klein model is supported")
        reach = max(self.curve.support(t) for t in np.linspace(0.0, TWO_PI, 721))
        if reach >= 1.0:
            raise ModelError("table must lie strictly inside the unit disc")

    def distance(self, s0, s1):
        return hyperbolic_chord(self, s0, s1)


# ---------------------------------------------------------------------------
# public operations


def eval_curve(curve: BoundaryCurve, s: float):
    """Point, unit tangent and inward unit normal at arc length ``s``."""
    if not math.isfinite(s):
        raise ValueError("s must be finite")
    px, py, tx, ty = curve.frame(s)
    return np.array([px, py]), np.array([tx, ty]), np.array([-ty, tx])


def ray_exit(curve: BoundaryCurve, s0: float, direction) -> float:
    dx, dy = float(direction[0]), float(direction[1])
    n = math.hypot(dx, dy)
    return curve.ray_exit(s0, dx / n, dy / n)


def arc_exit(curve: BoundaryCurve, s0: float, direction, larmor_radius: float, orientation: int = 1) -> float:
    if not larmor_radius > 0:
        raise ValueError("larmor_radius must be positive")
    dx, dy = float(direction[0]), float(direction[1])
    n = math.hypot(dx, dy)
    return curve.arc_exit_full(s0, dx / n, dy / n, larmor_radius, orientation)[0]


def hyperbolic_chord(table: HyperbolicTable, s0: float, s1: float) -> float:
    x = table.curve.point(s0)
    y = table.curve.point(s1)
    return klein_distance(x, y)


def curve_from_spec(kind: str, params: Sequence[float]) -> BoundaryCurve:
    """Build a curve from a config-style description."""
    p = [float(v) for v in params]
    if kind == "circle":
        return Circle(p[0] if p else 1.0, tuple(p[1:3]) if len(p) >= 3 else (0.0, 0.0))
    if kind == "ellipse":
        return Ellipse(p[0], p[1], tuple(p[2:4]) if len(p) >= 4 else (0.0, 0.0))
    if kind == "polygon":
        if len(p) < 6 or len(p) % 2:
            raise ValueError("polygon needs x,y pairs for at least three vertices")
        return Polygon(np.reshape(p, (-1, 2)))
    if kind == "regular-polygon":
        return regular_polygon(int(p[0]), p[1] if len(p) > 1 else 1.0)
    if kind == "oval":
        return SupportOval(p)
    if kind == "stadium":
        return Stadium(p[0], p[1])
    raise ValueError(f"unknown table kind {kind!r}")
