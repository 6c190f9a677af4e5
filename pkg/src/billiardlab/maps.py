"""Step maps for the billiard families: Birkhoff, Minkowski, magnetic,
pensive, symplectic, projective and outer billiards, plus the
three-bead/triangle correspondence.

Phase points are ``(s, phi)`` with ``phi`` the angle from the positive
tangent to the outgoing direction, ``0 < phi < pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import brentq

from .errors import (
    DomainError,
    FieldDegenerate,
    GeometryError,
    InvalidMasses,
    ReflectionUndefined,
    TieBreak,
)
from .geometry import TWO_PI, BoundaryCurve, Circle, MinkowskiNorm, Polygon, SmoothCurve, _wrap


@dataclass(frozen=True)
class PhasePoint:
    s: float
    phi: float

    def __post_init__(self):
        if not (0.0 < self.phi < math.pi):
            raise ValueError(f"phi must lie in (0, pi), got {self.phi!r}")

    def reversed(self) -> "PhasePoint":
        """Same boundary point, direction of the incoming chord reversed."""
        return PhasePoint(self.s, math.pi - self.phi)


@dataclass(frozen=True)
class ChordState:
    s0: float
    s1: float


def direction(curve: BoundaryCurve, s: float, phi: float):
    """Point and outgoing unit direction of a phase point, as floats."""
    px, py, tx, ty = curve.frame(s)
    c, sn = math.cos(phi), math.sin(phi)
    return px, py, c * tx - sn * ty, c * ty + sn * tx


def _reflect_angle(curve, s1, vx, vy):
    """Outgoing angle after an equal-angle reflection of velocity v at s1."""
    _, _, tx, ty = curve.frame(s1)
    return math.atan2(ty * vx - tx * vy, tx * vx + ty * vy)


def birkhoff_step(curve: BoundaryCurve, p: PhasePoint) -> PhasePoint:
    if isinstance(curve, Circle):
        # rigid rotation; avoids round-off from the generic chord solver
        return PhasePoint(_wrap(p.s + 2.0 * p.phi * curve.radius, curve.perimeter), p.phi)
    return birkhoff_step_generic(curve, p)


def birkhoff_step_generic(curve: BoundaryCurve, p: PhasePoint) -> PhasePoint:
    _, _, dx, dy = direction(curve, p.s, p.phi)
    s1 = curve.ray_exit(p.s, dx, dy)
    return PhasePoint(s1, _reflect_angle(curve, s1, dx, dy))


# ---------------------------------------------------------------------------
# Minkowski billiard


def minkowski_step(curve: BoundaryCurve, norm: MinkowskiNorm, c: ChordState) -> ChordState:
    """Advance a chord so that ``L(s0,s1) + L(s1,s2)`` is stationary in ``s1``.

    ``grad N(w) . t1`` is strictly decreasing as ``w`` turns from ``t1`` to
    ``-t1`` through the interior, so the outgoing direction is the unique
    root of a scalar equation in the turning angle.
    """
    x0 = curve.point(c.s0)
    x1x, x1y, tx, ty = curve.frame(c.s1)
    vx, vy = x1x - x0[0], x1y - x0[1]
    if math.hypot(vx, vy) < 1e-14 * curve.perimeter:
        raise ReflectionUndefined("degenerate chord")
    gx, gy = norm.grad(vx, vy)
    target = gx * tx + gy * ty
    nx, ny = -ty, tx

    def f(psi):
        c_, s_ = math.cos(psi), math.sin(psi)
        ax, ay = norm.grad(c_ * tx + s_ * nx, c_ * ty + s_ * ny)
        return ax * tx + ay * ty - target

    lo, hi = 1e-9, math.pi - 1e-9
    flo, fhi = f(lo), f(hi)
    if not (flo > 0.0 > fhi):
        raise ReflectionUndefined("no interior stationary chord")
    psi = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    s2 = curve.ray_exit(c.s1, math.cos(psi) * tx + math.sin(psi) * nx, math.cos(psi) * ty + math.sin(psi) * ny)
    return ChordState(c.s1, s2)


def minkowski_residual(curve, norm, s0, s1, s2) -> float:
    """``d/ds1 [N(g(s1)-g(s0)) + N(g(s2)-g(s1))]`` at the given triple."""
    x0, x2 = curve.point(s0), curve.point(s2)
    x1x, x1y, tx, ty = curve.frame(s1)
    ax, ay = norm.grad(x1x - x0[0], x1y - x0[1])
    bx, by = norm.grad(x2[0] - x1x, x2[1] - x1y)
    return (ax - bx) * tx + (ay - by) * ty


def chord_to_phase(curve, c: ChordState) -> PhasePoint:
    """Euclidean phase point at ``s0`` whose chord ends at ``s1``."""
    x0x, x0y, tx, ty = curve.frame(c.s0)
    x1 = curve.point(c.s1)
    vx, vy = x1[0] - x0x, x1[1] - x0y
    return PhasePoint(c.s0, math.atan2(-ty * vx + tx * vy, tx * vx + ty * vy))


def phase_to_chord(curve, p: PhasePoint) -> ChordState:
    _, _, dx, dy = direction(curve, p.s, p.phi)
    return ChordState(p.s, curve.ray_exit(p.s, dx, dy))


# ---------------------------------------------------------------------------
# magnetic billiard


def magnetic_step(curve: BoundaryCurve, B: float, orientation: int, p: PhasePoint) -> PhasePoint:
    if not B > 0:
        raise ValueError("field strength must be positive")
    _, _, dx, dy = direction(curve, p.s, p.phi)
    s1, vx, vy = curve.arc_exit_full(p.s, dx, dy, 1.0 / B, orientation)
    return PhasePoint(s1, _reflect_angle(curve, s1, vx, vy))


def larmor_center(curve, B, orientation, p: PhasePoint):
    """Center of the Larmor circle leaving from phase point ``p``."""
    px, py, dx, dy = direction(curve, p.s, p.phi)
    r = (1.0 if orientation > 0 else -1.0) / B
    return np.array([px - r * dy, py + r * dx])


# ---------------------------------------------------------------------------
# pensive billiard


@dataclass
class DelayFunction:
    """Boundary slide ``l(alpha) >= 0`` applied after each reflection.

    kinds: ``constant`` (``values=(k,)``), ``half-perimeter``, ``tabulated``
    (``alphas``, ``values`` with monotone cubic interpolation on (0, pi)).
    """

    kind: str = "constant"
    values: Sequence[float] = (0.0,)
    alphas: Sequence[float] = ()

    def __post_init__(self):
        if self.kind == "tabulated":
            a = np.asarray(self.alphas, float)
            v = np.asarray(self.values, float)
            if len(a) < 2 or len(a) != len(v) or np.any(np.diff(a) <= 0):
                raise ValueError("tabulated delay needs increasing alphas matching values")
            if a[0] < 0 or a[-1] > math.pi:
                raise ValueError("alphas must lie in [0, pi]")
            self._interp = PchipInterpolator(a, v, extrapolate=True)
            v = self._interp(np.linspace(1e-9, math.pi - 1e-9, 1001))
        elif self.kind == "constant":
            v = np.asarray(self.values[:1], float)
        elif self.kind == "half-perimeter":
            v = np.zeros(1)
        else:
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if np.any(v < 0):
            raise ValueError("delay must be nonnegative")

    def __call__(self, alpha: float, perimeter: float) -> float:
        if self.kind == "constant":
            return float(self.values[0])
        if self.kind == "half-perimeter":
            return 0.5 * perimeter
        return float(self._interp(alpha))


def pensive_step(curve: BoundaryCurve, delay: DelayFunction, p: PhasePoint) -> PhasePoint:
    q = birkhoff_step(curve, p)
    return PhasePoint(_wrap(q.s + delay(q.phi, curve.perimeter), curve.perimeter), q.phi)


# ---------------------------------------------------------------------------
# symplectic billiard


def symplectic_billiard_step(curve: BoundaryCurve, pair: ChordState) -> ChordState:
    """New chord from ``g(s0)`` parallel to the tangent at ``g(s1)``."""
    _, _, tx, ty = curve.frame(pair.s1)
    if isinstance(curve, Polygon) and curve.is_vertex(pair.s0):
        for sign in (1.0, -1.0):
            try:
                return ChordState(pair.s1, curve.ray_exit(pair.s0, sign * tx, sign * ty))
            except GeometryError:
                continue
        raise ReflectionUndefined("no admissible chord from the corner")
    _, _, ux, uy = curve.frame(pair.s0)
    dn = -uy * tx + ux * ty
    if abs(dn) < 1e-12:
        raise ReflectionUndefined("tangent at the pivot is parallel to the boundary at s0")
    sign = 1.0 if dn > 0 else -1.0
    try:
        s2 = curve.ray_exit(pair.s0, sign * tx, sign * ty)
    except GeometryError as exc:
        raise ReflectionUndefined(str(exc)) from exc
    return ChordState(pair.s1, s2)


def parallel_residual(curve, s0, s1, s2) -> float:
    """Sine of the angle between ``g(s2) - g(s0)`` and the tangent at ``s1``."""
    x0, x2 = curve.point(s0), curve.point(s2)
    _, _, tx, ty = curve.frame(s1)
    vx, vy = x2[0] - x0[0], x2[1] - x0[1]
    return (vx * ty - vy * tx) / math.hypot(vx, vy)


# ---------------------------------------------------------------------------
# projective billiard


@dataclass
class TransverseField:
    """Direction field along the boundary used by projective reflection.

    kinds: ``inward-normal``; ``concurrent`` (``point=(ox, oy)``, lines
    through an interior point); ``tabulated`` (``s_nodes``, ``angles`` from
    the tangent, periodic spline in ``s``).
    """

    kind: str = "inward-normal"
    point: tuple = (0.0, 0.0)
    s_nodes: Sequence[float] = ()
    angles: Sequence[float] = ()
    curve: BoundaryCurve | None = None

    def __post_init__(self):
        if self.kind == "tabulated":
            s = np.asarray(self.s_nodes, float)
            a = np.asarray(self.angles, float)
            if self.curve is None:
                raise ValueError("tabulated field needs the curve for its period")
            s = np.append(s, s[0] + self.curve.perimeter)
            a = np.append(a, a[0])
            self._spline = CubicSpline(s, a, bc_type="periodic")
        elif self.kind not in ("inward-normal", "concurrent"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.curve is not None:
            self.check_transverse(self.curve)

    def at(self, curve, s):
        px, py, tx, ty = curve.frame(s)
        if self.kind == "inward-normal":
            return -ty, tx
        if self.kind == "concurrent":
            fx, fy = self.point[0] - px, self.point[1] - py
            n = math.hypot(fx, fy)
            return fx / n, fy / n
        s_first = float(self.s_nodes[0])
        b = float(self._spline(_wrap(s - s_first, curve.perimeter) + s_first))
        c, sn = math.cos(b), math.sin(b)
        return c * tx - sn * ty, c * ty + sn * tx

    def check_transverse(self, curve, samples=512):
        for s in np.linspace(0.0, curve.perimeter, samples, endpoint=False):
            if curve.is_vertex(s):
                continue
            _, _, tx, ty = curve.frame(s)
            fx, fy = self.at(curve, s)
            if abs(-ty * fx + tx * fy) <= 1e-6:
                raise FieldDegenerate(f"field not transverse at s={s:.6g}")


def projective_reflect(v, t, f):
    """Keep the ``t`` component of ``v`` and reverse its ``f`` component."""
    vx, vy = v
    tx, ty = t
    fx, fy = f
    det = tx * fy - ty * fx
    a = (vx * fy - vy * fx) / det
    b = (tx * vy - ty * vx) / det
    ox, oy = a * tx - b * fx, a * ty - b * fy
    n = math.hypot(ox, oy)
    return ox / n, oy / n


def projective_step(curve: BoundaryCurve, fld: TransverseField, p: PhasePoint) -> PhasePoint:
    _, _, dx, dy = direction(curve, p.s, p.phi)
    s1 = curve.ray_exit(p.s, dx, dy)
    _, _, tx, ty = curve.frame(s1)
    fx, fy = fld.at(curve, s1)
    if abs(-ty * fx + tx * fy) < 1e-6:
        raise FieldDegenerate(f"field nearly tangent at s={s1!r}")
    ox, oy = projective_reflect((dx, dy), (tx, ty), (fx, fy))
    return PhasePoint(s1, math.atan2(-ty * ox + tx * oy, tx * ox + ty * oy))


# ---------------------------------------------------------------------------
# outer billiard


def outer_billiard_step(curve: BoundaryCurve, z, orientation: int = 1) -> np.ndarray:
    """Reflect ``z`` through the support point seen with the table on the left
    (``orientation=+1``) or on the right (``-1``)."""
    zx, zy = float(z[0]), float(z[1])
    sig = 1.0 if orientation > 0 else -1.0
    if curve.implicit(zx, zy) <= 1e-12 * curve.perimeter:
        raise DomainError("point is not strictly outside the table")
    if isinstance(curve, Polygon):
        x = _polygon_support_vertex(curve, zx, zy, sig)
    elif isinstance(curve, Circle):
        cx, cy = curve.center
        d = math.hypot(zx - cx, zy - cy)
        a = math.atan2(zy - cy, zx - cx) + sig * math.acos(curve.radius / d)
        x = (cx + curve.radius * math.cos(a), cy + curve.radius * math.sin(a))
    else:
        x = _smooth_support_point(curve, zx, zy, sig)
    return np.array([2.0 * x[0] - zx, 2.0 * x[1] - zy])


def _polygon_support_vertex(poly: Polygon, zx, zy, sig):
    scale = poly.diameter
    for i, (vx, vy) in enumerate(poly._v):
        ax, ay = vx - zx, vy - zy
        crosses = []
        for j, (wx, wy) in enumerate(poly._v):
            if j != i:
                crosses.append(sig * (ax * (wy - zy) - ay * (wx - zx)))
        if min(crosses) > -1e-12 * scale * scale:
            if min(abs(c) for c in crosses) <= 1e-12 * scale * scale:
                raise TieBreak("point lies on the extension of a side")
            return vx, vy
    raise GeometryError("no support vertex found")


def _smooth_support_point(curve: SmoothCurve, zx, zy, sig):
    def g(u):
        x, y = curve._xy(u)
        dx, dy = curve._dxy(u)
        return dx * (y - zy) - dy * (x - zx)

    for u in curve._roots(g, 0.0):
        x, y = curve._xy(u)
        dx, dy = curve._dxy(u)
        if sig * ((x - zx) * dx + (y - zy) * dy) > 0:
            return x, y
    raise GeometryError("no tangency point found")


# ---------------------------------------------------------------------------
# beads on a ring


def beads_to_triangle(m1: float, m2: float, m3: float) -> tuple[float, float, float]:
    """Angles of the billiard triangle equivalent to three beads on a ring.

    ``alpha_i`` sits at the corner where both walls are collisions involving
    bead ``i``.  Same-sign masses use the closed formula
    ``tan alpha_1 = sqrt(m1 (m1+m2+m3) / (m2 m3))`` and cyclic shifts.
    Mixed signs (allowed when ``(m1+m2+m3) m1 m2 m3 > 0``) give an obtuse
    triangle; its angles are measured in the kinetic-energy metric, which is
    definite on the center-of-mass plane exactly under that condition.
    """
    m = (float(m1), float(m2), float(m3))
    M = sum(m)
    if any(v == 0.0 for v in m) or not M * m[0] * m[1] * m[2] > 0:
        raise InvalidMasses(f"masses {m} violate (m1+m2+m3) m1 m2 m3 > 0")
    if all(v > 0 for v in m) or all(v < 0 for v in m):
        return tuple(
            math.atan(math.sqrt(m[i] * M / (m[(i + 1) % 3] * m[(i + 2) % 3]))) for i in range(3)
        )
    return kinetic_triangle_angles(m)


def kinetic_triangle_angles(m) -> tuple[float, float, float]:
    """Triangle angles from the kinetic metric ``diag(m)`` on the CM plane."""
    m = np.asarray(m, float)
    M = m.sum()
    # corners: the gap between the two beads other than i equals the full turn
    corners = []
    for i in range(3):
        gaps = np.zeros(3)  # g12, g23, g31
        gaps[(i + 1) % 3] = TWO_PI
        theta = np.array([0.0, gaps[0], gaps[0] + gaps[1]])
        corners.append(theta - (m @ theta) / M)
    G = np.diag(m)
    out = []
    for i in range(3):
        u = corners[(i + 1) % 3] - corners[i]
        v = corners[(i + 2) % 3] - corners[i]
        uu = u @ G @ u
        c = (u @ G @ v) / math.sqrt(uu * (v @ G @ v))
        if uu < 0:
            # negative-definite form: measure with -G
            c = -c
        out.append(math.acos(max(-1.0, min(1.0, c))))
    return tuple(out)


# ---------------------------------------------------------------------------
# orbits and invariants


def iterate(step: Callable, state, n: int) -> list:
    """``[state, step(state), ...]`` with ``n`` steps."""
    out = [state]
    for _ in range(n):
        state = step(state)
        out.append(state)
    return out


def ellipse_invariant(curve, p: PhasePoint) -> float:
    """Caustic parameter of the outgoing chord in an ellipse table."""
    px, py, dx, dy = direction(curve, p.s, p.phi)
    return curve.chord_invariant(px, py, dx, dy)
