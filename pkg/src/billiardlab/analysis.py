"""Cross-cutting analyses: symbolic codes and complexity, invariant-graph
detection, rotation numbers, the billiard domain in the space of oriented
lines, and wave fronts.

Oriented lines use the chart (theta, p): the line {x : x . nu(theta) = p}
with unit normal nu = (cos theta, sin theta), traversed in the direction
J nu = (-sin theta, cos theta).  The invariant area form is dtheta ^ dp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import BilliardError, BoundaryState, GeometryError, InsufficientData, LabelAmbiguous, TangentialRay
from .geometry import TWO_PI, BoundaryCurve, Circle, _wrap
from .maps import PhasePoint, birkhoff_step, direction

GRAPH_RESIDUAL = 1e-4 * math.pi
SHARED_S = 1e-6
SPLIT_PHI = 1e-2
BOUNDARY_GAP = 1e-6
TIMES_PER_UNIT = 64


# ---------------------------------------------------------------------------
# symbolic codes and complexity


@dataclass(frozen=True)
class Labeling:
    """Boundary cut into labeled arcs at the arc-length values ``breaks``."""

    perimeter: float
    breaks: tuple
    tol: float = 1e-9

    @classmethod
    def of(cls, curve: BoundaryCurve, breaks: Sequence[float] | None = None) -> "Labeling":
        b = curve.breakpoints if breaks is None else list(breaks)
        if not b:
            raise ValueError("smooth tables need explicit label breaks")
        return cls(curve.perimeter, tuple(sorted(_wrap(float(x), curve.perimeter) for x in b)))

    @property
    def alphabet(self) -> str:
        return "".join(chr(ord("a") + k) for k in range(len(self.breaks)))

    def label(self, s: float) -> str:
        s = _wrap(float(s), self.perimeter)
        b = np.asarray(self.breaks)
        gap = np.abs(s - b)
        gap = np.minimum(gap, self.perimeter - gap)
        if np.min(gap) <= self.tol * self.perimeter:
            raise LabelAmbiguous(f"reflection at s={s!r} lies on a label boundary")
        k = int(np.searchsorted(b, s, side="right")) - 1
        return self.alphabet[k % len(b)]


@dataclass(frozen=True)
class SymbolicCode:
    alphabet: str
    word: str

    def __len__(self) -> int:
        return len(self.word)


def _s_values(orbit) -> np.ndarray:
    if len(orbit) and isinstance(orbit[0], PhasePoint):
        return np.array([p.s for p in orbit])
    a = np.asarray(orbit, float)
    return a[:, 0] if a.ndim == 2 else a


def symbolic_code(labeling: Labeling, orbit) -> SymbolicCode:
    """Label sequence of the reflection points of an orbit."""
    return SymbolicCode(labeling.alphabet, "".join(labeling.label(s) for s in _s_values(orbit)))


def sample_corpus(step: Callable, labeling: Labeling, starts: Sequence, length: int,
                  s_of: Callable = lambda z: z.s) -> list[str]:
    """Words of the given length from each start; starts whose orbit meets a
    label boundary or an undefined reflection are skipped."""
    words = []
    for z in starts:
        w = []
        try:
            for _ in range(length):
                w.append(labeling.label(s_of(z)))
                z = step(z)
        except (BilliardError, ValueError):
            continue
        words.append("".join(w))
    return words


def complexity(corpus: Sequence[str], n_max: int) -> np.ndarray:
    """p(n), n = 1..n_max: distinct subwords of length n over the corpus.

    Only subwords starting at least n_max letters before the end of their
    word are counted, so each one extends to the right; this keeps p
    nondecreasing as for bi-infinite words.  A lower bound for the
    complexity of the system, exact when the corpus exhausts a declared
    finite orbit family.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    words = [w for w in corpus if len(w) >= n_max]
    if not words:
        raise InsufficientData(f"no corpus word of length >= {n_max}")
    p = np.zeros(n_max, dtype=np.int64)
    for n in range(1, n_max + 1):
        seen = set()
        for w in words:
            seen.update(w[i:i + n] for i in range(len(w) - n_max + 1))
        p[n - 1] = len(seen)
    return p


def complexity_checks(p: np.ndarray, alphabet_size: int) -> dict:
    """Monotonicity, p(n+1) <= |A| p(n) and p(n+m) <= p(n) p(m)."""
    p = np.asarray(p)
    n = len(p)
    mono = bool(np.all(p[1:] >= p[:-1]))
    growth = bool(np.all(p[1:] <= alphabet_size * p[:-1])) and bool(p[0] <= alphabet_size)
    sub = all(p[a + b - 1] <= p[a - 1] * p[b - 1] for a in range(1, n) for b in range(1, n - a + 1))
    return {"monotone": mono, "alphabet_bound": growth, "submultiplicative": sub}


# ---------------------------------------------------------------------------
# invariant graphs and rotation numbers


@dataclass(frozen=True)
class GraphVerdict:
    verdict: str  # graph | non-graph | inconclusive
    residual: float


def _phase_array(orbit) -> np.ndarray:
    if len(orbit) and isinstance(orbit[0], PhasePoint):
        return np.array([(p.s, p.phi) for p in orbit])
    return np.asarray(orbit, float).reshape(-1, 2)


def invariant_graph_detect(orbit, perimeter: float | None = None, tol: float = GRAPH_RESIDUAL) -> GraphVerdict:
    """Is the orbit on a curve phi = g(s)?

    Points are sorted by s; a monotone piecewise-cubic fit through every
    other point is evaluated at the remaining ones (both ways round), and
    the largest miss is the residual.  Two points at the same s (within
    1e-6) with phi differing by more than 1e-2 decide non-graph first.
    """
    z = _phase_array(orbit)
    if len(z) < 100:
        raise InsufficientData("need at least 100 orbit points")
    if perimeter is not None:
        z[:, 0] = np.mod(z[:, 0], perimeter)
    z = z[np.argsort(z[:, 0], kind="stable")]
    s, phi = z[:, 0], z[:, 1]
    ds = np.diff(s)
    close = ds <= SHARED_S
    if perimeter is not None:
        wrap = (s[0] + perimeter - s[-1]) <= SHARED_S and abs(phi[0] - phi[-1]) > SPLIT_PHI
    else:
        wrap = False
    split = bool(np.any(close & (np.abs(np.diff(phi)) > SPLIT_PHI))) or wrap
    # drop repeated abscissae before fitting
    keep = np.concatenate([[True], ds > 1e-14 * max(1.0, abs(s[-1]))])
    s, phi = s[keep], phi[keep]
    if perimeter is not None:
        s = np.concatenate([s[-3:] - perimeter, s, s[:3] + perimeter])
        phi = np.concatenate([phi[-3:], phi, phi[:3]])
    res = 0.0
    for a in (0, 1):
        fit_s, fit_p = s[a::2], phi[a::2]
        test = slice(1 - a, None, 2)
        ts, tp = s[test], phi[test]
        inside = (ts >= fit_s[0]) & (ts <= fit_s[-1])
        if len(fit_s) >= 2 and np.any(inside):
            res = max(res, float(np.max(np.abs(PchipInterpolator(fit_s, fit_p)(ts[inside]) - tp[inside]))))
    if split:
        return GraphVerdict("non-graph", res)
    return GraphVerdict("graph" if res < tol else "inconclusive", res)


@dataclass(frozen=True)
class RotationEstimate:
    value: float
    halfwidth: float
    converged: bool


def _bump_weights(n: int) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return w / w.sum()


def rotation_number(orbit, perimeter: float, tol: float = 1e-6) -> RotationEstimate:
    """Mean lifted s-advance per step over the perimeter.

    Uses the smooth-bump weighted Birkhoff average, which converges much
    faster than the plain mean on quasi-periodic orbits; the half-width is
    the disagreement between the two halves of the orbit.
    """
    s = _s_values(orbit)
    if len(s) < 100:
        raise InsufficientData("need at least 100 orbit points")
    inc = np.mod(np.diff(s), perimeter) / perimeter
    m = len(inc) // 2
    full = float(_bump_weights(len(inc)) @ inc)
    a = float(_bump_weights(m) @ inc[:m])
    b = float(_bump_weights(len(inc) - m) @ inc[m:])
    hw = max(abs(a - full), abs(b - full))
    return RotationEstimate(full, hw, hw <= tol)


# ---------------------------------------------------------------------------
# oriented lines


@dataclass(frozen=True)
class LineCoords:
    theta: float
    p: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _wrap(float(self.theta), TWO_PI))


@dataclass
class LineDomain:
    theta: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def contains(self, line: LineCoords) -> bool:
        k = int(np.argmin(np.abs(np.angle(np.exp(1j * (self.theta - line.theta))))))
        return bool(self.lower[k] <= line.p <= self.upper[k])


def line_domain(curve: BoundaryCurve, n_theta: int = 360) -> LineDomain:
    """Fibers {p : line(theta, p) meets the table} = [-h(theta + pi), h(theta)]."""
    th = np.linspace(0.0, TWO_PI, n_theta, endpoint=False)
    lo = np.array([-curve.support(t + math.pi) for t in th])
    hi = np.array([curve.support(t) for t in th])
    if np.any(hi < lo):
        raise GeometryError("support function is not that of a convex body")
    return LineDomain(th, lo, hi)


def line_fiber_bruteforce(curve: BoundaryCurve, theta: float, n: int = 4096) -> tuple[float, float]:
    """Extent of x . nu(theta) over a dense boundary sample (reference oracle)."""
    s = np.linspace(0.0, curve.perimeter, n, endpoint=False)
    pts = np.array([curve.point(v) for v in s])
    proj = pts @ np.array([math.cos(theta), math.sin(theta)])
    return float(proj.min()), float(proj.max())


def _boundary_roots(curve: BoundaryCurve, g: Callable, n: int = 512) -> list[float]:
    L = curve.perimeter
    nodes = np.linspace(0.0, L, n + 1)
    vals = [g(v) for v in nodes]
    out = []
    for a, b, fa, fb in zip(nodes, nodes[1:], vals, vals[1:]):
        if fa == 0.0:
            out.append(float(a))
        elif fa * fb < 0.0:
            out.append(brentq(g, a, b, xtol=1e-15 * L, rtol=8.9e-16, maxiter=200))
    return out


def line_entry(curve: BoundaryCurve, line: LineCoords) -> PhasePoint:
    """Boundary point where the oriented line enters the table, as a phase point."""
    c, s = math.cos(line.theta), math.sin(line.theta)
    dx, dy = -s, c
    lo, hi = -curve.support(line.theta + math.pi), curve.support(line.theta)
    if not (lo + BOUNDARY_GAP < line.p < hi - BOUNDARY_GAP):
        raise BoundaryState(f"line {line} is within {BOUNDARY_GAP} of the boundary of the domain")
    if isinstance(curve, Circle):
        cx, cy = curve.center
        q = line.p - (cx * c + cy * s)
        h = math.sqrt(curve.radius ** 2 - q * q)
        x, y = cx + q * c - h * dx, cy + q * s - h * dy
        s0 = curve.locate(x, y)
    else:
        def g(v):
            x, y = curve.point(v)
            return x * c + y * s - line.p
        best = None
        for r in _boundary_roots(curve, g):
            _, _, tx, ty = curve.frame(r)
            into = -ty * dx + tx * dy
            if into > 0 and (best is None or into > best[0]):
                best = (into, r)
        if best is None:
            raise GeometryError("line does not cross the table")
        s0 = best[1]
    _, _, tx, ty = curve.frame(s0)
    phi = math.atan2(-ty * dx + tx * dy, tx * dx + ty * dy)
    return PhasePoint(s0, phi)


def phase_to_line(curve: BoundaryCurve, p: PhasePoint) -> LineCoords:
    px, py, dx, dy = direction(curve, p.s, p.phi)
    nx, ny = dy, -dx
    return LineCoords(math.atan2(ny, nx), px * nx + py * ny)


def line_map(curve: BoundaryCurve, line: LineCoords) -> LineCoords:
    """Billiard map on oriented lines: reflect the line at its exit point."""
    return phase_to_line(curve, birkhoff_step(curve, line_entry(curve, line)))


@dataclass(frozen=True)
class LineJacobian:
    J: np.ndarray
    det: float
    twist: float  # d theta' / d p, reported only


def line_map_jacobian(curve: BoundaryCurve, line: LineCoords, h: float = 1e-5) -> LineJacobian:
    """Central-difference Jacobian of line_map in (theta, p)."""
    lo, hi = -curve.support(line.theta + math.pi), curve.support(line.theta)
    if not (lo + BOUNDARY_GAP < line.p < hi - BOUNDARY_GAP):
        raise BoundaryState(f"line {line} is within {BOUNDARY_GAP} of the boundary of the domain")
    h = min(h, 0.25 * (line.p - lo), 0.25 * (hi - line.p))
    cols = []
    for dth, dp in ((h, 0.0), (0.0, h)):
        a = line_map(curve, LineCoords(line.theta + dth, line.p + dp))
        b = line_map(curve, LineCoords(line.theta - dth, line.p - dp))
        d_th = math.remainder(a.theta - b.theta, TWO_PI)
        cols.append([d_th / (2 * h), (a.p - b.p) / (2 * h)])
    J = np.array(cols).T
    return LineJacobian(J, float(np.linalg.det(J)), float(J[0, 1]))


# ---------------------------------------------------------------------------
# wave fronts


def _first_hit(curve: BoundaryCurve, P: np.ndarray, d: np.ndarray) -> float:
    """Arc-length parameter where the ray from an interior point leaves the table."""
    if isinstance(curve, Circle):
        o = P - np.asarray(curve.center, float)
        b = float(o @ d)
        tau = -b + math.sqrt(b * b - float(o @ o) + curve.radius ** 2)
        x = o + tau * d
        return _wrap(curve.radius * math.atan2(x[1], x[0]), curve.perimeter)
    px, py = float(P[0]), float(P[1])
    dx, dy = float(d[0]), float(d[1])

    def g(v):
        x, y = curve.point(v)
        return dx * (y - py) - dy * (x - px)

    for r in _boundary_roots(curve, g):
        x, y = curve.point(r)
        if (x - px) * dx + (y - py) * dy > 0:
            return r
    raise GeometryError("ray from the source does not meet the boundary")


@dataclass
class RayFan:
    """Broken rays from a source: vertices (n, k, 2), cumulative lengths (n, k)
    padded past the last vertex, and the number of dropped rays."""

    source: np.ndarray
    angles: np.ndarray
    vertices: np.ndarray
    cumlen: np.ndarray
    dropped: int

    def positions(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Points at path length t and the number of reflections before them."""
        k = np.sum(self.cumlen <= t, axis=1) - 1
        k = np.clip(k, 0, self.cumlen.shape[1] - 2)
        rows = np.arange(len(k))
        a, b = self.vertices[rows, k], self.vertices[rows, k + 1]
        la, lb = self.cumlen[rows, k], self.cumlen[rows, k + 1]
        w = ((t - la) / (lb - la))[:, None]
        return a + w * (b - a), k


def ray_fan(curve: BoundaryCurve, source, t_max: float, n_rays: int = 4096) -> RayFan:
    P = np.asarray(source, float)
    if curve.implicit(float(P[0]), float(P[1])) >= 0:
        raise ValueError("source must be strictly inside the table")
    if t_max <= 0:
        raise ValueError("t must be positive")
    ang = np.arange(n_rays) * TWO_PI / n_rays
    paths, keep, dropped = [], [], 0
    for j, a in enumerate(ang):
        d = np.array([math.cos(a), math.sin(a)])
        try:
            s = _first_hit(curve, P, d)
            x = np.asarray(curve.point(s))
            verts, lens = [P, x], [0.0, float(np.hypot(*(x - P)))]
            _, _, tx, ty = curve.frame(s)
            ph = PhasePoint(s, math.atan2(ty * d[0] - tx * d[1], tx * d[0] + ty * d[1]))
            while lens[-1] <= t_max:
                ph = birkhoff_step(curve, ph)
                y = np.asarray(curve.point(ph.s))
                lens.append(lens[-1] + float(np.hypot(*(y - verts[-1]))))
                verts.append(y)
        except (TangentialRay, ValueError, GeometryError):
            dropped += 1
            continue
        paths.append((verts, lens))
        keep.append(j)
    k = max(len(v) for v, _ in paths)
    V = np.zeros((len(paths), k, 2))
    C = np.full((len(paths), k), np.inf)
    for r, (v, l) in enumerate(paths):
        V[r, : len(v)] = v
        V[r, len(v):] = v[-1]
        C[r, : len(l)] = l
    return RayFan(P, ang[keep], V, C, dropped)


@dataclass
class WaveFront:
    t: float
    polylines: list
    dropped: int

    @property
    def length(self) -> float:
        return float(sum(np.sum(np.hypot(*np.diff(p, axis=0).T)) for p in self.polylines))

    @property
    def points(self) -> np.ndarray:
        return np.concatenate(self.polylines)

    @property
    def diameter(self) -> float:
        pts = self.points
        if len(pts) > 2:
            from scipy.spatial import ConvexHull

            try:
                pts = pts[ConvexHull(pts).vertices]
            except Exception:
                pass
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def front_from_fan(fan: RayFan, t: float) -> WaveFront:
    pts, k = fan.positions(t)
    full = fan.dropped == 0
    cut = np.flatnonzero(k[1:] != k[:-1]) + 1
    pieces = np.split(np.arange(len(k)), cut)
    if full and len(pieces) > 1 and k[0] == k[-1]:
        pieces = [np.concatenate([pieces[-1], pieces[0]])] + pieces[1:-1]
        polys = [pts[p] for p in pieces]
    elif full and len(pieces) == 1:
        polys = [np.vstack([pts, pts[:1]])]
    else:
        polys = [pts[p] for p in pieces]
    return WaveFront(t, polys, fan.dropped)


def wave_front(curve: BoundaryCurve, source, t: float, n_rays: int = 4096) -> WaveFront:
    """Locus at path length t of the rays leaving the source, split where the
    number of reflections changes."""
    return front_from_fan(ray_fan(curve, source, t, n_rays), t)


def _cell_centers(curve: BoundaryCurve, eps: float) -> np.ndarray:
    x0, x1 = -curve.support(math.pi), curve.support(0.0)
    y0, y1 = -curve.support(1.5 * math.pi), curve.support(0.5 * math.pi)
    xs = np.arange(x0 + eps / 2, x1, eps)
    ys = np.arange(y0 + eps / 2, y1, eps)
    X, Y = np.meshgrid(xs, ys)
    c = np.column_stack([X.ravel(), Y.ravel()])
    # convex inside test against a fine boundary polygon
    s = np.linspace(0.0, curve.perimeter, 1024, endpoint=False)
    B = np.array([curve.point(v) for v in s])
    E = np.roll(B, -1, axis=0) - B
    inside = np.ones(len(c), bool)
    for b, e in zip(B, E):
        inside &= e[0] * (c[:, 1] - b[1]) - e[1] * (c[:, 0] - b[0]) >= 0
    return c[inside]


def front_density(curve: BoundaryCurve, source, T: Sequence[float] | float, eps: float = 0.05,
                  n_rays: int = 4096, times_per_unit: int = TIMES_PER_UNIT) -> np.ndarray:
    """Fraction of eps-grid cells of the table within eps of a sampled front
    at some time in (0, T], for each requested T.  Nondecreasing in T."""
    Ts = np.atleast_1d(np.asarray(T, float))
    fan = ray_fan(curve, source, float(Ts.max()), n_rays)
    centers = _cell_centers(curve, eps)
    covered = np.zeros(len(centers), bool)
    times = np.arange(1, int(math.ceil(times_per_unit * Ts.max())) + 1) / times_per_unit
    out = np.empty(len(Ts))
    order = np.argsort(Ts)
    j = 0
    for ti in times:
        while j < len(order) and Ts[order[j]] < ti:
            out[order[j]] = covered.mean()
            j += 1
        if not covered.all():
            tree = cKDTree(fan.positions(ti)[0])
            free = np.flatnonzero(~covered)
            d, _ = tree.query(centers[free], distance_upper_bound=eps)
            covered[free[np.isfinite(d)]] = True
    while j < len(order):
        out[order[j]] = covered.mean()
        j += 1
    return out
