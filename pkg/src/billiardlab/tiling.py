"""Tiling billiards: refraction with coefficient -1 on periodic polygonal tilings.

A tiling is a lattice L (rows L[0], L[1]) plus a list of convex prototiles
given CCW in a fundamental domain.  Face (i, j, k) is prototile k shifted by
i L[0] + j L[1].  Trajectories are tracked in face-local coordinates so long
escaping runs keep full precision.

Crossing an edge with unit tangent e keeps the normal component of the
velocity and flips the tangential one, d' = d - 2 (d.e) e: the outgoing
segment is the mirror image of the incoming one across the edge line.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BudgetExceeded, NotAlternating, PathError, VertexHit, WindowExhausted

VERTEX_TOL = 1e-10
MATCH_TOL = 1e-9
FOLDABLE_ANGLES = (np.pi / 12, 5 * np.pi / 12, np.pi / 6, np.pi / 3, np.pi / 8, 3 * np.pi / 8, np.pi / 4)


class FaceRef(NamedTuple):
    i: int
    j: int
    k: int


def _ccw(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return poly if area > 0 else poly[::-1].copy()


def _area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass
class Tiling:
    lattice: np.ndarray
    protos: list
    transparent: list | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    two_colorable: bool | None = None
    window: int | None = None

    def __post_init__(self):
        self.lattice = np.asarray(self.lattice, dtype=float).reshape(2, 2)
        if abs(np.linalg.det(self.lattice)) < 1e-12:
            raise ValueError("degenerate lattice")
        self.protos = [_ccw(np.asarray(p, dtype=float)) for p in self.protos]
        if self.transparent is None:
            self.transparent = [np.zeros(len(p), bool) for p in self.protos]
        else:
            self.transparent = [np.asarray(t, bool) for t in self.transparent]
        for p in self.protos:
            m = len(p)
            for a in range(m):
                u, v = p[(a + 1) % m] - p[a], p[(a + 2) % m] - p[(a + 1) % m]
                if u[0] * v[1] - u[1] * v[0] < -1e-12:
                    raise ValueError("prototiles must be convex")
        self._scale = float(np.max([np.ptp(p, axis=0).max() for p in self.protos]))
        area = sum(_area(p) for p in self.protos)
        if abs(area - abs(np.linalg.det(self.lattice))) > 1e-9 * max(1.0, area):
            raise ValueError("prototile areas do not match the lattice covolume")
        self._build_adjacency()
        # per-edge data in local coordinates
        self._edges = []
        for p in self.protos:
            m = len(p)
            v0, v1 = p, np.roll(p, -1, axis=0)
            d = v1 - v0
            length = np.hypot(d[:, 0], d[:, 1])
            e = d / length[:, None]
            n_out = np.column_stack([e[:, 1], -e[:, 0]])
            self._edges.append((v0, v1, e, n_out, length))

    def _build_adjacency(self):
        adj = {}
        tol = MATCH_TOL * self._scale
        shifts = [(di, dj) for di in range(-2, 3) for dj in range(-2, 3)]
        for k, p in enumerate(self.protos):
            m = len(p)
            for e in range(m):
                a, b = p[e], p[(e + 1) % m]
                found = None
                for di, dj in shifts:
                    off = di * self.lattice[0] + dj * self.lattice[1]
                    for k2, q in enumerate(self.protos):
                        if (di, dj, k2) == (0, 0, k):
                            continue
                        q2 = q + off
                        m2 = len(q2)
                        for e2 in range(m2):
                            if (np.max(np.abs(q2[e2] - b)) < tol and np.max(np.abs(q2[(e2 + 1) % m2] - a)) < tol):
                                found = (di, dj, k2, e2)
                                break
                        if found:
                            break
                    if found:
                        break
                if found is None:
                    raise ValueError(f"edge {e} of prototile {k} has no matching neighbour edge")
                adj[(k, e)] = found
        for (k, e), (di, dj, k2, e2) in adj.items():
            if adj[(k2, e2)] != (-di, -dj, k, e):
                raise ValueError("adjacency is not symmetric")
        self.adjacency = adj

    # geometry helpers
    def offset(self, i: int, j: int) -> np.ndarray:
        return i * self.lattice[0] + j * self.lattice[1]

    def polygon(self, face: FaceRef) -> np.ndarray:
        return self.protos[face.k] + self.offset(face.i, face.j)

    def neighbor(self, face: FaceRef, e: int) -> tuple[FaceRef, int]:
        di, dj, k2, e2 = self.adjacency[(face.k, e)]
        nf = FaceRef(face.i + di, face.j + dj, k2)
        if self.window is not None and max(abs(nf.i), abs(nf.j)) > self.window:
            raise WindowExhausted(f"face {nf} outside window {self.window}")
        return nf, e2

    def contains(self, face: FaceRef, point) -> bool:
        xl = np.asarray(point, float) - self.offset(face.i, face.j)
        v0, _, _, n_out, _ = self._edges[face.k]
        return bool(np.all(np.einsum("ij,ij->i", xl - v0, n_out) < 0))

    def locate(self, point) -> FaceRef:
        """Face containing a point (interior)."""
        q = np.linalg.solve(self.lattice.T, np.asarray(point, float))
        i0, j0 = int(np.floor(q[0])), int(np.floor(q[1]))
        for di in range(-2, 3):
            for dj in range(-2, 3):
                for k in range(len(self.protos)):
                    f = FaceRef(i0 + di, j0 + dj, k)
                    if self.contains(f, point):
                        return f
        raise ValueError("point is on an edge or could not be located")

    def edge_line(self, face: FaceRef, e: int) -> tuple[np.ndarray, np.ndarray]:
        v0, _, ev, _, _ = self._edges[face.k]
        return v0[e] + self.offset(face.i, face.j), ev[e]

    # constructors
    @classmethod
    def square(cls, side: float = 1.0) -> "Tiling":
        s = side
        return cls(np.eye(2) * s, [[(0, 0), (s, 0), (s, s), (0, s)]], kind="square",
                   params={"side": s}, two_colorable=True)

    @classmethod
    def parallelogram(cls, a: float, b: float, alpha: float) -> "Tiling":
        if not (a > 0 and b > 0 and 0 < alpha < np.pi) or abs(np.cos(alpha)) < 1e-12:
            raise ValueError("need a, b > 0 and a non-degenerate angle")
        av = np.array([a, 0.0])
        bv = np.array([b * np.sin(alpha), b * np.cos(alpha)])
        return cls(np.array([av, bv]), [[(0, 0), av, av + bv, bv]], kind="parallelogram",
                   params={"a": a, "b": b, "alpha": alpha}, two_colorable=True)

    @classmethod
    def triangle(cls, angles: Sequence[float]) -> "Tiling":
        A, B, C = (float(x) for x in angles)
        if min(A, B, C) <= 0 or abs(A + B + C - np.pi) > 1e-12:
            raise ValueError("triangle angles must be positive and sum to pi")
        p0, p1 = np.zeros(2), np.array([1.0, 0.0])
        p2 = np.sin(B) / np.sin(C) * np.array([np.cos(A), np.sin(A)])
        t1 = [p1 + p2, p2, p1]
        return cls(np.array([p1, p2]), [[p0, p1, p2], t1], kind="triangle",
                   params={"angles": (A, B, C)}, two_colorable=True)

    @classmethod
    def brick(cls, theta: float) -> "Tiling":
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        t = theta
        low = [(0, 0), (t, 0), (1, 0), (1, 1), (t, 1), (0, 1)]
        high = [(t, 1), (1, 1), (1 + t, 1), (1 + t, 2), (1, 2), (t, 2)]
        return cls(np.array([[1.0, 0.0], [0.0, 2.0]]), [low, high], kind="brick",
                   params={"theta": t}, two_colorable=False)

    @classmethod
    def wind_tree(cls, a: float, b: float, lx: float = 1.0, ly: float = 1.0) -> "Tiling":
        """Rectangles a x b centred on the lattice lx Z x ly Z; the complement is
        cut into four trapezoids per cell by transparent edges."""
        if not (0 < a < lx and 0 < b < ly):
            raise ValueError("rectangle must fit inside the cell")
        X, Y, x, y = lx / 2, ly / 2, a / 2, b / 2
        rect = [(-x, -y), (x, -y), (x, y), (-x, y)]
        bottom = [(-X, -Y), (X, -Y), (x, -y), (-x, -y)]
        right = [(X, -Y), (X, Y), (x, y), (x, -y)]
        top = [(X, Y), (-X, Y), (-x, y), (x, y)]
        left = [(-X, Y), (-X, -Y), (-x, -y), (-x, y)]
        # only the rectangle sides refract
        tr = [[False] * 4] + [[True, True, False, True]] * 4
        return cls(np.diag([lx, ly]), [rect, bottom, right, top, left], transparent=tr, kind="wind-tree",
                   params={"a": a, "b": b, "lx": lx, "ly": ly}, two_colorable=None)


def refract_direction(d, e) -> np.ndarray:
    """Direction after crossing an edge with unit tangent e."""
    d = np.asarray(d, float)
    return d - 2.0 * float(d @ e) * np.asarray(e, float)


def _exit(tiling: Tiling, k: int, xl: np.ndarray, d: np.ndarray, entry: int | None):
    v0, _, ev, n_out, length = tiling._edges[k]
    dn = n_out @ d
    gap = np.einsum("ij,ij->i", v0 - xl, n_out)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dn > 1e-15, gap / dn, np.inf)
    if entry is not None:
        t[entry] = np.inf
    tmin = float(np.min(t))
    if not np.isfinite(tmin):
        raise VertexHit("ray does not leave the face")
    # collinear edges (T-junctions) tie in t; take the one actually hit
    cands = np.flatnonzero(t <= tmin + 1e-12 * max(1.0, tmin))
    e, lam = int(cands[0]), None
    for c in cands:
        xe = xl + t[c] * d
        lc = float((xe - v0[c]) @ ev[c]) / length[c]
        if lam is None or abs(lc - 0.5) < abs(lam - 0.5):
            e, lam = int(c), lc
    if lam < VERTEX_TOL or lam > 1 - VERTEX_TOL:
        raise VertexHit(f"trajectory meets a vertex (edge parameter {lam:.3g})")
    return e, lam, float(t[e])


def _cross(tiling: Tiling, face: FaceRef, e: int, lam: float, d: np.ndarray):
    nf, e2 = tiling.neighbor(face, e)
    q = tiling.protos[nf.k]
    m = len(q)
    xl = q[e2] + (1.0 - lam) * (q[(e2 + 1) % m] - q[e2])
    if not tiling.transparent[face.k][e]:
        d = refract_direction(d, tiling._edges[face.k][2][e])
        d = d / math.hypot(d[0], d[1])
    return nf, e2, xl, d


def refract_step(tiling: Tiling, face: FaceRef, point, direction):
    """Advance to the first edge, cross it and refract; point in plane coordinates."""
    d = np.asarray(direction, float)
    nd = np.hypot(*d)
    if nd == 0:
        raise ValueError("direction must be nonzero")
    d = d / nd
    xl = np.asarray(point, float) - tiling.offset(face.i, face.j)
    entry = None
    v0, _, _, n_out, _ = tiling._edges[face.k]
    s = np.einsum("ij,ij->i", xl - v0, n_out)
    if np.any(s > 1e-12 * tiling._scale):
        raise ValueError("point is not in the face")
    on = np.flatnonzero(np.abs(s) <= 1e-12 * tiling._scale)
    if len(on):
        entry = int(on[0])
    e, lam, _ = _exit(tiling, face.k, xl, d, entry)
    nf, _, xl2, d2 = _cross(tiling, face, e, lam, d)
    return nf, xl2 + tiling.offset(nf.i, nf.j), d2


@dataclass
class TilingTrajectory:
    faces: list
    points: np.ndarray  # plane coordinates of entry points, first row is the start
    directions: np.ndarray
    classification: str
    period: int | None = None
    escape: np.ndarray | None = None
    first_intersection: int | None = None
    max_visits: int = 0
    steps: int = 0

    def segments(self) -> np.ndarray:
        return np.stack([self.points[:-1], self.points[1:]], axis=1)


class _SegmentStore:
    """Segments of one face, kept in a growing array for vectorized crossing tests."""

    __slots__ = ("a", "b", "n")

    def __init__(self):
        self.a = np.empty((4, 2))
        self.b = np.empty((4, 2))
        self.n = 0

    def crosses(self, p, q) -> bool:
        if self.n == 0:
            return False
        a, b = self.a[: self.n], self.b[: self.n]
        dq = q - p
        db = b - a
        o1 = dq[0] * (a[:, 1] - p[1]) - dq[1] * (a[:, 0] - p[0])
        o2 = dq[0] * (b[:, 1] - p[1]) - dq[1] * (b[:, 0] - p[0])
        o3 = db[:, 0] * (p[1] - a[:, 1]) - db[:, 1] * (p[0] - a[:, 0])
        o4 = db[:, 0] * (q[1] - a[:, 1]) - db[:, 1] * (q[0] - a[:, 0])
        eps = 1e-12
        hit = (o1 * o2 < 0) & (o3 * o4 < 0) & (np.minimum.reduce([abs(o1), abs(o2), abs(o3), abs(o4)]) > eps)
        return bool(np.any(hit))

    def add(self, p, q):
        if self.n == len(self.a):
            self.a = np.concatenate([self.a, np.empty_like(self.a)])
            self.b = np.concatenate([self.b, np.empty_like(self.b)])
        self.a[self.n], self.b[self.n] = p, q
        self.n += 1


def _linear_escape(pts: np.ndarray, scale: float, rel: float = 0.02):
    """Escape vector per step if the orbit follows a straight line at positive speed."""
    n = len(pts) - 1
    if n < 100:
        return None
    D = pts[-1] - pts[0]
    if np.hypot(*D) < 0.01 * n * scale:
        return None
    resid = pts - pts[0] - np.outer(np.arange(n + 1) / n, D)
    if np.max(np.hypot(resid[:, 0], resid[:, 1])) > rel * np.hypot(*D):
        return None
    return D / n


def simulate(tiling: Tiling, start, max_steps: int = 100_000, band_window: int = 8,
             stop_on_intersection: bool = False, key_digits: int = 7) -> TilingTrajectory:
    """Iterate refract_step from (face, point, direction) and classify the orbit."""
    face, point, d = start
    face = FaceRef(*face)
    d = np.asarray(d, float)
    d = d / np.hypot(*d)
    if not tiling.contains(face, point):
        raise ValueError("start point must be inside the start face")
    xl = np.asarray(point, float) - tiling.offset(face.i, face.j)
    entry = None
    faces = [face]
    pts = [xl + tiling.offset(face.i, face.j)]
    dirs = [d]
    seen: dict = {}
    segs: defaultdict = defaultdict(_SegmentStore)
    first_x = None
    pending = None
    cls, period, escape = "budget-exhausted", None, None
    visits_at_detect = None
    scale = 10.0 ** key_digits
    for n in range(max_steps):
        try:
            e, lam, _ = _exit(tiling, face.k, xl, d, entry)
        except VertexHit:
            cls = "vertex-hit"
            break
        v0, v1 = tiling._edges[face.k][:2]
        seg = (xl.copy(), v0[e] + lam * (v1[e] - v0[e]))
        if first_x is None:
            store = segs[face]
            if store.crosses(*seg):
                first_x = n
            store.add(*seg)
            if first_x is not None and stop_on_intersection:
                break
        try:
            face, entry, xl, d = _cross(tiling, face, e, lam, d)
        except WindowExhausted:
            cls = "window-exhausted"
            break
        faces.append(face)
        pts.append(xl + tiling.offset(face.i, face.j))
        dirs.append(d)
        lam_in = 1.0 - lam
        key = (face.k, entry, round(lam_in * scale), round(d[0] * scale), round(d[1] * scale))
        step = n + 1
        if pending is not None:
            n0, n1, shift = pending
            if step == n1 + (n1 - n0):
                prev = seen.get(key)
                if prev is not None and prev[0] == n1 and (face.i - prev[1], face.j - prev[2]) == shift:
                    period = n1 - n0
                    # refraction is invertible, so a recurrent orbit has no transient
                    visits_at_detect = max(Counter(faces[n0:n1]).values())
                    if shift == (0, 0):
                        cls = "periodic"
                    else:
                        cls = "linear-escape"
                        escape = tiling.offset(*shift) / period
                    break
                pending = None
        if key in seen and pending is None:
            n0, i0, j0 = seen[key]
            pending = (n0, step, (face.i - i0, face.j - j0))
        seen[key] = (step, face.i, face.j)
    steps = len(faces) - 1
    if cls == "budget-exhausted":
        v = None if first_x is not None else _linear_escape(np.array(pts), tiling._scale)
        if first_x is not None:
            cls = "self-intersecting"
        elif v is not None:
            cls, escape = "linear-escape", v
        elif _band_trapped(faces, band_window):
            cls = "band-trapped"
    elif first_x is not None and cls not in ("periodic", "linear-escape"):
        cls = "self-intersecting"
    return TilingTrajectory(faces, np.array(pts), np.array(dirs), cls, period, escape, first_x,
                            visits_at_detect if visits_at_detect is not None else max(Counter(faces).values()), steps)


def _band_trapped(faces, window: int) -> bool:
    ij = np.array([(f.i, f.j) for f in faces])
    spans = np.ptp(ij, axis=0)
    # bounded across the band, elongated along it
    return bool(min(spans) <= window and max(spans) > min(spans) + 2)


# folding


@dataclass(frozen=True)
class FoldIsometry:
    Q: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, float)
        if np.max(np.abs(Q.T @ Q - np.eye(2))) > 1e-12:
            raise ValueError("orthogonal part is not orthogonal")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", np.asarray(self.b, float))

    @classmethod
    def identity(cls) -> "FoldIsometry":
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def reflection(cls, point, tangent) -> "FoldIsometry":
        e = np.asarray(tangent, float)
        e = e / np.hypot(*e)
        Q = 2 * np.outer(e, e) - np.eye(2)
        return cls(Q, np.asarray(point, float) - Q @ point)

    def __call__(self, x):
        return np.asarray(x, float) @ self.Q.T + self.b

    def compose(self, other: "FoldIsometry") -> "FoldIsometry":
        """self o other."""
        return FoldIsometry(self.Q @ other.Q, self.Q @ other.b + self.b)

    def inverse(self) -> "FoldIsometry":
        return FoldIsometry(self.Q.T, -self.Q.T @ self.b)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.Q))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.Q[1, 0], self.Q[0, 0]))


def _shared_edge(tiling: Tiling, f: FaceRef, g: FaceRef) -> int:
    for e in range(len(tiling.protos[f.k])):
        if tiling.neighbor(f, e)[0] == g:
            return e
    raise PathError(f"faces {f} and {g} are not adjacent")


def fold_map(tiling: Tiling, path: Sequence) -> FoldIsometry:
    """s_{e1} o ... o s_{en} for the path P0, P1, ..., Pn of adjacent faces."""
    path = [FaceRef(*f) for f in path]
    iso = FoldIsometry.identity()
    for f, g in zip(path, path[1:]):
        e = _shared_edge(tiling, f, g)
        iso = iso.compose(FoldIsometry.reflection(*tiling.edge_line(f, e)))
    return iso


@dataclass
class FoldScan:
    radius: int
    group: list
    translations: np.ndarray
    C1: bool
    C2: bool
    basis: np.ndarray | None
    states: int


def _q_key(Q):
    return tuple(np.round(Q.ravel() * 1e9).astype(np.int64))


def _group_closure(mats, max_size: int):
    elems = {}
    for Q in mats:
        elems.setdefault(_q_key(Q), Q)
    frontier = list(elems.values())
    while frontier:
        new = []
        gens = list(elems.values())
        for A in frontier:
            for B in gens:
                for C in (A @ B, B @ A):
                    k = _q_key(C)
                    if k not in elems:
                        elems[k] = C
                        new.append(C)
                        if len(elems) > max_size:
                            return None
        frontier = new
    return list(elems.values())


def _lattice_basis(vecs: np.ndarray, max_den: int = 1000, tol: float = 1e-9):
    """Basis of the Z-span of vecs if it is a rank-2 lattice, else None."""
    vecs = np.asarray(vecs, float)
    if len(vecs) == 0:
        return None
    norms = np.hypot(vecs[:, 0], vecs[:, 1])
    scale = max(1.0, float(norms.max()))
    vecs = vecs[norms > tol * scale]
    if len(vecs) < 2:
        return None
    order = np.argsort(np.hypot(vecs[:, 0], vecs[:, 1]))
    u = vecs[order[0]]
    v = None
    for idx in order[1:]:
        w = vecs[idx]
        if abs(u[0] * w[1] - u[1] * w[0]) > 1e-6 * np.hypot(*u) * np.hypot(*w):
            v = w
            break
    if v is None:
        return None
    B = np.column_stack([u, v])
    coef = np.linalg.solve(B, vecs.T).T
    fr = []
    for c in coef.ravel():
        f = Fraction(float(c)).limit_denominator(max_den)
        if abs(float(f) - c) > tol * scale:
            return None
        fr.append(f)
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    ints = np.array([int(f * den) for f in fr], dtype=object).reshape(-1, 2)
    # Hermite reduction of the integer generators
    basis = _hnf2(ints)
    if basis is None:
        return None
    return _gauss_reduce(*(B @ np.array(basis, dtype=float).T / den).T)


def _gauss_reduce(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if u @ u > v @ v:
        u, v = v, u
    while True:
        v = v - np.round((u @ v) / (u @ u)) * u
        if v @ v >= u @ u:
            return np.array([u, v])
        u, v = v, u


def _hnf2(rows):
    rows = [list(r) for r in rows if any(r)]
    a = [r for r in rows]
    # column 0 gcd via Euclid
    piv = None
    rest = []
    for r in a:
        if piv is None:
            if r[0] != 0:
                piv = r
            else:
                rest.append(r)
            continue
        x, y = piv, r
        while y[0] != 0:
            q = x[0] // y[0]
            x, y = y, [x[0] - q * y[0], x[1] - q * y[1]]
        piv = x
        rest.append(y)
    g = 0
    for r in rest:
        g = math.gcd(g, abs(int(r[1])))
    if piv is None or g == 0:
        return None
    return [piv, [0, g]]


def _iso_key(iso: FoldIsometry):
    return _q_key(iso.Q) + tuple(np.round(iso.b * 1e7).astype(np.int64))


def _kernel_translations(gens: list, depth: int, max_elems: int) -> np.ndarray:
    """Translations in the group generated by loop holonomies, words up to depth."""
    gens = gens + [g.inverse() for g in gens]
    elems = {_iso_key(FoldIsometry.identity()): FoldIsometry.identity()}
    layer = list(elems.values())
    for _ in range(depth):
        nxt = []
        for h in layer:
            for g in gens:
                w = h.compose(g)
                k = _iso_key(w)
                if k not in elems:
                    elems[k] = w
                    nxt.append(w)
                    if len(elems) >= max_elems:
                        return _translations(elems)
        layer = nxt
    return _translations(elems)


def _translations(elems: dict) -> np.ndarray:
    return np.array([w.b for w in elems.values() if np.max(np.abs(w.Q - np.eye(2))) < 1e-9]).reshape(-1, 2)


def fold_group_scan(tiling: Tiling, radius: int = 8, base: FaceRef = FaceRef(0, 0, 0),
                    max_states: int = 400_000, max_group: int = 120, word_depth: int = 4,
                    max_elems: int = 3000, max_gens: int = 6) -> FoldScan:
    """Enumerate fold over all face paths of length <= radius from the base face.

    C1: the orthogonal parts found generate a finite group.  C2: the kernel
    translations form a rank-2 lattice.  When every vertex holonomy is trivial
    the fold is path independent and the kernel translations are read off the
    enumerated faces; otherwise they are the translations of the group
    generated by the vertex holonomies (rotations about the tiling vertices),
    closed under composition up to word_depth.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    base = FaceRef(*base)
    start = (base, FoldIsometry.identity())
    seen = {(base,) + _iso_key(start[1])}
    layer = [start]
    reflections = {}
    orth = {_q_key(np.eye(2)): np.eye(2)}
    face_trans = {}
    for depth in range(1, radius + 1):
        nxt = []
        for f, iso in layer:
            for e in range(len(tiling.protos[f.k])):
                g, _ = tiling.neighbor(f, e)
                if (f, e) not in reflections:
                    reflections[(f, e)] = FoldIsometry.reflection(*tiling.edge_line(f, e))
                new = iso.compose(reflections[(f, e)])
                ik = _iso_key(new)
                if (g,) + ik in seen:
                    continue
                seen.add((g,) + ik)
                nxt.append((g, new))
                orth.setdefault(ik[:4], new.Q)
                if ik[:4] == _q_key(np.eye(2)):
                    face_trans.setdefault(ik[4:], new.b)
        layer = nxt
        if len(orth) > max_group:
            return FoldScan(radius, list(orth.values()), np.zeros((0, 2)), False, False, None, len(seen))
        if len(seen) > max_states:
            part = FoldScan(radius, list(orth.values()), np.zeros((0, 2)), False, False, None, len(seen))
            raise BudgetExceeded(f"fold scan exceeded {max_states} states", partial=part)
    group = _group_closure(list(orth.values()), max_group)
    if group is None:
        return FoldScan(radius, list(orth.values()), np.zeros((0, 2)), False, False, None, len(seen))
    center = tiling.polygon(base).mean(axis=0)
    hol = [(float(np.hypot(*(v - center))), vertex_holonomy(tiling, v)) for v in _nearby_vertices(tiling, base)]
    hol = [(d, h) for d, h in hol if np.max(np.abs(h.Q - np.eye(2))) > 1e-9 or np.max(np.abs(h.b)) > 1e-9]
    if hol:
        gens = [h for _, h in sorted(hol, key=lambda t: t[0])[:max_gens]]
        trans = _kernel_translations(gens, word_depth, max_elems)
    else:
        trans = np.array(list(face_trans.values())).reshape(-1, 2)
    basis = _lattice_basis(trans) if len(trans) else None
    return FoldScan(radius, group, trans, True, basis is not None, basis, len(seen))


def _nearby_vertices(tiling: Tiling, base: FaceRef) -> list:
    out = {}
    tol = 1e-9 * tiling._scale
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for k in range(len(tiling.protos)):
                for v in tiling.polygon(FaceRef(base.i + di, base.j + dj, k)):
                    out.setdefault(tuple(np.round(v / tol).astype(np.int64)), v)
    return list(out.values())


def _corners(tiling: Tiling, v: np.ndarray) -> list:
    """(direction of the outgoing edge, interior angle) for each face corner at v, sorted CCW."""
    q = np.linalg.solve(tiling.lattice.T, v)
    tol = 1e-9 * tiling._scale
    corners = []
    for di in range(-2, 3):
        for dj in range(-2, 3):
            for k, p in enumerate(tiling.protos):
                poly = p + tiling.offset(int(np.floor(q[0])) + di, int(np.floor(q[1])) + dj)
                m = len(poly)
                for a in range(m):
                    if np.max(np.abs(poly[a] - v)) < tol:
                        u = poly[(a + 1) % m] - v
                        w = poly[a - 1] - v
                        t0 = np.arctan2(u[1], u[0])
                        ang = (np.arctan2(w[1], w[0]) - t0) % (2 * np.pi)
                        corners.append((t0 % (2 * np.pi), ang))
    if not corners:
        raise ValueError("point is not a vertex of the tiling")
    if abs(sum(a for _, a in corners) - 2 * np.pi) > 1e-9:
        raise ValueError("faces around the vertex do not close up")
    return sorted(corners)


def vertex_holonomy(tiling: Tiling, vertex) -> FoldIsometry:
    """Fold of the closed path once around a vertex, read at the vertex itself."""
    v = np.asarray(vertex, float)
    iso = FoldIsometry.identity()
    for t0, _ in _corners(tiling, v):
        iso = iso.compose(FoldIsometry.reflection(v, np.array([np.cos(t0), np.sin(t0)])))
    return iso


def _is_rational(x: float, max_den: int = 10**4, tol: float = 1e-11) -> bool:
    f = Fraction(float(x)).limit_denominator(max_den)
    return abs(float(f) - x) <= tol * max(1.0, abs(x))


def check_foldability(alpha: float, a: float, b: float) -> bool:
    """Angle list test plus invariance of Q a + Q b under the rotation by 4 alpha."""
    beta = min(alpha, np.pi - alpha)
    if not any(abs(beta - t) <= 1e-12 for t in FOLDABLE_ANGLES):
        return False
    av = np.array([a, 0.0])
    bv = np.array([b * np.sin(alpha), b * np.cos(alpha)])
    B = np.column_stack([av, bv])
    c, s = np.cos(4 * alpha), np.sin(4 * alpha)
    M = np.linalg.solve(B, np.array([[c, -s], [s, c]]) @ B)
    return all(_is_rational(x) for x in M.ravel())


def local_defect(tiling: Tiling, vertex) -> float:
    """Alternating sum of the face angles at a vertex, counted CCW from the +x direction."""
    corners = _corners(tiling, np.asarray(vertex, float))
    if len(corners) % 2:
        raise NotAlternating(f"vertex has odd valence {len(corners)}")
    return float(sum(ang * (-1) ** n for n, (_, ang) in enumerate(corners)))
