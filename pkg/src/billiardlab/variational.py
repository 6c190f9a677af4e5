"""Periodic billiard orbits as critical points of the discrete action
``sum_i L(s_i, s_{i+1})``; shortest closed orbits and orbit counting.

Orbits are saddles in general, so the search solves ``grad = 0`` with a
Levenberg-Marquardt iteration on the gradient rather than minimizing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateChord, InsufficientData, NoConvergence, NotPrimitive
from .geometry import (
    BoundaryCurve,
    HyperbolicTable,
    MinkowskiNorm,
    klein_distance,
    klein_distance_grad,
)


@dataclass
class ActionFunctional:
    """Chord-length generator: ``euclidean``, ``minkowski`` (with ``norm``) or
    ``hyperbolic`` (Klein model)."""

    kind: str = "euclidean"
    norm: MinkowskiNorm | None = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "minkowski", "hyperbolic"):
            raise ValueError(f"unknown generator {self.kind!r}")
        if self.kind == "minkowski" and self.norm is None:
            raise ValueError("minkowski generator needs a norm")

    @property
    def symmetric(self):
        return self.kind != "minkowski" or self.norm.symmetric

    def chord(self, curve: BoundaryCurve, a: float, b: float) -> float:
        x, y = np.array(curve.point(a)), np.array(curve.point(b))
        if self.kind == "euclidean":
            return float(np.hypot(*(y - x)))
        if self.kind == "minkowski":
            return self.norm(*(y - x))
        return klein_distance(x, y)


@dataclass
class PeriodicOrbit:
    n: int
    p: int
    s: np.ndarray
    length: float
    morse_index: int
    grad_norm: float
    primitive: bool = True

    @property
    def rotation(self) -> float:
        return self.p / self.n


def _curve_of(table):
    return table.curve if isinstance(table, HyperbolicTable) else table


def _grad_pieces(curve, F, s):
    """Values and partial derivatives of every chord ``L(s_i, s_{i+1})``."""
    n = len(s)
    P, T, K = curve.frames(s)
    Pn, Tn = np.roll(P, -1, axis=0), np.roll(T, -1, axis=0)
    v = Pn - P
    L = np.hypot(v[:, 0], v[:, 1])
    if np.any(L < 1e-12 * curve.perimeter):
        raise DegenerateChord("consecutive orbit points coincide")
    if F.kind == "euclidean":
        u = v / L[:, None]
        da = -np.sum(T * u, axis=1)
        db = np.sum(Tn * u, axis=1)
        return L, da, db, (P, T, K, u)
    vals, da, db = np.empty(n), np.empty(n), np.empty(n)
    for i in range(n):
        if F.kind == "minkowski":
            vals[i] = F.norm(*v[i])
            g = np.array(F.norm.grad(*v[i]))
            ga, gb = -g, g
        else:
            vals[i] = klein_distance(P[i], Pn[i])
            ga, gb = klein_distance_grad(P[i], Pn[i])
        da[i] = ga @ T[i]
        db[i] = gb @ Tn[i]
    return vals, da, db, None


def _gradient(curve, F, s):
    vals, da, db, extra = _grad_pieces(curve, F, s)
    g = da + np.roll(db, 1)
    return float(vals.sum()), g, extra


def action(curve, F: ActionFunctional, s, hessian=True):
    """Cyclic action with gradient and Hessian in the boundary parameters.

    Euclidean chords use closed-form second derivatives including the
    curvature terms; other generators differentiate the analytic gradient
    by central differences with step ``1e-6 * perimeter``.
    """
    curve = _curve_of(curve)
    s = np.asarray(s, dtype=float)
    n = len(s)
    if n < 2:
        raise ValueError("need at least two points")
    value, g, extra = _gradient(curve, F, s)
    if not hessian:
        return value, g, None
    if extra is not None:
        P, T, K, u = extra
        L = np.hypot(*(np.roll(P, -1, axis=0) - P).T)
        Tn, Kn = np.roll(T, -1, axis=0), np.roll(K, -1)
        N = np.column_stack([-T[:, 1], T[:, 0]])
        Nn = np.roll(N, -1, axis=0)
        ta, tb = np.sum(T * u, axis=1), np.sum(Tn * u, axis=1)
        haa = -K * np.sum(N * u, axis=1) + (1 - ta ** 2) / L
        hbb = Kn * np.sum(Nn * u, axis=1) + (1 - tb ** 2) / L
        hab = (-np.sum(T * Tn, axis=1) + ta * tb) / L
        H = np.zeros((n, n))
        for i in range(n):
            j = (i + 1) % n
            H[i, i] += haa[i]
            H[j, j] += hbb[i]
            H[i, j] += hab[i]
            H[j, i] += hab[i]
        return value, g, H
    h = 1e-6 * curve.perimeter
    H = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        H[:, k] = (_gradient(curve, F, s + e)[1] - _gradient(curve, F, s - e)[1]) / (2 * h)
    return value, g, 0.5 * (H + H.T)


def action_fd_gradient(curve, F, s, h=1e-6):
    """Central-difference gradient of the action value (test oracle)."""
    curve = _curve_of(curve)
    s = np.asarray(s, float)
    out = np.empty(len(s))
    for k in range(len(s)):
        e = np.zeros(len(s))
        e[k] = h * curve.perimeter
        out[k] = (action(curve, F, s + e, False)[0] - action(curve, F, s - e, False)[0]) / (2 * e[k])
    return out


# ---------------------------------------------------------------------------
# search


def _newton_lm(curve, F, s, tol, max_iter):
    value, g, H = action(curve, F, s)
    gn = float(np.linalg.norm(g))
    mu = 1e-6
    for _ in range(max_iter):
        if gn <= tol:
            return s, value, g, H
        A = H @ H + mu * np.eye(len(s))
        step = -np.linalg.solve(A, H @ g)
        cap = 0.25 * curve.perimeter / len(s)
        big = np.max(np.abs(step))
        if big > cap:
            step *= cap / big
        try:
            v2, g2, H2 = action(curve, F, s + step)
        except DegenerateChord:
            mu *= 10.0
            continue
        g2n = float(np.linalg.norm(g2))
        if g2n < gn:
            s, value, g, H, gn = s + step, v2, g2, H2, g2n
            mu = max(mu / 5.0, 1e-18)
        else:
            mu *= 4.0
            if mu > 1e12:
                break
    raise NoConvergence(f"gradient norm {gn:.3g} after {max_iter} iterations")


def _winding(s, P):
    """Forward gaps between consecutive points, each in [0, P)."""
    return np.mod(np.diff(np.append(s, s[0])), P)


def _period_divisor(sw, P, tol=1e-6):
    """Smallest d | n with the orbit repeating after d steps."""
    n = len(sw)
    for d in range(1, n):
        if n % d:
            continue
        diff = np.mod(sw - np.roll(sw, -d) + 0.5 * P, P) - 0.5 * P
        if np.max(np.abs(diff)) < tol * P:
            return d
    return n


def _finish(curve, F, s, n, p, value, g, H):
    P = curve.perimeter
    gaps = _winding(s, P)
    if np.any(gaps < 1e-9 * P) or abs(gaps.sum() - p * P) > 1e-6 * P:
        raise NoConvergence("converged to an orbit of a different rotation type")
    sw = np.mod(s, P)
    if _period_divisor(sw, P) < n:
        raise NotPrimitive("orbit repeats a shorter period")
    ev = np.linalg.eigvalsh(H)
    scale = max(1.0, float(np.max(np.abs(ev))))
    morse = int(np.sum(ev < -1e-8 * scale))
    return PeriodicOrbit(n, p, sw, value, morse, float(np.linalg.norm(g)))


def _starts(P, n, p, count, rng):
    base = np.arange(n) * p * P / n
    yield base + rng.uniform(0, P / n)
    for _ in range(count - 1):
        yield base + rng.uniform(0, P) + rng.normal(scale=0.15 * P / n, size=n)


def find_periodic(curve, F: ActionFunctional, n: int, p: int = 1, init=None, multistart: int = 8,
                  rng=None, tol: float = 1e-9, max_iter: int = 200) -> PeriodicOrbit:
    """First periodic orbit of type ``(n, p)`` reached from the given starts."""
    curve = _curve_of(curve)
    if not (n >= 2 and 1 <= p < n):
        raise ValueError("need n >= 2 and 1 <= p < n")
    rng = np.random.default_rng(0) if rng is None else rng
    starts = [np.asarray(init, float)] if init is not None else _starts(curve.perimeter, n, p, multistart, rng)
    last = None
    for s0 in starts:
        try:
            s, value, g, H = _newton_lm(curve, F, np.array(s0, float), tol, max_iter)
            return _finish(curve, F, s, n, p, value, g, H)
        except NotPrimitive as exc:
            last = exc
            if init is not None:
                raise
        except (NoConvergence, DegenerateChord) as exc:
            last = exc
    if isinstance(last, NotPrimitive):
        raise last
    raise NoConvergence(f"no ({n},{p}) orbit found: {last}")


def _same_orbit(a: PeriodicOrbit, b: PeriodicOrbit, P, mode, tol):
    if a.n != b.n or min(a.p, a.n - a.p) != min(b.p, b.n - b.p):
        return False
    if mode == "action":
        return abs(a.length - b.length) <= tol * max(1.0, abs(a.length))
    x, y = np.sort(a.s), np.sort(b.s)
    for shift in range(a.n):
        d = np.mod(x - np.roll(y, shift) + 0.5 * P, P) - 0.5 * P
        if np.max(np.abs(d)) <= tol * P:
            return True
    return False


def dedupe(orbits, P, mode="params", tol=1e-6):
    """Collapse cyclic shifts, reversals and near-duplicates.

    ``params`` compares point sets up to 1e-6 of the perimeter; ``action``
    compares ``(n, p, length)``, which merges continuous families such as the
    rotations of a regular polygon in a disc.
    """
    out = []
    for o in orbits:
        if not any(_same_orbit(o, q, P, mode, tol) for q in out):
            out.append(o)
    return out


def search_periodic(curve, F, n, p=1, multistart=16, rng=None, dedup="params", tol=1e-9):
    """All distinct ``(n, p)`` orbits reached from ``multistart`` starts."""
    curve = _curve_of(curve)
    rng = np.random.default_rng(0) if rng is None else rng
    found = []
    for s0 in _starts(curve.perimeter, n, p, multistart, rng):
        try:
            s, value, g, H = _newton_lm(curve, F, np.array(s0, float), tol, 200)
            found.append(_finish(curve, F, s, n, p, value, g, H))
        except (NoConvergence, NotPrimitive, DegenerateChord):
            continue
    return dedupe(found, curve.perimeter, dedup)


def rotation_classes(n_max: int):
    """Primitive rotation types ``(n, p)`` with ``p <= n/2`` and gcd 1."""
    return [(n, p) for n in range(2, n_max + 1) for p in range(1, n // 2 + 1) if math.gcd(n, p) == 1]


def shortest_closed(table, n_max: int = 6, multistart: int = 200, rng=None):
    """Shortest closed billiard polygon found over ``n <= n_max``.

    Returns ``(length, orbit)``; an upper bound for the length of the
    shortest closed trajectory.  ``multistart`` is the total budget split
    evenly over the rotation classes.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    F = ActionFunctional("hyperbolic") if isinstance(table, HyperbolicTable) else ActionFunctional()
    curve = _curve_of(table)
    rng = np.random.default_rng(0) if rng is None else rng
    classes = rotation_classes(n_max)
    per = max(1, multistart // len(classes))
    best = None
    for n, p in classes:
        for orb in search_periodic(curve, F, n, p, per, rng, dedup="action"):
            if best is None or orb.length < best.length:
                best = orb
    if best is None:
        raise NoConvergence("no closed orbit found")
    return best.length, best


@dataclass
class OrbitCensus:
    """Orbits found per rotation class, reusable for several bounds ``T``."""

    orbits: list = field(default_factory=list)
    n_max: int = 0
    multistart: int = 0


def orbit_census(curve, F, n_max, multistart=4, seed=0, dedup="action"):
    """Search every rotation class up to ``n_max``.

    Each class has its own stream seeded by ``(seed, n, p)``, so counts for a
    smaller bound are a prefix of those for a larger one.
    """
    curve = _curve_of(curve)
    out = []
    for n, p in rotation_classes(n_max):
        sub = np.random.default_rng([seed, n, p])
        out.extend(search_periodic(curve, F, n, p, multistart, sub, dedup=dedup))
    return OrbitCensus(out, n_max, multistart)


def count_orbits(curve, F, T, n_max=None, multistart=4, measure="period", dedup="action", census=None,
                 seed=0) -> int:
    """Number of distinct primitive periodic orbits with size at most ``T``.

    ``measure='period'`` bounds the number of reflections; ``'length'`` bounds
    the total length among orbits with at most ``n_max`` reflections.  The
    count is a lower bound limited by the search budget.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if measure == "period":
        n_max = int(math.floor(T)) if n_max is None else min(n_max, int(math.floor(T)))
    elif n_max is None:
        raise ValueError("length measure needs n_max")
    if n_max < 2:
        return 0
    if census is None or census.n_max < n_max:
        census = orbit_census(curve, F, n_max, multistart, seed, dedup)
    if measure == "period":
        return sum(1 for o in census.orbits if o.n <= n_max)
    return sum(1 for o in census.orbits if o.n <= n_max and o.length <= T + 1e-12)


def growth_exponent(samples) -> float:
    """Least-squares slope of ``log P`` against ``log T``."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or len(arr) < 4 or np.any(arr[:, 1] <= 0) or np.any(arr[:, 0] <= 0):
        raise InsufficientData("need at least four samples with T > 0 and P > 0")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)
