"""Conformally symplectic flows on T*R^n and the Newton stroboscopic map.

Coordinates are canonical (x, p) with lambda = p dx and omega = dx ^ dp.
The constant-factor field is x' = H_p, p' = -H_x - c p, so that
L_X omega = -c omega.  The locally conformal field with Lee form
eta = eta_x dx + eta_p dp and factor f solves

    x' = H_p + (p.x' - H) eta_p
    p' = -H_x + f p - (p.x' - H) eta_x

with f - i_X eta constant along the flow.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import odeint, solve_ivp

from .errors import ConformalityError, FormNotClosed, ImplicitSingular, ShapeError, StiffnessError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
COND_MAX = 1e12
CLOSED_TOL = 1e-6


@dataclass(frozen=True)
class FlowState:
    x: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if x.shape != p.shape or x.ndim != 1:
            raise ShapeError("x and p must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p)) and np.isfinite(self.t)):
            raise ValueError("non-finite flow state")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x, self.p])

    @classmethod
    def from_z(cls, z, t: float) -> "FlowState":
        n = len(z) // 2
        return cls(z[:n].copy(), z[n:].copy(), float(t))


@dataclass
class ConformalSystem:
    """Hamiltonian plus conformal data.

    Constant case: give ``c``.  General case: give ``eta_x`` and/or ``eta_p``
    and ``f``, either a callable f(x, p) or a float ``k`` meaning f is chosen so
    that f - i_X eta = k along the flow.  With eta = 0 the general field with
    f = -c is the constant field with friction c.
    """

    n: int
    H: Callable
    dH: Callable  # (x, p) -> (H_x, H_p)
    c: float | None = None
    f: Callable | float | None = None
    eta_x: Callable | None = None
    eta_p: Callable | None = None
    d2H: Callable | None = None  # (x, p) -> 2n x 2n Hessian in (x, p) order
    check_closed: bool = True
    closed_samples: int = 16
    _closed_defect: float = field(default=0.0, init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ShapeError("dimension must be positive")
        if self.c is None and self.f is None:
            raise ValueError("need a constant c or a factor f")
        if self.c is not None and not np.isfinite(self.c):
            raise ValueError("c must be finite")
        if self.check_closed and self.is_general:
            rng = np.random.default_rng(0)
            pts = rng.uniform(-1.0, 1.0, (self.closed_samples, 2 * self.n))
            self._closed_defect = closedness_defect(self, pts)
            if self._closed_defect > CLOSED_TOL:
                raise FormNotClosed(f"curl of eta is {self._closed_defect:.3g}")

    @property
    def is_general(self) -> bool:
        return self.f is not None

    @property
    def eta_p_zero(self) -> bool:
        return self.eta_p is None

    def eta(self, x, p) -> tuple[np.ndarray, np.ndarray]:
        ex = np.zeros(self.n) if self.eta_x is None else np.atleast_1d(np.asarray(self.eta_x(x, p), float))
        ep = np.zeros(self.n) if self.eta_p is None else np.atleast_1d(np.asarray(self.eta_p(x, p), float))
        return ex, ep

    def hessian(self, x, p, h: float = 1e-6) -> np.ndarray:
        if self.d2H is not None:
            return np.asarray(self.d2H(x, p), float)
        z = np.concatenate([x, p])
        n = self.n
        out = np.empty((2 * n, 2 * n))
        for i in range(2 * n):
            e = np.zeros(2 * n)
            e[i] = h
            zp, zm = z + e, z - e
            gp = np.concatenate(self.dH(zp[:n], zp[n:]))
            gm = np.concatenate(self.dH(zm[:n], zm[n:]))
            out[:, i] = (gp - gm) / (2 * h)
        return 0.5 * (out + out.T)


def closedness_defect(sys: ConformalSystem, points, h: float = 1e-5) -> float:
    """Max |d_i eta_j - d_j eta_i| over the points, by central differences."""
    n = sys.n
    worst = 0.0
    for z in np.atleast_2d(points):
        D = np.empty((2 * n, 2 * n))
        for i in range(2 * n):
            e = np.zeros(2 * n)
            e[i] = h
            a = np.concatenate(sys.eta((z + e)[:n], (z + e)[n:]))
            b = np.concatenate(sys.eta((z - e)[:n], (z - e)[n:]))
            D[:, i] = (a - b) / (2 * h)
        worst = max(worst, float(np.max(np.abs(D - D.T))))
    return worst


def _as_vec(v, n):
    return np.atleast_1d(np.asarray(v, dtype=float)).reshape(n)


def constant_field(sys: ConformalSystem, x, p) -> tuple[np.ndarray, np.ndarray]:
    Hx, Hp = sys.dH(x, p)
    return _as_vec(Hp, sys.n), -_as_vec(Hx, sys.n) - sys.c * p


def general_field(sys: ConformalSystem, x, p) -> tuple[np.ndarray, np.ndarray, float]:
    """Returns (x', p', f) of the locally conformal field."""
    n = sys.n
    Hx, Hp = (_as_vec(v, n) for v in sys.dH(x, p))
    Hv = float(sys.H(x, p))
    ex, ep = sys.eta(x, p)
    if sys.eta_p_zero:
        xdot = Hp
    else:
        M = np.eye(n) - np.outer(ep, p)
        if np.linalg.cond(M) > COND_MAX:
            raise ImplicitSingular(f"implicit velocity system singular at p={p}")
        xdot = np.linalg.solve(M, Hp - Hv * ep)
    lag = float(p @ xdot) - Hv
    a = -Hx - lag * ex
    if callable(sys.f):
        fv = float(sys.f(x, p))
    else:
        den = 1.0 - float(ep @ p)
        if abs(den) < 1.0 / COND_MAX:
            raise ImplicitSingular("factor equation singular")
        fv = (float(sys.f) + float(ex @ xdot) + float(ep @ a)) / den
    return xdot, a + fv * p, fv


def lee_value(sys: ConformalSystem, x, p) -> float:
    """f - i_X eta at a state."""
    xdot, pdot, fv = general_field(sys, x, p)
    ex, ep = sys.eta(x, p)
    return fv - float(ex @ xdot) - float(ep @ pdot)


def complete_residual(sys: ConformalSystem, x, p, xdot, pdot) -> float:
    """Plug-back residual of the general equations at a computed derivative."""
    n = sys.n
    Hx, Hp = (_as_vec(v, n) for v in sys.dH(x, p))
    Hv = float(sys.H(x, p))
    ex, ep = sys.eta(x, p)
    fv = general_field(sys, x, p)[2]
    lag = float(p @ xdot) - Hv
    r1 = xdot - Hp - lag * ep
    r2 = pdot + Hx - fv * p + lag * ex
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def _solve(rhs, y0, t0, t1, tol, t_eval=None):
    sol = solve_ivp(rhs, (t0, t1), y0, method="RK45", rtol=tol, atol=tol, t_eval=t_eval)
    if sol.status < 0:
        raise StiffnessError(sol.message)
    if not np.all(np.isfinite(sol.y)):
        raise StiffnessError("solution left the finite range")
    return sol


def _check_duration(t):
    if not np.isfinite(t):
        raise ValueError("duration must be finite")


def flow_constant(sys: ConformalSystem, state: FlowState, t: float, tol: float = DEFAULT_TOL) -> FlowState:
    """Time-t map of x' = H_p, p' = -H_x - c p."""
    if sys.c is None:
        raise ValueError("flow_constant needs a constant c")
    _check_duration(t)
    n = sys.n
    if t == 0:
        return state

    def rhs(_, z):
        return np.concatenate(constant_field(sys, z[:n], z[n:]))

    sol = _solve(rhs, state.z, state.t, state.t + t, tol)
    return FlowState.from_z(sol.y[:, -1], sol.t[-1])


def general_trajectory(sys: ConformalSystem, state: FlowState, t: float, tol: float = DEFAULT_TOL, t_eval=None):
    """Integrates the locally conformal field; returns (times, z array (m, 2n), lee values)."""
    if not sys.is_general:
        raise ValueError("flow_general needs f and eta")
    _check_duration(t)
    n = sys.n

    def rhs(_, z):
        xdot, pdot, _f = general_field(sys, z[:n], z[n:])
        return np.concatenate([xdot, pdot])

    sol = _solve(rhs, state.z, state.t, state.t + t, tol, t_eval)
    zs = sol.y.T
    lee = np.array([lee_value(sys, z[:n], z[n:]) for z in zs])
    if sys.eta_x is not None:
        # the -L eta_x term has no settled interpretation; report its size only
        lag = [abs(float(z[n:] @ general_field(sys, z[:n], z[n:])[0]) - float(sys.H(z[:n], z[n:])))
               for z in zs[:: max(1, len(zs) // 16)]]
        log.debug("max |L| along trajectory: %.3g", max(lag))
    return sol.t, zs, lee


def flow_general(sys: ConformalSystem, state: FlowState, t: float, tol: float = DEFAULT_TOL) -> FlowState:
    """Time-t map of the locally conformal field, asserting f - i_X eta is constant."""
    if t == 0:
        return state
    times, zs, lee = general_trajectory(sys, state, t, tol)
    drift = float(np.max(lee) - np.min(lee))
    if drift > 10 * tol + 1e-12 * max(1.0, float(np.max(np.abs(lee)))):
        raise ConformalityError(f"f - i_X eta drifted by {drift:.3g}")
    return FlowState.from_z(zs[-1], times[-1])


def _tangent_rhs(sys: ConformalSystem):
    n = sys.n
    m = 2 * n

    def rhs(_, y):
        x, p = y[:n], y[n:m]
        J = y[m:].reshape(m, m)
        Hs = sys.hessian(x, p)
        A = np.empty((m, m))
        A[:n, :] = Hs[n:, :]
        A[n:, :] = -Hs[:n, :]
        A[n:, n:] -= sys.c * np.eye(n)
        return np.concatenate([*constant_field(sys, x, p), (A @ J).ravel()])

    return rhs


def tangent_flow(sys: ConformalSystem, state: FlowState, t: float, tol: float = DEFAULT_TOL):
    """Flow and its Jacobian, integrated together on one step sequence."""
    if sys.c is None:
        raise ValueError("tangent_flow needs a constant c")
    _check_duration(t)
    m = 2 * sys.n
    y0 = np.concatenate([state.z, np.eye(m).ravel()])
    if t == 0:
        return state, np.eye(m)
    sol = _solve(_tangent_rhs(sys), y0, state.t, state.t + t, tol)
    y = sol.y[:, -1]
    return FlowState.from_z(y[:m], sol.t[-1]), y[m:].reshape(m, m)


def tangent_series(sys: ConformalSystem, state: FlowState, times, tol: float = DEFAULT_TOL):
    """Jacobians at the requested times (sorted, starting at or after state.t)."""
    times = np.asarray(times, dtype=float)
    m = 2 * sys.n
    y0 = np.concatenate([state.z, np.eye(m).ravel()])
    t1 = float(times[-1])
    if t1 == state.t:
        return [state] * len(times), [np.eye(m)] * len(times)
    sol = _solve(_tangent_rhs(sys), y0, state.t, t1, tol, t_eval=times)
    states = [FlowState.from_z(y[:m], tt) for y, tt in zip(sol.y.T, sol.t)]
    return states, [y[m:].reshape(m, m) for y in sol.y.T]


def canonical_form(n: int) -> np.ndarray:
    return np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])


def conformal_defect(J, c: float, t: float) -> float:
    """Max-norm of J^T Omega J - exp(-c t) Omega."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] % 2:
        raise ShapeError(f"need a square matrix of even size, got {J.shape}")
    W = canonical_form(J.shape[0] // 2)
    return float(np.max(np.abs(J.T @ W @ J - np.exp(-c * t) * W)))


@dataclass
class NewtonSystem:
    """u'' = -dV/du (u, t) with V 1-periodic in u and t."""

    V: Callable
    dV: Callable
    d2V: Callable | None = None

    def __post_init__(self):
        rng = np.random.default_rng(0)
        for u, t in rng.uniform(0, 1, (64, 2)):
            v = self.V(u, t)
            if abs(self.V(u + 1, t) - v) > 1e-10 or abs(self.V(u, t + 1) - v) > 1e-10:
                raise ValueError("potential is not 1-periodic in u and t")

    def curvature(self, u, t, h: float = 1e-5) -> float:
        if self.d2V is not None:
            return self.d2V(u, t)
        return (self.dV(u + h, t) - self.dV(u - h, t)) / (2 * h)


def newton_strobe(sys: NewtonSystem, state, tol: float = DEFAULT_TOL, t0: float = 0.0, jacobian: bool = False):
    """Time-one map (u, p) -> (u mod 1, p); optionally with its 2x2 Jacobian."""
    u, p = (float(v) for v in state)
    if not (np.isfinite(u) and np.isfinite(p)):
        raise ValueError("non-finite state")
    if jacobian:
        def rhs(y, t):
            a = sys.curvature(y[0], t)
            return [y[1], -sys.dV(y[0], t), y[4], y[5], -a * y[2], -a * y[3]]
        y0 = [u, p, 1.0, 0.0, 0.0, 1.0]
    else:
        def rhs(y, t):
            return [y[1], -sys.dV(y[0], t)]
        y0 = [u, p]
    ys, info = odeint(rhs, y0, [t0, t0 + 1.0], rtol=tol, atol=tol, mxstep=1_000_000, full_output=True)
    if info["message"] != "Integration successful." or not np.all(np.isfinite(ys[-1])):
        raise StiffnessError(info["message"])
    y = ys[-1]
    out = (float(y[0] % 1.0), float(y[1]))
    if jacobian:
        return out, np.array([[y[2], y[3]], [y[4], y[5]]])
    return out


def strobe_orbit(sys: NewtonSystem, state, n: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """n iterates of the stroboscopic map, shape (n + 1, 2) including the start."""
    u, p = (float(v) for v in state)

    def rhs(y, t):
        return [y[1], -sys.dV(y[0], t)]

    ys, info = odeint(rhs, [u, p], np.arange(n + 1, dtype=float), rtol=tol, atol=tol,
                      mxstep=1_000_000, full_output=True)
    if info["message"] != "Integration successful." or not np.all(np.isfinite(ys)):
        raise StiffnessError(info["message"])
    ys[:, 0] %= 1.0
    return ys
