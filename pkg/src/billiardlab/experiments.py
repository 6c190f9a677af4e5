"""Experiment orchestration: one runner per config kind, deterministic output.

Every experiment draws from one SeedSequence built from the config seed;
independent sub-tasks get spawned child streams, so results do not depend
on the thread count.  Tasks run in an order-preserving pool and all files
are written by the calling thread.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (
    Labeling,
    complexity,
    complexity_checks,
    front_density,
    line_domain,
    rotation_number,
    sample_corpus,
    wave_front,
)
from .config import ExperimentConfig, format_config
from .errors import BilliardError, InsufficientData
from .flows import ConformalSystem, FlowState, NewtonSystem, conformal_defect, strobe_orbit, tangent_series
from .geometry import HyperbolicTable
from .maps import (
    ChordState,
    DelayFunction,
    PhasePoint,
    birkhoff_step,
    magnetic_step,
    pensive_step,
    symplectic_billiard_step,
)
from .output import curve_outline, emit_csv, emit_svg
from .tiling import FaceRef, Tiling, check_foldability, fold_group_scan, simulate
from .variational import ActionFunctional, growth_exponent, orbit_census, search_periodic

SUMMARY = "summary.csv"
TRACE_POINTS = 200


@dataclass
class Table:
    header: list
    rows: list
    extra: list = field(default_factory=list)
    ok: bool = True


@dataclass
class RunResult:
    status: int
    summary: str
    files: dict  # name -> text


def _streams(cfg: ExperimentConfig, n: int) -> list:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(n)]


def _pmap(cfg: ExperimentConfig, fn, items) -> list:
    if cfg.threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


def _err(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}"


# -- billiard maps ------------------------------------------------------------


def _step_fn(cfg: ExperimentConfig, curve):
    if cfg.map == "birkhoff":
        return lambda z: birkhoff_step(curve, z)
    if cfg.map == "magnetic":
        return lambda z: magnetic_step(curve, cfg.b_field, cfg.orientation, z)
    if cfg.map == "pensive":
        delay = DelayFunction(cfg.delay_kind, (cfg.delay,))
        return lambda z: pensive_step(curve, delay, z)
    return lambda z: symplectic_billiard_step(curve, z)


def _random_state(cfg: ExperimentConfig, curve, rng):
    P = curve.perimeter
    if cfg.map == "symplectic":
        s0 = rng.uniform(0, P)
        return ChordState(s0, (s0 + rng.uniform(0.1, 0.9) * P) % P)
    return PhasePoint(rng.uniform(0, P), rng.uniform(0.05, math.pi - 0.05))


def _pair(z):
    return (z.s0, z.s1) if isinstance(z, ChordState) else (z.s, z.phi)


def run_orbit_sweep(cfg: ExperimentConfig):
    curve = cfg.curve()
    step = _step_fn(cfg, curve)

    def one(rng):
        z0 = _random_state(cfg, curve, rng)
        z, s_hist = z0, [_pair(z0)[0]]
        try:
            for _ in range(cfg.steps):
                z = step(z)
                s_hist.append(_pair(z)[0])
        except BilliardError as exc:
            return (*_pair(z0), None, None, None, None, _err(exc)), s_hist
        rot = hw = None
        if len(s_hist) > 100:
            r = rotation_number(s_hist, curve.perimeter)
            rot, hw = r.value, r.halfwidth
        return (*_pair(z0), *_pair(z), rot, hw, "ok"), s_hist

    out = _pmap(cfg, one, _streams(cfg, cfg.starts))
    a, b = ("s0", "s1") if cfg.map == "symplectic" else ("s", "phi")
    header = ["index", f"{a}_start", f"{b}_start", f"{a}_end", f"{b}_end", "rotation", "rotation_halfwidth", "status"]
    rows = [(k, *r) for k, (r, _) in enumerate(out)]
    traces = [np.array([curve.point(s) for s in h[:TRACE_POINTS]]) for _, h in out]
    files = {"trajectories.csv": _trace_csv(traces)}
    if cfg.svg:
        files["trajectories.svg"] = emit_svg(curve_outline(curve), traces)
    return Table(header, rows, ok=all(r[-1] == "ok" for r in rows)), files


def _trace_csv(traces) -> str:
    rows = [(k, x, y) for k, t in enumerate(traces) for x, y in t]
    return emit_csv(["id", "x", "y"], rows)


# -- periodic orbits ---------------------------------------------------------


def _generator(cfg: ExperimentConfig, curve):
    if cfg.generator == "hyperbolic":
        return HyperbolicTable(curve), ActionFunctional("hyperbolic")
    return curve, ActionFunctional()


def run_periodic_search(cfg: ExperimentConfig):
    curve = cfg.curve()
    table, F = _generator(cfg, curve)
    orbits = search_periodic(table, F, cfg.period, cfg.rotation, cfg.multistart, _streams(cfg, 1)[0],
                             dedup="action")
    header = ["index", "n", "p", "length", "morse_index", "grad_norm"]
    rows = [(k, o.n, o.p, o.length, o.morse_index, o.grad_norm) for k, o in enumerate(orbits)]
    files = {}
    if cfg.svg:
        polys = [np.array([curve.point(s) for s in np.append(o.s, o.s[0])]) for o in orbits]
        files["orbits.svg"] = emit_svg(curve_outline(curve), polys)
    return Table(header, rows), files


def run_count_pt(cfg: ExperimentConfig):
    curve = cfg.curve()
    table, F = _generator(cfg, curve)
    n_max = int(math.floor(cfg.t_max))
    census = orbit_census(table, F, n_max, cfg.multistart, cfg.seed)
    counts = [(T, sum(1 for o in census.orbits if o.n <= T)) for T in range(2, n_max + 1)]
    fit = [(T, P) for T, P in counts if T >= cfg.fit_min and P > 0]
    try:
        extra = [("growth_exponent", growth_exponent(fit))]
    except InsufficientData as exc:
        extra = [("growth_exponent", _err(exc))]
    return Table(["T", "P"], counts, extra), {}


# -- tilings -------------------------------------------------------------------


def build_tiling(kind: str, params) -> Tiling:
    p = [float(v) for v in params]
    if kind == "square":
        return Tiling.square(*p[:1])
    if kind == "parallelogram":
        if len(p) != 3:
            raise ValueError("parallelogram needs a, b, alpha")
        return Tiling.parallelogram(*p)
    if kind == "triangle":
        if len(p) == 2:
            p.append(math.pi - p[0] - p[1])
        if len(p) != 3:
            raise ValueError("triangle needs two or three angles")
        return Tiling.triangle(p)
    if kind == "brick":
        return Tiling.brick(*(p[:1] or [0.5]))
    if kind == "wind-tree":
        if len(p) not in (2, 4):
            raise ValueError("wind-tree needs a, b and optionally lx, ly")
        return Tiling.wind_tree(*p)
    raise ValueError(f"unknown tiling {kind!r}")


def run_tiling_sim(cfg: ExperimentConfig):
    til = build_tiling(cfg.tiling, cfg.tiling_params)

    def one(rng):
        face = FaceRef(0, 0, int(rng.integers(len(til.protos))))
        P = til.polygon(face)
        x = rng.dirichlet(np.ones(len(P))) @ P
        ang = rng.uniform(0, 2 * math.pi)
        r = simulate(til, (face, x, (math.cos(ang), math.sin(ang))), cfg.max_steps)
        esc = (None, None) if r.escape is None else tuple(r.escape)
        return (face.k, x[0], x[1], ang, r.classification, r.period, r.max_visits, r.steps, *esc,
                r.first_intersection), r.points[:TRACE_POINTS]

    out = _pmap(cfg, one, _streams(cfg, cfg.starts))
    header = ["index", "face", "x", "y", "direction", "classification", "period", "max_visits", "steps",
              "escape_x", "escape_y", "first_intersection"]
    rows = [(k, *r) for k, (r, _) in enumerate(out)]
    traces = [t for _, t in out]
    files = {"trajectories.csv": _trace_csv(traces)}
    if cfg.svg:
        files["trajectories.svg"] = emit_svg(None, traces)
    return Table(header, rows), files


def run_fold_scan(cfg: ExperimentConfig):
    til = build_tiling(cfg.tiling, cfg.tiling_params)
    scan = fold_group_scan(til, cfg.radius)
    predicted = check_foldability(til.params["alpha"], til.params["a"], til.params["b"]) \
        if cfg.tiling == "parallelogram" else None
    basis = [None] * 4 if scan.basis is None else list(np.ravel(scan.basis))
    header = ["tiling", "radius", "group_order", "C1", "C2", "foldable", "predicted",
              "u_x", "u_y", "v_x", "v_y", "states"]
    row = (cfg.tiling, cfg.radius, len(scan.group), scan.C1, scan.C2, scan.C1 and scan.C2, predicted,
           *basis, scan.states)
    return Table(header, [row]), {}


# -- flows -------------------------------------------------------------------


def oscillator(n: int, c: float) -> ConformalSystem:
    """H = (|x|^2 + |p|^2) / 2 with friction c."""
    return ConformalSystem(n, lambda x, p: 0.5 * (x @ x + p @ p), lambda x, p: (x.copy(), p.copy()), c=c)


def run_flow(cfg: ExperimentConfig):
    n = len(cfg.x0)
    sys_ = oscillator(n, cfg.damping)
    times = np.linspace(0.0, cfg.t_end, cfg.samples)
    states, jacs = tangent_series(sys_, FlowState(cfg.x0, cfg.p0), times, cfg.tol)
    header = ["t", *[f"x{i + 1}" for i in range(n)], *[f"p{i + 1}" for i in range(n)], "H", "defect"]
    rows = [(st.t, *st.x, *st.p, sys_.H(st.x, st.p), conformal_defect(J, cfg.damping, st.t))
            for st, J in zip(states, jacs)]
    return Table(header, rows), {}


def pendulum_drive(amplitude: float) -> NewtonSystem:
    """V(u, t) = a cos(2 pi (u + t))."""
    w = 2 * math.pi
    return NewtonSystem(lambda u, t: amplitude * math.cos(w * (u + t)),
                        lambda u, t: -amplitude * w * math.sin(w * (u + t)))


def run_strobe(cfg: ExperimentConfig):
    sys_ = pendulum_drive(cfg.amplitude)

    def one(rng):
        u0, p0 = rng.uniform(0, 1), rng.uniform(*cfg.p_range)
        try:
            ys = strobe_orbit(sys_, (u0, p0), cfg.steps, cfg.tol)
        except BilliardError as exc:
            return (u0, p0, None, None, None, None, _err(exc))
        return (u0, p0, ys[-1, 0], ys[-1, 1], ys[:, 1].min(), ys[:, 1].max(), "ok")

    rows = [(k, *r) for k, r in enumerate(_pmap(cfg, one, _streams(cfg, cfg.starts)))]
    header = ["index", "u_start", "p_start", "u_end", "p_end", "p_min", "p_max", "status"]
    return Table(header, rows, ok=all(r[-1] == "ok" for r in rows)), {}


# -- symbolic dynamics, fronts, lines -------------------------------------------


def run_complexity(cfg: ExperimentConfig):
    curve = cfg.curve()
    lab = Labeling.of(curve)
    step = _step_fn(cfg, curve)
    rngs = _streams(cfg, cfg.starts)
    starts = [_random_state(cfg, curve, r) for r in rngs]
    s_of = (lambda z: z.s0) if cfg.map == "symplectic" else (lambda z: z.s)
    corpus = sample_corpus(step, lab, starts, cfg.steps, s_of=s_of)
    p = complexity(corpus, cfg.word_length)
    checks = complexity_checks(p, len(lab.alphabet))
    rows = [(n + 1, int(v)) for n, v in enumerate(p)]
    extra = [("words", len(corpus))] + [(k, v) for k, v in checks.items()]
    return Table(["n", "p"], rows, extra), {}


def run_front(cfg: ExperimentConfig):
    curve = cfg.curve()
    times = sorted(cfg.times)
    fronts = _pmap(cfg, lambda t: wave_front(curve, cfg.source, t, cfg.n_rays), times)
    dens = front_density(curve, cfg.source, times, cfg.eps, cfg.n_rays)
    header = ["t", "length", "diameter", "components", "dropped", "density"]
    rows = [(t, f.length, f.diameter, len(f.polylines), f.dropped, d) for t, f, d in zip(times, fronts, dens)]
    files = {}
    if cfg.svg:
        files["fronts.svg"] = emit_svg(curve_outline(curve), [pl for f in fronts for pl in f.polylines])
    return Table(header, rows), files


def run_line_domain(cfg: ExperimentConfig):
    d = line_domain(cfg.curve(), cfg.n_theta)
    rows = list(zip(d.theta, d.lower, d.upper, d.upper - d.lower))
    return Table(["theta", "lower", "upper", "width"], rows), {}


RUNNERS = {
    "orbit-sweep": run_orbit_sweep,
    "periodic-search": run_periodic_search,
    "count-PT": run_count_pt,
    "tiling-sim": run_tiling_sim,
    "fold-scan": run_fold_scan,
    "flow": run_flow,
    "strobe": run_strobe,
    "complexity": run_complexity,
    "front": run_front,
    "line-domain": run_line_domain,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None, threads: int | None = None,
                   seed: int | None = None, write: bool = True) -> RunResult:
    """Run the configured experiment and write the summary plus artifacts.

    Module errors do not propagate: they become a one-row summary with the
    error class and message, and the status is 1.
    """
    over = {k: v for k, v in (("out_dir", out_dir), ("threads", threads), ("seed", seed)) if v is not None}
    cfg = replace(cfg, **over)
    try:
        table, files = RUNNERS[cfg.kind](cfg)
        summary = emit_csv(table.header, table.rows, table.extra)
        status = 0 if table.ok else 1
    except (BilliardError, ValueError, ArithmeticError) as exc:
        summary = emit_csv(["status", "error", "message"], [("error", type(exc).__name__, str(exc))])
        files, status = {}, 1
    files = {SUMMARY: summary, **files, "config.txt": format_config(cfg)}
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        for name, text in files.items():
            with open(os.path.join(cfg.out_dir, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return RunResult(status, summary, files)
