"""Experiment configuration in a plain-text ``key = value`` format.

One assignment per line; ``#`` starts a comment; blank lines are ignored.
Lists are comma-separated (``table_params = 2.0, 1.0``), booleans are
``true`` / ``false``.  Every key not given takes its default below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .geometry import curve_from_spec

KINDS = ("orbit-sweep", "periodic-search", "count-PT", "tiling-sim", "fold-scan", "flow", "strobe",
         "complexity", "front", "line-domain")
MAPS = ("birkhoff", "magnetic", "pensive", "symplectic")
GENERATORS = ("euclidean", "hyperbolic")
TILINGS = ("square", "parallelogram", "triangle", "brick", "wind-tree")
DELAYS = ("constant", "half-perimeter")


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _at_least(k):
    return lambda x: x >= k


def _opt(ok, help_: str, default, **kw):
    return field(default=default, metadata={"ok": ok, "help": help_, **kw})


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = _opt(lambda v: v in KINDS, "one of " + ", ".join(KINDS), "orbit-sweep")
    seed: int = _opt(_nonneg, ">= 0", 0)
    threads: int = _opt(_at_least(1), ">= 1", 1)
    out_dir: str = _opt(bool, "non-empty path", "out")
    svg: bool = _opt(None, "write SVG overlays", False)
    tol: float = _opt(_pos, "> 0", 1e-10)
    # tables
    table: str = _opt(None, "circle, ellipse, polygon, regular-polygon, oval, stadium", "circle")
    table_params: tuple = _opt(None, "curve parameters", ())
    map: str = _opt(lambda v: v in MAPS, "one of " + ", ".join(MAPS), "birkhoff")
    b_field: float = _opt(math.isfinite, "finite", 1.0)
    orientation: int = _opt(lambda v: v in (-1, 1), "-1 or 1", 1)
    delay_kind: str = _opt(lambda v: v in DELAYS, "one of " + ", ".join(DELAYS), "constant")
    delay: float = _opt(_nonneg, ">= 0", 0.0)
    steps: int = _opt(_at_least(1), ">= 1", 1000)
    starts: int = _opt(_at_least(1), ">= 1", 10)
    # periodic orbits
    generator: str = _opt(lambda v: v in GENERATORS, "one of " + ", ".join(GENERATORS), "euclidean")
    period: int = _opt(_at_least(2), ">= 2", 3)
    rotation: int = _opt(_at_least(1), ">= 1", 1)
    multistart: int = _opt(_at_least(1), ">= 1", 4)
    t_max: float = _opt(lambda v: v >= 2, ">= 2", 100.0)
    fit_min: float = _opt(_pos, "> 0", 20.0)
    # tilings
    tiling: str = _opt(lambda v: v in TILINGS, "one of " + ", ".join(TILINGS), "brick")
    tiling_params: tuple = _opt(None, "tiling parameters", (0.5,))
    max_steps: int = _opt(_at_least(1), ">= 1", 100_000)
    radius: int = _opt(_at_least(1), ">= 1", 6)
    # flows
    damping: float = _opt(math.isfinite, "finite", 0.1)
    x0: tuple = _opt(lambda v: len(v) >= 1, "at least one value", (1.0,))
    p0: tuple = _opt(lambda v: len(v) >= 1, "at least one value", (0.0,))
    t_end: float = _opt(_pos, "> 0", 10.0)
    samples: int = _opt(_at_least(2), ">= 2", 101)
    amplitude: float = _opt(math.isfinite, "finite", 0.1)
    p_range: tuple = _opt(lambda v: len(v) == 2 and v[0] < v[1], "two increasing values", (-1.0, 1.0))
    # symbolic dynamics, fronts, lines
    word_length: int = _opt(_at_least(1), ">= 1", 8)
    source: tuple = _opt(lambda v: len(v) == 2, "two values", (0.0, 0.0))
    times: tuple = _opt(lambda v: len(v) >= 1 and all(t > 0 for t in v), "positive values", (0.5, 1.0, 2.0))
    n_rays: int = _opt(_at_least(8), ">= 8", 1024)
    eps: float = _opt(_pos, "> 0", 0.05)
    n_theta: int = _opt(_at_least(4), ">= 4", 360)

    def __post_init__(self):
        for f in fields(self):
            ok = f.metadata.get("ok")
            if ok is not None and not ok(getattr(self, f.name)):
                raise ConfigError(f"{f.name} = {_show(getattr(self, f.name))} out of range ({f.metadata['help']})",
                                  key=f.name)
        try:
            curve_from_spec(self.table, self.table_params)
        except (ValueError, IndexError, TypeError) as exc:
            raise ConfigError(f"table: {exc}", key="table") from None
        if len(self.x0) != len(self.p0):
            raise ConfigError("x0 and p0 must have the same length", key="p0")

    def curve(self):
        return curve_from_spec(self.table, self.table_params)


FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _show(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(name: str, raw: str, line: int):
    typ = FIELDS[name].type
    try:
        if typ == "bool":
            if raw.lower() not in ("true", "false"):
                raise ValueError("expected true or false")
            return raw.lower() == "true"
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "tuple":
            return tuple(float(x) for x in raw.split(",")) if raw.strip() else ()
        if not raw:
            raise ValueError("empty value")
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}", line=line, key=name) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse, fill defaults and validate."""
    vals = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", line=n)
        key, val = (x.strip() for x in body.split("=", 1))
        if not key or " " in key:
            raise ConfigError(f"malformed key {key!r}", line=n)
        if key not in FIELDS:
            raise ConfigError(f"unknown key {key!r}; valid keys: {', '.join(FIELDS)}", line=n, key=key)
        if key in vals:
            raise ConfigError(f"duplicate key {key!r}", line=n, key=key)
        vals[key] = _convert(key, val, n)
    return ExperimentConfig(**vals)


def format_config(cfg: ExperimentConfig) -> str:
    """Text that parses back to the same config."""
    return "".join(f"{f.name} = {_show(getattr(cfg, f.name))}\n" for f in fields(cfg))


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
