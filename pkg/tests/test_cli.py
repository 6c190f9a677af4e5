import csv
import hashlib
import io
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from billiardlab.cli import main
from billiardlab.config import FIELDS, KINDS, ExperimentConfig, format_config, parse_config
from billiardlab.errors import ConfigError, SerializationError
from billiardlab.experiments import run_experiment
from billiardlab.output import emit_csv, emit_svg, format_value
from oracles import circle_coprime_count

SVG = "{http://www.w3.org/2000/svg}"


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


# -- config ------------------------------------------------------------------


def test_minimal_config_defaults():
    cfg = parse_config("# circle sweep\nkind = orbit-sweep\ntable = circle\n")
    assert cfg == ExperimentConfig()
    assert cfg.seed == 0 and cfg.tol == 1e-10 and cfg.steps == 1000 and cfg.table_params == ()


def test_negative_tolerance_names_key():
    with pytest.raises(ConfigError) as ei:
        parse_config("kind = flow\ntol = -1\n")
    assert ei.value.key == "tol" and "tol" in str(ei.value)


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError) as ei:
        parse_config("kind = flow\nfoo = 1\n")
    msg = str(ei.value)
    assert "foo" in msg and all(k in msg for k in FIELDS) and ei.value.line == 2


@pytest.mark.parametrize("text,line", [("kind = flow\n\nsteps 10\n", 3), ("steps = ten\n", 1),
                                       ("kind = flow\nkind = front\n", 2), ("svg = maybe\n", 1)])
def test_syntax_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert ei.value.line == line and f"line {line}" in str(ei.value)


@pytest.mark.parametrize("text", ["kind = nope\n", "table = torus\n", "table = polygon\ntable_params = 1, 2\n",
                                  "threads = 0\n", "map = outer\n", "x0 = 1, 2\n"])
def test_range_and_resolution_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(KINDS), seed=st.integers(0, 2**63), tol=st.floats(1e-15, 1.0),
       steps=st.integers(1, 10**6), svg=st.booleans(), b=finite, src=st.tuples(finite, finite),
       times=st.lists(st.floats(1e-6, 1e3), min_size=1, max_size=4), out=st.text("abc/_-.", min_size=1))
def test_round_trip(kind, seed, tol, steps, svg, b, src, times, out):
    cfg = ExperimentConfig(kind=kind, seed=seed, tol=tol, steps=steps, svg=svg, b_field=b, source=src,
                           times=tuple(times), out_dir=out, table="ellipse", table_params=(2.0, 1.0))
    assert parse_config(format_config(cfg)) == cfg


# -- csv / svg -----------------------------------------------------------------


def test_csv_format():
    text = emit_csv(["a", "b,c"], [(1.0, 'x"y'), (1 / 3, True)], extra=[("fit", 2.0)])
    assert text.split("\r\n")[0] == 'a,"b,c"'
    assert _rows(text) == [["a", "b,c"], ["1", 'x"y'], ["0.333333333", "true"], ["fit", "2"]]
    assert format_value(-0.0) == "0" and format_value(123456789012.0) == "1.23456789e+11"


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_csv_rejects_non_finite(bad):
    with pytest.raises(SerializationError):
        emit_csv(["x"], [(bad,)])


def test_csv_width_mismatch():
    with pytest.raises(SerializationError):
        emit_csv(["x", "y"], [(1.0,)])


def test_svg_outline_only():
    doc = ET.fromstring(emit_svg(np.array([[0, 0], [1, 0], [0, 1]]), []))
    assert doc.get("version") == "1.1"
    assert len(doc.findall(f"{SVG}polygon")) == 1 and not doc.findall(f"{SVG}path")


def test_svg_one_path_per_segment():
    line = np.random.default_rng(0).normal(size=(17, 2))
    doc = ET.fromstring(emit_svg(np.array([[0, 0], [1, 0], [0, 1]]), [line]))
    assert len(doc.findall(f"{SVG}path")) == 16


def test_svg_rejects_nan():
    with pytest.raises(SerializationError):
        emit_svg(None, [np.array([[0.0, 0.0], [math.nan, 1.0]])])


# -- experiments ----------------------------------------------------------------

SMALL = {
    "orbit-sweep": "table = ellipse\ntable_params = 2, 1\nsteps = 150\nstarts = 5\n",
    "periodic-search": "table = ellipse\ntable_params = 2, 1\nperiod = 3\nmultistart = 4\n",
    "count-PT": "t_max = 30\nfit_min = 10\nmultistart = 1\n",
    "tiling-sim": "tiling = triangle\ntiling_params = 1.0, 1.2\nstarts = 4\nmax_steps = 3000\n",
    "fold-scan": "tiling = parallelogram\ntiling_params = 1, 1, 0.7853981633974483\nradius = 4\n",
    "flow": "t_end = 5\nsamples = 11\n",
    "strobe": "starts = 3\nsteps = 20\n",
    "complexity": "table = regular-polygon\ntable_params = 4\nstarts = 30\nsteps = 60\nword_length = 5\n",
    "front": "source = 0.3, 0.1\ntimes = 0.5, 1.5\nn_rays = 256\neps = 0.1\n",
    "line-domain": "table = ellipse\ntable_params = 2, 1\nn_theta = 36\n",
}


@pytest.mark.parametrize("kind", KINDS)
def test_every_kind_runs_and_is_deterministic(kind, tmp_path):
    cfg = parse_config(f"kind = {kind}\nsvg = true\nseed = 7\n" + SMALL[kind])
    r1 = run_experiment(cfg, out_dir=str(tmp_path / "a"))
    r2 = run_experiment(cfg, out_dir=str(tmp_path / "b"), threads=3)
    assert r1.status == 0, r1.summary
    h = [hashlib.sha256((tmp_path / d / "summary.csv").read_bytes()).hexdigest() for d in "ab"]
    assert h[0] == h[1]
    assert len(_rows(r1.summary)) >= 2
    for name, text in r1.files.items():
        if name.endswith(".svg"):
            ET.fromstring(text)


def test_seed_changes_sweep(tmp_path):
    cfg = parse_config("kind = orbit-sweep\nsteps = 5\nstarts = 3\n")
    a = run_experiment(cfg, write=False).summary
    assert a != run_experiment(cfg, seed=1, write=False).summary


def test_count_pt_circle(tmp_path):
    res = run_experiment(parse_config("kind = count-PT\nt_max = 100\nmultistart = 1\n"), write=False)
    rows = _rows(res.summary)
    assert rows[0] == ["T", "P"]
    for T, P in rows[1:-1]:
        assert int(P) == circle_coprime_count(int(T))
    assert rows[-1][0] == "growth_exponent" and 1.9 <= float(rows[-1][1]) <= 2.1


def test_flow_defects():
    res = run_experiment(parse_config("kind = flow\ndamping = 0.1\n"), write=False)
    rows = _rows(res.summary)
    assert all(float(r[-1]) <= 1e-6 for r in rows[1:])


def test_tiling_sim_brick_recurs():
    res = run_experiment(parse_config("kind = tiling-sim\nstarts = 20\nmax_steps = 20000\n"), write=False)
    cls = [r[5] for r in _rows(res.summary)[1:]]
    assert set(cls) <= {"periodic", "linear-escape"} and "periodic" in cls


def test_module_error_serialized(tmp_path):
    # the unit circle is not strictly inside the Klein disc
    cfg = parse_config("kind = periodic-search\ngenerator = hyperbolic\n")
    res = run_experiment(cfg, out_dir=str(tmp_path))
    assert res.status != 0
    assert _rows((tmp_path / "summary.csv").read_text()) == [["status", "error", "message"],
                                                             ["error", "ModelError", _rows(res.summary)[1][2]]]


# -- command line -----------------------------------------------------------------


def test_cli_validate_run_render(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kind = orbit-sweep\nsteps = 120\nstarts = 2\n")
    assert main(["validate", str(cfg)]) == 0
    assert parse_config(capsys.readouterr().out) == parse_config(cfg.read_text())
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out-dir", str(out), "--seed", "3", "--threads", "2"]) == 0
    assert (out / "summary.csv").exists() and (out / "config.txt").exists()
    assert "seed = 3" in (out / "config.txt").read_text()
    svg = tmp_path / "t.svg"
    assert main(["render", str(out / "trajectories.csv"), "--svg", str(svg), "--table", "circle"]) == 0
    doc = ET.fromstring(svg.read_text())
    assert len(doc.findall(f"{SVG}path")) == 2 * 120


def test_cli_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("kind = flow\nfoo = 1\n")
    assert main(["validate", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    err = tmp_path / "err.cfg"
    err.write_text(f"kind = periodic-search\ngenerator = hyperbolic\nout_dir = {tmp_path / 'o'}\n")
    assert main(["run", str(err)]) == 1


def test_shipped_configs_validate():
    from pathlib import Path

    paths = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.cfg"))
    assert {parse_config(p.read_text()).kind for p in paths} == set(KINDS)
