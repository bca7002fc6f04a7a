import csv
from dataclasses import fields, replace

import pytest

from molrelay.experiments import (PRESET_TABLE, ConfigError, ExperimentSpec, ResultRow,
                                  build_scenario, emit_results, figure_preset, load_config,
                                  parse_text, preset_names, run_experiment, spec_from_dict,
                                  to_text)
from molrelay.experiments.cli import main
from molrelay.experiments.presets import ASSUMED, FIDELITY_FACTOR
from molrelay.experiments.validate import run_checks

MINIMAL = """\
scheme = MM-MH   # distinct molecule types
q = 1
sweep.var = xi
sweep.grid = [4, 8]
"""


def small(**kw):
    base = dict(scheme="MM-MH", q=1, sweep_var="xi", grid=(4.0, 8.0), length=8, trials=6,
                realizations=4, engine="both")
    base.update(kw)
    return ExperimentSpec(**base)


def test_minimal_config_fills_defaults(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(MINIMAL)
    spec = load_config(p)
    assert spec.q == 1 and spec.grid == (4.0, 8.0)
    assert spec.T == 200e-6 and spec.M == 10 and spec.xi_mode == "fixed" and spec.seed == 0


@pytest.mark.parametrize("text,key", [
    (MINIMAL + "timing.TT = 1e-4\n", "timing.TT"),
    (MINIMAL.replace("q = 1\n", ""), "q"),
    (MINIMAL + "timing.M = 2.5\n", "timing.M"),
    (MINIMAL + "engine = fast\n", "engine"),
    (MINIMAL + "series.timing.X = [1, 2]\n", "series.timing.X"),
    (MINIMAL + "protocol = HD\n", "protocol"),
    (MINIMAL + "sweep.grid = 3\n", "sweep.grid"),
    (MINIMAL + "timing.t0 = 1e-3\n", "timing.t0"),
])
def test_bad_config_names_key(text, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        spec_from_dict(parse_text(text))


def test_parse_errors():
    with pytest.raises(ConfigError, match="line 2"):
        parse_text("a = 1\nno equals here\n")
    with pytest.raises(ConfigError):
        parse_text("sweep.grid = [1, 2\n")
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/x.cfg")


def test_text_round_trip():
    spec = small(series=(("protocol", ("FD", "baseline")), ("timing.T", (2e-4, 4e-4))),
                 xi_search=(2, 30), p1=0.4, split_budget=False)
    assert spec_from_dict(parse_text(to_text(spec))) == spec


def test_series_variants_are_cartesian():
    spec = small(series=(("protocol", ("FD", "baseline")), ("timing.T", (2e-4, 4e-4))))
    v = spec.variants()
    assert [lbl for lbl, _ in v] == ["protocol-FD_T-0.0002", "protocol-FD_T-0.0004",
                                     "protocol-baseline_T-0.0002", "protocol-baseline_T-0.0004"]
    assert v[3][1].protocol == "baseline" and v[3][1].T == 4e-4


def test_baseline_is_direct_link_with_same_budget():
    spec = small(protocol="baseline", q=3)
    sc = build_scenario(spec, 4.0)
    assert sc.q == 0 and sum(sc.protocol.n_molecules) == pytest.approx(spec.n_total)
    relay = build_scenario(small(q=3), 4.0)
    assert sum(relay.protocol.n_molecules) == pytest.approx(spec.n_total)


def test_result_row_rejects_bad_error():
    with pytest.raises(ValueError):
        ResultRow("xi", 1.0, analytical_err=1.2)


def test_twelve_point_grid_gives_thirteen_lines(tmp_path):
    spec = small(grid=tuple(float(v) for v in range(2, 26, 2)), engine="analytical",
                 realizations=2, length=5, name="g")
    rows = run_experiment(spec)
    files = emit_results(rows, tmp_path, spec)
    table = tmp_path / "g.csv"
    assert table in files
    lines = table.read_text().splitlines()
    assert len(lines) == 13 and lines[0] == "sweep_var,value,analytical_err,sim_err,sim_se,trials,wall_s"
    for rec in csv.DictReader(lines):
        assert 0 <= float(rec["analytical_err"]) <= 1 and rec["sim_err"] == ""


def test_outputs_independent_of_workers(tmp_path):
    spec = small(name="w")
    a = emit_results(run_experiment(spec, workers=1), tmp_path / "a", spec)
    b = emit_results(run_experiment(spec, workers=2), tmp_path / "b", spec)
    for fa, fb in zip(a, b):
        if fa.suffix == ".csv":
            assert fa.read_bytes() == fb.read_bytes()


def test_manifest_reloads_to_same_spec(tmp_path):
    spec = small(name="m", engine="analytical", q=2, sweep_var="q", grid=(0.0, 2.0),
                 xi_mode="average")
    rows = run_experiment(spec)
    emit_results(rows, tmp_path, spec)
    back = load_config(tmp_path / "m.manifest")
    assert replace(back, version="") == spec and back.version
    text = (tmp_path / "m.manifest").read_text()
    assert "# threshold" in text


def test_failed_point_does_not_stop_sweep(tmp_path, monkeypatch):
    from molrelay.experiments import runner
    real = runner.analytical_error

    def flaky(spec, sc):
        if sc.protocol.xi == 8.0:
            raise RuntimeError("boom")
        return real(spec, sc)

    monkeypatch.setattr(runner, "analytical_error", flaky)
    rows = run_experiment(small(engine="analytical"))
    assert [r.status for r in rows] == ["ok", "failed"]
    emit_results(rows, tmp_path, small(engine="analytical", name="f"))
    assert "# failed" in (tmp_path / "f.manifest").read_text()


def test_presets_follow_table():
    assert preset_names() == list(PRESET_TABLE)
    attr = {"timing.M": "M", "timing.T": "T", "detection.xi": "xi", "budget.n_total": "n_total",
            "protocol": "protocol"}
    for name, params in PRESET_TABLE.items():
        spec = figure_preset(name)
        for k, v in params.items():
            if k == "series":
                assert dict(spec.series) == {s: tuple(vals) for s, vals in v.items()}
                assert all(s in attr for s in v)
            else:
                assert getattr(spec, k) == v, (name, k)
        for k, v in ASSUMED.get(name, {}).items():
            assert getattr(spec, k) == v
        hi = figure_preset(name, fidelity=True)
        assert hi.trials == FIDELITY_FACTOR * spec.trials
    with pytest.raises(KeyError, match="valid names"):
        figure_preset("nope")


def test_spec_fields_have_config_keys():
    from molrelay.experiments.config import SCHEMA
    attrs = {a for a, _, _ in SCHEMA.values()}
    assert {f.name for f in fields(ExperimentSpec)} - attrs == {"series"}


def test_cli(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(MINIMAL + "source.length = 6\nsim.trials = 4\nanalytical.realizations = 3\n"
                   "name = cli\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
    assert (tmp_path / "o" / "cli.csv").is_file()
    assert "analytical" in capsys.readouterr().out
    assert main(["optimize", "xi", str(cfg)]) == 0
    assert "grid search" in capsys.readouterr().out
    bad = tmp_path / "bad.cfg"
    bad.write_text(MINIMAL + "colour = red\n")
    assert main(["run", str(bad)]) == 2
    assert "colour" in capsys.readouterr().err
    assert main(["preset", "nope"]) == 2


def test_invariant_checks_pass():
    out = []
    assert run_checks(out.append)
    assert all(line.startswith("PASS") for line in out)
