import csv
import io

import numpy as np
import pytest

from advest import basis
from advest.cli import main
from advest.experiments import (ConfigError, RunConfig, convergence_block, load_config, parse_assignments,
                                random_case, run_custom, run_preset, run_property_suite)


@pytest.fixture(scope="module")
def table2():
    return run_preset("table2")


def _data_rows(text):
    return [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]


def test_table2_first_row(table2):
    rows = _data_rows(table2.to_csv())
    assert rows[0][:2] == ["elements", "dofs"]
    assert rows[1] == ["4", "8"] + ["1.126"] * 5


def test_exact_block_rows(table2):
    blk = table2.blocks[1]
    assert blk.label == "k = k' = 2"
    assert all(v == "1.000" for row in blk.rows for v in row[2:])
    assert table2.violations == 0


def test_table3_first_row():
    row = convergence_block("pg2", 0, [4]).rows[0]
    assert row[:4] == ["4", "4", "3.574e-02", "1.446e-02"]
    assert float(row[4]) == pytest.approx(3.562e-2, rel=1e-2)
    assert float(row[6]) == pytest.approx(1.35, abs=5e-3)


def test_refinement_stops_at_tolerance():
    blk = convergence_block("dg", 1, [4, 16, 64], eta_stop=1e-3)
    assert len(blk.rows) == 2


def test_unknown_preset():
    with pytest.raises(ValueError):
        run_preset("table9")
    with pytest.raises(SystemExit) as exc:
        main(["preset", "table9"])
    assert exc.value.code == 2


def test_custom_matches_preset(table2):
    res = run_custom(load_config("method = dg\nk = 1\nelements = 4\nbeta = 1e-4,1e-2,1,1e2,1e4\nsource = piecewise_quadratic\n"))
    assert [r[12] for r in res.rows] == table2.blocks[0].rows[0][2:]


def test_zero_source():
    res = run_custom(RunConfig(method="pg2", k=1, elements=[2, 4], source="poly:0"))
    for r in res.rows:
        assert r[8:12] == ["0.000e+00"] * 4
        assert r[14] == "true"


def test_graded_guarantee():
    res = run_custom(RunConfig(method="dg", k=1, elements=[2, 5, 9], mesh="graded", grading=2.0,
                               source="piecewise_quadratic", beta=[1.0, -0.01]))
    assert all(r[14] == "true" for r in res.rows)
    assert res.violations == 0


def test_deterministic():
    cfg = RunConfig(method="pg1", k=2, elements=[3, 6], source="arctan", beta=[2.0])
    assert run_custom(cfg).to_csv() == run_custom(cfg).to_csv()


def test_config_diagnostics():
    with pytest.raises(ConfigError) as exc:
        load_config("method = pg2\n# comment\nsource = sinh\n", "cfg.txt")
    assert "cfg.txt" in str(exc.value) and "source" in str(exc.value)
    with pytest.raises(ConfigError) as exc:
        parse_assignments(["k = 1", "elements = 4,x"], "c")
    assert exc.value.origin == "c:2" and exc.value.field_name == "elements"
    with pytest.raises(ConfigError):
        parse_assignments(["colour = red"])
    with pytest.raises(ConfigError):
        parse_assignments(["just words"])
    with pytest.raises(ConfigError):
        load_config("method = pg1\nk = 1\n")


def test_overrides_win():
    cfg = load_config("method = pg2\nk = 3\n", overrides={"k": "1", "beta": "2,3"})
    assert cfg.k == 1 and cfg.beta == [2.0, 3.0] and cfg.kprime is None


def test_cli_run(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("method = dg\nk = 1\nelements = 4,8\nsource = arctan\n")
    out = tmp_path / "out.csv"
    assert main(["run", "--config", str(conf), "--beta", "1,-5", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4 and {r["guaranteed"] for r in rows} == {"true"}
    assert rows[0]["eta_nc"] == "3.048e-03"


def test_cli_run_bad_config(tmp_path, capsys):
    assert main(["run", "--source", "poly:1,,q"]) == 2
    assert "source" in capsys.readouterr().err


def test_cli_preset_to_file(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["preset", "table2", "--out", str(out)]) == 0
    assert "1.126" in out.read_text()


def test_cli_check(capsys):
    assert main(["check", "--seed", "3", "--cases", "10"]) == 0
    assert "violations=0" in capsys.readouterr().out


def test_random_cases_admissible():
    rng = np.random.default_rng(5)
    for _ in range(50):
        c = random_case(rng)
        assert 1 <= c.n <= 64 and 1e-4 <= abs(c.beta) <= 1e4 and c.k <= 4
        assert np.all(np.diff(c.vertices) > 0)


def test_suite_seeded():
    a = run_property_suite(7, 5)
    b = run_property_suite(7, 5)
    assert [r.report.eta for r in a.results] == [r.report.eta for r in b.results]


def test_quadrature_env(monkeypatch):
    monkeypatch.setenv("ADVEST_QUAD_ORDER", "20")
    assert basis.analytic_quad_order() == 20
    monkeypatch.setenv("ADVEST_QUAD_ORDER", "0")
    with pytest.raises(ValueError):
        basis.analytic_quad_order()
