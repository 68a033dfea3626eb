import csv
import io
import json

import pytest

from cmvariety.cli import (
    DEFAULT_TOLS,
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_OK,
    ConfigError,
    main,
    make_config,
    parse_grid,
    parse_params,
    run,
)

PG_PARAMS = "1,0 1.7,0.2 1.3,0.1 1,0 1,0"


def read_csv(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_verify_passes(capsys):
    assert main(["verify", "--n", "2", "--seed", "3", "--trials", "4"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 4
    assert all(r["passed"] == "1" and r["error"] == "" for r in rows)


def test_verify_preamble_records_rng_and_seed():
    _, text, _ = run(["verify", "--seed", "11", "--trials", "1"])
    head = text.splitlines()[0]
    assert head.startswith("# cmvariety verify") and "seed=11" in head and "rng=" in head


def test_unit_coupling_is_config_error(capsys):
    assert main(["verify", "--n", "1", "--params", "2,0 1.5,0 1,0 0.5,0 3,0"]) == EXIT_CONFIG
    assert "t**2" in capsys.readouterr().err


def test_impossible_tolerance_fails():
    assert main(["verify", "--trials", "2", "--tol", "1e-15"]) == EXIT_FAIL


@pytest.mark.parametrize("grid", ["0:1:0", "1:0:5", "0:1", "a:b:3"])
def test_bad_grid(grid):
    assert main(["flow", "--t-grid", grid]) == EXIT_CONFIG


def test_malformed_pair():
    assert main(["poisson", "--pairs", "h1-H2", "--trials", "1"]) == EXIT_CONFIG


def test_text_format_rejected_for_verify():
    assert main(["verify", "--format", "text"]) == EXIT_CONFIG


def test_quiver_dimension(capsys):
    assert main(["quiver", "--n", "3"]) == EXIT_OK
    assert "dimension 6" in capsys.readouterr().out


def test_quiver_json():
    status, text, _ = run(["quiver", "--n", "2", "--format", "json"])
    assert status == EXIT_OK
    assert json.loads(text)["results"]["dimension"] == 4


def test_flow_h_drift_columns():
    status, text, _ = run(["flow", "--n", "2", "--seed", "5", "--hamiltonian", "h", "--k", "2", "--t-grid", "0:1:5"])
    assert status == EXIT_OK
    rows = read_csv(text)
    assert len(rows) == 5
    for r in rows:
        assert float(r["drift_trX^1"]) < 1e-10 and float(r["drift_trX^2"]) < 1e-10


def test_flow_pg_check_column():
    status, text, _ = run(["flow", "--n", "2", "--params", PG_PARAMS, "--hamiltonian", "H", "--t-grid", "0:0.5:3", "--pg-check"])
    assert status == EXIT_OK
    assert all(float(r["pg_residual"]) < 1e-8 for r in read_csv(text))


def test_flow_pg_check_needs_special_params():
    assert main(["flow", "--n", "2", "--params", "1.5,0 1.7,0.2 1.3,0.1 1,0 1,0", "--hamiltonian", "H", "--pg-check"]) == EXIT_CONFIG


def test_flow_start_file(tmp_path):
    start = tmp_path / "start.json"
    start.write_text(json.dumps({"p": [[0.8, 0.1]], "x": [[1.3, 0.4]]}))
    status, text, _ = run(["flow", "--n", "1", "--start", str(start), "--params", "1.5,0 1.7,0.2 1.3,0.1 0.8,0 1.2,0", "--t-grid", "0:0.5:2"])
    assert status == EXIT_OK
    assert len(read_csv(text)) == 2


def test_poisson_anti_rows():
    status, text, _ = run(["poisson", "--n", "2", "--trials", "1", "--anti-poisson", "--seed", "2"])
    assert status == EXIT_OK
    rows = read_csv(text)
    assert {r["kind"] for r in rows} == {"compare", "anti"}
    assert sum(r["kind"] == "anti" for r in rows) == 4
    assert all(float(r["rel_diff"]) < 1e-6 for r in rows)


def test_duality_command():
    status, text, _ = run(["duality", "--n", "2", "--trials", "3"])
    assert status == EXIT_OK
    rows = read_csv(text)
    assert all(float(r["involution"]) < 1e-10 for r in rows)


def test_verify_deterministic():
    argv = ["verify", "--n", "2", "--seed", "123", "--trials", "3"]
    assert run(argv)[1] == run(argv)[1]


def test_jobs_do_not_change_output():
    argv = ["verify", "--n", "1", "--seed", "9", "--trials", "4"]
    assert run(argv)[1] == run(argv + ["--jobs", "2"])[1]


def test_json_schema():
    _, text, _ = run(["verify", "--trials", "2", "--format", "json"])
    d = json.loads(text)
    assert set(d) == {"config", "results", "versions"}
    assert {"numpy", "python"} <= set(d["versions"])
    assert d["config"]["seed"] == 0 and len(d["results"]) == 2


def test_config_file_and_flag_override(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"n": 1, "trials": 2, "seed": 4}))
    _, _, cfg = run(["verify", "--config", str(cfg_path), "--trials", "3"])
    assert (cfg.n, cfg.trials, cfg.seed) == (1, 3, 4)


def test_output_file(tmp_path):
    out = tmp_path / "out.csv"
    assert main(["verify", "--trials", "1", "--out", str(out)]) == EXIT_OK
    assert out.read_text().startswith("# cmvariety verify")


def test_make_config_errors():
    with pytest.raises(ConfigError):
        make_config("verify", {"bogus": 1})
    with pytest.raises(ConfigError):
        make_config("verify", {"seed": -1})
    with pytest.raises(ConfigError):
        make_config("verify", {"tolerances": {"nope": 1}})
    cfg = make_config("verify", {"tol": 1e-3})
    assert set(cfg.tolerances) == set(DEFAULT_TOLS) and set(cfg.tolerances.values()) == {1e-3}


def test_parse_grid_and_params():
    assert list(parse_grid("0:1:3")) == [0, 0.5, 1]
    p = parse_params("2,0 1.5,0 3,0 0.5,0 1.2,0", 2)
    assert p.k0 == 2 and p.t == 3 and p.n == 2
    with pytest.raises(ConfigError):
        parse_params("1,2 3,0", 2)
