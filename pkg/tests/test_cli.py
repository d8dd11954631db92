import json

import pytest

from fcba.cli import main


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_pc_prints_closed_form(capsys):
    assert main(["pc"]) == 0
    assert capsys.readouterr().out.strip() == "0.25"
    t = str(1 / 3)
    assert main(["pc", "--a", t, "--b", t, "--alpha", t, "--beta", t]) == 0
    assert capsys.readouterr().out.strip() == "0.125"


def test_pc_json(capsys):
    assert main(["pc", "--json", "--beta", "0.5"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["p_c"] == pytest.approx(1 / 11)
    assert rec["config"]["beta"] == 0.5 and "version" in rec


@pytest.mark.parametrize("argv", [
    ["pc", "--a", "1.5"],
    ["pc", "--alpha", "0.7", "--beta", "0.6"],
    ["solve-q", "--p-grid", ""],
    ["phase-sweep", "--p-grid", ""],
    ["nonsense"],
    ["simulate", "--n", "ten"],
])
def test_usage_errors_exit_one(argv, tmp_path, capsys):
    code = None
    try:
        code = main(argv + ["--out", str(tmp_path)] if argv[0] != "nonsense" else argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"a": 0.1, "colour": "red"}))
    assert main(["pc", "--config", str(cfg)]) == 1
    assert "colour" in capsys.readouterr().err


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"beta": 0.5}))
    main(["pc", "--config", str(cfg), "--json"])
    assert json.loads(capsys.readouterr().out)["config"]["beta"] == 0.5
    main(["pc", "--config", str(cfg), "--beta", "0", "--json"])
    assert json.loads(capsys.readouterr().out)["p_c"] == 0.25


def test_solve_q_table(tmp_path, capsys):
    assert main(["solve-q", "--p-grid", "0.1,0.2,0.3,1.0", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "solve_q.csv").read_text().splitlines()
    assert lines[0].startswith("# ")
    assert lines[1] == "p,q,branch,residual"
    assert lines[2].startswith("0.1,1.0,subcritical-one")
    assert lines[4].startswith("0.3,0.82574185835")
    assert lines[5].startswith("1.0,0.0,")


def test_forced_mutual_pair(tmp_path, capsys):
    cfg = tmp_path / "pair.json"
    cfg.write_text(json.dumps({"positions": [0.0, 2.0], "species": "><"}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "events.csv").read_text().splitlines()
    assert lines[1:] == ["time,position,kind,left_id,right_id,created_id", "1.0,1.0,MUTUAL,0,1,"]


def test_simulate_byte_identical(tmp_path, capsys):
    t = str(1 / 3)
    argv = ["simulate", "--n", "150", "--p", "0.15", "--a", t, "--b", t, "--alpha", t, "--beta", t, "--seed", "3"]
    assert main(argv + ["--out", str(tmp_path / "1")]) == 0
    assert main(argv + ["--out", str(tmp_path / "2")]) == 0
    first, second = _files(tmp_path / "1"), _files(tmp_path / "2")
    assert set(first) == {"events.csv", "spacetime.svg", "simulate.json"}
    assert first == second
    assert main(argv[:-1] + ["4", "--out", str(tmp_path / "3")]) == 0
    assert _files(tmp_path / "3")["events.csv"] != first["events.csv"]


def test_output_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("FCBA_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["solve-q", "--p", "0.5"]) == 0
    assert (tmp_path / "env" / "solve_q.csv").exists()


def test_estimate_q_json(tmp_path, capsys):
    argv = ["estimate-q", "--n", "300", "--p", "0.4", "--trials", "40", "--workers", "1", "--json",
            "--out", str(tmp_path)]
    assert main(argv) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["estimate"]["trials"] == 40
    assert rec["solver_q"] == pytest.approx(1 / 0.4 ** 0.5 - 1)


def test_verify_exit_codes(tmp_path, capsys):
    argv = ["verify", "--n", "1000", "--p", "0.2", "--trials", "400", "--workers", "1", "--out", str(tmp_path)]
    code = main(argv)
    rec = json.loads((tmp_path / "verify.json").read_text())
    expected = 2 if rec["failed"] else (3 if rec["inconclusive"] else 0)
    assert code == expected
    assert code == 0


def test_phase_sweep_small(tmp_path, capsys):
    argv = ["phase-sweep", "--p-grid", "0.1,0.45", "--n-schedule", "200,400", "--trials", "30",
            "--workers", "1", "--out", str(tmp_path)]
    assert main(argv) == 0
    rec = json.loads((tmp_path / "phase_sweep.json").read_text())
    assert rec["bracket"]["rule"] == "scaling"
    assert (tmp_path / "phase_sweep.csv").read_text().count("\n") == 2 + 4
