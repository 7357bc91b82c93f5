import json
from pathlib import Path

import pytest

from instances import write_trace
from jcsp.cli import main, parse_grid, CliError
from jcsp.experiments import validation_model
from jcsp.model import save_model

from conftest import two_layer

FAST = ["--events", "20000", "--replications", "3"]


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "validation.json"
    path.write_text(save_model(validation_model(2, 2)))
    return path


def files(out: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_validate_clean_model(tmp_path, model_file):
    assert main(["validate", "--model", str(model_file), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "diagnostics.txt").read_text() == ""


def test_validate_reports_errors(tmp_path, capsys):
    doc = json.loads(save_model(validation_model(1, 1)))
    doc["tasks"][0]["multiplicity"] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["validate", "--model", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "multiplicity" in capsys.readouterr().err


def test_solve_writes_report(tmp_path, model_file):
    out = tmp_path / "o"
    assert main(["solve", "--model", str(model_file), "--out", str(out)]) == 0
    assert {"solution-entities.csv", "solution-cache.csv", "solution.json", "report.txt",
            "manifest.json"} <= set(files(out))


def test_simulate_and_compare(tmp_path, model_file):
    assert main(["simulate", "--model", str(model_file), "--out", str(tmp_path / "s"), *FAST]) == 0
    assert main(["compare", "--model", str(model_file), "--out", str(tmp_path / "c"), *FAST]) == 0
    assert (tmp_path / "c" / "comparison.csv").exists()


def test_compare_mismatched_models(tmp_path, model_file, capsys):
    other = tmp_path / "other.json"
    other.write_text(save_model(two_layer()))
    code = main(["compare", "--model", str(model_file), "--sim-model", str(other), "--out", str(tmp_path / "o"),
                 *FAST])
    assert code != 0
    assert "missing from the simulation" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    assert main(["solve", "--model", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2
    assert "no such file" in capsys.readouterr().err


def test_unknown_command_exits_nonzero(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["dance", "--out", str(tmp_path)])
    assert exc.value.code != 0


def test_optimize_jcsp_documents(tmp_path):
    out = tmp_path / "o"
    args = ["optimize", "--mode", "jcsp", "--grid", "M=2,N=4,C=3,q=150,p=0.1", "--generations", "4",
            "--population", "6", "--out", str(out)]
    assert main(args) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert {"response-time", "memory-mb", "baselines"} <= set(summary)
    decision = json.loads((out / "decision.json").read_text())
    assert decision["allocation"] is not None
    assert (out / "fitness.csv").read_text().startswith("generation,best,mean")


def test_baselines_from_decision(tmp_path):
    grid = ["--grid", "M=2,N=4,C=3,q=150,p=0.1"]
    opt = tmp_path / "opt"
    main(["optimize", "--mode", "placement", *grid, "--generations", "3", "--population", "4", "--out", str(opt)])
    r = {}
    for kind in ("no-cache", "prefetch-all"):
        out = tmp_path / kind
        assert main(["baseline", kind, *grid, "--decision", str(opt / "decision.json"), "--out", str(out)]) == 0
        r[kind] = json.loads((out / "baseline.json").read_text())["response-time"]
    assert r["prefetch-all"] <= r["no-cache"]


def test_baseline_needs_kind(tmp_path):
    assert main(["baseline", "--out", str(tmp_path)]) == 2


def test_gen_workload_and_ingest(tmp_path):
    assert main(["gen-workload", "--grid", "M=2,N=5,C=4", "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "cdf-execution-time.csv").exists()
    inv, dur, mem = write_trace(tmp_path)
    assert main(["ingest-trace", "--invocations", str(inv), "--durations", str(dur), "--memory", str(mem),
                 "--horizon-days", "1", "--out", str(tmp_path / "t")]) == 0
    w = json.loads((tmp_path / "t" / "workload.json").read_text())
    assert w["services"][0]["rate"] == pytest.approx(1 / 60)


def test_gain_and_mape_from_pairs(tmp_path):
    (tmp_path / "g.csv").write_text("baseline,proposed\n100,90\n50,45\n")
    (tmp_path / "m.csv").write_text("estimated,reference\n0.5,0.4\n")
    assert main(["gain", "--pairs", str(tmp_path / "g.csv"), "--out", str(tmp_path / "g"), "--format", "json"]) == 0
    assert json.loads((tmp_path / "g" / "report.json").read_text())["comparison"]["gain"] == pytest.approx(0.1)
    assert main(["mape", "--pairs", str(tmp_path / "m.csv"), "--out", str(tmp_path / "m")]) == 0
    assert json.loads((tmp_path / "m" / "mape.json").read_text())["mape"] == pytest.approx(0.25)


def test_bad_pairs_file(tmp_path):
    (tmp_path / "g.csv").write_text("a,b\n1,2\n")
    assert main(["gain", "--pairs", str(tmp_path / "g.csv"), "--out", str(tmp_path / "g")]) == 2


def test_manifest_hash_ignores_output_location(tmp_path, model_file):
    for d in ("a", "b"):
        main(["solve", "--model", str(model_file), "--out", str(tmp_path / d)])
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_manifest_changes_with_seed(tmp_path):
    for s in ("1", "2"):
        main(["gen-workload", "--grid", "M=2,N=5,C=4", "--seed", s, "--out", str(tmp_path / s)])
    a = json.loads((tmp_path / "1" / "manifest.json").read_text())
    b = json.loads((tmp_path / "2" / "manifest.json").read_text())
    assert a["config-hash"] != b["config-hash"]


def test_parse_grid():
    g = parse_grid("M=2,C=5,eta=0.5")
    assert (g["M"], g["N"], g["C"], g["eta"]) == (2, 25, 5, 0.5)
    with pytest.raises(CliError):
        parse_grid("Z=1")


def test_thread_cap_must_be_positive(tmp_path, model_file, monkeypatch):
    monkeypatch.setenv("JCSP_THREADS", "0")
    assert main(["simulate", "--model", str(model_file), "--out", str(tmp_path), *FAST]) == 2
