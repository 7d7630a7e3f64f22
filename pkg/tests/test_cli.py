import json
import subprocess
import sys

import pytest

from kgrag.cli import main
from kgrag.rag import read_journal
from kgrag.synthetic import bundled_corpus


def test_no_subcommand_and_bad_flags(capsys):
    assert main([]) == 1
    with pytest.raises(SystemExit) as e:
        main(["rank", "--bogus"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 1


def test_version():
    out = subprocess.run([sys.executable, "-m", "kgrag.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("kgrag ")


def test_pipeline_outputs(pipeline_run):
    recs = read_journal(pipeline_run / "runs.jsonl")
    assert len(recs) == (100 + 110) * 6 * 3
    assert all(r.correct for r in recs)
    assert (pipeline_run / "reports" / "report.md").exists()
    header = json.loads((pipeline_run / "probe1.jsonl").read_text().splitlines()[0])
    assert header["type"] == "header" and header["generation_seed"] == 7


def test_gen_probes_twice_is_identical(pipeline_run, tmp_path):
    args = ["gen-probes", "--kg", str(pipeline_run / "g3.json"), "--mode", "probe1", "--n", "100",
            "--seed", "7", "--out"]
    assert main(args + [str(tmp_path / "a.jsonl")]) == 0
    assert main(args + [str(tmp_path / "b.jsonl")]) == 0
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert (tmp_path / "a.jsonl").read_bytes() == (pipeline_run / "probe1.jsonl").read_bytes()


def test_missing_graph_writes_no_journal(pipeline_run, tmp_path):
    journal = tmp_path / "runs.jsonl"
    code = main(["run-eval", "--probes", str(pipeline_run / "probe1.jsonl"), "--systems", "no_rag,g1",
                 "--g1", str(tmp_path / "missing.json"), "--provider", "mock:oracle", "--out", str(journal)])
    assert code == 1 and not journal.exists()


def test_unknown_system_is_usage_error(pipeline_run, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["run-eval", "--probes", str(pipeline_run / "probe1.jsonl"), "--systems", "no_rag,g7",
              "--provider", "mock:oracle", "--out", str(tmp_path / "r.jsonl")])
    assert e.value.code == 1


def test_validate_probes_flags_corruption(pipeline_run, tmp_path, capsys):
    lines = (pipeline_run / "probe1.jsonl").read_text().splitlines()
    item = json.loads(lines[1])
    item["key"] = next(l for l in item["allowed_letters"] if l != item["key"])
    lines[1] = json.dumps(item, ensure_ascii=False)
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["validate-probes", "--probes", str(bad), "--kg", str(pipeline_run / "g3.json")]) == 1
    assert "key mismatch" in capsys.readouterr().out


def test_partial_grid_exit_codes(pipeline_run, tmp_path):
    script = tmp_path / "script.json"
    script.write_text(json.dumps({}))  # every prompt fails
    journal = tmp_path / "runs.jsonl"
    code = main(["run-eval", "--probes", str(pipeline_run / "probe2.jsonl"), "--systems", "no_rag",
                 "--temps", "0", "--provider", f"mock:script:{script}", "--out", str(journal)])
    assert code == 2
    assert all(r.error for r in read_journal(journal))

    lines = (pipeline_run / "runs.jsonl").read_text().splitlines()
    partial = tmp_path / "partial.jsonl"
    partial.write_text("\n".join(lines[:-30]) + "\n")
    assert main(["analyze", "--runs", str(partial), "--out-dir", str(tmp_path / "rep")]) == 2
    assert "## Gaps" in (tmp_path / "rep" / "report.md").read_text()


def test_rank_reports_bad_input(tmp_path):
    bad = tmp_path / "c.jsonl"
    bad.write_text("{oops\n")
    assert main(["rank", "--corpus", str(bad), "--out", str(tmp_path / "r.jsonl")]) == 1
    assert main(["rank", "--corpus", str(bundled_corpus("ad")), "--min-words", "100000",
                 "--out", str(tmp_path / "r.jsonl")]) == 1


def test_config_file_supplies_defaults(pipeline_run, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("seed: 7\nn_probe1: 100\n")
    out = tmp_path / "p.jsonl"
    assert main(["gen-probes", "--config", str(cfg), "--kg", str(pipeline_run / "g3.json"), "--mode", "probe1",
                 "--out", str(out)]) == 0
    assert out.read_bytes() == (pipeline_run / "probe1.jsonl").read_bytes()
    cfg.write_text("sede: 7\n")
    assert main(["gen-probes", "--config", str(cfg), "--kg", str(pipeline_run / "g3.json"), "--mode", "probe1",
                 "--out", str(out)]) == 1
