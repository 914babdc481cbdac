"""
Command-line tests: exit codes and report files.
"""

import json

import pytest

from app.main import EXIT_CONFIG_ERROR, main
from app.models.schemas import Outcome, Report, RunSet


def run_to(path, *args) -> int:
    return main(["run", "--runs", "2", "--report", "json", "--out", str(path), *args])


class TestSetup:
    def test_writes_material(self, tmp_path, capsys):
        assert main(["setup", "--out", str(tmp_path), "--seed", "1", "--clients", "2"]) == 0
        assert "wrote 4 entities" in capsys.readouterr().out
        assert (tmp_path / "manifest.json").exists()

    def test_run_uses_material(self, tmp_path):
        main(["setup", "--out", str(tmp_path / "m"), "--clients", "1"])
        out = tmp_path / "run.json"
        assert run_to(out, "--material", str(tmp_path / "m")) == 0
        assert RunSet.model_validate_json(out.read_text()).config.material == str(tmp_path / "m")


class TestRun:
    def test_json_report(self, tmp_path):
        out = tmp_path / "flat.json"
        assert run_to(out, "--protocol", "flat") == 0
        run_set = RunSet.model_validate_json(out.read_text())
        assert len(run_set.metrics) == 2
        assert run_set.summary.granted == 2

    def test_table_to_stdout(self, capsys):
        assert main(["run", "--runs", "1", "--protocol", "baseline"]) == 0
        assert "baseline over mem" in capsys.readouterr().out

    def test_transcript_file(self, tmp_path):
        transcript = tmp_path / "t.json"
        assert run_to(tmp_path / "r.json", "--transcript", str(transcript)) == 0
        assert len(json.loads(transcript.read_text())) == 10

    def test_attack_run_succeeds(self, tmp_path):
        out = tmp_path / "replay.json"
        assert run_to(out, "--attack", "replay") == 0
        metrics = RunSet.model_validate_json(out.read_text()).metrics
        assert {m.attack_outcome for m in metrics} == {Outcome.DENIED}

    def test_unknown_target(self, tmp_path):
        assert run_to(tmp_path / "x.json", "--attack", "tamper", "--target", "NOPE") == (
            EXIT_CONFIG_ERROR
        )

    def test_attack_over_udp_refused(self, tmp_path):
        code = run_to(tmp_path / "x.json", "--attack", "drop", "--transport", "udp")
        assert code == EXIT_CONFIG_ERROR

    def test_unknown_protocol(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--protocol", "saml"])
        assert exc.value.code == 2


class TestCompare:
    def test_compare_json(self, tmp_path, capsys):
        run_to(tmp_path / "a.json", "--protocol", "flat")
        run_to(tmp_path / "b.json", "--protocol", "baseline")
        capsys.readouterr()
        a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        code = main(["compare", a, b, "--report", "json"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["protocol_a"] == "flat" and report["protocol_b"] == "baseline"

    def test_mismatched_run_counts(self, tmp_path):
        run_to(tmp_path / "a.json")
        main(["run", "--runs", "3", "--report", "json", "--out", str(tmp_path / "b.json")])
        assert main(["compare", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) != 0

    def test_not_a_run_set(self, tmp_path):
        bogus = tmp_path / "bogus.json"
        bogus.write_text("{}")
        assert main(["compare", str(bogus), str(bogus)]) == EXIT_CONFIG_ERROR


class TestSchema:
    def test_report_schema_to_file(self, tmp_path):
        out = tmp_path / "report_schema.json"
        assert main(["schema", "--out", str(out)]) == 0
        assert json.loads(out.read_text()) == Report.model_json_schema()

    def test_run_set_schema_to_stdout(self, capsys):
        assert main(["schema", "--model", "run-set"]) == 0
        assert json.loads(capsys.readouterr().out)["title"] == "RunSet"
