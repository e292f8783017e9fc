import dataclasses
import json
import re
import subprocess
import sys

import pytest

from splmut import cli
from splmut.bundle import dumps_bundle, load_bundle, load_tests
from splmut.fixtures import fixture_text, load_fixture
from splmut.mapping import Mapping


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.mark.parametrize("name", ["eshop", "ticketmach", "alarmsys"])
def test_validate_fixtures(name, capsys):
    assert run_cli("validate", f"fixture:{name}") == 0
    assert capsys.readouterr().out.strip().endswith("ok")


def test_validate_duplicate_mapping(tmp_path, capsys):
    b = load_fixture("eshop")
    m = b.spec.mappings[0]
    spec = dataclasses.replace(b.spec, mappings=b.spec.mappings + (Mapping("MX", m.feature, m.value, ("t01",)),))
    path = tmp_path / "dup.json"
    path.write_text(dumps_bundle(dataclasses.replace(b, spec=spec)))
    assert run_cli("validate", str(path)) == 1
    assert "already mapped by" in capsys.readouterr().out


def test_validate_malformed_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "format": "splmut-bundle/1",\n  "name": oops\n}\n')
    assert run_cli("validate", str(path)) == 1
    assert "line 3, column" in capsys.readouterr().err


@pytest.mark.parametrize("name,count", [("eshop", 20), ("ticketmach", 8), ("alarmsys", 42)])
def test_variants_count(name, count, capsys):
    assert run_cli("variants", f"fixture:{name}", "--count") == 0
    assert capsys.readouterr().out.strip() == str(count)


def test_variants_list_and_limit(capsys):
    assert run_cli("variants", "fixture:ticketmach", "--list") == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 8 and all("TicketMachine" in ln for ln in lines)
    assert run_cli("variants", "fixture:alarmsys", "--limit", "5") == 1
    assert "more than 5" in capsys.readouterr().err


def test_materialize(tmp_path, capsys):
    out = tmp_path / "p.json"
    assert run_cli("materialize", "fixture:ticketmach", "--features", "TicketMachine,Coins", "--out", str(out)) == 0
    p = load_bundle(out)
    assert p.spec.mappings == ()
    assert len(list(p.spec.machine.transitions())) < len(list(load_fixture("ticketmach").spec.machine.transitions()))
    assert run_cli("materialize", "fixture:ticketmach", "--features", "Coins") == 1
    with pytest.raises(SystemExit) as exc:
        run_cli("materialize", "fixture:ticketmach", "--features", "Nope")
    assert exc.value.code == 2


def test_mutate_writes_bundles_and_manifest(tmp_path):
    out = tmp_path / "m"
    assert run_cli("mutate", "fixture:eshop", "--operators", "DMP", "--out", str(out)) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert [m["id"] for m in manifest["mutants"]] == ["DMP-001", "DMP-002", "DMP-003", "DMP-004"]
    assert all(m["operator"] == "DMP" and m["locus"] for m in manifest["mutants"])
    bundles = sorted(p.name for p in out.glob("DMP-*.json"))
    assert len(bundles) == 4
    first = load_bundle(out / "DMP-001.json")
    assert len(first.spec.mappings) == 3 and first.metadata["operator"] == "DMP"


def test_mutate_empty_operator_list(capsys):
    assert run_cli("mutate", "fixture:eshop", "--operators", "") == 0
    assert json.loads(capsys.readouterr().out)["mutants"] == []


def test_mutate_notes_not_applicable(tmp_path, capsys):
    b = load_fixture("eshop")
    one = dataclasses.replace(b, spec=dataclasses.replace(b.spec, mappings=b.spec.mappings[:1]))
    path = tmp_path / "one.json"
    path.write_text(dumps_bundle(one))
    assert run_cli("mutate", str(path), "--operators", "IME") == 0
    manifest = json.loads(capsys.readouterr().out)
    assert manifest["mutants"] == [] and "IME" in manifest["not_applicable"]


def test_generate_tests(tmp_path, capsys):
    out = tmp_path / "t.json"
    assert run_cli("generate-tests", "fixture:eshop", "--out", str(out)) == 0
    assert len(load_tests(out)) == 13
    assert "uncovered" not in capsys.readouterr().err
    assert run_cli("generate-tests", "fixture:eshop", "--depth", "0", "--out", str(out)) == 0
    assert load_tests(out) == []
    assert "uncovered transitions: t01" in capsys.readouterr().err


def test_run_with_external_tests_and_threshold(tmp_path, capsys):
    tests = tmp_path / "t.json"
    assert run_cli("generate-tests", "fixture:ticketmach", "--out", str(tests)) == 0
    args = ("run", "fixture:ticketmach", "--tests", str(tests), "--operators", "mapping")
    assert run_cli(*args, "--score-threshold", "40") == 0
    assert run_cli(*args, "--score-threshold", "90") == 1
    assert "below the threshold" in capsys.readouterr().err


def test_run_without_tests_scores_zero(tmp_path, capsys):
    b = load_fixture("eshop")
    path = tmp_path / "nt.json"
    path.write_text(dumps_bundle(dataclasses.replace(b, tests=None, metadata={})))
    assert run_cli("run", str(path), "--operators", "mapping", "--score-threshold", "0.01") == 1
    out = capsys.readouterr().out
    assert re.search(r"^Acc\s+0\.00 \(30\)", out, re.M)


def test_report_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.REPORT_DIR_ENV, str(tmp_path / "env"))
    assert run_cli("run", "fixture:ticketmach", "--operators", "CFV") == 0
    assert sorted(p.name for p in (tmp_path / "env").iterdir()) == ["report.csv", "report.json", "report.txt"]
    # an explicit flag wins over the environment
    assert run_cli("run", "fixture:ticketmach", "--operators", "CFV", "--report", str(tmp_path / "flag")) == 0
    assert (tmp_path / "flag" / "report.json").exists()


def test_reports_byte_identical_across_workers_and_runs(tmp_path, capsys):
    outputs = []
    for i, workers in enumerate(("1", "2", "8", "1")):
        d = tmp_path / f"r{i}"
        assert run_cli("run", "fixture:eshop", "fixture:ticketmach", "fixture:alarmsys",
                       "--workers", workers, "--report", str(d)) == 0
        stdout = capsys.readouterr().out
        outputs.append((stdout,) + tuple((d / f).read_bytes() for f in ("report.txt", "report.json", "report.csv")))
    assert all(o == outputs[0] for o in outputs[1:])


def test_usage_errors_exit_2():
    for argv in (["bogus"], ["run", "fixture:eshop", "--operators", "XYZ"], ["run", "fixture:nope"],
                 ["run", "fixture:eshop", "--workers", "0"], ["run", "fixture:eshop", "fixture:alarmsys",
                                                             "--tests", "x.json"]):
        with pytest.raises(SystemExit) as exc:
            run_cli(*argv)
        assert exc.value.code == 2, argv


def test_missing_file_exit_1(capsys):
    assert run_cli("validate", "/no/such/file.json") == 1


def test_internal_error_exit_3(monkeypatch):
    def boom(spec):
        raise RuntimeError("boom")
    monkeypatch.setattr(cli, "validate_spec", boom)
    assert run_cli("validate", "fixture:eshop") == 3


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "splmut.cli", "variants", "fixture:eshop"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "20"


def test_fixture_reference_path_equivalent_to_file(tmp_path, capsys):
    path = tmp_path / "e.json"
    path.write_text(fixture_text("eshop"))
    run_cli("run", str(path), "--operators", "DMP")
    a = capsys.readouterr().out
    run_cli("run", "fixture:eshop", "--operators", "DMP")
    assert capsys.readouterr().out == a
