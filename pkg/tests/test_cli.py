import json
import subprocess
import sys

import jsonschema
import pytest

from schedmech.cli import main

VERDICT_SCHEMA = {
    "type": "object",
    "required": ["property", "pass"],
    "properties": {
        "property": {"type": "string"},
        "pass": {"type": "boolean"},
        "counterexample": {
            "type": "object",
            "required": ["description", "lhs", "relation", "rhs"],
            "properties": {
                "lhs": {"type": "string", "pattern": r"^-?\d+(/\d+)?$"},
                "rhs": {"type": "string", "pattern": r"^-?\d+(/\d+)?$"},
            },
        },
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["name", "checks", "verified", "constants", "inputs", "notes"],
    "properties": {
        "verified": {"type": "boolean"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "lhs", "relation", "rhs", "holds"],
                "properties": {
                    "lhs": {"type": "string", "pattern": r"^-?\d+(/\d+)?$"},
                    "rhs": {"type": "string", "pattern": r"^-?\d+(/\d+)?$"},
                    "holds": {"type": "boolean"},
                },
            },
        },
    },
}


@pytest.fixture
def instance_file(tmp_path):
    def write(jobs, bids, name="inst.json"):
        path = tmp_path / name
        path.write_text(json.dumps({"jobs": jobs, "bids": bids}))
        return str(path)

    return write


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestAllocate:
    def test_greedy_rule(self, capsys, instance_file):
        path = instance_file(["2", "1"], ["2", "8"])
        code, out, _ = run_cli(capsys, "allocate", "lpt-star", path)
        assert code == 0
        payload = json.loads(out)
        assert payload["workloads"] == ["3", "0"]
        assert payload["makespan"] == "6"

    def test_all_to_fastest(self, capsys, instance_file):
        path = instance_file(["2", "1"], ["1", "3"])
        code, out, _ = run_cli(capsys, "allocate", "vcg", path)
        assert code == 0
        assert json.loads(out)["workloads"] == ["3", "0"]

    def test_exact_optimum(self, capsys, instance_file):
        path = instance_file(["2", "1"], ["1", "2"])
        code, out, _ = run_cli(capsys, "allocate", "opt", path)
        assert code == 0
        assert json.loads(out)["makespan"] == "2"

    def test_sampling_honors_seed(self, capsys, instance_file):
        path = instance_file(["2", "1"], ["2/5", "1"])
        code, out1, _ = run_cli(capsys, "allocate", "at-sample", path, "--seed", "9")
        _, out2, _ = run_cli(capsys, "allocate", "at-sample", path, "--seed", "9")
        assert code == 0
        assert out1 == out2  # byte-identical replay

    def test_sampling_reads_seed_from_instance_file(self, capsys, tmp_path):
        path = tmp_path / "seeded.json"
        path.write_text(
            json.dumps({"jobs": ["2", "1"], "bids": ["2/5", "1"], "seed": 9})
        )
        _, from_file, _ = run_cli(capsys, "allocate", "at-sample", str(path))
        _, from_flag, _ = run_cli(
            capsys, "allocate", "at-sample", str(path), "--seed", "9"
        )
        assert from_file == from_flag

    def test_expected_allocation(self, capsys, instance_file):
        path = instance_file(["2", "1"], ["2/5", "1"])
        code, out, _ = run_cli(capsys, "allocate", "at-expected", path)
        assert code == 0
        payload = json.loads(out)
        assert payload["expected_workloads"] == ["5/2", "1/2"]

    def test_unknown_rule_is_usage_error(self, capsys, instance_file):
        path = instance_file(["2"], ["1"])
        code, _, _ = run_cli(capsys, "allocate", "nope", path)
        assert code == 2

    def test_parse_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run_cli(capsys, "allocate", "vcg", str(bad))
        assert code == 2

    def test_budget_exceeded(self, capsys, instance_file):
        path = instance_file(["1"] * 12, ["1"] * 4)
        code, _, _ = run_cli(capsys, "allocate", "opt", path, "--budget", "100")
        assert code == 3


class TestCheck:
    def test_random_batch_passes(self, capsys):
        code, out, _ = run_cli(
            capsys, "check", "ef", "vcg", "--random", "20", "--seed", "7"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["pass"] is True
        assert payload["instances"] == 20

    def test_explicit_vectors_fail_with_witness(self, capsys):
        code, out, _ = run_cli(
            capsys, "check", "le", "--workloads", "1,2", "--bids", "1,2"
        )
        assert code == 1
        payload = json.loads(out)
        assert payload["pass"] is False
        assert "counterexample" in payload
        jsonschema.validate(payload, VERDICT_SCHEMA)

    def test_adversarial_ratio(self, capsys):
        code, out, _ = run_cli(
            capsys, "check", "ratio", "vcg", "--theorem1", "m=3", "c=3/2"
        )
        assert code == 0
        assert out.strip() == "5/3"

    def test_batch_is_seed_deterministic(self, capsys):
        args = ("check", "truthful", "vcg", "--random", "5", "--seed", "3",
                "--grid", "1,2,3")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2

    def test_two_machine_rule_batches_sample_two_machines(self, capsys):
        code, out, _ = run_cli(
            capsys, "check", "scalable", "two-opt", "--random", "10", "--seed", "2"
        )
        assert code == 0
        assert json.loads(out)["pass"] is True

    def test_parallel_matches_serial(self, capsys):
        base = ("check", "le", "lpt-star", "--random", "8", "--seed", "11")
        _, serial, _ = run_cli(capsys, *base)
        _, parallel, _ = run_cli(capsys, *base, "--jobs-parallel", "2")
        assert serial == parallel

    def test_ratio_csv_batch(self, capsys, tmp_path):
        out_csv = tmp_path / "ratios.csv"
        code, _, _ = run_cli(
            capsys,
            "check", "ratio", "vcg", "--random", "5", "--seed", "3",
            "--csv", str(out_csv),
        )
        assert code == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "rule,m,n,ratio"
        assert len(lines) == 6

    def test_missing_inputs_is_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "check", "ef", "vcg")
        assert code == 2


class TestCertify:
    def test_greedy_integral_certificate(self, capsys):
        code, out, _ = run_cli(capsys, "certify", "theorem5", "--a", "8,16")
        assert code == 0
        payload = json.loads(out)
        assert payload["verified"] is True
        assert payload["constants"]["a=8:integral"] == "26"
        assert payload["constants"]["a=16:integral"] == "52"
        jsonschema.validate(payload, REPORT_SCHEMA)

    def test_binning_integral_certificate(self, capsys):
        code, out, _ = run_cli(
            capsys, "certify", "theorem7", "--tol", "1/1000000"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["constants"]["integral"]["rational"] == "7/2"

    def test_text_rendering(self, capsys):
        code, out, _ = run_cli(capsys, "certify", "theorem5", "--a", "8", "--text")
        assert code == 0
        assert out.startswith("certificate theorem5: VERIFIED")

    def test_polytope_verdict_is_data(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "certify", "polytope", "--rule", "lpt-star",
            "--grid", "1,2,8", "--jobs", "2,1",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["feasible"] in (True, False)

    def test_lemma6_certificate(self, capsys):
        code, out, _ = run_cli(capsys, "certify", "lemma6", "--k", "3")
        assert code == 0
        assert json.loads(out)["constants"]["g"] == "5/12"

    def test_harness_certificate(self, capsys):
        code, out, _ = run_cli(
            capsys, "certify", "theorem1", "--m", "3", "--c", "3/2"
        )
        assert code == 0
        assert json.loads(out)["constants"]["ratio"] == "5/3"


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "schedmech.cli", "certify", "theorem5", "--a", "8"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verified"] is True
