from __future__ import annotations

import io
import json
import re
import subprocess
import sys

import pytest

from tripledetect import cli, dump
from tripledetect.linalg import DEFAULT_TOL


def run(*argv, env=None):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), env={} if env is None else env, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv, env=None):
    code, out, err = run(*argv, "--format", "json", env=env)
    return code, json.loads(out)


def numbers(text: str) -> set[float]:
    return {float(x) for x in re.findall(r"-?\d+\.\d+(?:e[-+]\d+)?|-?\d+e[-+]\d+", text)}


def json_numbers(obj) -> set[float]:
    out = set()
    if isinstance(obj, dict):
        for v in obj.values():
            out |= json_numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            out |= json_numbers(v)
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        out.add(float(obj))
    return out


class TestTolerances:
    def test_defaults(self):
        assert cli.resolve_tolerances(env={}) == DEFAULT_TOL

    def test_env_then_flag(self):
        env = {"TRIPLEDETECT_ABS_TOL": "1e-9", "TRIPLEDETECT_WARN_TOL": "1e-5"}
        tol = cli.resolve_tolerances(env=env)
        assert (tol.abs_tol, tol.audit_warn_tol) == (1e-9, 1e-5)
        assert cli.resolve_tolerances(abs_tol=1e-8, env=env).abs_tol == 1e-8

    def test_loose_abs_raises_warn(self):
        tol = cli.resolve_tolerances(abs_tol=1e-3, env={})
        assert tol.audit_warn_tol == 1e-3

    def test_explicit_conflict(self):
        with pytest.raises(cli.UsageError):
            cli.resolve_tolerances(abs_tol=1e-3, warn_tol=1e-6, env={})
        with pytest.raises(cli.UsageError):
            cli.resolve_tolerances(env={"TRIPLEDETECT_ABS_TOL": "x"})


class TestVerify:
    def test_default(self):
        code, out, _ = run("verify")
        assert code == 0
        for k in range(1, 11):
            assert f"C.{k} " in out
        assert "variant literal" in out and "variant repaired" in out

    def test_literal_fails(self):
        code, doc = run_json("verify", "--variant", "literal")
        assert code == 1
        assert doc["results"]["variants"]["literal"]["failing"] == ["C.5", "D1.ii[Y,G]"]

    def test_repaired(self):
        code, doc = run_json("verify", "--variant", "repaired")
        assert code == 0 and doc["results"]["variants"]["repaired"]["all_conditions_pass"]

    def test_looser_never_worse(self):
        assert run("verify", "--abs-tol", "1e-3")[0] == 0

    def test_env_override(self):
        code, doc = run_json("verify", "--variant", "repaired",
                             env={"TRIPLEDETECT_REL_TOL": "1e-8"})
        assert code == 0 and doc["config"]["tolerances"]["rel_tol"] == 1e-8

    def test_bad_tolerances_exit_2(self):
        code, _, err = run("verify", "--abs-tol", "1e-3", "--warn-tol", "1e-6")
        assert code == 2 and "abs_tol" in err

    def test_text_numbers_in_json(self):
        _, text, _ = run("verify")
        _, doc = run_json("verify")
        missing = {x for x in numbers(text) if x not in json_numbers(doc)}
        assert not missing


@pytest.fixture(scope="module")
def doc():
    code, doc = run_json("audit", "--variant", "literal")
    assert code == 0
    return doc


@pytest.fixture(scope="module")
def text():
    code, out, _ = run("dump")
    assert code == 0
    return out


class TestAudit:
    def test_findings(self, doc):
        entries = {e["id"]: e for e in doc["results"]["variants"]["literal"]["entries"]}
        assert entries["STRUCT.G_printed.psi(2).norm"]["measured"] == pytest.approx(0.75)
        assert entries["STRUCT.psi.subvector_overlap[-1/2]"]["verdict"] == "informational"
        ch = entries["STRUCT.channels.overlap[7/2,3/2]"]
        assert ch["verdict"] == "pass" and ch["measured"] <= 1e-10

    def test_always_zero(self):
        assert run("audit", "--variant", "literal")[0] == 0

    def test_byte_stable(self):
        a = run("audit", "--format", "json")[1]
        b = run("audit", "--format", "json")[1]
        assert a == b
        assert json.loads(a)["schema"] == cli.SCHEMA

    def test_text_numbers_in_json(self):
        _, text, _ = run("audit")
        _, doc = run_json("audit")
        assert numbers(text) <= json_numbers(doc)


class TestSolve:
    def test_default(self):
        code, doc = run_json("solve")
        r = doc["results"]
        assert code == 0 and r["feasible"] and r["all_conditions_pass"]
        assert [s["slot"] for s in r["solutions"]] == ["E", "G", "L"]
        assert all("certificates" in s and "freedom_dim" in s for s in r["solutions"])

    def test_printed_ranks(self):
        code, doc = run_json("solve", "--ranks", "5,3,5")
        assert code == 0 and doc["results"]["reproduces_printed_E_I"]

    def test_product(self):
        code, out, err = run("solve", "--psi", "product")
        assert code == 1
        assert "infeasible" in out and "infeasible" in err

    def test_enumerate(self):
        code, doc = run_json("solve", "--enumerate")
        en = doc["results"]["enumeration"]
        assert code == 0 and en["contains_printed_triple"] and en["count"] == 3844

    def test_bad_ranks(self):
        assert run("solve", "--ranks", "1,2")[0] == 2


class TestSimulate:
    def test_exact_only(self):
        code, doc = run_json("simulate", "--trials", "0")
        r = doc["results"]
        assert code == 0 and "sampled" not in r
        rows = {tuple(o["bits"]): o["probability"] for o in r["exact"]["outcomes"]}
        assert rows[(1, 1, 0)] == 0
        assert r["outcome_spins"]["110"] == ["5/2"]

    def test_reproducible(self):
        a = run("simulate", "--trials", "1000000", "--seed", "42", "--format", "json")[1]
        b = run("simulate", "--trials", "1000000", "--seed", "42", "--format", "json")[1]
        assert a == b
        assert json.loads(a)["results"]["total_variation"] < 0.005

    def test_text(self):
        code, out, _ = run("simulate", "--trials", "100")
        assert code == 0 and "(1,1,0)" in out and "no inference" in out

    def test_negative_trials(self):
        assert run("simulate", "--trials", "-1")[0] == 2


class TestDump:
    def test_entry(self, text):
        assert "Psi[psi1⊗|7/2>] = -1/32  # -0.03125 | printed state" in text.splitlines()

    def test_round_trip_text(self, text):
        assert cli.render(cli.parse_dump(text), "text") == text

    def test_round_trip_json(self):
        out = run("dump", "--format", "json")[1]
        assert cli.render(cli.parse_dump(out), "json") == out

    def test_certificate_block(self, text):
        _, entries = dump.parse_text(text)
        names = [e["name"] for e in entries]
        assert any(n.startswith("G_I.repaired[") for n in names)
        cert = dump.lookup(entries, "G_I.repaired.certificate.detector_residual")
        assert cert["value"] <= 1e-10
        assert dump.lookup(entries, "G_I.repaired.certificate.incompatible_completion")["exact"] == "true"

    def test_literal_has_no_repaired_block(self):
        out = run("dump", "--variant", "literal")[1]
        assert "G_I.repaired" not in out

    def test_exact_strings(self, text):
        _, entries = dump.parse_text(text)
        e = dump.lookup(entries, "s[|3/2>]")
        assert e["exact"] == "sqrt(42)/16"

    def test_output_file(self, tmp_path):
        path = tmp_path / "dump.txt"
        assert run("dump", "--output", str(path))[0] == 0
        assert path.read_text(encoding="utf-8").startswith("# schema: ")

    def test_unwritable_output(self, tmp_path):
        assert run("dump", "--output", str(tmp_path / "missing" / "x.txt"))[0] == 2

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            dump.parse_text("not a dump line\n")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tripledetect", "verify", "--variant", "literal"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "C.5" in proc.stdout


def test_usage_error():
    assert run("nonsense")[0] == 2
