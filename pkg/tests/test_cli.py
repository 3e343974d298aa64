import csv
import io
import json
import os
import subprocess
import sys
import time

import pytest

from artifact import cli
from artifact.delta_method import delta_corollary


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- config


def test_parse_config():
    cfg = cli.parse_config("""
        # budgets
        seed = 7
        max-tuples = 1e4   # trailing comment
        record_runtime = off
    """)
    assert cfg == {"seed": 7, "max_tuples": 10000, "record_runtime": False}


@pytest.mark.parametrize("text", ["nonsense", "colour = blue", "seed = x", "record_runtime = maybe"])
def test_parse_config_errors(text):
    with pytest.raises(cli.ConfigError):
        cli.parse_config(text)


def test_config_file_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    code, _, err = _run(["verify", "exponents", "--config", str(bad)], capsys)
    assert code == 2 and "unknown key" in err
    code, _, _ = _run(["verify", "exponents", "--config", str(tmp_path / "missing.cfg")], capsys)
    assert code == 2
    code, _, _ = _run(["verify", "exponents", "--set", "jobs=0"], capsys)
    assert code == 2
    code, _, _ = _run(["verify", "exponents", "--set", "nokey"], capsys)
    assert code == 2


def test_overrides_beat_file(tmp_path):
    f = tmp_path / "a.cfg"
    f.write_text("seed = 3\njobs = 2\n")
    cfg = cli.load_config(str(f), {"seed": 9, "jobs": None})
    assert cfg["seed"] == 9 and cfg["jobs"] == 2


def test_unknown_suite():
    with pytest.raises(cli.ConfigError):
        cli.run_suite("nosuch")
    proc = subprocess.run([sys.executable, "-m", "artifact", "verify", "nosuch"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "invalid choice" in proc.stderr


# ---------------------------------------------------------------- verify


def test_exponents_suite(capsys):
    t = time.perf_counter()
    code, out, err = _run(["verify", "exponents"], capsys)
    assert time.perf_counter() - t < 1.0
    assert code == 0
    doc = json.loads(out)
    assert doc["suite"] == "exponents"
    assert doc["summary"]["failed"] == 0
    assert doc["summary"]["passed"] == doc["summary"]["total"] == len(doc["cases"])
    for c in doc["cases"]:
        assert set(c) >= {"name", "params", "observed", "expected", "tolerance", "pass", "runtime_ms"}
        assert isinstance(c["runtime_ms"], int)
    assert "PASS" in err


def test_report_is_deterministic(capsys):
    argv = ["verify", "kloosterman", "--seed", "5", "--set", "record_runtime=false"]
    code1, out1, _ = _run(argv, capsys)
    code2, out2, _ = _run(argv, capsys)
    assert code1 == code2 == 0
    assert out1 == out2
    assert all(c["runtime_ms"] == 0 for c in json.loads(out1)["cases"])


def test_seed_changes_random_cases():
    a = cli.run_suite("kloosterman", cli.load_config(overrides={"seed": 1, "record_runtime": False}))
    b = cli.run_suite("kloosterman", cli.load_config(overrides={"seed": 2, "record_runtime": False}))
    assert a.ok and b.ok
    assert a.to_json() != b.to_json()


def test_jobs_keep_sorted_order():
    base = dict(record_runtime=False)
    one = cli.run_suite("gamma-bessel", cli.load_config(overrides={**base, "jobs": 1}))
    four = cli.run_suite("gamma-bessel", cli.load_config(overrides={**base, "jobs": 4}))
    names = [c.name for c in one.cases]
    assert names == sorted(names)
    assert one.to_json() == four.to_json()


def test_summary_counts():
    rep = cli.VerificationReport("x", [
        cli.CaseResult("a", {}, 1, 1, 0, "pass", 3),
        cli.CaseResult("b", {}, 2, 1, 0, "fail", 3),
        cli.CaseResult("c", {}, None, None, 0, "skipped", 0),
    ])
    assert rep.summary == {"passed": 1, "failed": 1, "skipped": 1, "total": 3}
    assert not rep.ok
    assert json.loads(rep.to_json())["cases"][1]["pass"] is False


def test_budget_exceeded_is_skipped_not_failed():
    cfg = cli.load_config(overrides={"max_quad_evals": 10, "record_runtime": False})
    rep = cli.run_suite("voronoi-gl2", cfg)
    assert rep.cases and all(c.status == "skipped" for c in rep.cases)
    assert rep.ok


def test_case_errors_become_failures():
    def boom(ctx):
        raise ZeroDivisionError("bad")
    res = cli._run_case(cli.Case("boom", {}, boom), cli.Context(cli.load_config()))
    assert res.status == "fail" and "bad" in str(res.observed)


def test_report_files(tmp_path, capsys):
    path = tmp_path / "out" / "report.json"
    code, out, _ = _run(["verify", "exponents", "--report", str(path)], capsys)
    assert code == 0
    assert json.loads(path.read_text()) == json.loads(out)
    rows = list(csv.DictReader(io.StringIO((tmp_path / "out" / "report.csv").read_text())))
    assert len(rows) == len(json.loads(out)["cases"])
    png = (tmp_path / "out" / "report.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


# ---------------------------------------------------------------- audit-delta


def _audit_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_audit_delta_zero_sums_to_normaliser(tmp_path, capsys):
    out = tmp_path / "a.csv"
    code, _, _ = _run(["audit-delta", "--n", "0", "--q", "1", "--C", "20", "--out", str(out)], capsys)
    assert code == 0
    rows = _audit_rows(out.read_text())
    total = sum(float(r["term"]) for r in rows)
    assert total == pytest.approx(delta_corollary(0, 1, 20).normaliser, rel=1e-12)


def test_audit_delta_nonzero_sums_to_zero(capsys):
    code, out, _ = _run(["audit-delta", "--n", "7", "--C", "30"], capsys)
    assert code == 0
    assert abs(sum(float(r["term"]) for r in _audit_rows(out))) <= 1e-9


def test_audit_delta_header_is_stable(capsys):
    _, a, _ = _run(["audit-delta", "--n", "3", "--q", "2", "--C", "20"], capsys)
    _, b, _ = _run(["audit-delta", "--n", "3", "--q", "2", "--C", "20"], capsys)
    assert a == b
    assert a.splitlines()[0] == "c,alpha_sum,h,term"


def test_audit_delta_rejects_bad_input(capsys):
    code, _, _ = _run(["audit-delta", "--n", "0", "--C", "1"], capsys)
    assert code == 2


# ---------------------------------------------------------------- build-cache


def test_build_cache(tmp_path, capsys):
    code, _, _ = _run(["build-cache", "10", "--dir", str(tmp_path)], capsys)
    assert code == 0
    (path,) = [p for p in tmp_path.iterdir()]
    lines = path.read_text().splitlines()
    assert len(lines) == 10
    assert lines[1] == "2,-24"
    first = path.read_bytes()
    os.remove(path)
    cli.main(["build-cache", "10", "--dir", str(tmp_path)])
    assert path.read_bytes() == first


def test_build_cache_smaller_is_noop(tmp_path):
    path, rebuilt = cli.build_cache(20, str(tmp_path))
    assert rebuilt
    before = os.stat(path).st_mtime_ns, open(path, "rb").read()
    path2, rebuilt = cli.build_cache(10, str(tmp_path))
    assert path2 == path and not rebuilt
    assert (os.stat(path).st_mtime_ns, open(path, "rb").read()) == before
    _, rebuilt = cli.build_cache(30, str(tmp_path))
    assert rebuilt and len(open(path).read().splitlines()) == 30


# ---------------------------------------------------------------- small commands


def test_kloosterman_command(capsys):
    code, out, _ = _run(["kloosterman", "1", "1", "5"], capsys)
    assert code == 0
    doc = json.loads(out)
    # x + 1/x mod 5 takes 2, 0, 0, 3, so S(1,1;5) = 2 + 2 cos(4 pi/5) = (3 - sqrt 5)/2
    assert doc["value"][0] == pytest.approx((3 - 5 ** 0.5) / 2, abs=1e-12)
    assert doc["value"][1] == pytest.approx(0, abs=1e-12)


def test_exponents_trace(capsys):
    code, out, _ = _run(["exponents", "trace"], capsys)
    assert code == 0
    assert "eta_max 67/136" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "artifact", "kloosterman", "1", "1", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == [1.0, 0.0]
