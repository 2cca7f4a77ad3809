from __future__ import annotations

import io
import json
import subprocess
import sys

import pytest

from bayesinterp.cli import run_command
from bayesinterp.specfile import bundled_path


def run(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    code = run_command(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def perturbed_spec(tmp_path):
    doc = json.loads(bundled_path("three_state.spec").read_text())
    doc["interpretation"]["psi"]["y1"] = {"h1": "3/4", "h2": "1/4"}
    path = tmp_path / "perturbed.spec"
    path.write_text(json.dumps(doc))
    return str(path)


def test_check_consistent():
    code, out, _ = run("check", "three_state.spec")
    assert code == 0
    assert "verdict:              consistent" in out
    assert "y1: s2" in out and "y2: s1" in out


def test_check_inconsistent(perturbed_spec):
    code, out, _ = run("check", perturbed_spec, "--json")
    assert code == 1
    doc = json.loads(out)
    assert doc["verdict"] == "inconsistent"
    assert doc["violations"][0]["y"] == "y0" and doc["violations"][0]["rhs"] == "3/8"


def test_check_full_support_fails():
    assert run("check", "full_support_2state.spec")[0] == 1


def test_check_conjugate():
    assert run("check", "--conjugate", "three_state_deterministic.spec")[0] == 0
    code, _, err = run("check", "--conjugate", "three_state.spec")
    assert code == 2 and "deterministic" in err


def test_check_windowed_bundles():
    assert run("check", "difference_window5.spec")[0] == 0
    assert run("check", "counting_pullback_window3.spec")[0] == 0


def test_missing_interpretation_needs_flag(tmp_path):
    doc = json.loads(bundled_path("three_state.spec").read_text())
    interp = {"version": 1, "spaces": [], "interpretation": doc.pop("interpretation")}
    machine_only, interp_file = tmp_path / "m.spec", tmp_path / "i.spec"
    machine_only.write_text(json.dumps(doc))
    interp_file.write_text(json.dumps(interp))
    code, _, err = run("check", str(machine_only))
    assert code == 2 and "--interpretation" in err
    assert run("check", str(machine_only), "--interpretation", str(interp_file))[0] == 0


def test_filter_flags_impossible_input():
    code, out, _ = run("filter", "three_state.spec", "--inputs", "s1,s2")
    assert code == 0
    lines = out.splitlines()
    assert "h1:1" in lines[2] and "subjectively impossible" not in lines[2]
    assert lines[3].endswith("subjectively impossible input")
    code, out, _ = run("filter", "three_state.spec", "--inputs", "s1,s2", "--json")
    rows = json.loads(out)["trajectory"]
    assert rows[1]["belief"] == {"h1": "1"}
    assert [r["impossible"] for r in rows] == [False, False, True]


def test_filter_unknown_input():
    assert run("filter", "three_state.spec", "--inputs", "s9")[0] == 2


def test_propagate_success_and_conflict():
    code, out, _ = run("propagate", "three_state_deterministic.spec", "--seed", "y0=uniform", "--json")
    assert code == 0
    assert json.loads(out)["psi"]["y1"] == {"h1": "1"}
    code, out, _ = run("propagate", "three_state.spec", "--seed", "y0=uniform", "--seed", "y1=h2")
    assert code == 1 and "conflict at y1" in out
    assert run("propagate", "three_state.spec", "--seed", "y0=h1:1/3")[0] == 2


def test_verify_filtering():
    code, out, _ = run("verify-filtering", "three_state_deterministic.spec", "--depth", "3", "--json")
    assert code == 0
    doc = json.loads(out)
    from_y0 = [s for s in doc["sequences"] if s["y"] == "y0"]
    assert len(from_y0) == 8
    assert sum(s["status"] == "unconstrained" for s in from_y0) == 6
    assert run("verify-filtering", "three_state.spec", "--depth", "2")[0] == 2
    assert run("verify-filtering", "three_state.spec", "--depth", "2", "--informational")[0] == 0
    assert run("verify-filtering", "three_state_deterministic.spec", "--depth", "9")[0] == 2


def test_verify_filtering_perturbed(tmp_path):
    doc = json.loads(bundled_path("three_state_deterministic.spec").read_text())
    doc["interpretation"]["psi"]["y1"] = {"h1": "3/4", "h2": "1/4"}
    path = tmp_path / "p.spec"
    path.write_text(json.dumps(doc))
    assert run("verify-filtering", str(path), "--depth", "2")[0] == 1


def test_simulate_is_reproducible():
    first = run("simulate", "three_state.spec", "--steps", "20", "--seed", "3", "--json")[1]
    second = run("simulate", "three_state.spec", "--steps", "20", "--seed", "3", "--json")[1]
    assert first == second
    lines = [json.loads(line) for line in first.splitlines()]
    assert lines[0]["generator"] == "numpy.random.PCG64"
    assert [r["step"] for r in lines[1:]] == list(range(20))
    assert set(lines[1]) == {"step", "x", "s", "y"}


def test_simulate_needs_environment():
    assert run("simulate", "full_support_2state.spec", "--steps", "2", "--seed", "0")[0] == 2


@pytest.mark.parametrize(
    "argv, code",
    [
        (("example", "difference", "--window", "10"), 0),
        (("example", "difference", "--window", "5", "--paper-convention"), 1),
        (("example", "counting", "--window", "4"), 0),
        (("example", "counting", "--window", "4", "--paper-convention"), 1),
        (("example", "pullback", "--window", "3"), 0),
        (("example", "pullback", "--window", "0"), 2),
        (("example", "counting", "--window", "3", "--emit-spec"), 2),
    ],
)
def test_example(argv, code):
    assert run(*argv)[0] == code


def test_axioms_command():
    code, out, _ = run("axioms", "--trials", "3", "--json")
    assert code == 0
    assert all(law["passed"] for law in json.loads(out)["laws"])


@pytest.mark.parametrize(
    "argv",
    [
        ("bogus",),
        ("check",),
        ("check", "three_state.spec", "--frobnicate"),
        ("check", "no_such_file.spec"),
    ],
)
def test_input_errors_exit_2(argv):
    code, _, err = run(*argv)
    assert code == 2 and err.startswith("error:")


def test_malformed_spec_exit_2(tmp_path):
    bad = tmp_path / "bad.spec"
    bad.write_text(bundled_path("three_state.spec").read_text().replace('"1/3"', '"0.33"', 1))
    code, _, err = run("check", str(bad))
    assert code == 2 and "line" in err and "3/4" in err


def test_json_output_is_stable():
    args = ("check", "three_state.spec", "--json")
    assert run(*args)[1] == run(*args)[1]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bayesinterp", "check", "three_state.spec"], capture_output=True, text=True)
    assert proc.returncode == 0 and "consistent" in proc.stdout
