import csv
import json
import math

import pytest

from arwmass.cli import main

RW_MASS = {
    "spacetime": {"kind": "rw-family", "n": 3, "omega": 1.0, "k": 2.0, "a": -0.5},
    "command": "mass",
    "grid": 48,
    "schedule": {"K": 10},
    "seed": 0,
}


def write_config(tmp_path, payload, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def read_rows(path):
    with open(path) as fh:
        comment = fh.readline()
        assert comment.startswith("# config-digest: ")
        digest = comment.split(": ", 1)[1].strip()
        rows = list(csv.DictReader(fh))
    return digest, rows


def test_mass_command_rw_family(tmp_path):
    config = dict(RW_MASS, output={"path": str(tmp_path / "out")})
    code = main([write_config(tmp_path, config)])
    assert code == 0
    digest, rows = read_rows(tmp_path / "out" / "mass.csv")
    assert len(digest) == 64
    assert len(rows) == 11
    m_hat = float(rows[-1]["m_hat"])
    assert m_hat == pytest.approx(4.0, abs=1e-6)
    assert rows[-1]["tcc_passed"] == "true"
    assert rows[-1]["direction"] == "decreasing"


def test_reruns_are_byte_identical(tmp_path):
    config = dict(RW_MASS, output={"path": str(tmp_path / "out")})
    path = write_config(tmp_path, config)
    assert main([path]) == 0
    first = (tmp_path / "out" / "mass.csv").read_bytes()
    assert main([path]) == 0
    assert (tmp_path / "out" / "mass.csv").read_bytes() == first


def test_output_dir_flag_wins(tmp_path):
    config = dict(RW_MASS, command="validate", output={"path": str(tmp_path / "a")})
    path = write_config(tmp_path, config)
    assert main([path, "--output-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "validate.csv").exists()
    assert not (tmp_path / "a").exists()


def test_thread_cap_is_respected(tmp_path, monkeypatch):
    monkeypatch.setenv("ARWMASS_THREADS", "1")
    config = dict(RW_MASS, output={"path": str(tmp_path / "out")})
    assert main([write_config(tmp_path, config)]) == 0

    monkeypatch.setenv("ARWMASS_THREADS", "zero")
    assert main([write_config(tmp_path, config)]) == 1


def test_missing_field_names_the_field(tmp_path, capsys):
    config = {
        "spacetime": {"kind": "custom", "n": 3, "f": "log(-tau)", "a": -0.5},
        "command": "validate",
    }
    assert main([write_config(tmp_path, config)]) == 1
    assert "'omega'" in capsys.readouterr().err


def test_bad_expression_reports_offset(tmp_path, capsys):
    config = {
        "spacetime": {
            "kind": "custom", "n": 3, "omega": 1.0, "f": "log(-tau", "a": -0.5,
        },
        "command": "validate",
    }
    assert main([write_config(tmp_path, config)]) == 1
    assert "at offset" in capsys.readouterr().err


@pytest.mark.parametrize(
    "mutation",
    [
        {"command": "frobnicate"},
        {"spacetime": {"kind": "nope"}},
        {"output": {"format": "xml"}},
    ],
)
def test_config_mistakes_exit_one(tmp_path, mutation, capsys):
    config = dict(RW_MASS)
    config.update(mutation)
    assert main([write_config(tmp_path, config)]) == 1
    assert capsys.readouterr().err.startswith("config error")


def test_missing_and_malformed_files(tmp_path, capsys):
    assert main([str(tmp_path / "absent.json")]) == 1
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main([str(broken)]) == 1


def test_validate_json_output(tmp_path):
    config = {
        "spacetime": {"kind": "rw-family", "n": 3, "omega": 1.0, "k": 1.0, "a": -0.5},
        "command": "validate",
        "output": {"path": str(tmp_path / "out"), "format": "json"},
    }
    assert main([write_config(tmp_path, config)]) == 0
    document = json.loads((tmp_path / "out" / "validate.json").read_text())
    assert document["passed"] is True
    assert len(document["config_digest"]) == 64
    assert document["mass_estimate"] == pytest.approx(1.0, rel=1e-5)


def test_validate_failure_exits_two(tmp_path):
    config = {
        "spacetime": {"kind": "custom", "n": 3, "omega": 1.0, "f": "tau", "a": -0.5},
        "command": "validate",
        "output": {"path": str(tmp_path / "out")},
    }
    assert main([write_config(tmp_path, config)]) == 2
    # the report is still written for inspection
    assert (tmp_path / "out" / "validate.csv").exists()


def test_check_command(tmp_path):
    config = {
        "spacetime": {"kind": "rw-family", "n": 3, "omega": 1.0, "k": 1.0, "a": -0.5},
        "command": "check",
        "grid": 48,
        "events": 40,
        "seed": 3,
        "output": {"path": str(tmp_path / "out")},
    }
    assert main([write_config(tmp_path, config)]) == 0
    _, rows = read_rows(tmp_path / "out" / "check.csv")
    names = {row["check"] for row in rows}
    assert "slab-balance" in names and "einstein-divergence" in names
    assert all(row["passed"] == "true" for row in rows)


def test_imcf_command(tmp_path):
    config = {
        "spacetime": {"kind": "rw-family", "n": 3, "omega": 1.0, "k": 1.0, "a": -0.5},
        "command": "imcf",
        "grid": 48,
        "imcf": {"u0": -0.25, "t_end": 12.0, "max_leaves": 12},
        "output": {"path": str(tmp_path / "out")},
    }
    assert main([write_config(tmp_path, config)]) == 0
    _, rows = read_rows(tmp_path / "out" / "imcf.csv")
    assert 2 <= len(rows) <= 12
    leaves = [float(row["u"]) for row in rows]
    assert all(b > a for a, b in zip(leaves, leaves[1:]))
    assert float(rows[0]["mass_integral"]) == pytest.approx(
        6 * math.pi**2 * (1 + 0.25**2), rel=1e-9
    )


def test_numerical_abort_exits_three(tmp_path, capsys):
    config = {
        "spacetime": {
            "kind": "custom", "n": 3, "omega": 1.0, "f": "log(-tau)",
            "a": -1.0, "psi": "5*tau",
        },
        "command": "imcf",
        "imcf": {"u0": -0.9, "t_end": 10.0},
        "output": {"path": str(tmp_path / "out")},
    }
    assert main([write_config(tmp_path, config)]) == 3
    assert "numerical abort" in capsys.readouterr().err


def test_sads_demo(tmp_path):
    config = {
        "spacetime": {"kind": "sads", "n": 3, "lambda": 0.0, "mass": 1.0},
        "command": "sads-demo",
        "grid": 48,
        "schedule": {"K": 10},
        "output": {"path": str(tmp_path / "out")},
    }
    assert main([write_config(tmp_path, config)]) == 0
    _, rows = read_rows(tmp_path / "out" / "sads-demo.csv")
    assert float(rows[-1]["m_hat"]) == pytest.approx(1.0, abs=1e-5)
    radii = [float(row["r"]) for row in rows]
    assert all(b < a for a, b in zip(radii, radii[1:]))


def test_sads_demo_requires_sads_spacetime(tmp_path, capsys):
    config = dict(RW_MASS, command="sads-demo")
    assert main([write_config(tmp_path, config)]) == 1
    assert "sads" in capsys.readouterr().err
