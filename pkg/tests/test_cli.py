import json
from importlib import resources

import jsonschema
import pytest

from langevin_contract.cli import main


def write_config(path, obj):
    path.write_text(json.dumps(obj, indent=1))
    return str(path)


def couple_config(out_dir, n_steps=50, gammas=(4.0,), schemes=("kinetic_em",), h=0.1):
    return {
        "potential": {"name": "quadratic", "m": 1.0, "M": 4.0},
        "schemes": list(schemes),
        "params": {"h": [h], "gamma": list(gammas), "n_steps": n_steps, "seeds": [0]},
        "coupling": {"z0": [[-1.0, -1.0], [0.0, 0.0]], "z0_tilde": [[1.0, 1.0], [0.0, 0.0]]},
        "output": {"dir": str(out_dir)},
    }


def load_schema(name):
    with resources.files("langevin_contract.schemas").joinpath(name).open() as fh:
        return json.load(fh)


def test_couple_smoke_and_schema(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", couple_config(tmp_path / "out"))
    assert main(["couple", "--config", cfg]) == 0
    summary = json.loads((tmp_path / "out" / "couple_summary.json").read_text())
    jsonschema.validate(summary, load_schema("couple_summary.schema.json"))
    run = summary["runs"][0]
    assert run["admissible"] and run["bound_holds"] and not run["diverged"]
    trace = (tmp_path / "out" / run["trace_file"]).read_text().splitlines()
    assert trace[0] == "scheme,h,gamma,seed,k,distance_sq,bound_sq"
    assert len(trace) == 52  # header + n_steps + 1


def test_couple_deterministic_outputs(tmp_path):
    cfg1 = write_config(tmp_path / "c1.json", couple_config(tmp_path / "o1"))
    cfg2 = write_config(tmp_path / "c2.json", couple_config(tmp_path / "o2"))
    assert main(["couple", "--config", cfg1]) == 0
    assert main(["couple", "--config", cfg2]) == 0
    for name in ["couple_summary.json", "couple_kinetic_em_h0.1_g4_s0.csv"]:
        a = (tmp_path / "o1" / name).read_bytes()
        b = (tmp_path / "o2" / name).read_bytes()
        assert a == b, name


def test_couple_zero_steps(tmp_path):
    cfg = write_config(tmp_path / "cfg.json", couple_config(tmp_path / "out", n_steps=0))
    assert main(["couple", "--config", cfg]) == 0
    summary = json.loads((tmp_path / "out" / "couple_summary.json").read_text())
    run = summary["runs"][0]
    trace = (tmp_path / "out" / run["trace_file"]).read_text().splitlines()
    assert len(trace) == 2  # header + single distance row
    assert run["c_empirical"] is None


def test_couple_inadmissible_needs_force(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        couple_config(tmp_path / "out", gammas=(100.0,), h=0.25, n_steps=300),
    )
    assert main(["couple", "--config", cfg]) == 3
    assert main(["couple", "--config", cfg, "--force"]) == 0
    summary = json.loads((tmp_path / "out" / "couple_summary.json").read_text())
    run = summary["runs"][0]
    assert run["diverged"] and run["diverged_at"] is not None and not run["admissible"]


def test_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["couple", "--config", str(bad)]) == 2
    assert main(["couple", "--config", str(tmp_path / "missing.json")]) == 2
    cfg = write_config(tmp_path / "cfg.json", {"potential": {"name": "quadratic", "m": 1, "M": 4}})
    assert main(["couple", "--config", cfg]) == 2  # no schemes
    cfg2 = write_config(
        tmp_path / "cfg2.json",
        {
            "potential": {"name": "quadratic", "m": 1, "M": 4},
            "schemes": ["warp_drive"],
        },
    )
    assert main(["couple", "--config", cfg2]) == 2


def test_certify_check_mode(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        {
            "potential": {"name": "quadratic", "m": 1.0, "M": 4.0},
            "schemes": ["kinetic_em", "baoab"],
            "params": {"h": [0.05], "gamma": [8.0]},
            "output": {"dir": str(tmp_path / "out")},
        },
    )
    assert main(["certify", "--config", cfg]) == 0
    doc = json.loads((tmp_path / "out" / "certificates.json").read_text())
    jsonschema.validate(doc, load_schema("certificates.schema.json"))
    assert all(rep["passed"] and rep["oracle_agrees"] for rep in doc["reports"])


def test_certify_table1_mode(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        {
            "potential": {"name": "quadratic", "m": 1.0, "M": 1.0},
            "schemes": ["bao"],
            "params": {"gamma": [5.0]},
            "certify": {"mode": "table1"},
            "output": {"dir": str(tmp_path / "out")},
        },
    )
    assert main(["certify", "--config", cfg]) == 0
    doc = json.loads((tmp_path / "out" / "certificates.json").read_text())
    jsonschema.validate(doc, load_schema("certificates.schema.json"))
    row = doc["rows"][0]
    import math

    h = row["certified_h_max"]
    eta = math.exp(-5.0 * h)
    assert (1 - eta) / math.sqrt(6.0) <= h <= 2 * (1 - eta) / math.sqrt(6.0)
    assert row["certified_h_max"] >= row["hypothesis_h_max"] > 0
    assert row["certified_rate_at_08h"] >= row["hypothesis_rate_at_08h"] > 0


def test_gaussian_scan_cmd(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        {
            "potential": {"name": "quadratic", "m": 1.0, "M": 4.0},
            "schemes": ["kinetic_em", "bao"],
            "params": {"gamma": [5.0]},
            "scan": {"h_grid": [0.05, 0.08]},
            "output": {"dir": str(tmp_path / "out")},
        },
    )
    assert main(["gaussian-scan", "--config", cfg]) == 0
    lines = (tmp_path / "out" / "gaussian_scan.csv").read_text().splitlines()
    assert lines[0] == "scheme,h,gamma,lambda,radius,contractive,stability_threshold"
    assert len(lines) == 1 + 2 * 2 * 2  # schemes x h x lambdas
    import math

    row = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert row["scheme"] == "kinetic_em" and float(row["lambda"]) == 1.0
    expect = 2.0 / (5.0 + math.sqrt(25.0 - 4.0))
    assert float(row["stability_threshold"]) == pytest.approx(expect, abs=1e-6)


def test_glc_scan_cmd(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        {
            "potential": {"name": "quadratic", "m": 1.0, "M": 1.0},
            "schemes": ["baoab", "ses"],
            "params": {"n_steps": 300},
            "scan": {"gamma_grid": [10.0, 100.0, 1000.0]},
            "output": {"dir": str(tmp_path / "out")},
        },
    )
    assert main(["glc-scan", "--config", cfg]) == 0
    lines = (tmp_path / "out" / "glc_scan.csv").read_text().splitlines()
    assert lines[0] == "scheme,gamma,h,c_theoretical,c_empirical,admissible,deviation"
    assert len(lines) == 1 + 2 * 3
    rows = [dict(zip(lines[0].split(","), ln.split(","))) for ln in lines[1:]]
    baoab = [r for r in rows if r["scheme"] == "baoab"]
    devs = [float(r["deviation"]) for r in baoab]
    assert devs == sorted(devs, reverse=True)  # deviation monotone in gamma


def test_empty_scheme_list_rejected(tmp_path):
    cfg = write_config(
        tmp_path / "cfg.json",
        {
            "potential": {"name": "quadratic", "m": 1.0, "M": 4.0},
            "schemes": [],
            "scan": {"h_grid": [0.1]},
            "params": {"gamma": [4.0]},
        },
    )
    assert main(["gaussian-scan", "--config", cfg]) == 2


def test_worker_env_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("LANGEVIN_CONTRACT_WORKERS", "2")
    cfg = write_config(tmp_path / "cfg.json", couple_config(tmp_path / "o1", gammas=(4.0, 4.5)))
    assert main(["couple", "--config", cfg]) == 0
    monkeypatch.setenv("LANGEVIN_CONTRACT_WORKERS", "1")
    cfg2 = write_config(tmp_path / "cfg2.json", couple_config(tmp_path / "o2", gammas=(4.0, 4.5)))
    assert main(["couple", "--config", cfg2]) == 0
    a = (tmp_path / "o1" / "couple_summary.json").read_text()
    b = (tmp_path / "o2" / "couple_summary.json").read_text()
    assert a == b
