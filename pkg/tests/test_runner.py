import subprocess
import sys
import textwrap

import pytest

from fracthartree import runner
from fracthartree.io import read_csv, read_fields, read_json
from fracthartree.runner import ConfigError, compare, load_config, main, parse_config, run


def write_cfg(tmp_path, body, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body))
    return p


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "fracthartree", *map(str, args)],
                          capture_output=True, text=True, env=env)


# -- config validation --------------------------------------------------------------

def test_defaults_are_recorded(tmp_path):
    cfg = parse_config("experiment: illposed\n", output_override=tmp_path)
    echo = cfg.echo()
    assert echo["settings"] == runner.DEFAULTS["illposed"]
    assert echo["grid"] == {"n_points": 8192, "r_max": 64.0}
    assert echo["params"] == {"alpha": 1.5, "sigma": 1.0}


def test_unknown_key_reports_its_line():
    text = "experiment: illposed\nsettings:\n  s: -0.25\n  bogus: 3\n"
    with pytest.raises(ConfigError) as ei:
        parse_config(text, "c.yaml")
    assert ei.value.line == 4
    assert str(ei.value).startswith("c.yaml:4:")


@pytest.mark.parametrize("text, line", [
    ("experiment: nope\n", 1),
    ("experiment: evolve\nparams:\n  alpha: 3.5\n", 2),
    ("experiment: evolve\nsettings:\n  T: ten\n", 3),
    ("experiment: evolve\nsettings:\n  T: 1.0\n  T: 2.0\n", 4),
    ("experiment: evolve\ncolour: red\n", 2),
    ("experiment: evolve\nsettings: [1, 2\n", 2),
])
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert ei.value.line is not None
    assert abs(ei.value.line - line) <= 1


def test_int_promoted_to_float_but_bool_rejected():
    cfg = parse_config("experiment: evolve\nsettings:\n  T: 2\n")
    assert cfg.settings["T"] == 2.0 and isinstance(cfg.settings["T"], float)
    with pytest.raises(ConfigError):
        parse_config("experiment: evolve\nsettings:\n  T: true\n")


def test_cli_config_error_exits_two(tmp_path):
    p = write_cfg(tmp_path, "experiment: selftest\nextra: 1\n")
    res = run_cli("run", p)
    assert res.returncode == 2
    assert f"{p}:2:" in res.stderr
    assert not (tmp_path / "runs").exists()


def test_missing_config_exits_two(tmp_path):
    assert main(["run", str(tmp_path / "absent.yaml")]) == 2


# -- runs -----------------------------------------------------------------------------

def test_selftest_cli(tmp_path):
    p = write_cfg(tmp_path, f"experiment: selftest\noutput_dir: {tmp_path / 'st'}\n")
    res = run_cli("run", p)
    assert res.returncode == 0, res.stderr
    m = read_json(tmp_path / "st" / "manifest.json")
    names = [c["name"] for c in m["checks"]]
    assert len(names) == len(set(names)) >= 8
    assert all(c["passed"] for c in m["checks"])
    assert m["status"] == "passed" and m["version"]
    assert m["config"]["experiment"] == "selftest"


def test_output_override(tmp_path):
    p = write_cfg(tmp_path, "experiment: selftest\noutput_dir: elsewhere\n")
    cfg = load_config(p, tmp_path / "override")
    assert cfg.output_dir == tmp_path / "override"


def test_illposed_run_table_and_slopes(tmp_path):
    out = tmp_path / "ip"
    m = run(parse_config("experiment: illposed\n", output_override=out))
    assert m.passed, m.as_dict()
    rows = read_csv(out / "growth.csv")
    assert list(rows[0]) == ["lambda", "norm_phi", "norm_Phi", "ratio", "T"]
    assert len(rows) == 4
    sl = m.results["slopes"]
    assert abs(sl["ratio"] - 0.5) <= 0.1
    assert sorted(p.name for p in out.iterdir()) == ["growth.csv", "manifest.json"]


def test_runs_are_bit_identical(tmp_path):
    cfg = "experiment: transference\nseed: 7\nsettings:\n  n_atoms: 4\n"
    tables = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        run(parse_config(cfg, output_override=out))
        tables.append((out / "transference.csv").read_bytes())
    assert tables[0] == tables[1]


def test_worker_pool_matches_serial(tmp_path, monkeypatch):
    cfg = "experiment: bilinear\nsettings:\n  lams: [8, 16, 32]\n"
    out = {}
    for n in ("1", "3"):
        monkeypatch.setenv(runner.WORKERS_ENV, n)
        d = tmp_path / f"w{n}"
        run(parse_config(cfg, output_override=d))
        out[n] = (d / "bilinear.csv").read_bytes()
    assert out["1"] == out["3"]
    head = out["1"].decode().splitlines()[0].split(",")
    assert head[-3:] == ["lhs", "rhs", "ratio"]


def test_workers_env_parsing(monkeypatch):
    monkeypatch.setenv(runner.WORKERS_ENV, "4")
    assert runner.workers() == 4
    monkeypatch.setenv(runner.WORKERS_ENV, "lots")
    assert runner.workers() == 1
    monkeypatch.delenv(runner.WORKERS_ENV)
    assert runner.workers() == 1


def test_numerical_guard_writes_partial_manifest(tmp_path):
    # 2 lam beyond half the resolvable band trips the aliasing guard
    cfg = ("experiment: illposed\ngrid: {n_points: 1024, r_max: 64.0}\n"
           "settings:\n  lams: [4, 8, 16, 64]\n")
    p = write_cfg(tmp_path, cfg + f"output_dir: {tmp_path / 'bad'}\n")
    assert main(["run", str(p)]) == 1
    m = read_json(tmp_path / "bad" / "manifest.json")
    assert m["status"] == "failed"
    assert "aliasing" in m["error"]


def test_evolve_fields_and_step_refinement(tmp_path):
    out = tmp_path / "ev"
    cfg = "experiment: evolve\nsettings:\n  T: 5.0\n"
    m = run(parse_config(cfg, output_override=out))
    assert m.passed, m.as_dict()
    ratio = m.results["dt"]["energy_drift"] / m.results["dt_half"]["energy_drift"]
    assert 3 <= ratio <= 5
    states = read_fields(out / "states.rfld")
    assert states[0].grid.n_points == m.config["grid"]["n_points"]
    diag = read_csv(out / "diagnostics.csv")
    assert list(diag[0]) == ["t", "mass", "energy"]


# -- compare --------------------------------------------------------------------------

def test_compare_identical_is_empty(tmp_path):
    out = tmp_path / "a"
    run(parse_config("experiment: selftest\n", output_override=out))
    assert compare(out / "manifest.json", out / "manifest.json") == {}
    assert main(["compare", str(out / "manifest.json"), str(out / "manifest.json")]) == 0


def test_compare_rejects_mismatched_experiments(tmp_path):
    a = {"config": {"experiment": "evolve"}, "results": {}, "checks": []}
    b = {"config": {"experiment": "picard"}, "results": {}, "checks": []}
    with pytest.raises(ValueError):
        compare(a, b)


def test_compare_flags_by_field_tolerance():
    a = {"config": {"experiment": "x"}, "results": {"slope": 1.0, "v": [1.0, 2.0]},
         "checks": [{"name": "c", "value": 3.0}]}
    b = {"config": {"experiment": "x"}, "results": {"slope": 1.01, "v": [1.0, 2.0]},
         "checks": [{"name": "c", "value": 3.0}]}
    d = compare(a, b, rtol=1e-3)
    assert list(d) == ["results.slope"] and d["results.slope"]["flagged"]
    assert abs(d["results.slope"]["ratio"] - 1 / 1.01) < 1e-15
    d = compare(a, b, rtol=1e-3, tolerances={"results.slope": 0.05})
    assert not d["results.slope"]["flagged"]


def test_compare_two_resolutions_of_illposed(tmp_path):
    runs = []
    for n, r in ((8192, 64.0), (16384, 128.0)):
        cfg = f"experiment: illposed\ngrid: {{n_points: {n}, r_max: {r}}}\n"
        out = tmp_path / f"g{n}"
        run(parse_config(cfg, output_override=out))
        runs.append(out / "manifest.json")
    tol = {f"results.slopes.{k}": 0.02 for k in ("norm_phi", "norm_Phi", "ratio")}
    d = compare(*runs, rtol=1.0, tolerances=tol)
    assert not any(v["flagged"] for k, v in d.items() if k.startswith("results.slopes"))
