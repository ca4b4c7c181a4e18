import json

import numpy as np
import pytest

from qsplab import __version__
from qsplab.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, ConfigError, config_hash, main, parse_values
from qsplab.runtime import chunk_sizes, chunk_streams, thread_count

WIRE = {
    "vertices": [{"id": 0, "role": "input"}, {"id": 1, "role": "output"}],
    "edges": [[0, 1]],
    "schedule": [{"vertex": 0, "theta": 0.0}],
    "outputs": [1],
}


def read_csv(path):
    lines = path.read_text().splitlines()
    meta = dict(line[2:].split(": ", 1) for line in lines if line.startswith("# "))
    body = [line for line in lines if not line.startswith("# ")]
    return meta, body


@pytest.mark.parametrize(
    "text,expected",
    [
        ("0,0.5,1", [0.0, 0.5, 1.0]),
        ("0.5..2", [0.5, 1.0, 1.5, 2.0]),
        ("1..2:0.25", [1.0, 1.25, 1.5, 1.75, 2.0]),
        ("log:0.01:1:3", [0.01, 0.1, 1.0]),
        (2, [2.0]),
    ],
)
def test_parse_values(text, expected):
    assert np.allclose(parse_values(text), expected)


@pytest.mark.parametrize("text", ["a,b", "2..1", "", "log:1:2"])
def test_parse_values_rejects(text):
    with pytest.raises(ConfigError):
        parse_values(text)


def test_config_hash_ignores_output_dir():
    a = {"experiment": "x", "seed": 1, "output_dir": "a"}
    b = {"experiment": "x", "seed": 1, "output_dir": "b"}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "seed": 2})


def test_init_fidelity_output(tmp_path):
    rc = main(["init-fidelity", "--n-bar", "0,0.5", "--alpha", "1,2", "--output-dir", str(tmp_path), "--seed", "4"])
    assert rc == EXIT_OK
    meta, body = read_csv(tmp_path / "init-fidelity.csv")
    assert meta["version"] == __version__ and meta["seed"] == "4" and meta["experiment"] == "init-fidelity"
    assert body[0].startswith("n_bar,alpha,cutoff,x_e,infidelity_sim,infidelity_analytic,abs_diff")
    assert len(body) == 5
    for row in body[1:]:
        assert float(row.split(",")[6]) <= 1e-4
    side = json.loads((tmp_path / "init-fidelity.json").read_text())
    assert side["metadata"]["config_hash"] == meta["config_hash"]


def test_floats_round_trip(tmp_path):
    main(["dephasing-bench", "--kt-grid", "log:0.01:2:4", "--output-dir", str(tmp_path)])
    _, body = read_csv(tmp_path / "dephasing-bench.csv")
    assert body[0] == "kappa_t,f_avg_cs,f_avg_qsp,quad_error"
    kt = float(body[2].split(",")[0])
    assert kt == np.geomspace(0.01, 2, 4)[1]
    side = json.loads((tmp_path / "dephasing-bench.json").read_text())
    assert side["results"]["alpha"] == 2.0 and side["results"]["cutoff"] == 60


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "params": {"n_bar": 1.0, "tol": 0.02}}))
    out = tmp_path / "o"
    assert main(["truncation-study", "--config", str(cfg), "--n-bar", "0.5", "--output-dir", str(out)]) == EXIT_OK
    side = json.loads((out / "truncation-study.json").read_text())
    assert side["config"]["n_bar"] == 0.5
    assert side["config"]["tol"] == 0.02
    assert side["config"]["seed"] == 5
    assert side["results"]["lambda"] == 12.0 and side["results"]["r_max"] == 30


def test_state_block_in_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"state": {"n_bar": 0.5, "alpha_re": 2.0, "alpha_im": 0.0}, "params": {"shots": 50}}))
    rc = main(["homodyne-sample", "--config", str(cfg), "--backend", "dense", "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    _, body = read_csv(tmp_path / "homodyne-sample.csv")
    assert body[0] == "shot_id,mode,basis,theta,raw_x,logical_bit,weight"
    assert len(body) == 51


@pytest.mark.parametrize(
    "argv",
    [
        ["threshold-scan", "--drop-level", "1.5"],
        ["truncation-study", "--tol", "-1"],
        ["init-fidelity", "--alpha", "x"],
        ["homodyne-sample", "--basis", "Q"],
        ["mbqc-run"],
    ],
)
def test_invalid_config_exit_code(argv, tmp_path):
    assert main(argv + ["--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_config_field(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"bogus": 1}}))
    assert main(["truncation-study", "--config", str(cfg), "--output-dir", str(tmp_path)]) == EXIT_CONFIG


def test_budget_exit_code(tmp_path):
    pat = dict(WIRE, vertices=[{"id": i} for i in range(3)], edges=[[0, 1], [1, 2]], outputs=[1, 2])
    path = tmp_path / "p.json"
    path.write_text(json.dumps(pat))
    assert main(["mbqc-run", "--pattern", str(path), "--backend", "dense", "--output-dir", str(tmp_path)]) == EXIT_BUDGET


def test_numeric_exit_code(tmp_path):
    rc = main(["init-fidelity", "--alpha", "3", "--n-bar", "0", "--cutoff", "8", "--output-dir", str(tmp_path)])
    assert rc == EXIT_NUMERIC
    assert not (tmp_path / "init-fidelity.csv").exists()


def test_mbqc_run(tmp_path):
    path = tmp_path / "wire.json"
    path.write_text(json.dumps(WIRE))
    rc = main(["mbqc-run", "--pattern", str(path), "--trajectories", "1000", "--output-dir", str(tmp_path)])
    assert rc == EXIT_OK
    side = json.loads((tmp_path / "mbqc-run.json").read_text())
    assert side["results"]["oracle_fidelity"] >= 0.97


def test_reproducible_bodies(tmp_path):
    args = ["homodyne-sample", "--shots", "300", "--seed", "17", "--backend", "trajectory"]
    main(args + ["--output-dir", str(tmp_path / "a")])
    main(args + ["--output-dir", str(tmp_path / "b")])
    a = (tmp_path / "a" / "homodyne-sample.csv").read_bytes()
    b = (tmp_path / "b" / "homodyne-sample.csv").read_bytes()
    assert a == b


def test_thread_count(monkeypatch):
    monkeypatch.setenv("QSPLAB_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("QSPLAB_THREADS", "zero")
    with pytest.raises(ValueError):
        thread_count()


def test_chunking():
    assert chunk_sizes(2500) == [1000, 1000, 500]
    a = [rng.random() for _, rng in chunk_streams(1, 2500)]
    b = [rng.random() for _, rng in chunk_streams(np.random.SeedSequence(1), 2500)]
    assert a == b and len(set(a)) == 3
    with pytest.raises(ValueError):
        chunk_sizes(0)


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "qsplab", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
