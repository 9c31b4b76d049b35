"""End-to-end command-line tests, run in process through main(argv).

Covers artifact layout, byte-for-byte repeatability, seed precedence
(flag > config file > environment > default), exit codes, and the JSON
error channel on stderr.
"""

import json
import xml.etree.ElementTree as ET

import pytest

from hqrl import env
from hqrl.cli import main


def _tiny_config(tmp_path, **extra):
    data = {"n_customers": 4, "n_vehicles": 2, "episodes": 3, "seed": 5,
            "warmstart_max_iters": 10}
    data.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def _gen(tmp_path, label, *argv):
    out = tmp_path / label
    assert main(["gen-instance", *argv, "--out", str(out)]) == 0
    return (out / "instance.json").read_bytes()


def test_gen_instance_matches_library(tmp_path, monkeypatch):
    monkeypatch.delenv("HQRL_SEED", raising=False)
    produced = _gen(tmp_path, "a", "--n", "8", "--k", "2", "--seed", "77")
    direct = tmp_path / "direct.json"
    env.save_instance(env.generate_instance(8, 2, 77), direct)
    assert produced == direct.read_bytes()


def test_seed_precedence(tmp_path, monkeypatch):
    monkeypatch.delenv("HQRL_SEED", raising=False)
    config = _tiny_config(tmp_path)

    def reference(seed):
        path = tmp_path / f"ref{seed}.json"
        env.save_instance(env.generate_instance(4, 2, seed), path)
        return path.read_bytes()

    # flag beats the config file
    assert _gen(tmp_path, "flag", "--config", str(config), "--seed", "9") == reference(9)
    # config file beats the environment
    monkeypatch.setenv("HQRL_SEED", "123")
    assert _gen(tmp_path, "cfg", "--config", str(config)) == reference(5)
    # environment beats the built-in default
    assert _gen(tmp_path, "env", "--n", "4", "--k", "2") == reference(123)
    # nothing set: built-in default seed
    monkeypatch.delenv("HQRL_SEED")
    assert _gen(tmp_path, "default", "--n", "4", "--k", "2") == reference(7)


def test_train_artifacts_and_repeatability(tmp_path, monkeypatch):
    monkeypatch.delenv("HQRL_SEED", raising=False)
    config = _tiny_config(tmp_path)
    before = config.read_bytes()
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert main(["train", "--config", str(config), "--out", str(out1)]) == 0
    assert main(["train", "--config", str(config), "--out", str(out2)]) == 0

    for out in (out1, out2):
        assert (out / "metrics.csv").exists()
        assert (out / "checkpoint.json").exists()
        assert (out / "instance.json").exists()
    assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()
    assert (out1 / "checkpoint.json").read_bytes() == (out2 / "checkpoint.json").read_bytes()
    assert (out1 / "instance.json").read_bytes() == (out2 / "instance.json").read_bytes()
    assert config.read_bytes() == before  # inputs are never rewritten

    lines = (out1 / "metrics.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 3
    ck = json.loads((out1 / "checkpoint.json").read_text())
    assert ck["config"]["n_customers"] == 4
    assert ck["episode_count"] == 3


def test_evaluate_writes_routes_and_svg(tmp_path, monkeypatch):
    monkeypatch.delenv("HQRL_SEED", raising=False)
    config = _tiny_config(tmp_path)
    run = tmp_path / "run"
    assert main(["train", "--config", str(config), "--out", str(run)]) == 0

    evaldir = tmp_path / "eval"
    assert main(["evaluate", "--checkpoint", str(run / "checkpoint.json"),
                 "--instance", str(run / "instance.json"), "--out", str(evaldir)]) == 0
    payload = json.loads((evaldir / "routes.json").read_text())
    served = sorted(c for cities in payload["routes"].values() for c in cities)
    assert served == list(range(4))
    assert payload["normalized_cost"] >= 1.0 - 1e-9
    assert payload["total_cost"] == pytest.approx(
        payload["normalized_cost"] * payload["oracle_cost"])
    ET.fromstring((evaldir / "routes.svg").read_text())  # well-formed XML


def test_finetune_to_new_size(tmp_path, monkeypatch):
    monkeypatch.delenv("HQRL_SEED", raising=False)
    config = _tiny_config(tmp_path)
    run = tmp_path / "run"
    assert main(["train", "--config", str(config), "--out", str(run)]) == 0

    tuned = tmp_path / "tuned"
    assert main(["finetune", "--checkpoint", str(run / "checkpoint.json"),
                 "--n", "6", "--episodes", "2", "--out", str(tuned)]) == 0
    ck = json.loads((tuned / "checkpoint.json").read_text())
    assert ck["config"]["n_customers"] == 6
    assert ck["episode_count"] == 3 + 2
    assert len((tuned / "metrics.csv").read_text().strip().split("\n")) == 1 + 2


def test_plot_draws_one_polyline_per_series(tmp_path, monkeypatch):
    monkeypatch.delenv("HQRL_SEED", raising=False)
    config = _tiny_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["train", "--config", str(config), "--out", str(out1)])
    main(["train", "--config", str(config), "--seed", "6", "--out", str(out2)])

    plots = tmp_path / "plots"
    assert main(["plot", "--metrics", str(out1 / "metrics.csv"),
                 str(out2 / "metrics.csv"), "--out", str(plots)]) == 0
    root = ET.fromstring((plots / "curves.svg").read_text())
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(polylines) == 2


def test_sweep_and_ablate_write_tables(tmp_path, monkeypatch):
    monkeypatch.delenv("HQRL_SEED", raising=False)
    config = _tiny_config(tmp_path, episodes=2)

    sweep = tmp_path / "sweep"
    assert main(["sweep", "--config", str(config), "--sizes", "4,5",
                 "--out", str(sweep)]) == 0
    lines = (sweep / "comparison.csv").read_text().strip().split("\n")
    assert lines[0] == "method,n_customers,normalized_cost,qubits,depth,peak_mem_bytes"
    assert len(lines) == 1 + 2 * 4

    abl = tmp_path / "abl"
    assert main(["ablate", "--config", str(config), "--sizes", "4",
                 "--out", str(abl)]) == 0
    lines = (abl / "ablation.csv").read_text().strip().split("\n")
    assert len(lines) == 1 + 4
    assert [row.split(",")[0] for row in lines[1:]] == [
        "full", "no-warm-start", "no-value-baseline", "no-fine-tune"]


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as err:
        main(["train", "--bogus-flag"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["no-such-command"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


def test_runtime_errors_exit_3_with_json(tmp_path, capsys):
    code = main(["evaluate", "--checkpoint", str(tmp_path / "missing.json"),
                 "--instance", str(tmp_path / "missing2.json"),
                 "--out", str(tmp_path)])
    assert code == 3
    err_lines = capsys.readouterr().err.strip().split("\n")
    payload = json.loads(err_lines[-1])
    assert set(payload) == {"error", "detail"}
    assert payload["error"] == "FileNotFoundError"

    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"learning_rate": 1.0}))
    assert main(["train", "--config", str(config), "--out", str(tmp_path)]) == 3
    payload = json.loads(capsys.readouterr().err.strip().split("\n")[-1])
    assert payload["error"] == "ValueError"
