"""Command line behavior: artifacts, manifests, determinism, exit codes."""

import csv
import json
from pathlib import Path

import pytest

from leocollab.cli import (
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_OK,
    EXIT_VERIFY,
    main,
)

SMALL_YAML = """\
constellation:
  num_planes: 3
  sats_per_plane: 3
tasks:
  n_remote_sensing: 2
  n_computing: 1
training:
  epochs: 3
  episodes_per_epoch: 2
  hidden: 8
  embed: 4
  mix_embed: 2
  min_buffer_episodes: 1
  batch_episodes: 2
  buffer_episodes: 8
optimizer:
  router: dijkstra
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_YAML)
    return str(path)


def _read_csv(path: Path) -> list[dict]:
    with path.open() as fh:
        return list(csv.DictReader(fh))


def test_topology_writes_export_and_manifest(tmp_path, config_file):
    out = tmp_path / "topo"
    assert main(["topology", "--config", config_file, "--out", str(out),
                 "--slot", "0"]) == EXIT_OK
    topo = json.loads((out / "topology.json").read_text())
    assert len(topo["nodes"]) == 9
    assert len(topo["links"]) == 18
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "topology"
    assert manifest["config_hash"] == topo["config_hash"]
    assert manifest["outputs"] == ["topology.json"]
    assert manifest["config"]["constellation"]["num_planes"] == 3
    assert "versions" in manifest


def test_train_then_evaluate_bisect_replay(tmp_path, config_file):
    out = tmp_path / "run"
    assert main(["train", "--config", config_file, "--out", str(out)]) == EXIT_OK
    policy = out / "policy.json"
    assert policy.exists()
    curves = _read_csv(out / "curves.csv")
    assert len(curves) == 3
    assert set(curves[0]) == {
        "epoch", "mean_reward", "mean_t_bar", "mean_loss",
        "epsilon", "delivered_frac", "eval_reward",
    }

    assert main(["evaluate", "--config", config_file, "--out", str(out),
                 "--alphas", "0.5", "--router", "dijkstra"]) == EXIT_OK
    rows = _read_csv(out / "evaluation.csv")
    assert [r["task_id"] for r in rows] == ["0", "1"]
    assert all(float(r["t_total"]) > 0 for r in rows)

    assert main(["bisect", "--config", config_file, "--out", str(out),
                 "--iters", "3", "--router", "dijkstra"]) == EXIT_OK
    brows = _read_csv(out / "bisect.csv")
    assert {r["k"] for r in brows} <= {"1", "2", "3"}
    assert set(brows[0]) == {
        "k", "task_id", "alpha", "t_loc", "t_d_plus_t_lar", "idle_time",
        "objective", "feasible",
    }
    first = [r for r in brows if r["k"] == "1"]
    assert [r["alpha"] for r in first] == ["0.5", "0.5"]
    for r in brows:
        idle = float(r["idle_time"])
        assert idle == pytest.approx(
            max(0.0, float(r["t_loc"]) - float(r["t_d_plus_t_lar"])), abs=1e-12
        )

    assert main(["replay", "--config", config_file, "--out", str(out),
                 "--policy", str(policy)]) == EXIT_OK
    transcript = out / "episode.jsonl"
    assert transcript.exists()
    assert main(["replay", "--config", config_file, "--out", str(out),
                 "--transcript", str(transcript)]) == EXIT_OK


def test_tampered_transcript_exits_with_verify_code(tmp_path, config_file):
    out = tmp_path / "run"
    assert main(["train", "--config", config_file, "--out", str(out)]) == EXIT_OK
    assert main(["replay", "--config", config_file, "--out", str(out),
                 "--policy", str(out / "policy.json")]) == EXIT_OK
    path = out / "episode.jsonl"
    lines = path.read_text().splitlines()
    terminal = json.loads(lines[-1])
    terminal["reward"] += 1.0
    lines[-1] = json.dumps(terminal)
    path.write_text("\n".join(lines) + "\n")
    assert main(["replay", "--config", config_file, "--out", str(out),
                 "--transcript", str(path)]) == EXIT_VERIFY


def test_bench_grid_file_and_csv(tmp_path, config_file):
    out = tmp_path / "bench"
    grid = tmp_path / "grid.yaml"
    grid.write_text(
        "sweep: computing_capacity\nvalues: [1.0e13]\nseeds: [0]\n"
        "schemes: [small_only, centralized_large]\n"
    )
    assert main(["bench", "--config", config_file, "--out", str(out),
                 "--grid", str(grid)]) == EXIT_OK
    rows = _read_csv(out / "results.csv")
    assert len(rows) == 2
    assert {r["scheme"] for r in rows} == {"small_only", "centralized_large"}


def test_train_reruns_are_byte_identical(tmp_path, config_file):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", config_file, "--out", str(out1)]) == EXIT_OK
    assert main(["train", "--config", config_file, "--out", str(out2)]) == EXIT_OK
    for name in ("curves.csv", "policy.json", "manifest.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_output_dir_env_honored(tmp_path, config_file, monkeypatch):
    target = tmp_path / "from-env"
    monkeypatch.setenv("LEOCOLLAB_OUTPUT_DIR", str(target))
    assert main(["topology", "--config", config_file, "--slot", "0"]) == EXIT_OK
    assert (target / "topology.json").exists()


def test_set_overrides_reach_the_run(tmp_path, config_file):
    out = tmp_path / "o"
    assert main(["topology", "--config", config_file, "--out", str(out),
                 "--set", "constellation.num_planes=4"]) == EXIT_OK
    topo = json.loads((out / "topology.json").read_text())
    assert len(topo["nodes"]) == 12


def test_bad_config_exits_config_code(tmp_path, config_file):
    out = tmp_path / "x"
    assert main(["evaluate", "--config", config_file, "--out", str(out),
                 "--set", "training.lr=-1"]) == EXIT_CONFIG
    assert main(["evaluate", "--config", config_file, "--out", str(out),
                 "--set", "nope.key=1"]) == EXIT_CONFIG


def test_infeasible_bisect_exits_infeasible_code(tmp_path, config_file):
    out = tmp_path / "x"
    assert main(["bisect", "--config", config_file, "--out", str(out),
                 "--router", "dijkstra",
                 "--set", "workload.map_min=0.95"]) == EXIT_INFEASIBLE


def test_missing_policy_file_exits_config_code(tmp_path, config_file):
    out = tmp_path / "x"
    assert main(["evaluate", "--config", config_file, "--out", str(out),
                 "--policy", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_unknown_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["warp"])
    assert exc.value.code == 2


def test_replay_requires_exactly_one_mode(tmp_path, config_file):
    out = tmp_path / "x"
    assert main(["replay", "--config", config_file, "--out", str(out)]) == 2
