import os

import pandas as pd
import pytest
from omegaconf import OmegaConf

from adhocsep.errors import ConfigurationError
from adhocsep.utils import read_json
from adhocsep.workflow.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, load_config, run_cli
from adhocsep.workflow.run_experiment import selected_stages
from adhocsep.workflow.stages import ExperimentConfig

FAST_CONFIG = """
duration_s: 1.0
geometry:
  t60_s: [0.2, 0.2]
scenario:
  conditions: [[2, 2]]
  count: 2
"""


@pytest.fixture
def fast_config(tmp_path) -> str:
    path = tmp_path / "fast.yaml"
    path.write_text(FAST_CONFIG)
    return str(path)


def test_default_config_composes() -> None:
    cfg = load_config()
    assert cfg.separation.method == "oracle-irm"
    assert cfg.separation.first_step_masks.kind == "oracle-irm"
    assert list(cfg.scenario.conditions[0]) == [2, 2]
    assert cfg.separation.stft.window_len == 512


def test_gen_scenes_is_deterministic(tmp_path) -> None:
    for name in ("a", "b"):
        argv = ["gen-scenes", "--n", "3", "--k", "2", "--count", "3", "--seed", "7", "--out", str(tmp_path / name)]
        assert run_cli(argv) == EXIT_OK
    files = sorted(os.listdir(tmp_path / "a"))
    assert files == ["n3_k2_0000.json", "n3_k2_0001.json", "n3_k2_0002.json"]
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_usage_errors(tmp_path) -> None:
    assert run_cli([]) == EXIT_USAGE
    assert run_cli(["separate", "--out", str(tmp_path)]) == EXIT_USAGE
    assert run_cli(["separate", "--recordings", "r", "--method", "magic", "--out", "o"]) == EXIT_USAGE
    assert run_cli(["gen-scenes", "--n", "2", "--k", "2", "--count", "1", "--out", str(tmp_path), "--jobs", "0"]) == EXIT_USAGE


def test_missing_inputs_fail(tmp_path) -> None:
    assert run_cli(["render", "--scenes", str(tmp_path / "none"), "--out", str(tmp_path / "rec")]) == EXIT_FAILURE
    assert run_cli(["eval", "--recordings", str(tmp_path), "--separations", str(tmp_path), "--out", "m.csv"]) == EXIT_FAILURE
    assert run_cli(["gen-scenes", "--n", "2", "--k", "2", "--count", "1", "--out", str(tmp_path), "--config", "missing.yaml"]) == EXIT_FAILURE


def test_stages_and_missing_masks(tmp_path, fast_config: str) -> None:
    scenes, recordings = str(tmp_path / "scenes"), str(tmp_path / "recordings")
    separations, results = str(tmp_path / "separations"), str(tmp_path / "results")
    common = ["--config", fast_config]

    assert run_cli(["gen-scenes", "--n", "2", "--k", "2", "--count", "1", "--out", scenes, *common]) == EXIT_OK
    assert run_cli(["render", "--scenes", scenes, "--out", recordings, *common]) == EXIT_OK
    assert os.path.exists(os.path.join(recordings, "n2_k2_0000", "mixture.wav"))
    assert os.path.exists(os.path.join(recordings, "n2_k2_0000", "rirs.wav"))

    missing = str(tmp_path / "nonexistent")
    assert run_cli(["render", "--scenes", scenes, "--corpus", missing, "--out", str(tmp_path / "r2"), *common]) == EXIT_FAILURE
    argv = ["separate", "--recordings", recordings, "--method", "file-masks", "--masks-dir", missing]
    assert run_cli([*argv, "--out", separations, *common]) == EXIT_FAILURE

    empty = tmp_path / "masks"
    empty.mkdir()
    argv = ["separate", "--recordings", recordings, "--method", "file-masks", "--masks-dir", str(empty)]
    assert run_cli([*argv, "--out", separations, *common]) == EXIT_FAILURE
    assert run_cli(["separate", "--recordings", recordings, "--method", "file-masks", "--out", separations]) == EXIT_USAGE

    argv = ["separate", "--recordings", recordings, "--export-masks", "--out", separations]
    assert run_cli([*argv, *common]) == EXIT_OK
    masks = os.path.join(separations, "masks")
    assert sorted(os.listdir(os.path.join(masks, "n2_k2_0000")))[:2] == [
        "node0_first-step.dstnsr",
        "node0_first-step.dstnsr.json",
    ]

    file_run = str(tmp_path / "file_run")
    argv = ["separate", "--recordings", recordings, "--method", "file-masks", "--masks-dir", masks]
    assert run_cli([*argv, "--out", file_run, *common]) == EXIT_OK
    manifest = read_json(os.path.join(file_run, "n2_k2_0000", "manifest.json"))
    assert manifest["method"] == "file-masks"

    metrics = os.path.join(results, "metrics.csv")
    assert run_cli(["eval", "--recordings", recordings, "--separations", separations, "--out", metrics]) == EXIT_OK
    frame = pd.read_csv(metrics)
    assert len(frame) == 2
    assert run_cli(["report", "--metrics", metrics, "--out", results]) == EXIT_OK
    assert list(pd.read_csv(os.path.join(results, "plot_data.csv")).columns) == ["condition", "mean", "err"]

    labelled = os.path.join(results, "file-masks-mn", "metrics.csv")
    argv = ["eval", "--recordings", recordings, "--separations", file_run, "--label", "file-masks-mn"]
    assert run_cli([*argv, "--out", labelled]) == EXIT_OK
    assert set(pd.read_csv(labelled)["method"]) == {"file-masks-mn"}

    joint = os.path.join(results, "joint")
    assert run_cli(["report", "--metrics", results, metrics, "--out", joint]) == EXIT_OK
    summary = pd.read_csv(os.path.join(joint, "summary.csv"))
    assert sorted(summary["method"]) == ["file-masks-mn", "oracle-irm"]
    assert list(summary["count"]) == [2, 2]
    assert run_cli(["report", "--metrics", str(empty), "--out", joint]) == EXIT_FAILURE


def test_all(tmp_path, fast_config: str) -> None:
    out = str(tmp_path / "run")
    assert run_cli(["all", "--config", fast_config, "--out", out, "--jobs", "2"]) == EXIT_OK
    summary = pd.read_csv(os.path.join(out, "results", "oracle-irm", "summary.csv"))
    assert summary.loc[0, "count"] == 4
    assert summary.loc[0, "mean_delta_db"] > 0
    experiment = read_json(os.path.join(out, "experiment.json"))
    assert "jobs" not in experiment["config"]
    assert "output_dir" not in experiment["config"]
    assert len(experiment["config_hash"]) == 32


def test_jobs_do_not_change_artifacts(tmp_path, fast_config: str) -> None:
    artifacts = {}
    for jobs in (1, 2):
        out = tmp_path / f"jobs{jobs}"
        assert run_cli(["all", "--config", fast_config, "--out", str(out), "--jobs", str(jobs)]) == EXIT_OK
        # wall times are the only output allowed to differ
        artifacts[jobs] = {
            str(p.relative_to(out)): p.read_bytes()
            for p in sorted(out.rglob("*"))
            if p.is_file() and p.name != "timings.json"
        }
    assert sorted(artifacts[1]) == sorted(artifacts[2])
    assert any(name.endswith("summary.csv") for name in artifacts[1])
    for name, content in artifacts[1].items():
        assert artifacts[2][name] == content, name


def test_run_name_labels_the_artifacts() -> None:
    cfg = load_config()
    config = ExperimentConfig.from_config(cfg)
    assert config.run_name is None and not config.export_masks
    assert config.results_dir == os.path.join(cfg.output_dir, "results", "oracle-irm")

    cfg.run_name = "file-masks-sn"
    cfg.export_masks = True
    config = ExperimentConfig.from_config(cfg)
    assert config.label == "file-masks-sn"
    assert config.export_masks
    assert config.separations_dir == os.path.join(cfg.output_dir, "separations", "file-masks-sn")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(conditions=((2, 2),), count=1, run_name=os.path.join("a", "b"))


def test_stage_lists() -> None:
    assert selected_stages("all") == ["all"]
    assert selected_stages(OmegaConf.create(["separate", "eval", "report"])) == ["separate", "eval", "report"]
    with pytest.raises(ConfigurationError):
        selected_stages(OmegaConf.create(["separate", "plot"]))
