import json

import pandas as pd
import pytest

from app.main import main

TINY_CONFIG = """
schema_version = 1
seed = 1

[dataset.synthetic]
n_classes = 3
clips_per_class = 12
duration_s = 0.25
sample_rate = 4000

[augmentation]
enabled = {augment}

[representation]
kind = "stft"
n_fft = 256
hop = 64

[render]
height = 16
width = 16

[model]
stem_width = 4
widths = [4]

[training]
folds = 2
epochs_max = 3
patience = 1
batch_size = 8

[attacks]
suite = ["fgsm", "bim_b"]
max_items = 4

[attacks.budget]
fgsm_epsilons = [0.01, 0.1]
bim_epsilons = [0.02, 0.05, 0.1]
bim_iterations = 3
"""


def write_config(tmp_path, augment: bool = False, name: str = "exp.toml"):
    path = tmp_path / name
    path.write_text(TINY_CONFIG.format(augment="true" if augment else "false"), encoding="utf-8")
    return str(path)


# ============ Exit codes ============

def test_usage_errors_exit_1():
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["train"]) == 1


def test_missing_config_exits_1(tmp_path):
    assert main(["prepare", "--config", str(tmp_path / "absent.toml")]) == 1


def test_invalid_config_exits_1(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('[representation]\nkind = "stft"\nwindow = "triangle"\n', encoding="utf-8")
    assert main(["prepare", "--config", str(path)]) == 1


def test_report_without_out_exits_1():
    assert main(["report"]) == 1


def test_report_without_reports_exits_2(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 2


def test_train_before_prepare_exits_2(tmp_path):
    assert main(["train", "--config", write_config(tmp_path), "--out", str(tmp_path / "run")]) == 2


def test_bad_worker_count_exits_1(tmp_path):
    assert main(["prepare", "--config", write_config(tmp_path), "--out", str(tmp_path / "run"), "--workers", "-2"]) == 1


# ============ End to end ============

@pytest.mark.slow
def test_prepare_train_attack_report(tmp_path):
    config = write_config(tmp_path)
    run = tmp_path / "run"

    assert main(["prepare", "--config", config, "--out", str(run)]) == 0
    prepared = json.loads((run / "prepare_summary.json").read_text(encoding="utf-8"))
    assert prepared["entries"] == prepared["clips"] == 36

    # second prepare reuses every cached entry
    assert main(["prepare", "--config", config, "--out", str(run), "--workers", "2"]) == 0
    assert json.loads((run / "prepare_summary.json").read_text(encoding="utf-8"))["reused"] == 36

    assert main(["train", "--config", config, "--out", str(run)]) == 0
    assert (run / "model.ckpt").is_file()
    assert len(pd.read_csv(run / "fold_accuracies.csv")) == 2

    assert main(["attack", "--config", config, "--out", str(run)]) == 0
    report = json.loads((run / "report.json").read_text(encoding="utf-8"))
    assert [summary["attack"] for summary in report["attacks"]] == ["fgsm", "bim_b"]
    bim_summary = report["attacks"][1]
    assert len(bim_summary["curve"]["points"]) == 3
    assert bim_summary["mean_gradient_calls"] == 3.0
    assert report["attacks"][0]["mean_gradient_calls"] == 1.0

    records = [json.loads(line) for line in (run / "results.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(records) == report["n_items"] * (2 + 3)
    assert all(record["gradient_calls"] == 1 for record in records if record["attack"] == "fgsm")

    assert main(["report", "--out", str(run)]) == 0
    summary = pd.read_csv(run / "summary.csv")
    assert len(summary) == 1
    assert list(summary["failed_items"]) == [0]
    assert len(pd.read_csv(run / "summary_rows.csv")) == 2


@pytest.mark.slow
def test_training_is_reproducible(tmp_path):
    config = write_config(tmp_path)
    digests = []
    for name in ("a", "b"):
        run = tmp_path / name
        assert main(["prepare", "--config", config, "--out", str(run)]) == 0
        assert main(["train", "--config", config, "--out", str(run)]) == 0
        digests.append(json.loads((run / "train_summary.json").read_text(encoding="utf-8"))["checkpoint_sha256"])
    assert digests[0] == digests[1]

    assert main(["train", "--config", config, "--out", str(tmp_path / "c"), "--seed", "2"]) == 2


@pytest.mark.slow
def test_pitch_augmentation_multiplies_entries(tmp_path):
    config = write_config(tmp_path, augment=True)
    run = tmp_path / "run"
    assert main(["prepare", "--config", config, "--out", str(run)]) == 0
    prepared = json.loads((run / "prepare_summary.json").read_text(encoding="utf-8"))
    assert prepared["clips"] == 36
    assert prepared["entries"] == 5 * 36


# corpus and split are pinned so runs that differ in --seed share the cache layout and test items
PINNED_CONFIG = (
    TINY_CONFIG.format(augment="false")
    .replace("sample_rate = 4000\n", "sample_rate = 4000\nseed = 7\n")
    .replace("batch_size = 8\n", "batch_size = 8\nseed = 11\n")
)


@pytest.mark.slow
def test_transfer_between_independently_seeded_models(tmp_path):
    path = tmp_path / "transfer.toml"
    path.write_text(PINNED_CONFIG + '\n[transfer]\nattack = "fgsm"\nbudget_index = -1\n', encoding="utf-8")
    config = str(path)
    runs = {seed: tmp_path / f"seed{seed}" for seed in (1, 2)}
    for seed, run in runs.items():
        assert main(["prepare", "--config", config, "--out", str(run), "--seed", str(seed)]) == 0
        assert main(["train", "--config", config, "--out", str(run), "--seed", str(seed)]) == 0

    checkpoints = [str(run / "model.ckpt") for run in runs.values()]
    assert main(["transfer", "--config", config, "--out", str(runs[1])] + [
        arg for checkpoint in checkpoints for arg in ("--checkpoint", checkpoint)
    ]) == 0

    matrix = json.loads((runs[1] / "transfer.json").read_text(encoding="utf-8"))
    assert matrix["attack"] == "fgsm"
    assert len(matrix["model_ids"]) == 2
    assert [matrix["values"][i][i] for i in range(2)] == [1.0, 1.0]
    assert matrix["baseline"] is not None
    assert all(0.0 <= value <= 1.0 for row in matrix["baseline"] for value in row)
    assert len(pd.read_csv(runs[1] / "transfer.csv")) == 2

    assert main(["transfer", "--config", config, "--out", str(runs[1]), "--checkpoint", checkpoints[0]]) == 1


@pytest.mark.slow
def test_sweep_skips_failing_cells(tmp_path, capsys):
    # n_fft = 2048 exceeds the 1000-sample clips, so that cell fails during prepare
    path = tmp_path / "sweep.toml"
    path.write_text(PINNED_CONFIG + '\n[sweep]\nparameter = "n_fft"\nvalues = [256, 2048]\n', encoding="utf-8")
    out = tmp_path / "sweep"

    assert main(["sweep", "--config", str(path), "--out", str(out)]) == 0
    assert "Sweep cell n_fft=2048 skipped" in capsys.readouterr().err

    summary = pd.read_csv(out / "summary.csv")
    assert list(summary["run"]) == ["n_fft=256"]
    assert "n_fft=256" in summary["setting"][0]
    assert list(summary["failed_items"]) == [0]
    assert sorted(pd.read_csv(out / "summary_rows.csv")["attack"]) == ["bim_b", "fgsm"]


def test_sweep_with_only_failing_cells_exits_2(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text(PINNED_CONFIG + '\n[sweep]\nparameter = "n_fft"\nvalues = [2048]\n', encoding="utf-8")
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "sweep")]) == 2
