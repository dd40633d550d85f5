"""
Experiment pipeline behind the CLI: prepare -> train -> attack -> report,
plus transfer and one-axis sweeps
"""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import derive_seed, settings
from app.core.errors import CacheError, CheckpointError, ConfigError, DataError, ToolkitError
from app.models.audio import AudioClip
from app.schemas.attacks import AttackRecord
from app.schemas.experiment import ExperimentConfig
from app.schemas.reports import RobustnessReport
from app.services.attacks.runner import BatchResult, budget_points, run_attack_batch
from app.services.audio_io import augment_clip, load_manifest, load_wav, synth_dataset
from app.services.cache import CacheEntry, SpectrogramCache, entry_key, settings_fingerprint
from app.services.classifier import Classifier, init_model, load_checkpoint, save_checkpoint
from app.services.evaluation import emit_report, parse_report, report_rows, summarize_attack, transfer_matrix
from app.services.oracle import GradientOracle
from app.services.rendering import render_with
from app.services.spectra import extract
from app.services.trainer import LabeledSet, train
from app.utils.tables import JsonLinesWriter, read_jsonl, write_csv, write_json

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.ckpt"


# ============ Helpers ============

def run_dir(config: ExperimentConfig, out: Optional[str | Path] = None) -> Path:
    path = Path(out or config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cache_for(out: Path) -> SpectrogramCache:
    return SpectrogramCache(out / settings.CACHE_DIRNAME)


def corpus_settings(config: ExperimentConfig) -> str:
    """Everything that decides the cache contents"""
    return settings_fingerprint(config.dataset, config.augmentation, config.representation, config.render)


def setting_label(config: ExperimentConfig) -> str:
    """Compact 'key=value' description of the representation settings"""
    fields = config.representation.model_dump(exclude={"kind"}, exclude_none=True)
    return ";".join(f"{key}={value}" for key, value in sorted(fields.items()))


def _load_corpus(config: ExperimentConfig) -> Tuple[List[str], List[Tuple[str, int, int]], List[AudioClip]]:
    """(class names, [(source, label, fold)], clips)"""
    if config.dataset.synthetic is not None:
        manifest, clips = synth_dataset(config.dataset.synthetic, seed=derive_seed(config.seed, "data"))
    else:
        source = config.dataset.manifest
        manifest = load_manifest(source.path, source.audio_root)
        clips = [load_wav(entry.source) for entry in manifest.entries]
    rows = [(entry.source, entry.label, entry.fold) for entry in manifest.entries]
    return manifest.class_names, rows, clips


def load_labeled_set(config: ExperimentConfig, out: Path) -> Tuple[LabeledSet, Dict]:
    """Read the prepared cache and check it matches the config"""
    cache = cache_for(out)
    index = cache.read_index()
    if index.get("settings") != corpus_settings(config):
        raise CacheError(f"cache at {cache.root} was prepared with different settings; re-run `prepare`")

    entries = cache.entries(index)
    intensity_max = config.render.intensity_max
    inputs = np.stack([cache.fetch(entry.key, intensity_max).pixels for entry in entries])
    dataset = LabeledSet(
        inputs=inputs,
        labels=[entry.label for entry in entries],
        folds=[entry.fold for entry in entries],
        origin=[entry.origin for entry in entries],
        class_names=list(index["class_names"]),
        sources=[f"{entry.source}#{entry.variant}" for entry in entries],
    )
    return dataset, index


def _file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ============ prepare ============

def cmd_prepare(config: ExperimentConfig, out: Optional[str | Path] = None, workers: int = 1) -> Dict:
    """
    Render every clip (and its augmented copies) into the cache

    Entries already present under their content key are reused.
    """
    out = run_dir(config, out)
    cache = cache_for(out)
    class_names, rows, clips = _load_corpus(config)

    jobs: List[Tuple[CacheEntry, AudioClip]] = []
    for (source, label, fold), clip in zip(rows, clips):
        origin = len(jobs)
        variants = [("original", clip)] + augment_clip(clip, config.augmentation)
        for variant, variant_clip in variants:
            key = entry_key(variant_clip, config.representation, config.render)
            jobs.append((CacheEntry(key, source, variant, label, fold, origin), variant_clip))

    def render_job(job: Tuple[CacheEntry, AudioClip]) -> bool:
        entry, clip = job
        if cache.has(entry.key):
            return False
        spec = extract(clip, config.representation)
        cache.store(entry.key, render_with(spec, config.render))
        return True

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            computed_flags = list(pool.map(render_job, jobs))
    else:
        computed_flags = [render_job(job) for job in jobs]

    entries = [entry for entry, _ in jobs]
    meta = {
        "class_names": class_names,
        "settings": corpus_settings(config),
        "input_shape": [config.render.height, config.render.width],
        "intensity_max": config.render.intensity_max,
        "representation": config.representation.kind,
    }
    cache.write_index(entries, meta)

    computed = sum(computed_flags)
    summary = {
        "cache_dir": str(cache.root),
        "entries": len(entries),
        "clips": len(clips),
        "computed": computed,
        "reused": len(entries) - computed,
    }
    write_json(out / "prepare_summary.json", summary)
    logger.info(f"✓ Prepared {len(entries)} cache entries ({computed} computed, {len(entries) - computed} reused)")
    return summary


# ============ train ============

def cmd_train(config: ExperimentConfig, out: Optional[str | Path] = None) -> Dict:
    """Train on the prepared cache and write the checkpoint plus logs"""
    out = run_dir(config, out)
    dataset, index = load_labeled_set(config, out)

    model = init_model(
        config.model,
        dataset.n_classes,
        input_shape=tuple(index["input_shape"]),
        seed=derive_seed(config.seed, "init"),
        intensity_max=config.render.intensity_max,
    )
    result = train(model, dataset, config.training, seed=derive_seed(config.seed, "split"))

    checkpoint = save_checkpoint(
        out / CHECKPOINT_NAME,
        result.model,
        {
            "class_names": dataset.class_names,
            "corpus_key": index["corpus_key"],
            "test_indices": [int(i) for i in result.split.test],
            "fold_accuracies": result.fold_accuracies,
            "best_fold": result.best_fold + 1,
            "test_accuracy": result.test_accuracy,
            "seed": config.seed,
        },
    )
    write_csv(out / "train_log.csv", result.log, columns=["epoch", "fold", "train_loss", "val_acc"])
    write_csv(
        out / "fold_accuracies.csv",
        [{"fold": i + 1, "val_acc": acc} for i, acc in enumerate(result.fold_accuracies)],
        columns=["fold", "val_acc"],
    )
    summary = {
        "checkpoint": str(checkpoint),
        "checkpoint_sha256": _file_sha256(checkpoint),
        "fold_accuracies": result.fold_accuracies,
        "best_fold": result.best_fold + 1,
        "test_accuracy": result.test_accuracy,
        "n_test": int(result.split.test.size),
        "parameter_count": result.model.parameter_count,
    }
    write_json(out / "train_summary.json", summary)
    for fold, accuracy in enumerate(result.fold_accuracies, start=1):
        print(f"fold {fold}: val_acc {accuracy:.4f}")
    print(f"test accuracy: {result.test_accuracy:.4f}")
    return summary


# ============ attack ============

def _load_compatible(path: Path, index: Dict) -> Tuple[Classifier, Dict]:
    model, meta = load_checkpoint(path)
    if meta.get("corpus_key") != index["corpus_key"]:
        raise CheckpointError(f"{path} was trained on a different cache; re-run `train`")
    if list(model.input_shape) != list(index["input_shape"]):
        raise CheckpointError(f"{path} expects inputs {model.input_shape}, cache holds {index['input_shape']}")
    return model, meta


def _batches(indices: np.ndarray, single_batch_limit: int, batch_size: int) -> List[np.ndarray]:
    """One batch up to the limit, otherwise fixed-size batches"""
    if indices.size <= single_batch_limit:
        return [indices]
    return [indices[start : start + batch_size] for start in range(0, indices.size, batch_size)]


def attack_pool(model: Classifier, dataset: LabeledSet, test_indices: np.ndarray, max_items: Optional[int]) -> Tuple[np.ndarray, float]:
    """Correctly classified held-out originals (capped) and the clean accuracy"""
    test_indices = np.asarray(test_indices, dtype=np.int64)
    if test_indices.size == 0:
        raise DataError("held-out test share is empty; nothing to attack")
    inputs, labels = dataset.inputs[test_indices], dataset.labels[test_indices]
    predicted = np.concatenate(
        [np.atleast_1d(model.predict(inputs[s : s + 64])[0]) for s in range(0, test_indices.size, 64)]
    )
    clean_accuracy = float(np.mean(predicted == labels))
    pool = test_indices[predicted == labels]
    if max_items is not None:
        pool = pool[:max_items]
    if pool.size == 0:
        raise DataError("the model misclassifies every held-out item; nothing to attack")
    return pool, clean_accuracy


def _record(attack: str, raw_budget: float, batch: BatchResult, item_ids: np.ndarray) -> List[Dict]:
    records = []
    for position, result in batch.items:
        record = AttackRecord(
            attack=attack,
            budget=raw_budget,
            batch=batch.batch,
            item=int(item_ids[position]),
            true_label=result.true_label,
            target_label=result.target_label,
            predicted_label=result.predicted_label,
            success=result.success,
            degenerate=result.degenerate,
            reason=result.reason,
            l0=result.l0,
            l2=result.l2,
            linf=result.linf,
            gradient_calls=result.gradient_calls,
            iterations_used=result.iterations_used,
        )
        records.append(record.model_dump())
    return records


def cmd_attack(
    config: ExperimentConfig,
    checkpoint: Optional[str | Path] = None,
    out: Optional[str | Path] = None,
    workers: int = 1,
) -> RobustnessReport:
    """Run the attack suite over every budget grid and write results.jsonl and the report"""
    out = run_dir(config, out)
    dataset, index = load_labeled_set(config, out)
    model, meta = _load_compatible(Path(checkpoint) if checkpoint else out / CHECKPOINT_NAME, index)

    suite = config.attacks
    pool, clean_accuracy = attack_pool(model, dataset, np.array(meta["test_indices"]), suite.max_items)
    batches = _batches(pool, suite.single_batch_limit, suite.batch_size)
    oracle = GradientOracle(model)
    target_seed = derive_seed(config.seed, "attack-targets")
    n_pixels = int(np.prod(model.input_shape))

    summaries = []
    with JsonLinesWriter(out / "results.jsonl") as writer:
        for attack in suite.suite:
            per_budget: List[List[BatchResult]] = []
            for setting in budget_points(attack, suite.budget, n_pixels, model.intensity_max):
                outcomes = []
                for batch_index, item_ids in enumerate(batches):
                    outcome = run_attack_batch(
                        oracle,
                        dataset.inputs[item_ids],
                        dataset.labels[item_ids],
                        attack,
                        setting,
                        suite.budget,
                        seed=target_seed + batch_index,
                        workers=workers,
                        batch_index=batch_index,
                    )
                    for record in _record(attack, setting.raw, outcome, item_ids):
                        writer.write(record)
                    outcomes.append(outcome)
                per_budget.append(outcomes)
            summary = summarize_attack(attack, per_budget)
            summaries.append(summary)
            logger.info(f"✓ {attack}: fooling rate {summary.fooling_rate:.3f}, AUC {summary.auc:.3f}")

    report = RobustnessReport(
        representation=config.representation.kind,
        setting=setting_label(config),
        clean_accuracy=clean_accuracy,
        n_items=int(pool.size),
        attacks=summaries,
    )
    paths = emit_report(report, out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return report


# ============ transfer ============

def _model_ids(paths: Sequence[Path]) -> List[str]:
    ids: List[str] = []
    for path in paths:
        candidate = path.stem if path.parent.name in ("", ".") else f"{path.parent.name}/{path.stem}"
        while candidate in ids:
            candidate = f"{candidate}_{len(ids)}"
        ids.append(candidate)
    return ids


def cmd_transfer(
    config: ExperimentConfig,
    checkpoints: Sequence[str | Path],
    out: Optional[str | Path] = None,
    workers: int = 1,
) -> Dict:
    """
    Craft the configured transfer attack on every source model and score it
    on every target model; rows are sources, columns targets
    """
    if len(checkpoints) < 2:
        raise ConfigError("transfer needs at least two checkpoints")
    out = run_dir(config, out)
    dataset, index = load_labeled_set(config, out)

    paths = [Path(p) for p in checkpoints]
    loaded = [load_checkpoint(path) for path in paths]
    shapes = {tuple(model.input_shape) for model, _ in loaded}
    if len(shapes) != 1:
        raise CheckpointError(f"checkpoints disagree on input shape: {sorted(shapes)}")
    loaded = [_load_compatible(path, index) for path in paths]

    ids = _model_ids(paths)
    oracles = {model_id: GradientOracle(model) for model_id, (model, _) in zip(ids, loaded)}
    attack = config.transfer.attack
    settings_grid = budget_points(attack, config.attacks.budget, int(np.prod(index["input_shape"])), config.render.intensity_max)
    try:
        setting = settings_grid[config.transfer.budget_index]
    except IndexError as e:
        raise ConfigError(f"transfer.budget_index {config.transfer.budget_index} outside the {attack} grid") from e

    test_indices = np.array(loaded[0][1]["test_indices"])
    seed = derive_seed(config.seed, "transfer")
    results_by_source, originals_by_source = {}, {}
    for model_id, (model, _) in zip(ids, loaded):
        pool, _ = attack_pool(model, dataset, test_indices, config.attacks.max_items)
        outcome = run_attack_batch(
            oracles[model_id], dataset.inputs[pool], dataset.labels[pool], attack, setting,
            config.attacks.budget, seed=seed, workers=workers,
        )
        results_by_source[model_id] = [result for _, result in outcome.items]
        originals_by_source[model_id] = [dataset.inputs[pool[position]] for position, _ in outcome.items]

    matrix = transfer_matrix(ids, results_by_source, oracles, attack, originals_by_source, seed=seed)
    rows = [{"source": source, **dict(zip(ids, values))} for source, values in zip(ids, matrix.values)]
    write_csv(out / "transfer.csv", rows, columns=["source", *ids])
    baseline_rows = [{"source": source, **dict(zip(ids, values))} for source, values in zip(ids, matrix.baseline)]
    write_csv(out / "transfer_baseline.csv", baseline_rows, columns=["source", *ids])
    write_json(out / "transfer.json", matrix.model_dump(mode="json"))
    print(f"transfer: {out / 'transfer.csv'}")
    return matrix.model_dump(mode="json")


# ============ report ============

def _failed_items(run_path: Path) -> int:
    """Items whose attack raised, counted from the sibling results.jsonl; 0 when absent"""
    results = run_path / "results.jsonl"
    if not results.is_file():
        return 0
    records = (AttackRecord.model_validate(record) for record in read_jsonl(results))
    return sum(1 for record in records if (record.reason or "").startswith("error:"))


def cmd_report(run_directory: str | Path, out: Optional[str | Path] = None) -> List[Dict]:
    """
    Merge every report.json under a run directory into summary.csv
    (one row per setting with per-attack AUC and cost columns),
    summary_rows.csv (one row per setting and attack) and summary.json
    """
    run_directory = Path(run_directory)
    paths = sorted(run_directory.rglob("report.json")) if run_directory.is_dir() else []
    if not paths:
        raise DataError(f"no report.json found under {run_directory}")
    reports = [parse_report(path) for path in paths]

    rows = []
    for path, report in zip(paths, reports):
        row = {
            "run": str(path.parent.relative_to(run_directory)),
            "representation": report.representation,
            "setting": report.setting,
            "clean_accuracy": report.clean_accuracy,
            "n_items": report.n_items,
            "failed_items": _failed_items(path.parent),
        }
        for summary in report.attacks:
            row[f"{summary.attack}_auc"] = summary.auc
            row[f"{summary.attack}_fooling_rate"] = summary.fooling_rate
            row[f"{summary.attack}_gradient_calls"] = summary.mean_gradient_calls
        rows.append(row)

    target = Path(out) if out else run_directory
    write_csv(target / "summary.csv", rows)
    long_rows = [
        {"run": str(path.parent.relative_to(run_directory)), **row}
        for path, report in zip(paths, reports)
        for row in report_rows(report)
    ]
    write_csv(target / "summary_rows.csv", long_rows)
    write_json(target / "summary.json", [report.model_dump(mode="json") for report in reports])
    print(f"summary: {target / 'summary.csv'}")
    return rows


# ============ sweep ============

def sweep_configs(config: ExperimentConfig, out: Path) -> List[Tuple[str, ExperimentConfig]]:
    """One config per sweep value; a bare parameter name refers to the representation section"""
    if config.sweep is None:
        raise ConfigError("config has no [sweep] section")
    section, _, name = config.sweep.parameter.rpartition(".")
    section = section or "representation"

    cells = []
    for value in config.sweep.values:
        data = config.model_dump()
        if section not in data or not isinstance(data[section], dict) or name not in data[section]:
            raise ConfigError(f"sweep parameter '{config.sweep.parameter}' is not a config field")
        data[section][name] = value
        data["output_dir"] = str(out / f"{name}={value}")
        data["sweep"] = None
        try:
            cells.append((f"{name}={value}", ExperimentConfig.model_validate(data)))
        except ValueError as e:
            raise ConfigError(f"sweep value {value!r} rejected: {e}") from e
    return cells


def cmd_sweep(config: ExperimentConfig, out: Optional[str | Path] = None, workers: int = 1) -> List[Dict]:
    """prepare -> train -> attack per setting, then one merged report; failed cells are skipped"""
    out = run_dir(config, out)
    completed = 0
    for label, cell in sweep_configs(config, out):
        try:
            cmd_prepare(cell, workers=workers)
            cmd_train(cell)
            cmd_attack(cell, workers=workers)
            completed += 1
        except ToolkitError as e:
            logger.error(f"❌ Sweep cell {label} skipped: {e.detail}")
    if completed == 0:
        raise DataError("every sweep cell failed")
    return cmd_report(out)
