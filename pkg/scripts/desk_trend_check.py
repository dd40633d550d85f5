"""
Desk-Scale Trend Check
Runs prepare -> train -> attack on the 4-class synthetic corpus and checks
that the victim is accurate and every attack fools it at high budget-AUC
"""
import argparse
import sys
import time
sys.path.append('.')

from app.core.logging import setup_logging
from app.schemas.experiment import load_experiment_config
from app.services import pipeline

ACCURACY_FLOOR = 0.9
AUC_FLOOR_DEFAULT_SEED = 0.9
AUC_FLOOR_ANY_SEED = 0.85


def run_check(config_path: str, seed: int | None, out: str | None, workers: int) -> bool:
    """Return True when every trend holds"""
    print("=" * 60)
    print("  Desk-scale trend check")
    print("=" * 60)

    config = load_experiment_config(config_path).with_overrides(seed=seed, output_dir=out)
    auc_floor = AUC_FLOOR_DEFAULT_SEED if config.seed == 0 else AUC_FLOOR_ANY_SEED

    started = time.perf_counter()
    pipeline.cmd_prepare(config, workers=workers)
    summary = pipeline.cmd_train(config)
    train_seconds = time.perf_counter() - started
    report = pipeline.cmd_attack(config, workers=workers)

    passed = True
    accuracy = summary["test_accuracy"]
    if accuracy >= ACCURACY_FLOOR:
        print(f"✓ Test accuracy {accuracy:.3f} (prepare + train took {train_seconds:.0f}s)")
    else:
        print(f"✗ Test accuracy {accuracy:.3f} below {ACCURACY_FLOOR}")
        passed = False

    for attack in report.attacks:
        if attack.auc >= auc_floor:
            print(f"✓ {attack.attack}: AUC {attack.auc:.3f}, mean calls {attack.mean_gradient_calls:.1f}")
        else:
            print(f"✗ {attack.attack}: AUC {attack.auc:.3f} below {auc_floor}")
            passed = False

    print("=" * 60)
    print("  PASSED" if passed else "  FAILED")
    print("=" * 60)
    return passed


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/desk_mfcc.toml")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()
    setup_logging()
    sys.exit(0 if run_check(args.config, args.seed, args.out, args.workers) else 1)
