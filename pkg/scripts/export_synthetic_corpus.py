"""
Synthetic Corpus Export Script
Writes the seeded synthetic corpus as WAV files plus a manifest.csv, so the
manifest code path can be exercised on real files
"""
import argparse
import sys
sys.path.append('.')

from pathlib import Path

from app.core.config import derive_seed
from app.schemas.audio import SynthRecipe
from app.services.audio_io import synth_dataset, write_wav
from app.utils.tables import write_csv


def export_corpus(out_dir: str, seed: int, n_classes: int, clips_per_class: int, sample_rate: int):
    """Export the corpus and return the manifest path"""
    print("=" * 60)
    print("  Synthetic corpus export")
    print("=" * 60)

    recipe = SynthRecipe(n_classes=n_classes, clips_per_class=clips_per_class, sample_rate=sample_rate)
    manifest, clips = synth_dataset(recipe, seed=derive_seed(seed, "data"))
    root = Path(out_dir)

    rows = []
    for entry, clip in zip(manifest.entries, clips):
        _, label, index = entry.source.split(":")
        file_name = f"{manifest.class_names[int(label)]}/{int(index):04d}.wav"
        write_wav(root / file_name, clip)
        rows.append({"file": file_name, "label": manifest.class_names[entry.label], "fold": entry.fold})

    manifest_path = write_csv(root / "manifest.csv", rows, columns=["file", "label", "fold"])
    print(f"✓ {len(rows)} clips written under {root}")
    print(f"✓ Manifest: {manifest_path}")
    return manifest_path


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/synthetic")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--clips-per-class", type=int, default=50)
    parser.add_argument("--sample-rate", type=int, default=8000)
    args = parser.parse_args()
    export_corpus(args.out, args.seed, args.classes, args.clips_per_class, args.sample_rate)
