"""
CSV, JSON and JSON-lines writers used for run artifacts

Outputs carry no timestamps so identical runs produce identical files.
"""
import json
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import pandas as pd

from app.core.errors import DataError


def write_csv(path: str | Path, rows: Sequence[Dict], columns: Optional[List[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows), columns=columns).to_csv(path, index=False)
    return path


def read_csv(path: str | Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"CSV not found: {path}")
    return pd.read_csv(path)


def write_json(path: str | Path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


def read_json(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"JSON file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: {e}") from e


class JsonLinesWriter:
    """Append one JSON object per line; single writer per file"""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8")

    def write(self, record: Dict) -> None:
        self._handle.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_jsonl(path: str | Path) -> Iterator[Dict]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"JSON-lines file not found: {path}")
    with path.open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{number}: {e}") from e
