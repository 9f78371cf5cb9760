"""Output files: headered CSVs with fixed 12-significant-digit numbers, JSON reports, run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["format_value", "write_csv", "read_csv", "write_json", "Manifest", "versions", "MANIFEST_NAME"]

MANIFEST_NAME = "manifest.json"


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        s = format(f, ".12g")
        return "0" if s == "-0" else s
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], manifest: str = MANIFEST_NAME) -> Path:
    """Write a CSV whose first line is ``# manifest: <name>`` followed by the header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# manifest: {manifest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> dict[str, np.ndarray | list]:
    """Column dict; numeric columns become float arrays. Comment lines are skipped."""
    with Path(path).open(newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        col = [r[j] for r in body]
        try:
            out[name] = np.array([float(x) for x in col])
        except ValueError:
            out[name] = col
    return out


def _jsonable(o):
    if isinstance(o, (np.floating, float)):
        return float(format_value(o)) if np.isfinite(o) else str(format_value(o))
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return [_jsonable(x) for x in o.tolist()]
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(x) for x in o]
    if isinstance(o, Path):
        return str(o)
    return o


def write_json(path, obj, manifest: str | None = MANIFEST_NAME) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = _jsonable(obj)
    if manifest is not None and isinstance(data, dict):
        data = {"manifest": manifest, **data}
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")
    return path


def versions() -> dict:
    import scipy
    import sklearn

    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "qptcomplexity": __version__,
    }


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class Manifest:
    subcommand: str
    config: dict
    config_hash: str
    seeds: dict
    started: float = field(default_factory=time.time)
    outputs: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def add(self, path) -> Path:
        self.outputs.append(Path(path))
        return Path(path)

    def write(self, directory) -> Path:
        directory = Path(directory)
        body = {
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "config": self.config,
            "seeds": self.seeds,
            "versions": versions(),
            "argv": sys.argv,
            "wall_time_s": round(time.time() - self.started, 3),
            "outputs": [{"file": p.name, "sha256": file_digest(p)} for p in self.outputs if p.exists()],
            "notes": self.notes,
        }
        return write_json(directory / MANIFEST_NAME, body, manifest=None)
