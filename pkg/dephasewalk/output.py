"""
File emission: CSV tables, JSON reports and the per-run manifest.

Numbers are written with 12 significant digits, LF line endings, sorted JSON
keys, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence

import numpy as np

from dephasewalk import __version__

logger = logging.getLogger("dephasewalk.output")

DIGITS = 12


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"
    return format(x, f".{DIGITS}g")


def clean(obj: Any) -> Any:
    """JSON-safe copy: floats rounded to 12 significant digits, inf as a string, nan as null."""
    if isinstance(obj, Mapping):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, complex):
        return [clean(obj.real), clean(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return 0.0 if x == 0.0 else float(format(x, f".{DIGITS}g"))
    return obj


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return path


def write_csv(path: Path, fieldnames: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(list(fieldnames))
        for row in rows:
            w.writerow([v if isinstance(v, (str, int)) and not isinstance(v, bool) else fmt(v) for v in row])
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(
    out_dir: Path,
    command: str,
    config: Dict[str, Any],
    outputs: List[Path],
    started_at: str,
    finished_at: str,
) -> Path:
    out_dir = Path(out_dir)
    checksums = {p.name: sha256_file(p) for p in sorted(outputs, key=lambda p: p.name)}
    manifest = {
        "tool": "dephasewalk",
        "version": __version__,
        "command": command,
        "config": config,
        "started_at": started_at,
        "finished_at": finished_at,
        "outputs": checksums,
    }
    path = write_json(out_dir / "manifest.json", manifest)
    logger.info("manifest written: %s (%d outputs)", path, len(checksums))
    return path


def verify_manifest(path: Path) -> Dict[str, bool]:
    """Checksum of every listed output against the file next to the manifest."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    return {name: sha256_file(path.parent / name) == digest for name, digest in data["outputs"].items()}
