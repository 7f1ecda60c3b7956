"""Result files (CSV + JSON) and plain-text config files."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .train import ResultRow

CSV_HEADER = ResultRow.FIELDS


def write_csv(rows: list[ResultRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([getattr(r, k) for k in CSV_HEADER])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_json(rows: list[ResultRow], path, **meta) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"meta": meta, "rows": [r.to_dict() for r in rows]}, indent=2))
    return path


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path) -> dict:
    """JSON object, or ``key = value`` lines whose values are parsed as JSON when possible.

    Blank lines and lines starting with ``#`` are ignored.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return json.loads(text)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, val = line.split(sep, 1)
        out[key.strip().replace("-", "_")] = _parse_value(val.strip())
    return out


def dump_config(cfg: dict, path) -> Path:
    path = Path(path)
    path.write_text("".join(f"{k} = {json.dumps(v)}\n" for k, v in cfg.items()))
    return path
