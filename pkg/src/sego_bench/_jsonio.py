"""Canonical JSON serialization helpers.

History and trace files must be byte-identical across runs with identical
seeds, so every JSON value is written with sorted keys, compact separators
and '\n' line endings regardless of platform.
"""
import json


def canonical_dumps(obj) -> str:
    """Serialize obj to a canonical single-line JSON string."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_jsonl(path, rows) -> None:
    """Write an iterable of JSON-serializable rows, one per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(canonical_dumps(row))
            fh.write("\n")


def append_jsonl(path, row) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_dumps(row))
        fh.write("\n")


def read_jsonl(path) -> list:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
