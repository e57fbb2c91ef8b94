"""Deterministic CSV serialization for result tables.

Layout: ``# key=value`` metadata lines, a header row, then data rows. Floats
are written with 9 significant digits, booleans as ``true``/``false``.
"""

from __future__ import annotations

import csv
import enum
import io
import os
import tempfile
from pathlib import Path
from typing import Union

from .experiments import SweepTable

PathLike = Union[str, os.PathLike]


def format_cell(value) -> str:
    if isinstance(value, bool) or hasattr(value, "dtype") and value.dtype == bool:
        return "true" if value else "false"
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, int) or hasattr(value, "dtype") and value.dtype.kind in "iu":
        return str(int(value))
    if isinstance(value, float) or hasattr(value, "dtype") and value.dtype.kind == "f":
        return format(float(value), ".9g")
    return str(value)


def parse_cell(text: str):
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def dumps(table: SweepTable) -> str:
    buf = io.StringIO()
    for key, value in table.metadata.items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def loads(text: str) -> SweepTable:
    metadata = {}
    lines = text.splitlines()
    body_start = 0
    for body_start, line in enumerate(lines):
        if not line.startswith("#"):
            break
        key, _, value = line[1:].strip().partition("=")
        metadata[key] = value
    else:
        body_start = len(lines)
    reader = csv.reader(lines[body_start:])
    header = tuple(next(reader, ()))
    rows = [tuple(parse_cell(c) for c in row) for row in reader]
    return SweepTable(header, rows, metadata)


def write_csv(table: SweepTable, path: PathLike) -> None:
    """Write ``table`` to ``path`` atomically (temp file in the same
    directory, then rename), so a failure never leaves a partial file."""
    path = Path(path)
    data = dumps(table).encode("utf-8")
    tmp = None
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path: PathLike) -> SweepTable:
    return loads(Path(path).read_text(encoding="utf-8"))
