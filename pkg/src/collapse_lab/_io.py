"""Atomic file output and the fixed CSV layout."""

from __future__ import annotations

import os
import tempfile
from typing import Sequence

import numpy as np

from . import __version__


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x: float) -> str:
    return f"{float(x):.16e}"


def format_csv(columns: Sequence[str], rows, schema: str) -> str:
    """Header comment with schema and version, column names, then rows in
    scientific notation with 17 significant digits."""
    rows = np.asarray(rows, dtype=float)
    lines = [f"# {schema} collapse-lab {__version__}", ",".join(columns)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def parse_csv(text: str):
    """Inverse of :func:`format_csv`: (schema line, columns, float array)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0][2:] if lines and lines[0].startswith("# ") else ""
    body = lines[1:] if head else lines
    cols = body[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]]).reshape(-1, len(cols))
    return head, cols, data
