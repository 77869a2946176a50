"""Atomic, full-precision file output helpers for the CLI."""

from __future__ import annotations

import csv
import io
import os
import tempfile

__all__ = ["fmt", "atomic_write_text", "write_csv_atomic"]


def fmt(x) -> str:
    """17-significant-digit decimal: lossless for float64 round trips."""
    return format(float(x), ".17g")


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_atomic(path: str, header, rows) -> None:
    """Atomically write pre-formatted rows with a header row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())
